import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocycle_lab.base_dynamics import FullShift, TorusAutomorphism, cat_map, enumerate_periodic, iterate
from cocycle_lab.errors import EnumerationBudgetExceeded, LeafRadiusExceeded, NotRecurrent
from cocycle_lab.symbolic import SymbolSequence

T = cat_map()
S = FullShift()


def seq(coords, alphabet=2):
    """Finite support sequence: ``coords`` maps position -> symbol, zeros elsewhere."""
    lo, hi = min(coords), max(coords) + 1
    win = [coords.get(j, 0) for j in range(lo, hi)]
    return SymbolSequence.from_window(alphabet, lo, win)


def test_cat_iterate_examples():
    assert np.array_equal(iterate(T, np.zeros(2), 5), np.zeros(2))
    np.testing.assert_allclose(iterate(T, np.array([0.1, 0.2]), 1), [0.4, 0.3], atol=1e-15)


def test_shift_iterate_moves_coordinates():
    x = seq({0: 1})
    y = S.iterate(x, 1)
    assert y.symbol(-1) == 1 and y.symbol(0) == 0


def test_distance_examples():
    assert T.distance(np.zeros(2), np.zeros(2)) == 0
    assert T.distance(np.array([0.9, 0.0]), np.array([0.1, 0.0])) == pytest.approx(0.2)
    a, b = seq({-3: 1, 5: 1}), seq({5: 1})
    assert S.distance(a, b) == 0.125


@pytest.mark.parametrize("n,count", [(1, 1), (2, 5), (3, 16), (4, 45)])
def test_cat_periodic_counts(n, count):
    orbits = enumerate_periodic(T, n)
    assert len(orbits) == count == T.periodic_count(n)
    for o in orbits:
        assert T.distance(T.iterate(o.base_point, n), o.base_point) < 1e-12


def test_cat_fixed_point_is_origin():
    (o,) = enumerate_periodic(T, 1)
    assert np.array_equal(o.base_point, np.zeros(2))


def test_shift_periodic_count_and_budget():
    assert len(enumerate_periodic(S, 3)) == 8
    with pytest.raises(EnumerationBudgetExceeded):
        enumerate_periodic(FullShift(max_period=4), 5)


def test_torus_rejects_non_unimodular():
    with pytest.raises(ValueError):
        TorusAutomorphism([[2, 0], [0, 1]])


def test_shadow_periodic_point_shadows_itself():
    o = enumerate_periodic(T, 3)[2]
    r = T.shadow(o.base_point, 3, 1e-3)
    assert max(r.per_step_distances) < 1e-12


def test_shadow_cat_near_return():
    y = np.array([0.1003, 0.2001])
    x = T.orbit(y, 0, 5000)
    # pick the closest period-2 return along a long orbit
    d = T.distance(x[:-2], x[2:])
    i = int(np.argmin(d))
    r = T.shadow(x[i], 2, 2 * T.shadow_constant * d[i] * 1.01)
    assert r.bound_holds()
    p = r.periodic_point.base_point
    assert T.distance(T.iterate(p, 2), p) < 1e-12


def test_shadow_rejects_far_return():
    y = np.array([0.1003, 0.2001])
    with pytest.raises(NotRecurrent):
        T.shadow(y, 1, 1e-6)


def test_shadow_shift_word_example():
    w = (0, 1, 1)
    # w repeated on -4..6, then symbols that break the pattern
    coords = {j: w[j % 3] for j in range(-4, 7)}
    coords.update({-5: 1, 7: 1})
    y = seq(coords)
    ret = S.distance(S.iterate(y, 3), y)
    assert 0 < ret < 2 ** -4
    r = S.shadow(y, 3, 2 * ret * 1.01)
    p = r.periodic_point.base_point
    assert [p.symbol(j) for j in range(-3, 6)] == list(w) * 3
    i = np.arange(4)
    assert np.all(np.asarray(r.per_step_distances) <= 2.0 ** (-np.minimum(i, 3 - i) - 1))


def test_local_leaves_torus():
    x = np.zeros(2)
    assert np.array_equal(T.local_stable_point(x, 0.0), x)
    z = T.local_stable_point(x, 0.01)
    vs = T.stable_basis[:, 0]
    np.testing.assert_allclose(T.distance(z, np.mod(0.01 * vs, 1.0)), 0, atol=1e-15)
    # forward contraction at rate 1/golden
    d = [T.distance(T.iterate(x, n), T.iterate(z, n)) for n in range(6)]
    np.testing.assert_allclose(np.array(d[1:]) / np.array(d[:-1]), 2 / (3 + math.sqrt(5)), rtol=1e-6)
    with pytest.raises(LeafRadiusExceeded):
        T.local_stable_point(x, 1.0)


def test_local_leaves_shift():
    x = S.sample(1, 1)[0]
    y = S.local_stable_point(x, 2)
    assert all(y.symbol(j) == x.symbol(j) for j in range(0, 50))
    assert y.symbol(-2) != x.symbol(-2)


def test_bracket_examples():
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(T.bracket(x, x), x, atol=1e-15)
    w = np.mod(0.01 * T.unstable_basis[:, 0], 1.0)
    assert T.distance(T.bracket(np.zeros(2), w), np.zeros(2)) < 1e-15
    z = seq({-3: 1, -2: 1, -1: 1})
    w = seq({0: 1, 1: 1, 2: 1})
    b = S.bracket(z, w)
    assert all(b.symbol(j) == 0 for j in range(-10, 10))


def test_bracket_lies_on_both_leaves():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.random(2)
        w = np.mod(z + rng.uniform(-0.01, 0.01, 2), 1.0)
        b = T.bracket(z, w)
        assert T.on_leaf(z, b, "stable") and T.on_leaf(w, b, "unstable")


def test_sample_reproducible_and_uniform():
    a, b = T.sample(3, 1), T.sample(3, 1)
    assert np.array_equal(a, b)
    pts = T.sample(0, 10 ** 5)
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 0.01)
    syms = [p.symbol(0) for p in S.sample(0, 10 ** 4)]
    assert abs(np.mean(np.array(syms) == 0) - 0.5) < 0.02


def test_float_orbit_matches_iterate():
    x = T.sample(9, 1)[0]
    orb = T.orbit(x, -20, 20)
    for j in (-20, -7, 0, 5, 19):
        assert np.array_equal(orb[j + 20], T.iterate(x, j))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 30 - 1), st.integers(0, 2 ** 30 - 1), st.integers(-30, 30))
def test_torus_iterate_inverts(a, b, n):
    x = np.array([a, b], dtype=float) / 2 ** 30
    assert np.array_equal(T.iterate(T.iterate(x, n), -n), x)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.lists(st.integers(0, 1), min_size=1, max_size=20))
def test_shift_metric_symmetric(u, v):
    a = SymbolSequence.from_window(2, -5, u)
    b = SymbolSequence.from_window(2, -5, v)
    assert S.distance(a, b) == S.distance(b, a)
    assert (S.distance(a, b) == 0) == (a == b)
