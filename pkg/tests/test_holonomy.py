import numpy as np
import pytest

from cocycle_lab import testbeds
from cocycle_lab.acceptance import default_epsilon
from cocycle_lab.base_dynamics import FullShift, cat_map
from cocycle_lab.cocycle_core import ConstantCocycle
from cocycle_lab.errors import NotOnLeaf
from cocycle_lab.holonomy import (default_theta, domination_check, domination_mask, holder_estimate,
                                  holonomy_chain, stable_holonomy, table_chain, unstable_holonomy)
from cocycle_lab.livsic import build_transfer, choose_anchor

T = cat_map()
S = FullShift()


def test_default_theta_below_half_rate():
    th = default_theta(T)
    assert 0 < 2 * th < T.leaf_rate


def test_trivial_pair_is_identity():
    y = T.sample(0, 1)[0]
    H = stable_holonomy(testbeds.smooth_dominated(T), T, y, y)
    assert np.array_equal(H.matrix, np.eye(2)) and H.n_converged == 0


def test_not_on_leaf():
    y = np.array([0.2, 0.3])
    with pytest.raises(NotOnLeaf):
        stable_holonomy(testbeds.smooth_dominated(T), T, y, np.array([0.21, 0.3]))


@pytest.mark.parametrize("m", [1, 2])
def test_locally_constant_is_exact_at_depth(m):
    A = testbeds.random_locally_constant(m, S, seed=m)
    for y in S.sample(5, 4):
        z = S.local_stable_point(y, 1)
        H = stable_holonomy(A, S, y, z)
        Py, Pz = np.eye(2), np.eye(2)
        for a, b in zip(A.along_orbit(S, y, 0, m), A.along_orbit(S, z, 0, m)):
            Py, Pz = a @ Py, b @ Pz
        np.testing.assert_allclose(H.matrix, np.linalg.solve(Pz, Py), atol=1e-13)
        assert H.n_converged == m


def test_coboundary_holonomy_matches_transfer():
    A = testbeds.cat_coboundary(T)
    P = A.transfer
    rng = np.random.default_rng(2)
    for y in T.sample(4, 10):
        for direction, leaf, hol in (("stable", T.local_stable_point, stable_holonomy),
                                     ("unstable", T.local_unstable_point, unstable_holonomy)):
            z = leaf(y, rng.uniform(-0.05, 0.05))
            H = hol(A, T, y, z)
            expect = P(z) @ np.linalg.inv(P(y))
            assert np.max(np.abs(H.matrix - expect)) <= 1e-8


def test_domination_examples():
    x = T.sample(1, 1)[0]
    assert domination_check(ConstantCocycle(np.eye(2), T), T, x).passed
    assert domination_check(testbeds.rotation_control(0.3, T), T, x).passed
    rep = domination_check(testbeds.diagonal_control(T), T, x)
    assert not rep.passed and rep.first_failure == 1


def test_domination_mask_agrees_with_pointwise():
    A = testbeds.cat_coboundary(T)
    tab = build_transfer(A, T, choose_anchor(T, 1, 300), 300, default_epsilon(T, A.alpha), 20)
    mask = domination_mask(A, T, tab)
    for i in (0, 77, 299):
        assert mask[i] == domination_check(A, T, tab.points[i]).passed


def test_chain_reconstructs_coboundary_transfer():
    A = testbeds.cat_coboundary(T)
    P = A.transfer
    x = np.array([0.31, 0.62])
    y = np.mod(x + np.array([0.004, -0.003]), 1.0)
    ch = holonomy_chain(A, T, x, y, P(x), P(y))
    assert ch.error <= 1e-8
    assert ch.length_ok


@pytest.fixture(scope="module")
def cob_table():
    A = testbeds.cat_coboundary(T)
    return build_transfer(A, T, choose_anchor(T, 7, 5 * 10 ** 4), 5 * 10 ** 4, default_epsilon(T, A.alpha), 20)


def test_table_chain_matches_table(cob_table):
    G = np.nonzero(cob_table.in_G)[0]
    pts = cob_table.points[G]
    d = T.distance(pts[:, None, :][:200], pts[None, :, :][:, :2000])
    np.fill_diagonal(d[:, :200], np.inf)
    a, b = np.unravel_index(np.argmin(d), d.shape)
    ch = table_chain(cob_table.cocycle, T, cob_table, int(G[a]), int(G[b]))
    assert ch.error <= 1e-6 * np.linalg.norm(ch.P_y, 2)


def test_holder_exponent_on_torus(cob_table):
    he = holder_estimate(cob_table, seed=0)
    assert not he.degenerate and he.passed
    assert 0.85 <= he.exponent <= 1.15


def test_holder_degenerate_on_shift():
    A = testbeds.shift_coboundary(S)
    x0 = choose_anchor(S, 0, 10 ** 4)
    tab = build_transfer(A, S, x0, 5000, 0.05, 20)
    he = holder_estimate(tab, seed=0)
    assert he.degenerate and np.isnan(he.exponent) and he.passed
