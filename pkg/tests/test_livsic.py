import math

import numpy as np
import pytest

from cocycle_lab import testbeds
from cocycle_lab.acceptance import default_epsilon
from cocycle_lab.base_dynamics import FullShift, cat_map
from cocycle_lab.cocycle_core import ConstantCocycle
from cocycle_lab.errors import NoNeighbor, ZeroExponentCheckFailed
from cocycle_lab.livsic import (build_transfer, choose_anchor, extend_transfer, ground_truth, loglog_fit,
                                near_return_scan, obstruction_audit, segment_products, uniqueness_residual)

T = cat_map()


@pytest.fixture(scope="module")
def cob_table():
    A = testbeds.cat_coboundary(T)
    x0 = choose_anchor(T, 11, 2 * 10 ** 4)
    return build_transfer(A, T, x0, 2 * 10 ** 4, default_epsilon(T, A.alpha), 20)


def test_obstruction_examples():
    rep = obstruction_audit(testbeds.diagonal_control(T), T, 1)
    assert rep.count == 1 and rep.max_defect == pytest.approx(1.0, rel=1e-14)
    rep = obstruction_audit(testbeds.rotation_control(0.3, T), T, 1)
    assert rep.max_defect == pytest.approx(2 * math.sin(0.15), rel=1e-12)
    assert not rep.passed


def test_obstructions_vanish_for_coboundary():
    rep = obstruction_audit(testbeds.cat_coboundary(T), T, 4)
    assert rep.counts == {1: 1, 2: 5, 3: 16, 4: 45}
    assert rep.passed and rep.max_defect <= 1e-10


def test_obstructions_on_shift():
    S = FullShift()
    rep = obstruction_audit(testbeds.shift_coboundary(S), S, 4)
    assert rep.passed and rep.count == sum(2 ** n for n in range(1, 5))
    assert not obstruction_audit(testbeds.random_locally_constant(0, S), S, 2).passed


def test_anchor_equidistributes():
    x0 = choose_anchor(T, 3, 10 ** 4)
    orb = T.orbit(x0, 0, 10 ** 4)
    counts, _, _ = np.histogram2d(orb[:, 0], orb[:, 1], bins=10, range=[[0, 1], [0, 1]])
    assert np.all(np.abs(counts - 100) <= 40)


def test_identity_table():
    A = ConstantCocycle(np.eye(2), T)
    tab = build_transfer(A, T, choose_anchor(T, 0, 500), 500, 0.05, 20)
    np.testing.assert_allclose(tab.matrices(), np.broadcast_to(np.eye(2), (500, 2, 2)), atol=1e-15)


def test_rotation_table_entries():
    th = 0.3
    R = testbeds.rotation_control(th, T)
    tab = build_transfer(R, T, choose_anchor(T, 0, 200), 200, 0.05, 20)
    for n in (0, 1, 17, 199):
        c, s = math.cos(n * th), math.sin(n * th)
        np.testing.assert_allclose(tab.matrix(n), [[c, -s], [s, c]], atol=1e-12)


def test_refuses_nonzero_exponents():
    with pytest.raises(ZeroExponentCheckFailed):
        build_transfer(testbeds.diagonal_control(T), T, choose_anchor(T, 0, 100), 100, 0.05, 20)
    tab = build_transfer(testbeds.diagonal_control(T), T, choose_anchor(T, 0, 100), 100, 0.05, 20, override=True)
    assert len(tab) == 100


def test_table_recursion_and_G(cob_table):
    assert cob_table.recursion_residual() <= 1e-12
    assert cob_table.G_fraction >= 0.9


def test_segment_products_match_direct():
    rng = np.random.default_rng(1)
    mats = np.eye(2) + 0.2 * rng.standard_normal((64, 2, 2))
    starts = np.array([0, 5, 30, 63])
    lengths = np.array([10, 1, 33, 1])
    Q, R, S = segment_products(mats, starts, lengths)
    out = np.exp(S)[:, None, None] * (Q @ R)
    for k, (s, n) in enumerate(zip(starts, lengths)):
        P = np.eye(2)
        for j in range(s, s + n):
            P = mats[j] @ P
        np.testing.assert_allclose(out[k], P, rtol=1e-10, atol=1e-12)


def test_extension_exact_point(cob_table):
    e = extend_transfer(cob_table, cob_table.points[123])
    assert e.distance == 0 and e.steps == 0
    np.testing.assert_allclose(e.matrix, cob_table.matrix(123), rtol=1e-14)


def test_extension_pushes_forward(cob_table):
    # the image of the last table point is one step past the table
    q = T.iterate(cob_table.points[-1], 1)
    e = extend_transfer(cob_table, q)
    assert e.steps == 1 and e.distance == 0
    A = cob_table.cocycle
    np.testing.assert_allclose(e.matrix, A.evaluate(cob_table.points[-1]) @ cob_table.matrix(len(cob_table) - 1),
                               rtol=1e-12)


def test_extension_needs_a_neighbor():
    A = testbeds.cat_coboundary(T)
    tab = build_transfer(A, T, choose_anchor(T, 2, 50), 50, 0.05, 20)
    with pytest.raises(NoNeighbor):
        extend_transfer(tab, np.array([0.123456789, 0.987654321]), depth=0)


def test_uniqueness_up_to_right_factor(cob_table):
    P = ground_truth(cob_table.cocycle)
    r0 = uniqueness_residual(cob_table, P)
    assert r0 <= 1e-6
    C = np.array([[1.3, 0.4], [-0.2, 0.9]])
    assert uniqueness_residual(cob_table, P, right_factor=C) <= 1e-6 * np.linalg.norm(C, 2) + r0


def test_near_return_defects_scale_for_coboundary(cob_table):
    rep = near_return_scan(cob_table.cocycle, T, cob_table, beta=1e-2, h_min=1e-4, seed=0)
    assert len(rep.stats) > 100
    assert rep.periodic_growth_pass in (True, None)
    h = np.array([s.h for s in rep.stats])
    d = np.array([s.defect for s in rep.stats])
    # defects are bounded by a constant multiple of the return distance
    assert np.max(d / h) <= 10 * np.median(d / h) + 1e-9


def test_near_return_negative_control():
    R = testbeds.rotation_control(0.3, T)
    x0 = choose_anchor(T, 11, 2 * 10 ** 4)
    tab = build_transfer(R, T, x0, 2 * 10 ** 4, 0.05, 20)
    rep = near_return_scan(R, T, tab, beta=1e-2, h_min=1e-4, seed=0)
    d = np.array([s.defect for s in rep.stats])
    h = np.array([s.h for s in rep.stats])
    # defects stay away from zero as h shrinks
    assert np.median(d[h < 1e-3]) > 0.01


def test_loglog_fit_degenerate_input():
    slope, _ = loglog_fit(np.array([1e-3, 1e-3, 1e-3]), np.array([1.0, 2.0, 3.0]))
    assert math.isnan(slope)
    slope, _ = loglog_fit(np.array([1e-3, 1e-2, 1e-1]), np.array([2e-3, 2e-2, 2e-1]))
    assert slope == pytest.approx(1.0, abs=1e-12)
