import math

import numpy as np
import pytest

from cocycle_lab import testbeds
from cocycle_lab.base_dynamics import cat_map
from cocycle_lab.cocycle_core import ConstantCocycle
from cocycle_lab.errors import TailNotCertified
from cocycle_lab.lyapunov_norm import (c_epsilon, c_epsilon_along_orbit, lyap_gram, lyap_norm_operator,
                                       lyap_norm_vector, regular_block_membership)

T = cat_map()
X = T.sample(5, 1)[0]


def coth(e):
    return 1 / math.tanh(e)


def test_diagonal_closed_form():
    ctx = lyap_gram(testbeds.diagonal_control(T), T, np.zeros(2), 0.1)
    assert lyap_norm_vector(ctx, [1.0, 0.0]) == pytest.approx(math.sqrt(2 * coth(0.1)), rel=1e-12)
    assert lyap_norm_vector(ctx, [0.0, 0.0]) == 0


def test_orthogonal_cocycle_closed_form():
    ctx = lyap_gram(testbeds.rotation_control(0.7, T), T, X, 0.2)
    np.testing.assert_allclose(ctx.gram, 2 * coth(0.2) * np.eye(2), rtol=1e-10, atol=1e-12)
    assert c_epsilon(ctx) == pytest.approx(math.sqrt(2 * coth(0.2)), rel=1e-10)


def test_large_epsilon_limit():
    ctx = lyap_gram(testbeds.rotation_control(0.7, T), T, X, 5.0)
    assert c_epsilon(ctx) == pytest.approx(math.sqrt(2), abs=1e-3)


def test_norm_dominates_euclidean():
    ctx = lyap_gram(testbeds.cat_coboundary(T), T, X, 0.05)
    U = np.random.default_rng(0).standard_normal((200, 2))
    for u in U:
        assert lyap_norm_vector(ctx, u) >= np.linalg.norm(u)
    assert np.all(np.linalg.eigvalsh(ctx.gram) > 0)


def test_operator_norm_examples():
    ctx = lyap_gram(testbeds.cat_coboundary(T), T, X, 0.05)
    assert lyap_norm_operator(ctx, ctx, np.eye(2)) == pytest.approx(1.0, rel=1e-12)
    assert lyap_norm_operator(ctx, ctx, 2 * np.eye(2)) == pytest.approx(2.0, rel=1e-12)
    D = testbeds.diagonal_control(T)
    cx = lyap_gram(D, T, np.zeros(2), 0.1)
    assert lyap_norm_operator(cx, cx, D.matrix) <= math.exp(math.log(2) + 0.1) * (1 + 1e-12)


def test_membership_examples():
    R = testbeds.rotation_control(0.7, T)
    m = regular_block_membership(R, T, X, 0.1, 10)
    assert m.member and m.c_epsilon == pytest.approx(math.sqrt(2 * coth(0.1)), rel=1e-10)
    assert not regular_block_membership(R, T, X, 0.1, 2).member
    I = ConstantCocycle(np.eye(2), T)
    assert regular_block_membership(I, T, X, 0.1, 1e6).member


def test_tail_certificate_refuses_short_truncation():
    with pytest.raises(TailNotCertified):
        lyap_gram(testbeds.cat_coboundary(T), T, X, 0.01, truncation=20)


def test_orbit_values_match_pointwise():
    A = testbeds.cat_coboundary(T)
    oc = c_epsilon_along_orbit(A, T, X, 0, 30, 0.05)
    for j in (0, 11, 29):
        ctx = lyap_gram(A, T, T.iterate(X, j), 0.05)
        assert oc.values[j] == pytest.approx(c_epsilon(ctx), rel=1e-8)
    assert oc.certified.all()


def test_c_epsilon_slowly_varying_constant_hyperbolic():
    eps = 0.05
    oc = c_epsilon_along_orbit(testbeds.cat_derivative(T), T, X, 0, 21, eps)
    n = np.arange(21)
    c0 = oc.values[0]
    assert np.all(oc.values <= c0 * np.exp(eps * n) * (1 + 1e-6))
    assert np.all(oc.values >= c0 * np.exp(-eps * n) * (1 - 1e-6))


def test_c_epsilon_tempered_with_product_norms():
    # for a general cocycle the Euclidean side contributes |A^n| and |A^n^-1|
    A = testbeds.cat_coboundary(T)
    eps = 0.05
    oc = c_epsilon_along_orbit(A, T, X, 0, 21, eps)
    mats = A.along_orbit(T, X, 0, 20)
    P = np.eye(2)
    for k in range(1, 21):
        P = mats[k - 1] @ P
        up = oc.values[0] * math.exp(eps * k) * np.linalg.norm(np.linalg.inv(P), 2)
        lo = oc.values[0] * math.exp(-eps * k) / np.linalg.norm(P, 2)
        assert lo * (1 - 1e-6) <= oc.values[k] <= up * (1 + 1e-6)


def test_one_step_growth_for_hyperbolic_blocks():
    A = testbeds.cat_derivative(T)
    eps = 0.05
    oc = c_epsilon_along_orbit(A, T, X, 0, 3, eps)
    lam = math.log((3 + math.sqrt(5)) / 2)
    M = A.matrix
    for E, sign in zip(oc.blocks, (1, -1)):
        u = E[0][:, 0]
        r = math.sqrt((M @ u) @ oc.grams[1] @ (M @ u)) / math.sqrt(u @ oc.grams[0] @ u)
        assert math.exp(sign * lam - eps) * (1 - 1e-9) <= r <= math.exp(sign * lam + eps) * (1 + 1e-9)
