"""The acceptance suite: eight quantitative checks with fixed tolerances.

Each check returns a :class:`CheckResult`.  The suite is used both by the
test-suite and by ``cocycle-lab verify``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import testbeds
from .base_dynamics import FullShift, cat_map
from .cocycle_core import lyapunov_spectrum
from .errors import NotRecurrent
from .holonomy import (domination_mask, holder_estimate, stable_holonomy, table_chain,
                       unstable_holonomy)
from .livsic import build_transfer, choose_anchor, near_return_scan, obstruction_audit, uniqueness_residual
from .lyapunov_norm import c_epsilon_along_orbit, lyap_gram, lyap_norm_vector

GOLDEN = (3 + math.sqrt(5)) / 2
LOG_GOLDEN = math.log(GOLDEN)


@dataclass
class CheckResult:
    name: str
    status: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self):
        return self.status == "pass"

    def line(self):
        return f"[{self.status.upper():7s}] {self.name}"

    def as_dict(self):
        return {"name": self.name, "status": self.status, "detail": _plain(self.detail)}


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _result(name, ok, detail, t0):
    return CheckResult(name, "pass" if ok else "fail", detail, time.perf_counter() - t0)


def default_epsilon(system, alpha):
    return 0.05 * alpha * system.eta


# ---------------------------------------------------------------------------

def check_coboundary_round_trip(seed=7, n_points=10 ** 4):
    t0 = time.perf_counter()
    T = cat_map()
    A = testbeds.cat_coboundary(T)
    x0 = choose_anchor(T, seed)
    tab = build_transfer(A, T, x0, n_points, default_epsilon(T, A.alpha), 20)
    res = uniqueness_residual(tab, A.transfer)
    elapsed = time.perf_counter() - t0
    ok = res <= 1e-6 and elapsed <= 60
    return _result("1 coboundary round-trip", ok,
                   {"entries": n_points, "uniqueness_residual": res, "time_limit_s": 60,
                    "within_time_limit": elapsed <= 60}, t0)


def check_obstruction_soundness():
    t0 = time.perf_counter()
    T = cat_map()
    rep = obstruction_audit(testbeds.cat_coboundary(T), T, 10)
    counts_ok = all(rep.counts[n] == T.periodic_count(n) for n in range(1, 11))
    S = FullShift()
    rep_s = obstruction_audit(testbeds.shift_coboundary(S), S, 8)
    counts_s = all(rep_s.counts[n] == 2 ** n for n in range(1, 9))
    neg = obstruction_audit(testbeds.diagonal_control(T), T, 1)
    neg_defect = neg.entries[0].defect
    ok = (rep.max_defect <= 1e-8 and counts_ok and rep_s.max_defect <= 1e-8 and counts_s
          and abs(neg_defect - 1) <= 1e-12)
    return _result("2 obstruction soundness", ok, {
        "cat_max_defect": rep.max_defect, "cat_orbits": rep.count, "cat_counts_match": counts_ok,
        "shift_max_defect": rep_s.max_defect, "shift_orbits": rep_s.count, "shift_counts_match": counts_s,
        "diag_fixed_point_defect": neg_defect}, t0)


def check_zero_exponents(n_iters=10 ** 5, samples=2):
    t0 = time.perf_counter()
    T = cat_map()
    S = FullShift()
    worst = 0.0
    for system, A in ((T, testbeds.cat_coboundary(T)), (S, testbeds.shift_coboundary(S))):
        for x in system.sample(3, samples, n_iters):
            sp = lyapunov_spectrum(A, system, x, n_iters)
            worst = max(worst, abs(sp.raw_exponents[0]), abs(sp.raw_exponents[-1]))
    sp = lyapunov_spectrum(testbeds.cat_derivative(T), T, T.sample(5, 1)[0], n_iters)
    derr = max(abs(sp.exponents[0] - LOG_GOLDEN), abs(sp.exponents[-1] + LOG_GOLDEN))
    ok = worst <= 1e-3 and derr <= 1e-3 and len(sp.exponents) == 2
    return _result("3 zero-exponent consequence", ok, {
        "coboundary_max_abs_exponent": worst, "derivative_exponents": sp.exponents,
        "derivative_error": derr}, t0)


def check_near_return_scaling(seed=7, n_points=10 ** 5):
    t0 = time.perf_counter()
    T = cat_map()
    A = testbeds.cat_coboundary(T)
    x0 = choose_anchor(T, seed)
    eps = default_epsilon(T, A.alpha)
    tab = build_transfer(A, T, x0, n_points, eps, 20)
    nr = near_return_scan(A, T, tab, beta=1e-2, h_min=1e-4, seed=seed)
    R = testbeds.rotation_control(0.3, T)
    tab_r = build_transfer(R, T, x0, n_points, eps, 20)
    nr_r = near_return_scan(R, T, tab_r, beta=1e-2, h_min=1e-4, seed=seed)
    D = testbeds.diagonal_control(T)
    tab_d = build_transfer(D, T, x0, 2 * 10 ** 4, eps, 20, override=True)
    nr_d = near_return_scan(D, T, tab_d, beta=5e-2, h_min=1e-3, max_return_time=50, seed=seed)
    spread = nr.envelope_spread
    ok = (0.85 <= nr.slope <= 1.15 and spread <= 10 and nr_r.slope <= 0.2 and nr_d.slope <= 0.2
          and set(nr.decade_constants) >= {-4, -3})
    return _result("4 near-return defect scaling", ok, {
        "pairs": len(nr.stats), "slope": nr.slope, "decade_constants": nr.decade_constants,
        "envelope_spread": spread, "rotation_control_slope": nr_r.slope,
        "diagonal_control_slope": nr_d.slope, "periodic_growth_pass": nr.periodic_growth_pass,
        "periodic_growth_L": nr.L_fit}, t0)


def _cat_near_returns(T, seed, length=20000, max_n=30, per_n=8):
    x = T.sample(seed, 1)[0]
    orb = T.orbit(x, 0, length)
    out = []
    for n in range(1, max_n + 1):
        d = T.distance(orb[:-n], orb[n:])
        idx = np.argsort(d)[:per_n]
        out.extend((orb[i], n, float(d[i])) for i in idx)
    return out


def check_closing_lemma(seed=11):
    t0 = time.perf_counter()
    T = cat_map()
    results = []
    for y, n, ret in _cat_near_returns(T, seed):
        h = 2.0 * T.shadow_constant * ret * 1.01 + 1e-15
        try:
            results.append(T.shadow(y, n, h))
        except NotRecurrent:
            continue
    cat_ok = all(r.bound_holds() for r in results)
    rates = [r.fitted_rate() for r in results]
    eta_fit = min(rates)
    S = FullShift()
    rng = np.random.default_rng(seed)
    shift_ok = True
    count = 0
    for y in S.sample(seed, 200):
        n = int(rng.integers(1, 12))
        J = int(rng.integers(1, 10))
        # force f^n y to agree with y on |j| <= J
        for j in range(-J, J + 1):
            y = y.with_symbol(n + j, y.symbol(j))
        ret = S.distance(S.iterate(y, n), y)
        r = S.shadow(y, n, 2.0 * ret * 1.01)
        m = np.minimum(np.arange(n + 1), n - np.arange(n + 1))
        shift_ok &= bool(np.all(np.asarray(r.per_step_distances) <= r.h * 2.0 ** (-m)))
        count += 1
    ok = cat_ok and eta_fit >= 0.9 * LOG_GOLDEN and shift_ok and len(results) >= 100
    return _result("5 closing lemma", ok, {
        "cat_shadows": len(results), "cat_bounds_hold": cat_ok, "fitted_eta": eta_fit,
        "required_eta": 0.9 * LOG_GOLDEN, "shift_shadows": count, "shift_bounds_hold": shift_ok}, t0)


def _growth_violations(A, system, x, eps, count, rng, nmax=15):
    """Sample ``(m, n, u)`` and test the one-step-per-iterate growth cone of the Lyapunov norm."""
    span = 400
    sp = lyapunov_spectrum(A, system, x, 10 ** 4)
    oc = c_epsilon_along_orbit(A, system, x, 0, span, eps, spectrum=sp)
    mats = A.along_orbit(system, x, 0, span)
    worst = 0.0
    for _ in range(count):
        m = int(rng.integers(nmax, span - nmax))
        n = int(rng.integers(-nmax, nmax + 1))
        i = int(rng.integers(len(sp.exponents)))
        E = oc.blocks[i][m]
        u = E @ rng.standard_normal(E.shape[1])
        v = u.copy()
        if n >= 0:
            for j in range(m, m + n):
                v = mats[j] @ v
        else:
            for j in range(m - 1, m + n - 1, -1):
                v = np.linalg.solve(mats[j], v)
        nu = math.sqrt(u @ oc.grams[m] @ u)
        nv = math.sqrt(v @ oc.grams[m + n] @ v)
        lam = sp.exponents[i]
        lo = math.exp(lam * n - eps * abs(n))
        hi = math.exp(lam * n + eps * abs(n))
        r = nv / nu
        worst = max(worst, lo / r - 1, r / hi - 1)
    return worst


def check_lyapunov_norm(seed=5):
    t0 = time.perf_counter()
    T = cat_map()
    ctx = lyap_gram(testbeds.rotation_control(0.7, T), T, T.sample(seed, 1)[0], 0.1)
    val = lyap_norm_vector(ctx, [1.0, 0.0])
    ref = math.sqrt(2.0 / math.tanh(0.1))
    rel = abs(val - ref) / ref
    rng = np.random.default_rng(seed)
    A = testbeds.cat_coboundary(T)
    eps = default_epsilon(T, A.alpha)
    x0 = T.sample(seed, 1)[0]
    oc = c_epsilon_along_orbit(A, T, x0, 0, 100, eps)
    sandwich_bad = 0
    for m in range(100):
        U = rng.standard_normal((10, 2))
        nu = np.sqrt(np.einsum("ij,jk,ik->i", U, oc.grams[m], U))
        e = np.linalg.norm(U, axis=1)
        sandwich_bad += int(np.sum((nu < e * (1 - 1e-12)) | (nu > oc.values[m] * e * (1 + 1e-12))))
    growth = 0.0
    for B, count in ((A, 400), (testbeds.cat_derivative(T), 300), (testbeds.diagonal_control(T), 300)):
        growth = max(growth, _growth_violations(B, T, x0, eps, count, rng))
    ok = rel <= 1e-9 and sandwich_bad == 0 and growth <= 1e-6
    return _result("6 Lyapunov norm closed form", ok, {
        "norm_e1": val, "closed_form": ref, "relative_error": rel, "sandwich_violations": sandwich_bad,
        "sandwich_samples": 1000, "growth_samples": 1000, "growth_worst_relative_excess": growth}, t0)


def _leaf_pairs(T, rng, count, direction, r=None):
    r = T.leaf_radius if r is None else r
    ys = T.sample(int(rng.integers(1 << 30)), count)
    out = []
    for y in ys:
        s = rng.uniform(-r, r)
        z = (T.local_stable_point if direction == "stable" else T.local_unstable_point)(y, s)
        out.append((y, z))
    return out


def _equivariance_error(A, T, y, z, direction, j):
    H = (stable_holonomy if direction == "stable" else unstable_holonomy)(A, T, y, z).matrix
    oy, oz = T.leaf_orbits(y, z, min(0, j), max(0, j) + 1, direction)
    k = j - min(0, j)
    Hj = (stable_holonomy if direction == "stable" else unstable_holonomy)(A, T, oy[k], oz[k]).matrix
    if j >= 0:
        Ay = np.eye(2)
        Az = np.eye(2)
        for t in range(j):
            Ay = A.evaluate(oy[t], T) @ Ay
            Az = A.evaluate(oz[t], T) @ Az
    else:
        # A^j(y) = A^{-j}(f^j y)^{-1}
        Ay = np.eye(2)
        Az = np.eye(2)
        for t in range(-j):
            Ay = A.evaluate(oy[t], T) @ Ay
            Az = A.evaluate(oz[t], T) @ Az
        Ay, Az = np.linalg.inv(Ay), np.linalg.inv(Az)
    return float(np.max(np.abs(Hj - Az @ H @ np.linalg.inv(Ay))))


def check_holonomy(seed=3):
    t0 = time.perf_counter()
    S = FullShift()
    exact_err, exact_ok = 0.0, True
    for m in (1, 2, 3):
        A = testbeds.random_locally_constant(m, S, seed=m)
        for y in S.sample(seed + m, 5):
            z = S.local_stable_point(y, 1)
            H = stable_holonomy(A, S, y, z)
            Ay, Az = A.along_orbit(S, y, 0, m), A.along_orbit(S, z, 0, m)
            Py, Pz = np.eye(2), np.eye(2)
            for a, b in zip(Ay, Az):
                Py, Pz = a @ Py, b @ Pz
            exact_err = max(exact_err, float(np.max(np.abs(H.matrix - np.linalg.solve(Pz, Py)))))
            exact_ok &= H.n_converged == m
    T = cat_map()
    A = testbeds.smooth_dominated(T)
    rng = np.random.default_rng(seed)
    eq_err, grp_err = 0.0, 0.0
    for direction in ("stable", "unstable"):
        hol = stable_holonomy if direction == "stable" else unstable_holonomy
        for y, z in _leaf_pairs(T, rng, 50, direction, T.leaf_radius / 2):
            j = int(rng.integers(1, 6)) * (1 if direction == "stable" else -1)
            eq_err = max(eq_err, _equivariance_error(A, T, y, z, direction, j))
            basis = T.stable_basis if direction == "stable" else T.unstable_basis
            w = np.mod(y + basis @ np.array([rng.uniform(-0.02, 0.02)]), 1.0)
            Hyz, Hzw, Hyw, Hzy = hol(A, T, y, z).matrix, hol(A, T, z, w).matrix, hol(A, T, y, w).matrix, \
                hol(A, T, z, y).matrix
            grp_err = max(grp_err, float(np.max(np.abs(Hzw @ Hyz - Hyw))),
                          float(np.max(np.abs(Hzy @ Hyz - np.eye(2)))),
                          float(np.max(np.abs(hol(A, T, y, y).matrix - np.eye(2)))))
    ratios = []
    for direction in ("stable", "unstable"):
        hol = stable_holonomy if direction == "stable" else unstable_holonomy
        for y, z in _leaf_pairs(T, rng, 500, direction):
            H = hol(A, T, y, z)
            if H.distance > 0:
                ratios.append(H.deviation / H.distance ** A.alpha)
    ratios = np.array(ratios)
    order = rng.permutation(len(ratios))
    calib, valid = ratios[order[: len(ratios) // 2]], ratios[order[len(ratios) // 2:]]
    L = float(calib.max())
    outliers = int(np.sum(valid > 3 * L))
    ok = exact_ok and exact_err <= 1e-12 and eq_err <= 1e-8 and grp_err <= 1e-8 and outliers == 0
    return _result("7 holonomy exactness and laws", ok, {
        "locally_constant_converged_at_depth": exact_ok, "locally_constant_error": exact_err,
        "equivariance_error": eq_err, "groupoid_error": grp_err, "holder_pairs": len(ratios),
        "L_fit": L, "outliers_3x": outliers}, t0)


def check_holder_regularity(seed=7, n_points=10 ** 5, chains=100):
    t0 = time.perf_counter()
    T = cat_map()
    x0 = choose_anchor(T, seed)
    out = {}
    ok = True
    for label, rough, band in (("alpha_1", False, (0.85, 1.15)), ("alpha_half", True, (0.4, 0.65))):
        A = testbeds.cat_coboundary(T, rough=rough)
        tab = build_transfer(A, T, x0, n_points, default_epsilon(T, A.alpha), 20)
        block = tab.in_G & domination_mask(A, T, tab)
        he = holder_estimate(tab, block, band=band, seed=seed)
        coverage = float(block.mean())
        out[label] = {"exponent": he.exponent, "ols_slope": he.ols_slope, "pairs": he.pair_count,
                      "C_eps": he.C_eps, "coverage": coverage}
        ok &= he.passed and coverage >= 0.8
        if not rough:
            rng = np.random.default_rng(seed)
            idx = np.nonzero(block)[0]
            pairs = T.near_pairs(tab.points[idx[:20000]], T.bracket_radius / 2)
            pick = pairs[np.sort(rng.choice(len(pairs), min(chains, len(pairs)), replace=False))]
            K_ratios, errs = [], []
            for a, b in pick:
                c = table_chain(A, T, tab, idx[a], idx[b])
                K_ratios.append(c.K_ratio)
                errs.append(c.error)
                ok &= c.length_ok
            out["chains"] = {"count": len(pick), "max_length_ratio": max(K_ratios), "K": T.chain_constant,
                             "max_reconstruction_error": max(errs)}
    return _result("8 Hölder regularity of P", ok, out, t0)


ALL_CHECKS = (check_coboundary_round_trip, check_obstruction_soundness, check_zero_exponents,
              check_near_return_scaling, check_closing_lemma, check_lyapunov_norm, check_holonomy,
              check_holder_regularity)


def run_all(echo=None):
    results = []
    for fn in ALL_CHECKS:
        r = fn()
        results.append(r)
        if echo:
            echo(r.line())
    return results
