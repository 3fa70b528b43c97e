"""Domination, stable/unstable holonomies, bracket chains and Hölder estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InsufficientPairs, NotConverged, NotOnLeaf
from .livsic import _opnorm, loglog_fit, shift_pair_distances

DEFAULT_N = 4
DEFAULT_K_MAX = 25
DEFAULT_TOL = 1e-10
DEFAULT_BUDGET = 200


def default_theta(system):
    """A domination exponent with ``2 theta < tau`` for the system's leaf rate ``tau``."""
    return round(min(0.4, 0.45 * system.leaf_rate), 6)


# ---------------------------------------------------------------------------
# domination

@dataclass
class DominationReport:
    point: object
    N: int
    theta: float
    k_max: int
    log_products: list
    dual_log_products: list
    first_failure: int | None
    dual_first_failure: int | None

    @property
    def passed(self):
        return self.first_failure is None and self.dual_first_failure is None


def _block_log_conds(mats, N):
    """``log cond`` of every product of ``N`` consecutive factors."""
    n = len(mats) - N + 1
    P = mats[:n].copy()
    for t in range(1, N):
        P = mats[t:t + n] @ P
    s = np.linalg.svd(P, compute_uv=False)
    return np.log(s[:, 0] / s[:, -1])


def _first_fail(cum, theta, N):
    k = np.arange(1, len(cum) + 1)
    bad = np.nonzero(cum > theta * k * N + 1e-12)[0]
    return int(bad[0]) + 1 if bad.size else None


def domination_check(A, system, x, N=DEFAULT_N, theta=None, k_max=DEFAULT_K_MAX):
    """Test ``prod_{j<k} |A^N(f^{jN} x)| |A^N(f^{jN} x)^{-1}| <= e^{theta k N}`` in both time directions."""
    theta = default_theta(system) if theta is None else float(theta)
    span = N * k_max
    mats = A.along_orbit(system, x, -span, span)
    lc = _block_log_conds(mats, N)
    fwd = np.cumsum(lc[span::N][:k_max])
    dual = np.cumsum(lc[span - N::-N][:k_max])
    return DominationReport(x, N, theta, k_max, fwd.tolist(), dual.tolist(),
                            _first_fail(fwd, theta, N), _first_fail(dual, theta, N))


def domination_mask(A, system, table, N=DEFAULT_N, theta=None, k_max=DEFAULT_K_MAX):
    """Domination pass/fail at every table point at once."""
    theta = default_theta(system) if theta is None else float(theta)
    n = len(table)
    span = N * k_max
    mats = A.along_orbit(system, table.anchor, -span, n + span)
    lc = _block_log_conds(mats, N)
    ok = np.ones(n, dtype=bool)
    f = np.zeros(n)
    b = np.zeros(n)
    for k in range(1, k_max + 1):
        f += lc[span + (k - 1) * N: span + (k - 1) * N + n]
        b += lc[span - k * N: span - k * N + n]
        lim = theta * k * N + 1e-12
        ok &= (f <= lim) & (b <= lim)
    return ok


# ---------------------------------------------------------------------------
# holonomies

@dataclass
class HolonomyMatrix:
    y: object
    z: object
    direction: str
    matrix: np.ndarray
    n_converged: int
    residuals: list
    distance: float
    decay_rate: float | None = None
    decay_ok: bool | None = None

    @property
    def deviation(self):
        return float(np.linalg.norm(self.matrix - np.eye(self.matrix.shape[0]), 2))


def _leaf_values(A, system, y, z, n, direction):
    """``A`` along the orbits of ``y`` and ``z``: ``j = 0..n-1`` (stable) or ``j = -1..-n`` (unstable)."""
    if direction == "stable":
        start, stop = 0, n
    else:
        start, stop = -n, 0
    if system.kind == "torus":
        oy, oz = system.leaf_orbits(y, z, start, stop, direction)
        Ay = A.evaluate_many(system, oy)
        Az = A.evaluate_many(system, oz)
    else:
        Ay = A.along_orbit(system, y, start, stop)
        Az = A.along_orbit(system, z, start, stop)
    if direction == "unstable":
        Ay, Az = Ay[::-1], Az[::-1]
    return Ay, Az


def _holonomy(A, system, y, z, direction, tol, budget, theta):
    if not system.on_leaf(y, z, direction):
        raise NotOnLeaf(f"points are not on a common local {direction} leaf")
    d = A.dimension
    dist = float(system.distance(y, z))
    H = np.eye(d)
    if dist == 0.0:
        return HolonomyMatrix(y, z, direction, H, 0, [0.0], 0.0, None, True)
    Ay, Az = _leaf_values(A, system, y, z, budget, direction)
    Zi = np.eye(d)
    Y = np.eye(d)
    residuals = []
    n_conv = None
    for j in range(budget):
        if direction == "stable":
            Azi = np.linalg.inv(Az[j])
            inc = Zi @ (Azi @ (Ay[j] - Az[j])) @ Y
            Zi = Zi @ Azi
            Y = Ay[j] @ Y
        else:
            Ayi = np.linalg.inv(Ay[j])
            inc = Zi @ ((Az[j] - Ay[j]) @ Ayi) @ Y
            Zi = Zi @ Az[j]
            Y = Ayi @ Y
        step = float(np.linalg.norm(inc, 2))
        residuals.append(step)
        if step <= tol:
            n_conv = j
            break
        H = H + inc
    if n_conv is None:
        raise NotConverged(f"{direction} holonomy did not converge in {budget} steps", residuals)
    tau = system.leaf_rate
    rate, ok = None, None
    pos = [(i, r) for i, r in enumerate(residuals) if r > 1e-15]
    if len(pos) >= 3:
        i, r = np.array(pos).T
        rate = float(-np.polyfit(i, np.log(r), 1)[0])
        ok = bool(rate >= tau - 2 * theta)
    else:
        ok = True
    return HolonomyMatrix(y, z, direction, H, n_conv, residuals, dist, rate, ok)


def stable_holonomy(A, system, y, z, tol=DEFAULT_TOL, budget=DEFAULT_BUDGET, theta=None):
    """``H^s_{yz} = lim A^n(z)^{-1} A^n(y)`` for ``z`` on the local stable leaf of ``y``."""
    theta = default_theta(system) if theta is None else theta
    return _holonomy(A, system, y, z, "stable", tol, budget, theta)


def unstable_holonomy(A, system, y, z, tol=DEFAULT_TOL, budget=DEFAULT_BUDGET, theta=None):
    """``H^u_{yz} = lim A^{-n}(z)^{-1} A^{-n}(y)`` for ``z`` on the local unstable leaf of ``y``."""
    theta = default_theta(system) if theta is None else theta
    return _holonomy(A, system, y, z, "unstable", tol, budget, theta)


# ---------------------------------------------------------------------------
# bracket chains

@dataclass
class ChainReconstruction:
    x: object
    y: object
    x1: object
    x2: object
    x3: object
    holonomies: list
    P_hat: np.ndarray
    P_y: np.ndarray | None
    chain_length: float
    distance: float
    K: float

    @property
    def error(self):
        if self.P_y is None:
            return math.nan
        return float(np.linalg.norm(self.P_hat - self.P_y, 2))

    @property
    def K_ratio(self):
        return self.chain_length / self.distance if self.distance > 0 else 0.0

    @property
    def length_ok(self):
        return self.chain_length <= self.K * self.distance * (1 + 1e-9) + 1e-15


def holonomy_chain(A, system, x, y, P_x, P_y=None, tol=DEFAULT_TOL, budget=DEFAULT_BUDGET, theta=None):
    """Transport ``P(x)`` to ``y`` along ``x -u-> x1 -s-> x3 -u-> x2 -s-> y``."""
    x1, x2, x3 = system.chain_points(x, y)
    legs = [unstable_holonomy(A, system, x, x1, tol, budget, theta),
            stable_holonomy(A, system, x1, x3, tol, budget, theta),
            unstable_holonomy(A, system, x3, x2, tol, budget, theta),
            stable_holonomy(A, system, x2, y, tol, budget, theta)]
    P = np.asarray(P_x, dtype=float)
    for h in legs:
        P = h.matrix @ P
    length = float(sum(h.distance for h in legs))
    return ChainReconstruction(x, y, x1, x2, x3, legs, P, None if P_y is None else np.asarray(P_y),
                               length, float(system.distance(x, y)), float(system.chain_constant))


def table_chain(A, system, table, i, j, **kw):
    """:func:`holonomy_chain` between two table entries, compared with the table's ``P``."""
    return holonomy_chain(A, system, table.points[i], table.points[j], table.matrix(i), table.matrix(j), **kw)


# ---------------------------------------------------------------------------
# Hölder regularity

@dataclass
class HolderEstimate:
    pair_count: int
    degenerate: bool
    exponent: float
    ols_slope: float
    ols_intercept: float
    C_eps: float
    decade_constants: dict
    bins: list = field(default_factory=list)
    alpha: float = 1.0
    band: tuple = (0.85, 1.15)
    dists: np.ndarray = field(default=None, repr=False)
    pdiffs: np.ndarray = field(default=None, repr=False)

    @property
    def passed(self):
        if self.degenerate:
            return True
        return bool(self.band[0] <= self.exponent <= self.band[1])


def _bin_edges(h_min, h_max, per_decade=2):
    lo = math.log10(h_min)
    hi = math.log10(h_max)
    n = max(1, int(math.ceil((hi - lo) * per_decade - 1e-9)))
    return np.logspace(lo, hi, n + 1)


def _torus_pairs(points, lo, hi, budget, rng, tree):
    """Up to ``budget`` random pairs with ``lo <= d < hi``."""
    n = len(points)
    expected = 0.5 * n * n * math.pi * (hi * hi - lo * lo)
    if expected <= 5 * budget:
        pairs = tree.query_pairs(hi, output_type="ndarray")
    else:
        per_query = max(n * math.pi * (hi * hi - lo * lo), 1e-12)
        q = min(n, int(math.ceil(1.5 * budget / per_query)) + 1)
        qi = np.sort(rng.choice(n, q, replace=False))
        nbrs = tree.query_ball_point(points[qi], hi)
        rows = [(a, b) for a, lst in zip(qi.tolist(), nbrs) for b in lst if b != a]
        pairs = np.array(rows, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return pairs


def holder_estimate(table, block_mask=None, pair_budget=20000, delta=None, h_min=1e-3, alpha=None,
                    band=None, seed=0, min_pairs=50, min_entries=1000, min_bin_pairs=2000):
    """Hölder exponent and constant of the table's ``P`` on the admitted block.

    Pairs are drawn per half-decade of distance.  The reported exponent is
    the slope of the per-bin maximum of ``|P(x) - P(y)|`` against the bin's
    upper edge (the modulus of continuity); the least-squares slope over all
    pairs is reported alongside.  A maximum only probes the worst case when
    the bin is well populated, so bins with fewer than ``min_bin_pairs``
    pairs are left out of the envelope fit.
    """
    system = table.system
    alpha = table.cocycle.alpha if alpha is None else float(alpha)
    band = (alpha - 0.15, alpha + 0.15) if band is None else tuple(band)
    delta = system.bracket_radius if delta is None else float(delta)
    idx = np.nonzero(table.in_G if block_mask is None else block_mask)[0]
    if len(idx) < min_entries:
        raise InsufficientPairs(f"only {len(idx)} admitted table entries (need {min_entries})")
    rng = np.random.default_rng(seed)
    P = table.matrices(idx)
    scale = float(np.max(_opnorm(P)))
    floor = 10 * np.finfo(float).eps * 10 * max(scale, 1.0)
    edges = _bin_edges(h_min, delta / 2)
    all_h, all_v, bins = [], [], []
    if system.kind == "torus":
        pts = table.points[idx]
        tree = cKDTree(np.where(pts >= 1.0, 0.0, pts), boxsize=1.0)
        for lo, hi in zip(edges[:-1], edges[1:]):
            pairs = _torus_pairs(pts, lo, hi, pair_budget, rng, tree)
            if len(pairs) == 0:
                continue
            h = system.distance(pts[pairs[:, 0]], pts[pairs[:, 1]])
            sel = (h >= lo) & (h < hi)
            pairs, h = pairs[sel], h[sel]
            if len(pairs) > pair_budget:
                keep = np.sort(rng.choice(len(pairs), pair_budget, replace=False))
                pairs, h = pairs[keep], h[keep]
            v = _opnorm(P[pairs[:, 0]] - P[pairs[:, 1]])
            all_h.append(h)
            all_v.append(v)
            bins.append((float(lo), float(hi), len(h), float(v.max()) if len(v) else 0.0))
    else:
        h, v = _shift_pairs(table, idx, P, pair_budget * len(edges), rng)
        sel = (h >= h_min) & (h < delta / 2)
        h, v = h[sel], v[sel]
        for k in np.unique(h):
            m = h == k
            bins.append((float(k), float(k), int(m.sum()), float(v[m].max())))
        all_h, all_v = [h], [v]
    h = np.concatenate(all_h) if all_h else np.zeros(0)
    v = np.concatenate(all_v) if all_v else np.zeros(0)
    if len(h) < min_pairs:
        raise InsufficientPairs(f"only {len(h)} pairs closer than delta/2 = {delta / 2:g}")
    # table entries carry accumulated rounding, so differences far below the largest one are noise
    floor = max(floor, 1e-8 * float(v.max(initial=0.0)))
    live = v > floor
    if not live.any():
        return HolderEstimate(len(h), True, math.nan, math.nan, math.nan, 0.0, {}, bins, alpha, band, h, v)
    slope, intercept = loglog_fit(h[live], v[live], floor)
    # P constant on every ball below some scale (a locally constant P): any exponent fits
    flat = int(np.sum(h < h[live].min()))
    env = [(b[1], b[3]) for b in bins if b[2] >= min_bin_pairs and b[3] > floor]
    if len(env) >= 2:
        ex = float(np.polyfit(np.log([e[0] for e in env]), np.log([e[1] for e in env]), 1)[0])
    else:
        ex = slope
    dec = np.floor(np.log10(h[live]) + 1e-12).astype(int)
    consts = {int(dd): float(np.max(v[live][dec == dd] / h[live][dec == dd] ** alpha)) for dd in np.unique(dec)}
    C = max(consts.values())
    degenerate = flat >= min_pairs
    return HolderEstimate(len(h), degenerate, math.nan if degenerate else ex, slope, intercept, C, consts, bins, alpha, band, h, v)


def _shift_pairs(table, idx, P, budget, rng):
    """Random same-cylinder pairs on a shift table, at every depth."""
    x0 = table.anchor
    sym_all = x0.symbols(-64, len(table) + 64)
    hs, vs = [], []
    for J in range(0, 12):
        w = np.lib.stride_tricks.sliding_window_view(sym_all, 2 * J + 1)[64 - J:64 - J + len(table)][idx]
        keys = np.unique(w, axis=0, return_inverse=True)[1].ravel()
        order = np.argsort(keys, kind="stable")
        ks = keys[order]
        starts = np.searchsorted(ks, ks, side="left")
        ends = np.searchsorted(ks, ks, side="right")
        a = rng.integers(0, len(idx), size=budget // 12)
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        ra = inv[a]
        size = ends[ra] - starts[ra]
        ok = size > 1
        b = order[starts[ra[ok]] + rng.integers(0, np.maximum(size[ok], 1))]
        a = a[ok]
        ok2 = a != b
        a, b = a[ok2], b[ok2]
        h = shift_pair_distances(table, idx[a], idx[b])
        hs.append(h)
        vs.append(_opnorm(P[a] - P[b]))
    return np.concatenate(hs), np.concatenate(vs)
