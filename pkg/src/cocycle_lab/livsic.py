"""Periodic obstructions, the transfer map along an orbit, and near-return checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial import cKDTree

from .cocycle_core import CoboundaryCocycle, ScaledProduct, qr_pos, zero_exponent_check
from .errors import NoNeighbor, NoReturnsFound, NotRecurrent, ZeroExponentCheckFailed
from .lyapunov_norm import DEFAULT_TRUNCATION, c_epsilon_along_orbit


def _opnorm(X):
    return np.linalg.norm(X, 2, axis=(-2, -1))


def point_label(system, p):
    """Plain-text coordinates of a point, for reports."""
    if system.kind == "torus":
        return [float(c) for c in p]
    return ["".join(map(str, p.symbols(0, 16).tolist()))]


# ---------------------------------------------------------------------------
# periodic obstructions

@dataclass
class ObstructionEntry:
    period: int
    point: object
    defect: float
    matrix: np.ndarray


@dataclass
class ObstructionReport:
    entries: list
    tolerance: float
    counts: dict

    @property
    def max_defect(self):
        return max((e.defect for e in self.entries), default=0.0)

    @property
    def count(self):
        return len(self.entries)

    @property
    def passed(self):
        return self.max_defect <= self.tolerance


def _periodic_products(A, system, n):
    """``(points, A^n(p))`` for every ``p`` in ``Fix(f^n)``."""
    d = A.dimension
    if system.kind == "torus":
        num, L = system.periodic_lattice(n)
        orbits = system.exact_orbits(num, L, n)
        D = orbits.shape[1]
        vals = A.evaluate_many(system, orbits.reshape(-1, system.dim)).reshape(n, D, d, d)
        P = np.broadcast_to(np.eye(d), (D, d, d)).copy()
        for j in range(n):
            P = vals[j] @ P
        return list(orbits[0]), P
    pts, mats = [], []
    for orb in system.enumerate_periodic(n):
        vals = A.along_orbit(system, orb.base_point, 0, n)
        P = np.eye(d)
        for V in vals:
            P = V @ P
        pts.append(orb.base_point)
        mats.append(P)
    return pts, np.array(mats)


def obstruction_audit(A, system, n_max, tolerance=1e-8):
    """``|A^n(p) - Id|`` at every periodic point of period ``n <= n_max``."""
    entries, counts = [], {}
    d = A.dimension
    for n in range(1, int(n_max) + 1):
        pts, P = _periodic_products(A, system, n)
        defects = _opnorm(P - np.eye(d))
        counts[n] = len(pts)
        entries.extend(ObstructionEntry(n, p, float(df), M) for p, df, M in zip(pts, defects, P))
    # stable sort keeps enumeration order among ties
    entries.sort(key=lambda e: -e.defect)
    return ObstructionReport(entries, float(tolerance), counts)


# ---------------------------------------------------------------------------
# transfer table

def choose_anchor(system, seed, horizon=0):
    """A measure-random starting point (generic with probability one)."""
    return system.sample(seed, 1, horizon)[0]


def _chain_products(mats):
    """``P(0) = I``, ``P(j+1) = mats[j] P(j)`` as arrays ``(Q, R, log_scale)``."""
    n, d, _ = mats.shape
    Q = np.empty((n + 1, d, d))
    R = np.empty((n + 1, d, d))
    S = np.zeros(n + 1)
    Q[0] = np.eye(d)
    R[0] = np.eye(d)
    if d == 2:
        m = mats.reshape(n, 4).tolist()
        q00, q10, q01, q11 = 1.0, 0.0, 0.0, 1.0
        a11, a12, a22, s = 1.0, 0.0, 1.0, 0.0
        hyp, sqrt, log = math.hypot, math.sqrt, math.log
        out_q = [None] * n
        out_r = [None] * n
        out_s = [0.0] * n
        for i in range(n):
            a, b, c, e = m[i]
            w00 = a * q00 + b * q10
            w10 = c * q00 + e * q10
            w01 = a * q01 + b * q11
            w11 = c * q01 + e * q11
            r11 = hyp(w00, w10)
            q00, q10 = w00 / r11, w10 / r11
            q01, q11 = -q10, q00
            r12 = q00 * w01 + q10 * w11
            r22 = q01 * w01 + q11 * w11
            if r22 < 0:
                q01, q11, r22 = -q01, -q11, -r22
            a11, a12, a22 = r11 * a11, r11 * a12 + r12 * a22, r22 * a22
            nrm = sqrt(a11 * a11 + a12 * a12 + a22 * a22)
            a11, a12, a22 = a11 / nrm, a12 / nrm, a22 / nrm
            s += log(nrm)
            out_q[i] = (q00, q01, q10, q11)
            out_r[i] = (a11, a12, 0.0, a22)
            out_s[i] = s
        Q[1:] = np.array(out_q).reshape(n, 2, 2)
        R[1:] = np.array(out_r).reshape(n, 2, 2)
        S[1:] = out_s
        return Q, R, S
    cur = ScaledProduct.identity(d)
    for i in range(n):
        cur = cur.left_multiply(mats[i])
        Q[i + 1], R[i + 1], S[i + 1] = cur.Q, cur.R, cur.log_scale
    return Q, R, S


def _to_matrices(Q, R, S):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(S)[..., None, None] * (Q @ R)


@dataclass
class TransferTable:
    """``P(f^n x0) = A^n(x0)`` along the forward orbit of ``x0``."""
    system: object
    cocycle: object
    anchor: object
    points: object
    mats: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    log_scale: np.ndarray
    c_eps: np.ndarray
    in_G: np.ndarray
    epsilon: float
    N: float
    beta: float
    T: float
    T_half: float
    zero_check: object = None
    _tree: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.log_scale)

    def point(self, i):
        return self.points[i]

    def matrix(self, i):
        return _to_matrices(self.Q[i], self.R[i], self.log_scale[i])

    def matrices(self, idx=None):
        if idx is None:
            return _to_matrices(self.Q, self.R, self.log_scale)
        return _to_matrices(self.Q[idx], self.R[idx], self.log_scale[idx])

    def log_norms(self):
        return self.log_scale + np.log(_opnorm(self.R))

    def recursion_residual(self):
        """Largest relative error of ``P(n+1) = A(x_n) P(n)`` over the table."""
        P = self.matrices()
        lhs = P[1:]
        rhs = self.mats @ P[:-1]
        return float(np.max(_opnorm(lhs - rhs) / _opnorm(lhs)))

    @property
    def G_fraction(self):
        return float(np.mean(self.in_G))


def build_transfer(A, system, x0, n_points, epsilon, N, truncation=DEFAULT_TRUNCATION, beta=None,
                   override=False, zero_check_iters=10 ** 4):
    """Build ``P`` on ``n_points`` orbit points by ``P(f^{n+1} x0) = A(f^n x0) P(f^n x0)``.

    Refuses (``ZeroExponentCheckFailed``) when the extreme Lyapunov exponents
    at ``x0`` do not vanish, unless ``override`` is set.
    """
    n_points = int(n_points)
    zc = zero_exponent_check(A, system, [x0], zero_check_iters)
    if not zc.passed and not override:
        raise ZeroExponentCheckFailed(
            f"extreme exponent {zc.worst:.3g} exceeds {zc.threshold:.3g}; no continuous transfer map exists")
    mats = A.along_orbit(system, x0, 0, n_points - 1)
    Q, R, S = _chain_products(mats)
    points = system.orbit(x0, 0, n_points)
    oc = c_epsilon_along_orbit(A, system, x0, 0, n_points, epsilon, truncation, zc.spectra[0])
    in_G = (oc.values <= N) & oc.certified
    if beta is None:
        beta = 1e-2 if system.kind == "torus" else 2.0 ** -6
    lognorm = S + np.log(_opnorm(R))
    half = in_G.copy()
    half[n_points // 2:] = False
    with np.errstate(over="ignore"):
        T = float(np.exp(np.max(lognorm[in_G]))) if in_G.any() else math.nan
        T_half = float(np.exp(np.max(lognorm[half]))) if half.any() else math.nan
    return TransferTable(system, A, x0, points, mats, Q, R, S, oc.values, in_G, float(epsilon),
                         float(N), float(beta), T, T_half, zc)


# ---------------------------------------------------------------------------
# segment products and near returns

def _compose(Q1, R1, S1, Q2, R2, S2):
    """``(Q1 R1 e^S1)(Q2 R2 e^S2)`` batched, renormalized."""
    q, r = qr_pos(R1 @ Q2)
    R = r @ R2
    c = np.sqrt(np.sum(R * R, axis=(-2, -1)))
    return Q1 @ q, R / c[:, None, None], S1 + S2 + np.log(c)


def segment_products(mats, starts, lengths):
    """``mats[s+n-1] ... mats[s]`` for each query ``(s, n)``, by binary lifting.

    Returns ``(Q, R, log_scale)`` arrays.  Level ``k`` holds all products of
    ``2^k`` consecutive factors; only one level is kept in memory at a time.
    """
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    q = len(starts)
    d = mats.shape[-1]
    accQ = np.broadcast_to(np.eye(d), (q, d, d)).copy()
    accR = accQ.copy()
    accS = np.zeros(q)
    if q == 0:
        return accQ, accR, accS
    pos = starts.copy()
    LQ, LR = qr_pos(mats)
    c = np.sqrt(np.sum(LR * LR, axis=(-2, -1)))
    LR = LR / c[:, None, None]
    LS = np.log(c)
    k = 0
    top = int(lengths.max())
    while (1 << k) <= top:
        sel = np.nonzero((lengths >> k) & 1)[0]
        if sel.size:
            i = pos[sel]
            accQ[sel], accR[sel], accS[sel] = _compose(LQ[i], LR[i], LS[i], accQ[sel], accR[sel], accS[sel])
            pos[sel] += 1 << k
        step = 1 << k
        if (2 << k) <= top:
            m = len(LS) - step
            LQ, LR, LS = _compose(LQ[step:step + m], LR[step:step + m], LS[step:step + m],
                                  LQ[:m], LR[:m], LS[:m])
        k += 1
    return accQ, accR, accS


def _defects(Q, R, S):
    """``|e^S Q R - I|`` with huge products reported through their norm."""
    d = Q.shape[-1]
    out = np.empty(len(S))
    lognorm = S + np.log(_opnorm(R))
    small = lognorm < 600
    if small.any():
        M = np.exp(S[small])[:, None, None] * (Q[small] @ R[small])
        out[small] = _opnorm(M - np.eye(d))
    with np.errstate(over="ignore"):
        out[~small] = np.exp(lognorm[~small])
    return out


@dataclass
class NearReturnStat:
    m: int
    n: int
    h: float
    defect: float
    pdiff: float
    K_fit_pass: bool = True
    shadow_period_point: object = None
    growth_ratio: float | None = None


@dataclass
class NearReturnReport:
    stats: list
    alpha: float
    slope: float
    intercept: float
    decade_constants: dict
    C_fit: float
    K_fit: float
    K_decade_constants: dict
    L_fit: float | None
    periodic_growth_pass: bool | None
    periodic_growth_checked: int
    candidate_pairs: int

    @property
    def K_envelope(self):
        return max(self.K_decade_constants.values(), default=math.nan)

    @property
    def envelope_spread(self):
        v = [c for c in self.decade_constants.values() if c > 0]
        return max(v) / min(v) if v else math.nan


def _pairs_torus(points, r):
    tree = cKDTree(np.where(points >= 1.0, 0.0, points), boxsize=1.0)
    pairs = tree.query_pairs(r, output_type="ndarray")
    return pairs if pairs.size else np.zeros((0, 2), dtype=np.int64)


def _pairs_shift(table, r):
    """Index pairs whose symbols agree on ``|j| <= J`` where ``2^-J``-balls have radius ``r``."""
    J = int(math.floor(math.log2(1.0 / r) + 1e-12))
    x0 = table.anchor
    n = len(table)
    sym = x0.symbols(-J, n + J)
    w = sliding_window_view(sym, 2 * J + 1)
    keys = np.unique(w, axis=0, return_inverse=True)[1].ravel()
    order = np.argsort(keys, kind="stable")
    ks = keys[order]
    bounds = np.nonzero(np.diff(ks))[0] + 1
    out = []
    for grp in np.split(order, bounds):
        if len(grp) > 1:
            i, j = np.triu_indices(len(grp), 1)
            out.append(np.stack([grp[i], grp[j]], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def _envelopes(h, v, alpha):
    """Per-decade ``max v / h^alpha`` keyed by ``floor(log10 h)``."""
    dec = np.floor(np.log10(h) + 1e-12).astype(int)
    out = {}
    for dd in np.unique(dec):
        sel = dec == dd
        out[int(dd)] = float(np.max(v[sel] / h[sel] ** alpha))
    return out


def _fits(h, defect, pdiff, alpha):
    """Median constants, per-decade envelopes and the within-10x flags."""
    envs = _envelopes(h, defect, alpha)
    ok = defect > 1e-13
    C_fit = float(np.exp(np.median(np.log(defect[ok] / h[ok] ** alpha)))) if ok.any() else 0.0
    fin = np.isfinite(pdiff)
    okp = fin & (pdiff > 1e-13)
    K_fit = float(np.exp(np.median(np.log(pdiff[okp] / h[okp] ** alpha)))) if okp.any() else 0.0
    K_envs = _envelopes(h[fin], pdiff[fin], alpha) if fin.any() else {}
    passes = (defect <= 10 * C_fit * h ** alpha + 1e-12) & (pdiff <= 10 * K_fit * h ** alpha + 1e-12)
    return C_fit, K_fit, envs, K_envs, passes


def loglog_fit(h, v, floor=1e-13):
    ok = (v > floor) & np.isfinite(v)
    if ok.sum() < 3 or np.unique(h[ok]).size < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(np.log(h[ok]), np.log(v[ok]), 1)
    return float(slope), float(intercept)


def shift_pair_distances(table, a, b, cap=60):
    """``d(f^a x0, f^b x0)`` for index arrays on a shift table, read off the anchor's symbols.

    Agreement beyond ``|j| <= cap`` is reported as ``2^-(cap+1)``, far below
    any scale used here.
    """
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    sym = table.anchor.symbols(-cap, len(table) + cap)
    out = np.full(len(a), 2.0 ** -(cap + 1))
    open_ = np.ones(len(a), dtype=bool)
    for k in range(cap + 1):
        diff = (sym[cap + a + k] != sym[cap + b + k]) | (sym[cap + a - k] != sym[cap + b - k])
        hit = open_ & diff
        out[hit] = 2.0 ** -k
        open_ &= ~diff
        if not open_.any():
            break
    return out


def near_return_scan(A, system, table, beta=None, h_min=1e-4, alpha=None, max_return_time=None,
                     pairs_per_decade=2000, seed=0, shadow_max_n=40, growth_max=200):
    """Near returns of the table orbit: defects ``|A^n(z) - Id|`` against return distance ``h``."""
    beta = table.beta if beta is None else float(beta)
    alpha = A.alpha if alpha is None else float(alpha)
    G = np.nonzero(table.in_G)[0]
    if system.kind == "torus":
        pairs = _pairs_torus(table.points[G], beta)
        pairs = G[pairs] if pairs.size else pairs
    else:
        pairs = _pairs_shift(table, beta)
        if pairs.size:
            pairs = pairs[table.in_G[pairs[:, 0]] & table.in_G[pairs[:, 1]]]
    if pairs.size:
        pairs = np.sort(pairs, axis=1)
    if max_return_time is not None and pairs.size:
        pairs = pairs[pairs[:, 1] - pairs[:, 0] <= max_return_time]
    if pairs.size == 0:
        raise NoReturnsFound("no in-G pair returns within beta; use a larger beta or a longer table")
    candidates = len(pairs)
    if system.kind == "torus":
        h = system.distance(table.points[pairs[:, 0]], table.points[pairs[:, 1]])
    else:
        h = shift_pair_distances(table, pairs[:, 0], pairs[:, 1])
    keep = (h >= h_min) & (h < beta)
    pairs, h = pairs[keep], h[keep]
    if len(pairs) == 0:
        raise NoReturnsFound("no returns with h in the requested range")
    # stratify by decade so the small-h decades are not swamped
    rng = np.random.default_rng(seed)
    dec = np.floor(np.log10(h) + 1e-12).astype(int)
    chosen = []
    for dd in np.unique(dec):
        idx = np.nonzero(dec == dd)[0]
        if len(idx) > pairs_per_decade:
            idx = np.sort(rng.choice(idx, pairs_per_decade, replace=False))
        chosen.append(idx)
    chosen = np.concatenate(chosen)
    chosen = chosen[np.lexsort((pairs[chosen, 1], pairs[chosen, 0]))]
    pairs, h = pairs[chosen], h[chosen]
    m, n = pairs[:, 0], pairs[:, 1] - pairs[:, 0]
    Q, R, S = segment_products(table.mats, m, n)
    defect = _defects(Q, R, S)
    P = table.matrices()
    with np.errstate(invalid="ignore", over="ignore"):
        Dp = P[pairs[:, 1]] - P[pairs[:, 0]]
    fin = np.all(np.isfinite(Dp), axis=(-2, -1))
    pdiff = np.full(len(pairs), np.inf)
    pdiff[fin] = _opnorm(Dp[fin])

    slope, intercept = loglog_fit(h, defect)
    # huge finite matrices (uncontrolled cocycles) overflow to inf here, which is the right answer
    with np.errstate(over="ignore"):
        C_fit, K_fit, envs, K_envs, passes = _fits(h, defect, pdiff, alpha)


    stats = [NearReturnStat(int(a), int(b), float(hh), float(df), float(pd), bool(ps))
             for a, b, hh, df, pd, ps in zip(m, n, h, defect, pdiff, passes)]
    L_fit, growth_pass, checked = _periodic_growth(A, system, table, stats, shadow_max_n, growth_max)
    return NearReturnReport(stats, alpha, slope, intercept, envs, C_fit, K_fit, K_envs,
                            L_fit, growth_pass, checked, candidates)


def _periodic_growth(A, system, table, stats, shadow_max_n, limit):
    """Growth of ``|A^i(p)^{-1}|`` along shadowing periodic orbits, with a fitted ``L``."""
    eps = table.epsilon
    curves = []
    short = [s for s in stats if s.n <= shadow_max_n]
    for s in short[:limit]:
        z = table.points[s.m]
        try:
            sh = system.shadow(z, s.n, 2.5 * system.shadow_constant * max(s.h, 1e-300))
        except NotRecurrent:
            continue
        p = sh.periodic_point
        s.shadow_period_point = p
        if system.kind == "torus":
            vals = A.evaluate_many(system, p.orbit(system))
        else:
            vals = A.along_orbit(system, p.base_point, 0, s.n)
        top = min(s.n // 2, 50)
        cur = np.eye(A.dimension)
        ratios = []
        for i in range(1, top + 1):
            cur = vals[i - 1] @ cur
            ratios.append(np.linalg.norm(np.linalg.inv(cur), 2) * math.exp(-2 * eps * i))
        if ratios:
            curves.append((s, max(ratios)))
    if not curves:
        return None, None, 0
    half = max(1, len(curves) // 2)
    L = 2.0 * max(r for _, r in curves[:half])
    for s, r in curves:
        s.growth_ratio = float(r)
    ok = all(r <= L for _, r in curves[half:])
    return float(L), bool(ok), len(curves)


# ---------------------------------------------------------------------------
# extension and uniqueness

@dataclass
class Extension:
    matrix: np.ndarray
    neighbor: int
    distance: float
    steps: int


def _exact_index(table, q):
    if table.system.kind == "torus":
        hits = np.nonzero(np.all(table.points == np.asarray(q, dtype=float)[None, :], axis=1))[0]
        return int(hits[0]) if hits.size else None
    # on the shift the table is a forward orbit of the anchor; screen by a window first
    d = _shift_distances_to(table, q)
    for i in np.nonzero(d < 2.0 ** -_SHIFT_CAP)[0]:
        if table.points[i] == q:
            return int(i)
    return None


_SHIFT_CAP = 60


def _shift_distances_to(table, q, cap=_SHIFT_CAP):
    """Distances from every shift table entry to ``q``, exact down to ``2^-cap``."""
    sym = table.anchor.symbols(-cap, len(table) + cap)
    win = sliding_window_view(sym, 2 * cap + 1)
    mism = win != q.symbols(-cap, cap + 1)[None, :]
    # agreement depth = smallest |j| with a mismatch
    order = np.argsort(np.abs(np.arange(-cap, cap + 1)), kind="stable")
    dist = np.abs(np.arange(-cap, cap + 1))[order]
    m = mism[:, order]
    first = np.argmax(m, axis=1)
    out = 2.0 ** -dist[first].astype(float)
    out[~m.any(axis=1)] = 2.0 ** -(cap + 1)
    return out


def _nearest_in_G(table, q):
    G = np.nonzero(table.in_G)[0]
    if G.size == 0:
        return None, math.inf
    if table.system.kind == "torus":
        if table._tree is None:
            pts = table.points[G]
            table._tree = cKDTree(np.where(pts >= 1.0, 0.0, pts), boxsize=1.0)
        dist, i = table._tree.query(np.mod(np.asarray(q, dtype=float), 1.0))
        i = int(G[i])
        return i, float(table.system.distance(table.points[i], q))
    d = _shift_distances_to(table, q)[G]
    i = int(G[int(np.argmin(d))])
    return i, float(table.system.distance(table.points[i], q))


def extend_transfer(table, q, depth=3):
    """``P(q)`` from the table: an exact entry, else the nearest in-G entry within ``beta``.

    With ``j > 0`` the value found at ``f^{-j} q`` is pushed forward by
    ``P(q) = A^j(f^{-j} q) P(f^{-j} q)``.
    """
    system, A = table.system, table.cocycle
    pre = [system.iterate(q, -j) for j in range(depth + 1)]

    def pushed(j, i, dist):
        P = table.matrix(i)
        for V in A.along_orbit(system, pre[j], 0, j):
            P = V @ P
        return Extension(P, i, dist, j)

    for j in range(depth + 1):
        i = _exact_index(table, pre[j])
        if i is not None:
            return pushed(j, i, 0.0)
    for j in range(depth + 1):
        i, dist = _nearest_in_G(table, pre[j])
        if i is not None and dist < table.beta:
            return pushed(j, i, dist)
    raise NoNeighbor(f"no in-G table point within beta = {table.beta:g} of q or its {depth} preimages")


def _true_values(table, transfer):
    if table.system.kind == "torus":
        return transfer.evaluate_many(table.points)
    r = transfer.radius
    return transfer.values_on_symbols(table.anchor.symbols(-r, len(table) + r))


def uniqueness_residual(table, transfer, right_factor=None):
    """``max_n |P_true(f^n x0)^{-1} P_table(n) - C|`` with ``C = P_true(x0)^{-1} P_table(0)``."""
    Pt = _true_values(table, transfer)
    P = table.matrices()
    if right_factor is not None:
        P = P @ np.asarray(right_factor, dtype=float)
    D = np.linalg.solve(Pt, P)
    return float(np.max(_opnorm(D - D[0])))


def ground_truth(A):
    """The closed-form transfer map behind a coboundary cocycle, if any."""
    return A.transfer if isinstance(A, CoboundaryCocycle) else None
