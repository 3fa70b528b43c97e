"""Matrix cocycles over the base systems, long products and Lyapunov data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BudgetExceeded, IllConditioned

DEFAULT_COND_BOUND = 1e8


# ---------------------------------------------------------------------------
# overflow-safe products

def qr_pos(X):
    """QR factorization with a nonnegative diagonal in ``R``."""
    q, r = np.linalg.qr(X)
    s = np.sign(np.diagonal(r, axis1=-2, axis2=-1)).copy()
    s[s == 0] = 1.0
    return q * s[..., None, :], r * s[..., :, None]


@dataclass(frozen=True)
class ScaledProduct:
    """The matrix ``exp(log_scale) * Q @ R`` with ``Q`` orthogonal, ``R`` upper triangular."""
    Q: np.ndarray
    R: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.eye(d), 0.0)

    @classmethod
    def from_matrix(cls, M):
        q, r = qr_pos(np.asarray(M, dtype=float))
        return cls._normalized(q, r, 0.0)

    @staticmethod
    def _normalized(Q, R, s):
        c = float(np.linalg.norm(R))
        if c == 0.0 or not np.isfinite(c):
            return ScaledProduct(Q, R, s)
        return ScaledProduct(Q, R / c, s + math.log(c))

    @property
    def dim(self):
        return self.Q.shape[0]

    def matrix(self):
        with np.errstate(over="ignore"):
            return math.exp(self.log_scale) * (self.Q @ self.R) if self.log_scale < 709 else \
                np.exp(self.log_scale) * (self.Q @ self.R)

    def normalized_matrix(self):
        return self.Q @ self.R

    def log_norm(self):
        return self.log_scale + math.log(np.linalg.norm(self.R, 2))

    def log_inverse_norm(self):
        return -self.log_scale + math.log(np.linalg.norm(np.linalg.inv(self.R), 2))

    def left_multiply(self, A):
        q, r = qr_pos(np.asarray(A, dtype=float) @ self.Q)
        return self._normalized(q, r @ self.R, self.log_scale)

    def __matmul__(self, other):
        if not isinstance(other, ScaledProduct):
            return NotImplemented
        q, r = qr_pos(self.R @ other.Q)
        return self._normalized(self.Q @ q, r @ other.R, self.log_scale + other.log_scale)

    def inverse(self):
        q, r = qr_pos(np.linalg.solve(self.R, self.Q.T))
        return self._normalized(q, r, -self.log_scale)


def accumulate(mats, reortho_every=1, d=None):
    """``mats[-1] @ ... @ mats[0]`` as a :class:`ScaledProduct`."""
    if d is None:
        d = mats[0].shape[0]
    W = np.eye(d)
    R = np.eye(d)
    s = 0.0
    n = len(mats)
    for i in range(n):
        W = mats[i] @ W
        if (i + 1) % reortho_every == 0 or i == n - 1:
            q, r = qr_pos(W)
            R = r @ R
            c = float(np.linalg.norm(R))
            R /= c
            s += math.log(c)
            W = q
    return ScaledProduct(W, R, s)


# ---------------------------------------------------------------------------
# scalar fields used by ground truths and smooth cocycles

@dataclass(frozen=True)
class TrigTerm:
    """``amp * trig(2 pi freq . x)``; with ``power != 1`` the term is ``amp * |trig|^power``."""
    freq: tuple
    amp: float
    phase: str = "sin"
    power: float = 1.0

    def __call__(self, pts):
        arg = 2 * np.pi * (pts @ np.asarray(self.freq, dtype=float))
        v = np.sin(arg) if self.phase == "sin" else np.cos(arg)
        if self.power != 1.0:
            v = np.abs(v) ** self.power
        return self.amp * v


def _field(terms, pts):
    out = np.zeros(pts.shape[0])
    for t in terms:
        out = out + t(pts)
    return out


def _rotations(theta):
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def rotation(theta):
    return _rotations(np.asarray(theta, dtype=float))


# ---------------------------------------------------------------------------
# ground-truth transfer maps

class RotationTransfer:
    """``P(x) = R(theta(x)) diag(e^phi(x), e^-phi(x))`` on the 2-torus."""

    def __init__(self, angle_terms, stretch_terms=(), holder_exponent=None):
        self.angle_terms = tuple(angle_terms)
        self.stretch_terms = tuple(stretch_terms)
        powers = [t.power for t in self.angle_terms + self.stretch_terms]
        self.holder_exponent = holder_exponent if holder_exponent is not None else min([1.0] + powers)
        self.dimension = 2
        smax = sum(abs(t.amp) for t in self.stretch_terms)
        self.bound = math.exp(smax)

    def evaluate_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        P = _rotations(_field(self.angle_terms, pts))
        if self.stretch_terms:
            phi = _field(self.stretch_terms, pts)
            P[..., :, 0] *= np.exp(phi)[:, None]
            P[..., :, 1] *= np.exp(-phi)[:, None]
        return P

    def __call__(self, x):
        return self.evaluate_many(np.asarray(x, dtype=float)[None, :])[0]


class CylinderTransfer:
    """``P(x)`` determined by the symbols ``x_{-r} .. x_r`` on a full shift."""

    def __init__(self, radius, table, alphabet, default=None):
        self.radius = int(radius)
        self.alphabet = int(alphabet)
        self.lookup, self.dimension = _word_lookup(table, 2 * self.radius + 1, alphabet, default)
        self.holder_exponent = 1.0
        norms = [np.linalg.norm(M, 2) for M in self.lookup]
        inorms = [np.linalg.norm(np.linalg.inv(M), 2) for M in self.lookup]
        self.bound = float(max(max(norms), max(inorms)))

    def values_on_symbols(self, sym):
        """``P`` at each point whose window ``x_{-r..r}`` is a row of ``sym`` windows."""
        codes = _window_codes(sym, 2 * self.radius + 1, self.alphabet)
        return self.lookup[codes]

    def __call__(self, x):
        r = self.radius
        return self.values_on_symbols(x.symbols(-r, r + 1))[0]

    def evaluate_many(self, pts):
        return np.stack([self(p) for p in pts])


def _word_lookup(table, length, alphabet, default):
    d = None
    for M in list(table.values()) + ([default] if default is not None else []):
        d = np.asarray(M).shape[0]
        break
    n_words = alphabet ** length
    lookup = np.full((n_words, d, d), np.nan)
    if default is not None:
        lookup[:] = np.asarray(default, dtype=float)
    for word, M in table.items():
        word = tuple(int(a) for a in word)
        if len(word) != length:
            raise ValueError(f"table word {word} must have length {length}")
        code = 0
        for a in word:
            code = code * alphabet + a
        lookup[code] = np.asarray(M, dtype=float)
    if np.isnan(lookup).any():
        raise ValueError("table does not cover every word; supply a default matrix")
    return lookup, d


def _window_codes(sym, length, alphabet):
    w = sliding_window_view(np.asarray(sym, dtype=np.int64), length)
    powers = alphabet ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return w @ powers


# ---------------------------------------------------------------------------
# cocycles

class CocycleMap:
    """A Hölder map ``A: M -> GL(d, R)`` over a base system.

    Subclasses implement :meth:`_orbit_values`, returning ``A(f^j x)`` for
    ``j`` in ``[start, stop)``.
    """

    variant = "abstract"

    def __init__(self, dimension, alpha, system=None, cond_bound=DEFAULT_COND_BOUND):
        if not 0 < alpha <= 1:
            raise ValueError("holder exponent must lie in (0, 1]")
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self.system = system
        self.cond_bound = float(cond_bound)

    def _check(self, mats):
        cond = np.linalg.cond(mats)
        bad = ~(cond <= self.cond_bound)
        if np.any(bad):
            raise IllConditioned(f"condition number {float(np.max(cond)):.3g} exceeds {self.cond_bound:.3g}")
        return mats

    def along_orbit(self, system, x, start, stop):
        """Array of ``A(f^j x)`` for ``j`` in ``[start, stop)``."""
        if stop <= start:
            return np.zeros((0, self.dimension, self.dimension))
        return self._check(self._orbit_values(system, x, start, stop))

    def evaluate(self, x, system=None):
        return self.along_orbit(system or self.system, x, 0, 1)[0]

    def evaluate_many(self, system, points):
        """``A`` at each of a batch of points (no orbit structure assumed)."""
        return self._check(np.stack([self._orbit_values(system, p, 0, 1)[0] for p in points]))

    def sup_log_norm(self, system, samples):
        vals = [self.along_orbit(system, x, 0, 64) for x in samples]
        mats = np.concatenate(vals)
        s = np.linalg.svd(mats, compute_uv=False)
        return float(max(np.max(np.log(s[:, 0])), np.max(-np.log(s[:, -1]))))


class ConstantCocycle(CocycleMap):
    variant = "constant"

    def __init__(self, matrix, system=None, alpha=1.0, **kw):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        super().__init__(self.matrix.shape[0], alpha, system, **kw)
        self._check(self.matrix[None])

    def _orbit_values(self, system, x, start, stop):
        return np.broadcast_to(self.matrix, (stop - start,) + self.matrix.shape).copy()

    def evaluate_many(self, system, points):
        return np.broadcast_to(self.matrix, (len(points),) + self.matrix.shape).copy()


class CoboundaryCocycle(CocycleMap):
    """``A(x) = P(f x) P(x)^-1`` for a closed-form transfer map ``P``."""

    variant = "coboundary_generated"

    def __init__(self, transfer, system, alpha=None, **kw):
        self.transfer = transfer
        alpha = transfer.holder_exponent if alpha is None else alpha
        super().__init__(transfer.dimension, alpha, system, **kw)

    def transfer_along_orbit(self, system, x, start, stop):
        if system.kind == "torus":
            return self.transfer.evaluate_many(system.orbit(x, start, stop))
        r = self.transfer.radius
        return self.transfer.values_on_symbols(x.symbols(start - r, stop + r))

    def _orbit_values(self, system, x, start, stop):
        P = self.transfer_along_orbit(system, x, start, stop + 1)
        return np.linalg.solve(np.swapaxes(P[:-1], -1, -2), np.swapaxes(P[1:], -1, -2)).swapaxes(-1, -2)

    def evaluate_many(self, system, points):
        if system.kind == "torus":
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            P0 = self.transfer.evaluate_many(pts)
            P1 = self.transfer.evaluate_many(system.iterate(pts, 1))
            return self._check(np.linalg.solve(np.swapaxes(P0, -1, -2), np.swapaxes(P1, -1, -2)).swapaxes(-1, -2))
        return super().evaluate_many(system, points)


class LocallyConstantCocycle(CocycleMap):
    """``A(x)`` read from a table indexed by the word ``x_{-m} .. x_m``."""

    variant = "locally_constant"

    def __init__(self, depth, table, alphabet, system=None, default=None, alpha=1.0, **kw):
        self.depth = int(depth)
        self.alphabet = int(alphabet)
        self.lookup, d = _word_lookup(table, 2 * self.depth + 1, alphabet, default)
        super().__init__(d, alpha, system, **kw)
        self._check(self.lookup)

    def _orbit_values(self, system, x, start, stop):
        m = self.depth
        codes = _window_codes(x.symbols(start - m, stop + m), 2 * m + 1, self.alphabet)
        return self.lookup[codes]


class TorusSmoothCocycle(CocycleMap):
    """``A(x) = B + sum_k cos(2 pi k.x) C_k + sin(2 pi k.x) S_k`` on a torus."""

    variant = "torus_smooth"

    def __init__(self, base, terms, system=None, alpha=1.0, **kw):
        self.base = np.asarray(base, dtype=float)
        self.terms = [(np.asarray(f, dtype=float),
                       np.asarray(c if c is not None else np.zeros_like(self.base), dtype=float),
                       np.asarray(s if s is not None else np.zeros_like(self.base), dtype=float))
                      for f, c, s in terms]
        super().__init__(self.base.shape[0], alpha, system, **kw)

    def values_at(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.broadcast_to(self.base, (pts.shape[0],) + self.base.shape).copy()
        for f, C, S in self.terms:
            arg = 2 * np.pi * (pts @ f)
            out += np.cos(arg)[:, None, None] * C + np.sin(arg)[:, None, None] * S
        return out

    def _orbit_values(self, system, x, start, stop):
        return self.values_at(system.orbit(x, start, stop))

    def evaluate_many(self, system, points):
        return self._check(self.values_at(points))


def evaluate(A, x, system=None):
    return A.evaluate(x, system)


# ---------------------------------------------------------------------------
# products

DEFAULT_PRODUCT_BUDGET = 10 ** 7


def product(A, system, x, n, budget=DEFAULT_PRODUCT_BUDGET, reortho_every=1):
    """``A^n(x)`` as a :class:`ScaledProduct` (``n`` may be negative)."""
    n = int(n)
    if abs(n) > budget:
        raise BudgetExceeded(f"|n| = {abs(n)} exceeds product budget {budget}")
    d = A.dimension
    if n == 0:
        return ScaledProduct.identity(d)
    if n > 0:
        return accumulate(A.along_orbit(system, x, 0, n), reortho_every, d)
    mats = A.along_orbit(system, x, n, 0)[::-1]
    return accumulate(np.linalg.inv(mats), reortho_every, d)


# ---------------------------------------------------------------------------
# Lyapunov spectrum

@dataclass
class LyapunovSpectrum:
    exponents: list
    multiplicities: list
    n_iters: int
    drift: list
    converged: bool
    raw_exponents: list = field(default_factory=list)
    resolution: float = 0.0

    @property
    def top(self):
        return self.exponents[0]

    @property
    def bottom(self):
        return self.exponents[-1]

    def block_exponents(self):
        """One exponent per dimension, in block order (useful for weighting)."""
        return [lam for lam, m in zip(self.exponents, self.multiplicities) for _ in range(m)]


def _log_r_diagonals(mats):
    """Per-step ``log r_ii`` of the QR iteration along ``mats``."""
    n, d, _ = mats.shape
    out = np.empty((n, d))
    if d == 2:
        # explicit 2x2 Householder-free step; q2 is the exact orthogonal complement of q1
        m = mats.reshape(n, 4).tolist()
        q00, q10, q01, q11 = 1.0, 0.0, 0.0, 1.0
        hyp, log = math.hypot, math.log
        for i in range(n):
            a, b, c, e = m[i]
            w00 = a * q00 + b * q10
            w10 = c * q00 + e * q10
            w01 = a * q01 + b * q11
            w11 = c * q01 + e * q11
            r11 = hyp(w00, w10)
            q00, q10 = w00 / r11, w10 / r11
            q01, q11 = -q10, q00
            r22 = q01 * w01 + q11 * w11
            if r22 < 0:
                q01, q11, r22 = -q01, -q11, -r22
            out[i, 0] = log(r11)
            out[i, 1] = log(r22)
        return out
    Q = np.eye(d)
    for i in range(n):
        Q, r = qr_pos(mats[i] @ Q)
        out[i] = np.log(np.abs(np.diagonal(r)))
    return out


def merge_exponents(raw, resolution):
    order = np.argsort(raw)[::-1]
    vals = np.asarray(raw)[order]
    groups = [[vals[0]]]
    for v in vals[1:]:
        if groups[-1][-1] - v < resolution:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [float(np.mean(g)) for g in groups], [len(g) for g in groups]


def lyapunov_spectrum(A, system, x, n_iters=10 ** 4, resolution=None, drift_tol=None):
    """Lyapunov exponents at ``x`` by QR iteration over ``n_iters`` steps.

    Exponents closer than ``resolution`` (default ``10 / n_iters``) are
    merged into one block. ``converged`` is False when the running average
    moved by more than ``drift_tol`` over the final 10% of the run.
    """
    if n_iters < 1000:
        raise ValueError("n_iters must be at least 1000")
    resolution = 10.0 / n_iters if resolution is None else resolution
    drift_tol = resolution if drift_tol is None else drift_tol
    logs = _log_r_diagonals(A.along_orbit(system, x, 0, n_iters))
    cums = np.cumsum(logs, axis=0)
    n_early = int(0.9 * n_iters)
    raw = cums[-1] / n_iters
    early = cums[n_early - 1] / n_early
    drift = np.abs(raw - early)
    exps, mults = merge_exponents(raw, resolution)
    order = np.argsort(raw)[::-1]
    return LyapunovSpectrum(exps, mults, n_iters, drift[order].tolist(),
                            bool(np.max(drift) <= drift_tol), raw[order].tolist(), resolution)


# ---------------------------------------------------------------------------
# Oseledets splitting

@dataclass
class OseledetsFrame:
    point: object
    blocks: list
    exponents: list
    multiplicities: list
    # smallest singular value of the assembled basis; near 0 means the blocks nearly collapse
    span_sigma_min: float = 1.0
    equivariance_error: float | None = None

    @property
    def basis(self):
        return np.hstack(self.blocks)

    @property
    def degenerate(self):
        return len(self.blocks) == 1


def _generic_frame(d):
    # a fixed frame in general position, so no column starts inside an invariant subspace
    q, _ = qr_pos(np.random.default_rng(12345).standard_normal((d, d)))
    return q


def _propagate_frame(mats, d):
    Q = _generic_frame(d)
    for m in mats:
        Q, _ = qr_pos(m @ Q)
    return Q


def _intersect(F, S):
    d = F.shape[0]
    k = F.shape[1] + S.shape[1] - d
    _, _, vt = np.linalg.svd(np.hstack([F, -S]))
    coeff = vt[-k:].T
    E, _ = np.linalg.qr(F @ coeff[: F.shape[1]])
    return E


def _orient(E):
    """Fix the sign of each column so the largest entry is positive."""
    idx = np.argmax(np.abs(E), axis=0)
    return E * np.sign(E[idx, np.arange(E.shape[1])])


def oseledets_splitting(A, system, x, n=200, spectrum=None, equivariance=True):
    """Oseledets blocks at ``x`` as fast-filtration ∩ slow-filtration."""
    d = A.dimension
    if spectrum is None:
        spectrum = lyapunov_spectrum(A, system, x, max(1000, 10 * n))
    mults = spectrum.multiplicities
    if len(mults) == 1:
        return OseledetsFrame(x, [np.eye(d)], list(spectrum.exponents), list(mults), 1.0,
                              0.0 if equivariance else None)
    past = A.along_orbit(system, x, -n, 0)
    fast = _propagate_frame(past, d)
    future = A.along_orbit(system, x, 0, n)
    slow = _propagate_frame(np.linalg.inv(future[::-1]), d)
    blocks = []
    cum = np.cumsum([0] + list(mults))
    for i in range(len(mults)):
        blocks.append(_orient(_intersect(fast[:, : cum[i + 1]], slow[:, : d - cum[i]])))
    sigma = float(np.linalg.svd(np.hstack(blocks), compute_uv=False)[-1])
    frame = OseledetsFrame(x, blocks, list(spectrum.exponents), list(mults), sigma)
    if equivariance:
        fx = system.iterate(x, 1)
        nxt = oseledets_splitting(A, system, fx, n, spectrum, equivariance=False)
        frame.equivariance_error = equivariance_error(A.evaluate(x, system), frame, nxt)
    return frame


def equivariance_error(Ax, frame_x, frame_fx):
    """Largest off-block component of ``A(x) E^i_x`` in the frame at ``f(x)``, relative to ``|A(x)|``."""
    coords = np.linalg.solve(frame_fx.basis, Ax @ frame_x.basis)
    cum = np.cumsum([0] + [b.shape[1] for b in frame_x.blocks])
    worst = 0.0
    for i in range(len(frame_x.blocks)):
        for j in range(len(frame_fx.blocks)):
            if i != j:
                blk = coords[cum[j]:cum[j + 1], cum[i]:cum[i + 1]]
                proj = frame_fx.blocks[j] @ blk
                worst = max(worst, float(np.linalg.norm(proj, 2)))
    return worst / float(np.linalg.norm(Ax, 2))


# ---------------------------------------------------------------------------
# zero-exponent screen

@dataclass
class ZeroExponentReport:
    max_abs_top: float
    max_abs_bottom: float
    threshold: float
    passed: bool
    spectra: list = field(default_factory=list)

    @property
    def worst(self):
        return max(self.max_abs_top, self.max_abs_bottom)


def zero_exponent_check(A, system, samples, n_iters=10 ** 4, base_threshold=1e-3):
    """Necessary-condition screen: extreme exponents must vanish at every sample."""
    spectra = [lyapunov_spectrum(A, system, x, n_iters) for x in samples]
    top = max(abs(s.raw_exponents[0]) for s in spectra)
    bottom = max(abs(s.raw_exponents[-1]) for s in spectra)
    thr = base_threshold * max(1.0, A.sup_log_norm(system, samples[:4]))
    return ZeroExponentReport(top, bottom, thr, bool(max(top, bottom) <= thr), spectra)
