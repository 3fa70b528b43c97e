"""Concrete uniformly hyperbolic base systems.

Two testbeds are provided:

* :class:`TorusAutomorphism` -- ``x -> M x mod 1`` on ``T^k`` for an integer
  hyperbolic matrix ``M`` with ``|det M| = 1``.  Points are float arrays with
  coordinates in ``[0, 1)``.  Measure samples are drawn on the dyadic grid
  ``2^-30 Z^k``; the map sends that grid to itself and every step is then
  exact in double precision, so sampled orbits are true orbits.
* :class:`FullShift` -- the two-sided shift on ``k`` symbols with metric
  ``2^-min{|n| : x_n != y_n}``.  Points are :class:`SymbolSequence`.

Both classes publish explicit closing-lemma constants ``(C, eta)`` with
``beta(h) = h / (2 C)``, leaf-contraction constants ``(C, tau)`` and a
bracket radius.  The module-level functions are thin wrappers around the
methods.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .errors import (EnumerationBudgetExceeded, LeafRadiusExceeded, NotRecurrent,
                     PointsTooFar, SingularLattice)
from .symbolic import SymbolSequence

LATTICE_BITS = 30


# ---------------------------------------------------------------------------
# exact integer helpers

def _int_matmul(A, B):
    return [[sum(A[i][t] * B[t][j] for t in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def _int_matpow(M, n):
    k = len(M)
    result = [[int(i == j) for j in range(k)] for i in range(k)]
    base = [list(row) for row in M]
    while n > 0:
        if n & 1:
            result = _int_matmul(result, base)
        base = _int_matmul(base, base)
        n >>= 1
    return result


def _frac_solve(A, b):
    """Solve ``A x = b`` exactly over the rationals."""
    k = len(A)
    aug = [[Fraction(v) for v in A[i]] + [Fraction(b[i])] for i in range(k)]
    for col in range(k):
        piv = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularLattice("M^n - I is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        for r in range(k):
            if r != col and aug[r][col] != 0:
                f = aug[r][col] / aug[col][col]
                aug[r] = [a - f * c for a, c in zip(aug[r], aug[col])]
    return [aug[i][k] / aug[i][i] for i in range(k)]


def smith_diagonalize(B):
    """Return ``(s, U, V)`` with ``U B V = diag(s)`` and ``U, V`` unimodular.

    The divisibility chain of the true Smith form is not enforced; any
    integer diagonalization suffices to enumerate ``B^-1 Z^k / Z^k``.
    """
    A = [[int(v) for v in row] for row in B]
    k = len(A)
    U = [[int(i == j) for j in range(k)] for i in range(k)]
    V = [[int(i == j) for j in range(k)] for i in range(k)]
    for t in range(k):
        while True:
            cands = [(abs(A[i][j]), i, j) for i in range(t, k) for j in range(t, k) if A[i][j]]
            if not cands:
                break
            _, i, j = min(cands)
            A[t], A[i] = A[i], A[t]
            U[t], U[i] = U[i], U[t]
            for row in A:
                row[t], row[j] = row[j], row[t]
            for row in V:
                row[t], row[j] = row[j], row[t]
            p = A[t][t]
            clean = True
            for i in range(t + 1, k):
                q = A[i][t] // p
                if q:
                    A[i] = [a - q * c for a, c in zip(A[i], A[t])]
                    U[i] = [a - q * c for a, c in zip(U[i], U[t])]
                clean &= A[i][t] == 0
            for j in range(t + 1, k):
                q = A[t][j] // p
                if q:
                    for row in A:
                        row[j] -= q * row[t]
                    for row in V:
                        row[j] -= q * row[t]
                clean &= A[t][j] == 0
            if clean:
                break
        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]
    return [A[i][i] for i in range(k)], U, V


def _wrap(d):
    return d - np.round(d)


# ---------------------------------------------------------------------------
# result types

@dataclass(frozen=True)
class PeriodicOrbit:
    """A point of ``Fix(f^period)``.

    On the torus the point is also held exactly as ``numerators / denominator``
    so its orbit can be regenerated without rounding drift.
    """
    base_point: object
    period: int
    numerators: tuple | None = None
    denominator: int | None = None

    def orbit(self, system):
        """The ``period`` points ``p, f(p), ...`` (exactly rounded on the torus)."""
        if self.numerators is None:
            return [system.iterate(self.base_point, j) for j in range(self.period)]
        return system.exact_orbit(self.numerators, self.denominator, self.period)


@dataclass
class ShadowResult:
    periodic_point: PeriodicOrbit
    period: int
    bound_constant: float
    rate: float
    h: float
    per_step_distances: list = field(default_factory=list)

    def bounds(self):
        n = self.period
        i = np.arange(n + 1)
        return self.h * self.bound_constant * np.exp(-self.rate * np.minimum(i, n - i))

    def bound_holds(self, slack=1e-12):
        return bool(np.all(np.asarray(self.per_step_distances) <= self.bounds() * (1 + slack) + 1e-15))

    def fitted_rate(self, floor=1e-13):
        """Largest ``eta`` for which the per-step bound still holds with this ``C``.

        Steps whose distance is below ``floor`` (rounding level) or with
        ``min(i, n-i) = 0`` carry no rate information and are skipped.
        """
        n = self.period
        d = np.asarray(self.per_step_distances)
        i = np.arange(n + 1)
        m = np.minimum(i, n - i)
        ok = (m > 0) & (d > floor)
        if not np.any(ok):
            return math.inf
        return float(np.min(np.log(self.h * self.bound_constant / d[ok]) / m[ok]))


# ---------------------------------------------------------------------------
# torus

class TorusAutomorphism:
    """Hyperbolic toral automorphism ``x -> M x mod 1``."""

    kind = "torus"

    def __init__(self, matrix, leaf_radius=0.05, bracket_radius=0.05,
                 max_period=14, max_points=2_000_000):
        M = np.asarray(matrix)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("torus matrix must be square")
        if not np.all(np.equal(np.mod(M, 1), 0)):
            raise ValueError("torus matrix must have integer entries")
        self.matrix = M.astype(np.int64)
        self.dim = M.shape[0]
        self._M = [[int(v) for v in row] for row in self.matrix]
        det = round(np.linalg.det(self.matrix.astype(float)))
        if abs(det) != 1:
            raise ValueError("torus matrix must have |det| = 1")
        inv = np.round(np.linalg.inv(self.matrix.astype(float))).astype(np.int64)
        if not np.array_equal(self.matrix @ inv, np.eye(self.dim, dtype=np.int64)):
            raise ValueError("torus matrix is not invertible over the integers")
        self.inverse = inv
        self._Minv = [[int(v) for v in row] for row in inv]
        self._Mf = self.matrix.astype(float)
        self._Minvf = inv.astype(float)

        vals, vecs = np.linalg.eig(self._Mf)
        if np.any(np.abs(vals.imag) > 1e-12):
            raise ValueError("only torus matrices with real spectrum are supported")
        vals = vals.real
        vecs = vecs.real
        if np.any(np.abs(np.abs(vals) - 1) < 1e-12):
            raise ValueError("torus matrix is not hyperbolic")
        for j in range(self.dim):
            v = vecs[:, j] / np.linalg.norm(vecs[:, j])
            first = v[np.nonzero(np.abs(v) > 1e-14)[0][0]]
            vecs[:, j] = v * np.sign(first)
        uns = np.abs(vals) > 1
        order_u = np.argsort(np.abs(vals[uns]))
        order_s = np.argsort(-np.abs(vals[~uns]))
        self.unstable_eigenvalues = vals[uns][order_u]
        self.stable_eigenvalues = vals[~uns][order_s]
        self.unstable_basis = vecs[:, uns][:, order_u]
        self.stable_basis = vecs[:, ~uns][:, order_s]
        self.expansion = float(np.min(np.abs(self.unstable_eigenvalues)))
        self.contraction = float(np.max(np.abs(self.stable_eigenvalues)))
        self.eta = min(math.log(self.expansion), -math.log(self.contraction))

        self.eigenbasis = np.hstack([self.stable_basis, self.unstable_basis])
        self._eig_inv = np.linalg.inv(self.eigenbasis)
        self.n_stable = self.stable_basis.shape[1]
        # |delta_i| <= sqrt(k) |E^-1| |r| (e^{-eta i} + e^{-eta (n-i)}) / (1 - e^{-eta})
        self.shadow_constant = (math.sqrt(self.dim) * np.linalg.norm(self._eig_inv, 2)
                                / (1.0 - math.exp(-self.eta)))

        def _leaf_c(E):
            return float(np.linalg.norm(E, 2) * np.linalg.norm(np.linalg.pinv(E), 2))

        self.leaf_constant = max(_leaf_c(self.stable_basis), _leaf_c(self.unstable_basis))
        self.leaf_rate = self.eta
        self.metric = "flat quotient: min over integer translates of the Euclidean distance"
        self.leaf_radius = float(leaf_radius)
        self.bracket_radius = float(bracket_radius)
        self.max_period = int(max_period)
        self.max_points = int(max_points)

    def __repr__(self):
        return f"TorusAutomorphism({self.matrix.tolist()})"

    # -- dynamics -----------------------------------------------------------
    def _step(self, x, forward=True):
        M = self._Mf if forward else self._Minvf
        k = self.dim
        cols = [x[..., j] for j in range(k)]
        out = np.empty_like(x)
        for i in range(k):
            acc = M[i, 0] * cols[0]
            for j in range(1, k):
                acc = acc + M[i, j] * cols[j]
            out[..., i] = acc
        return np.mod(out, 1.0)

    def iterate(self, x, n):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        for _ in range(abs(int(n))):
            x = self._step(x, n > 0)
        return x

    def _float_orbit(self, x, count, forward=True):
        """``count`` further points of a single orbit with Python floats.

        Performs the same IEEE operations in the same order as :meth:`_step`,
        so the result is bit-identical to stepping with numpy.
        """
        M = (self._Mf if forward else self._Minvf).tolist()
        k = self.dim
        cur = [float(v) for v in x]
        out = [None] * count
        rk = range(k)
        for j in range(count):
            nxt = []
            for i in rk:
                row = M[i]
                acc = row[0] * cur[0]
                for t in range(1, k):
                    acc = acc + row[t] * cur[t]
                nxt.append(acc % 1.0)
            cur = nxt
            out[j] = cur
        return out

    def orbit(self, x, start, stop):
        """Array of ``f^j(x)`` for ``j`` in ``[start, stop)``, iterated step by step."""
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.empty((stop - start, self.dim))
        if stop > 0:
            first = max(start, 0)
            cur = self.iterate(x, first) if first > 0 else x
            rows = [cur.tolist()] + self._float_orbit(cur, stop - first - 1)
            out[first - start:] = rows
        if start < 0:
            rows = self._float_orbit(x, -start, forward=False)
            hi = min(stop, 0)
            # rows[i] is f^{-(i+1)} x
            for j in range(start, hi):
                out[j - start] = rows[-j - 1]
        return out

    def wrap(self, d):
        return _wrap(np.asarray(d, dtype=float))

    def distance(self, a, b):
        d = self.wrap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        return np.sqrt(np.sum(d * d, axis=-1))

    def same_point(self, a, b):
        return bool(self.distance(a, b) == 0.0)

    # -- periodic points ----------------------------------------------------
    def periodic_count(self, n):
        B = _int_matpow(self._M, n)
        for i in range(self.dim):
            B[i][i] -= 1
        return abs(round(float(np.linalg.det(np.array(B, dtype=float))))) if self.dim > 2 else \
            abs(B[0][0] * B[1][1] - B[0][1] * B[1][0])

    def periodic_lattice(self, n):
        """All of ``Fix(f^n)`` as ``(numerators, denominator)``, exactly."""
        if n < 1:
            raise ValueError("period must be positive")
        if n > self.max_period:
            raise EnumerationBudgetExceeded(f"period {n} exceeds max_period={self.max_period}")
        B = _int_matpow(self._M, n)
        for i in range(self.dim):
            B[i][i] -= 1
        s, _U, V = smith_diagonalize(B)
        if any(v == 0 for v in s):
            raise SingularLattice("M^n - I is singular; M is not hyperbolic")
        count = math.prod(s)
        if count > self.max_points:
            raise EnumerationBudgetExceeded(f"|Fix(f^{n})| = {count} exceeds max_points")
        L = math.lcm(*s)
        Vm = [[v % L for v in row] for row in V]
        grids = np.meshgrid(*[np.arange(si, dtype=np.int64) * (L // si) for si in s], indexing="ij")
        y = np.stack([g.ravel() for g in grids], axis=1)
        if L < 2 ** 30:
            num = (y @ np.array(Vm, dtype=np.int64).T) % L
        else:
            num = np.array([[sum(Vm[i][t] * int(row[t]) for t in range(self.dim)) % L
                             for i in range(self.dim)] for row in y], dtype=object)
        order = np.lexsort(num.T[::-1].astype(np.int64)) if L < 2 ** 62 else np.arange(len(num))
        return num[order], L

    def exact_orbit(self, numerators, denominator, length):
        """Orbit of the rational point ``numerators / denominator``, rounded once per point."""
        L = int(denominator)
        cur = [int(v) % L for v in numerators]
        out = np.empty((length, self.dim))
        for j in range(length):
            out[j] = [c / L for c in cur]
            cur = [sum(self._M[i][t] * cur[t] for t in range(self.dim)) % L for i in range(self.dim)]
        return out

    def exact_orbits(self, num, L, length):
        """Batched :meth:`exact_orbit` for an ``(D, k)`` numerator array."""
        cur = np.asarray(num, dtype=np.int64) % L
        out = np.empty((length,) + cur.shape)
        M = self.matrix
        for j in range(length):
            out[j] = cur / L
            cur = (cur @ M.T) % L
        return out

    def enumerate_periodic(self, n):
        num, L = self.periodic_lattice(n)
        return [PeriodicOrbit(np.array([int(v) / L for v in row]), n,
                              tuple(int(v) for v in row), int(L)) for row in num]

    # -- closing lemma -------------------------------------------------------
    def beta(self, h):
        return h / (2.0 * self.shadow_constant)

    def shadow(self, y, n, h):
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        if n < 1:
            raise ValueError("period must be positive")
        k = self.dim
        yq = [Fraction(float(c)) for c in y]
        Mn = _int_matpow(self._M, n)
        v = [sum(Mn[i][t] * yq[t] for t in range(k)) - yq[i] for i in range(k)]
        kvec = [round(vi) for vi in v]
        r = [float(vi - ki) for vi, ki in zip(v, kvec)]
        ret = math.sqrt(sum(ri * ri for ri in r))
        beta = self.beta(h)
        if not ret < beta:
            raise NotRecurrent(f"d(f^n y, y) = {ret:.3e} is not below beta(h) = {beta:.3e}")
        B = [[Mn[i][j] - int(i == j) for j in range(k)] for i in range(k)]
        p = _frac_solve(B, kvec)
        p = [pi - math.floor(pi) for pi in p]
        D = math.lcm(*[pi.denominator for pi in p])
        nums = tuple(int(pi * D) for pi in p)
        porb = PeriodicOrbit(np.array([float(pi) for pi in p]), n, nums, D)

        dists = []
        cur_y = yq
        cur_p = list(p)
        for _ in range(n + 1):
            diff = [a - b for a, b in zip(cur_y, cur_p)]
            diff = [dd - round(dd) for dd in diff]
            dists.append(math.sqrt(sum(float(dd) ** 2 for dd in diff)))
            cur_y = self._frac_step(cur_y)
            cur_p = self._frac_step(cur_p)
        return ShadowResult(porb, n, self.shadow_constant, self.eta, float(h), dists)

    def _frac_step(self, x):
        out = []
        for i in range(self.dim):
            v = sum(self._M[i][t] * x[t] for t in range(self.dim))
            out.append(v - math.floor(v))
        return out

    # -- leaves and bracket --------------------------------------------------
    def leaf_coordinates(self, x, z):
        """Stable and unstable coordinates of the wrapped displacement ``z - x``."""
        c = self._eig_inv @ self.wrap(np.asarray(z, dtype=float) - np.asarray(x, dtype=float))
        return c[: self.n_stable], c[self.n_stable:]

    def _leaf_point(self, x, s, basis):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if s.shape != (basis.shape[1],):
            raise ValueError(f"leaf parameter must have {basis.shape[1]} entries")
        if np.linalg.norm(s) > self.leaf_radius:
            raise LeafRadiusExceeded(f"|s| = {np.linalg.norm(s):.3g} > {self.leaf_radius}")
        return np.mod(np.asarray(x, dtype=float) + basis @ s, 1.0)

    def local_stable_point(self, x, s):
        return self._leaf_point(x, s, self.stable_basis)

    def local_unstable_point(self, x, s):
        return self._leaf_point(x, s, self.unstable_basis)

    def on_leaf(self, x, z, leaf, tol=1e-11):
        cs, cu = self.leaf_coordinates(x, z)
        off, on = (cu, cs) if leaf == "stable" else (cs, cu)
        return bool(np.linalg.norm(off) <= tol and np.linalg.norm(on) <= self.leaf_radius)

    def leaf_orbits(self, y, z, start, stop, leaf):
        """Orbits of ``y`` and of ``z`` on its local ``leaf``.

        The orbit of ``z`` is generated as ``f^j(y) + M^j (z - y)`` with the
        displacement projected onto the leaf direction, so the transverse
        rounding error of ``z`` is never amplified.
        """
        cs, cu = self.leaf_coordinates(y, z)
        oy = self.orbit(y, start, stop)
        j = np.arange(start, stop)[:, None]
        if leaf == "stable":
            disp = (self.stable_eigenvalues[None, :] ** j * cs[None, :]) @ self.stable_basis.T
        else:
            disp = (self.unstable_eigenvalues[None, :] ** j * cu[None, :]) @ self.unstable_basis.T
        return oy, np.mod(oy + disp, 1.0)

    def bracket(self, z, w):
        """``W^s_loc(z) ∩ W^u_loc(w)`` by a linear solve in the eigenbasis."""
        if not self.distance(z, w) < self.bracket_radius:
            raise PointsTooFar(f"d(z, w) >= bracket radius {self.bracket_radius}")
        delta = self.wrap(np.asarray(w, dtype=float) - np.asarray(z, dtype=float))
        c = self._eig_inv @ delta
        return np.mod(np.asarray(z, dtype=float) + self.stable_basis @ c[: self.n_stable], 1.0)

    def chain_points(self, x, y):
        """Half-bracket chain: ``x1`` on ``W^u(x)``, ``x2`` on ``W^s(y)``, ``x3 = [x1, x2]``."""
        if not self.distance(x, y) < self.bracket_radius / 2:
            raise PointsTooFar("chain endpoints must be closer than half the bracket radius")
        c = self._eig_inv @ self.wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        a, b = c[: self.n_stable], c[self.n_stable:]
        x = np.asarray(x, dtype=float)
        x1 = np.mod(x + self.unstable_basis @ (b / 2), 1.0)
        x2 = np.mod(np.asarray(y, dtype=float) - self.stable_basis @ (a / 2), 1.0)
        x3 = np.mod(x + self.stable_basis @ (a / 2) + self.unstable_basis @ (b / 2), 1.0)
        return x1, x2, x3

    @property
    def chain_constant(self):
        return math.sqrt(self.dim) * float(np.linalg.norm(self._eig_inv, 2))

    # -- measure ------------------------------------------------------------
    def sample(self, seed, count, horizon=0):
        rng = np.random.default_rng(seed)
        grid = rng.integers(0, 2 ** LATTICE_BITS, size=(count, self.dim))
        return grid / float(2 ** LATTICE_BITS)

    def near_pairs(self, points, r):
        """Index pairs ``i < j`` with ``distance < r``."""
        pts = np.mod(np.asarray(points, dtype=float), 1.0)
        pts[pts >= 1.0] = 0.0
        tree = cKDTree(pts, boxsize=1.0)
        pairs = tree.query_pairs(r, output_type="ndarray")
        if pairs.size == 0:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.sort(pairs, axis=1)
        d = self.distance(pts[pairs[:, 0]], pts[pairs[:, 1]])
        pairs = pairs[d < r]
        return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    def nearest(self, points, q):
        pts = np.mod(np.asarray(points, dtype=float), 1.0)
        pts[pts >= 1.0] = 0.0
        d = self.distance(pts, np.asarray(q, dtype=float)[None, :])
        i = int(np.argmin(d))
        return i, float(d[i])


# ---------------------------------------------------------------------------
# full shift

class FullShift:
    """Two-sided full shift on ``alphabet`` symbols, ``(f x)_n = x_{n+1}``."""

    kind = "full_shift"
    dim = None

    def __init__(self, alphabet=2, bracket_radius=1.5, leaf_radius=64,
                 max_period=14, max_points=2_000_000, sample_half_window=64):
        if alphabet < 2:
            raise ValueError("alphabet must have at least two symbols")
        self.alphabet = int(alphabet)
        self.bracket_radius = float(bracket_radius)
        self.leaf_radius = int(leaf_radius)
        self.max_period = int(max_period)
        self.max_points = int(max_points)
        self.sample_half_window = int(sample_half_window)
        self.shadow_constant = 1.0
        self.eta = math.log(2.0)
        self.leaf_constant = 1.0
        self.leaf_rate = math.log(2.0)
        self.metric = "2^-j, j = smallest |i| with x_i != y_i"
        self.chain_constant = 2.0

    def __repr__(self):
        return f"FullShift({self.alphabet})"

    def iterate(self, x, n):
        return x.shifted(int(n))

    def orbit(self, x, start, stop):
        return [x.shifted(j) for j in range(start, stop)]

    def distance(self, a, b):
        m = a.first_difference(b)
        return 0.0 if m is None else 2.0 ** (-m)

    def same_point(self, a, b):
        return a == b

    def periodic_count(self, n):
        return self.alphabet ** n

    def enumerate_periodic(self, n):
        if n < 1:
            raise ValueError("period must be positive")
        if n > self.max_period or self.alphabet ** n > self.max_points:
            raise EnumerationBudgetExceeded(f"period {n} exceeds the enumeration budget")
        return [PeriodicOrbit(SymbolSequence.periodic(w, self.alphabet), n)
                for w in itertools.product(range(self.alphabet), repeat=n)]

    def beta(self, h):
        return h / (2.0 * self.shadow_constant)

    def shadow(self, y, n, h):
        if n < 1:
            raise ValueError("period must be positive")
        ret = self.distance(self.iterate(y, n), y)
        if not ret < self.beta(h):
            raise NotRecurrent(f"d(f^n y, y) = {ret:.3e} is not below beta(h) = {self.beta(h):.3e}")
        p = SymbolSequence.periodic(y.symbols(0, n).tolist(), self.alphabet)
        dists = [self.distance(y.shifted(i), p.shifted(i)) for i in range(n + 1)]
        return ShadowResult(PeriodicOrbit(p, n), n, self.shadow_constant, self.eta, float(h), dists)

    def _check_depth(self, s):
        s = int(s)
        if s < 0 or s > self.leaf_radius:
            raise LeafRadiusExceeded(f"depth {s} outside 0..{self.leaf_radius}")
        return s

    def local_stable_point(self, x, s):
        """Flip coordinate ``-s``; the result agrees with ``x`` at every ``n >= 0``."""
        s = self._check_depth(s)
        if s == 0:
            return x
        return x.with_symbol(-s, (x.symbol(-s) + 1) % self.alphabet)

    def local_unstable_point(self, x, s):
        """Flip coordinate ``s``; the result agrees with ``x`` at every ``n < 0``."""
        s = self._check_depth(s)
        if s == 0:
            return x
        return x.with_symbol(s, (x.symbol(s) + 1) % self.alphabet)

    def on_leaf(self, x, z, leaf, tol=None):
        lo, hi = x._span(z)
        if leaf == "stable":
            a, b = x.symbols(0, max(hi, 1)), z.symbols(0, max(hi, 1))
        else:
            a, b = x.symbols(min(lo, -1), 0), z.symbols(min(lo, -1), 0)
        return bool(np.array_equal(a, b))

    def leaf_orbits(self, y, z, start, stop, leaf):
        return self.orbit(y, start, stop), self.orbit(z, start, stop)

    def bracket(self, z, w):
        """Coordinates ``n >= 0`` from ``z`` and ``n < 0`` from ``w``."""
        if not self.distance(z, w) < self.bracket_radius:
            raise PointsTooFar(f"d(z, w) >= bracket radius {self.bracket_radius}")
        return w.splice(z, 0)

    def chain_points(self, x, y):
        if not self.distance(x, y) < self.bracket_radius / 2:
            raise PointsTooFar("chain endpoints must be closer than half the bracket radius")
        x1 = self.bracket(y, x)
        return x1, y, self.bracket(x1, y)

    def sample(self, seed, count, horizon=0):
        rng = np.random.default_rng(seed)
        W = self.sample_half_window + int(horizon)
        out = []
        for _ in range(count):
            win = rng.integers(0, self.alphabet, size=2 * W + 1)
            left = rng.integers(0, self.alphabet, size=8)
            right = rng.integers(0, self.alphabet, size=8)
            out.append(SymbolSequence.from_window(self.alphabet, -W, win, left, right))
        return out

    def _keys(self, points, J):
        return [tuple(p.symbols(-J, J + 1).tolist()) for p in points]

    def near_pairs(self, points, r):
        if r > 1.0:
            n = len(points)
            i, j = np.triu_indices(n, 1)
            return np.stack([i, j], axis=1).astype(np.int64)
        J = int(math.floor(math.log2(1.0 / r) + 1e-12))
        groups = {}
        for idx, key in enumerate(self._keys(points, J)):
            groups.setdefault(key, []).append(idx)
        pairs = [(a, b) for members in groups.values() if len(members) > 1
                 for a, b in itertools.combinations(members, 2)]
        if not pairs:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.array(sorted(pairs), dtype=np.int64)
        return pairs

    def nearest(self, points, q, depth=64):
        qs = q.symbols(-depth, depth + 1)
        best, best_d = 0, math.inf
        for i, p in enumerate(points):
            diff = np.nonzero(p.symbols(-depth, depth + 1) != qs)[0]
            d = 0.0 if diff.size == 0 else 2.0 ** (-int(np.min(np.abs(diff - depth))))
            if d == 0.0 and not p == q:
                d = self.distance(p, q)
            if d < best_d:
                best, best_d = i, d
        return best, best_d


# ---------------------------------------------------------------------------
# functional interface

def iterate(system, x, n):
    return system.iterate(x, n)


def distance(system, a, b):
    return float(system.distance(a, b))


def enumerate_periodic(system, n):
    return system.enumerate_periodic(n)


def shadow(system, y, n, h):
    return system.shadow(y, n, h)


def local_stable_point(system, x, s):
    return system.local_stable_point(x, s)


def local_unstable_point(system, x, s):
    return system.local_unstable_point(x, s)


def bracket(system, z, w):
    return system.bracket(z, w)


def sample_measure(system, seed, count):
    if count < 1:
        raise ValueError("count must be >= 1")
    return system.sample(seed, count)


def cat_map(**kwargs):
    """The Arnold cat map ``[[2, 1], [1, 1]]``."""
    return TorusAutomorphism([[2, 1], [1, 1]], **kwargs)
