"""The ε-Lyapunov inner product, its comparison constant C_ε, and regular blocks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cocycle_core import (OseledetsFrame, _generic_frame, _orient, lyapunov_spectrum,
                           qr_pos)
from .errors import TailNotCertified

DEFAULT_TRUNCATION = 200
TAIL_FRACTION = 0.1


@dataclass
class LyapunovNormContext:
    point: object
    epsilon: float
    truncation: int
    frame: OseledetsFrame
    block_grams: list
    gram: np.ndarray
    tail_bound: float

    @property
    def dimension(self):
        return self.gram.shape[0]

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.gram)[0])

    @property
    def cholesky(self):
        return np.linalg.cholesky(self.gram)


def _bmm(X, Y):
    """Batched matrix product, written out elementwise for 2x2 stacks."""
    if X.shape[-2:] == (2, 2) and Y.shape[-2:] == (2, 2):
        out = np.empty(np.broadcast_shapes(X.shape, Y.shape))
        a, b, c, d = X[..., 0, 0], X[..., 0, 1], X[..., 1, 0], X[..., 1, 1]
        e, f, g, h = Y[..., 0, 0], Y[..., 0, 1], Y[..., 1, 0], Y[..., 1, 1]
        out[..., 0, 0] = a * e + b * g
        out[..., 0, 1] = a * f + b * h
        out[..., 1, 0] = c * e + d * g
        out[..., 1, 1] = c * f + d * h
        return out
    return X @ Y


def _frob(V):
    return np.sqrt(np.sum(V * V, axis=(-2, -1)))


def _block_sums(M, Minv, off, n, E, lam, eps, N_t, proj=None):
    """Weighted sums ``sum_k e^{-2 eps |k|} W_k^T W_k`` with ``W_k = e^{-lam k} A^k E``.

    ``M[off + j] = A(x_j)`` must be available for ``j`` in ``[-N_t, n + N_t)``.
    ``proj[off + j]``, when given, projects onto the block at ``x_j`` along the
    other blocks; it is applied after every step so rounding errors picked up
    in faster directions cannot grow.  Returns the block Gram matrices (one
    per point) and the tail constant ``K = max_k |W_k| e^{-eps |k| / 2}``.
    """
    G = _bmm(np.swapaxes(E, -1, -2), E)
    K = _frob(E)
    for sign, mats, shift in ((1, M, -1), (-1, Minv, 0)):
        V = E
        scale = math.exp(-sign * lam)
        for k in range(1, N_t + 1):
            lo = off + sign * k + shift
            V = _bmm(mats[lo: lo + n], V) * scale
            if proj is not None:
                at = off + sign * k
                V = _bmm(proj[at: at + n], V)
            G += math.exp(-2 * eps * k) * _bmm(np.swapaxes(V, -1, -2), V)
            K = np.maximum(K, _frob(V) * math.exp(-0.5 * eps * k))
    return G, K


def _projectors(blocks):
    """Oblique projectors onto each block along the others, pointwise."""
    if len(blocks) == 1:
        return [None]
    B = np.concatenate(blocks, axis=-1)
    Binv = np.linalg.inv(B)
    out, c = [], 0
    for E in blocks:
        m = E.shape[-1]
        out.append(E @ Binv[:, c:c + m, :])
        c += m
    return out


def _assemble(block_G, blocks, eps, N_t, K):
    """Full Gram ``d B^{-T} blockdiag(G_i) B^{-1}`` and its truncation tail bound."""
    n, d = blocks[0].shape[0], blocks[0].shape[1]
    B = np.concatenate(blocks, axis=-1)
    Binv = np.linalg.inv(B)
    D = np.zeros((n, d, d))
    c = 0
    for G in block_G:
        m = G.shape[-1]
        D[:, c:c + m, c:c + m] = G
        c += m
    gram = d * (np.swapaxes(Binv, -1, -2) @ D @ Binv)
    gram = 0.5 * (gram + np.swapaxes(gram, -1, -2))
    per_side = K ** 2 * math.exp(-eps * (N_t + 1)) / (1 - math.exp(-eps))
    tail = d * np.linalg.norm(Binv, 2, axis=(-2, -1)) ** 2 * 2 * per_side
    return gram, tail


def _inverses(M):
    return np.linalg.inv(M)


def lyap_gram(A, system, x, epsilon, truncation=DEFAULT_TRUNCATION, spectrum=None,
              burn=100, certify=True):
    """The ε-Lyapunov Gram matrix at ``x`` summed over ``|n| <= truncation``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    N_t = int(truncation)
    if spectrum is None:
        spectrum = lyapunov_spectrum(A, system, x, 10 ** 4)
    win = oseledets_blocks_along(A, system, x, -N_t, N_t + 1, spectrum.multiplicities, burn)
    M = A.along_orbit(system, x, -N_t, N_t)
    Minv = _inverses(M)
    projs = _projectors(win)
    blocks = [np.ascontiguousarray(E[N_t:N_t + 1]) for E in win]
    block_G, Ks = [], []
    for E, lam, P in zip(blocks, spectrum.exponents, projs):
        G, K = _block_sums(M, Minv, N_t, 1, E, lam, epsilon, N_t, P)
        block_G.append(G)
        Ks.append(K)
    gram, tail = _assemble(block_G, blocks, epsilon, N_t, np.max(Ks, axis=0))
    frame = OseledetsFrame(x, [E[0] for E in blocks], list(spectrum.exponents),
                           list(spectrum.multiplicities),
                           float(np.linalg.svd(np.concatenate(blocks, -1)[0], compute_uv=False)[-1]))
    ctx = LyapunovNormContext(x, float(epsilon), N_t, frame, [G[0] for G in block_G], gram[0], float(tail[0]))
    if certify and not ctx.tail_bound < TAIL_FRACTION * ctx.min_eigenvalue:
        raise TailNotCertified(f"tail bound {ctx.tail_bound:.3g} is not below "
                               f"{TAIL_FRACTION} of the smallest Gram eigenvalue; raise the truncation")
    return ctx


def lyap_norm_vector(ctx, u):
    u = np.asarray(u, dtype=float)
    return float(math.sqrt(max(u @ ctx.gram @ u, 0.0)))


def lyap_norm_operator(ctx_x, ctx_y, B):
    """``sup |B u|_y / |u|_x``."""
    if ctx_x.dimension != ctx_y.dimension:
        raise ValueError("contexts have different dimensions")
    Lx = ctx_x.cholesky
    Ly = ctx_y.cholesky
    # |u|_x = |Lx^T u|, so the operator is Ly^T B Lx^{-T}
    X = Ly.T @ np.asarray(B, dtype=float) @ np.linalg.inv(Lx.T)
    return float(np.linalg.norm(X, 2))


def c_epsilon(ctx):
    return float(math.sqrt(np.linalg.eigvalsh(ctx.gram)[-1]))


@dataclass
class Membership:
    member: bool
    c_epsilon: float
    bound: float


def regular_block_membership(A, system, x, epsilon, N, truncation=DEFAULT_TRUNCATION, **kw):
    c = c_epsilon(lyap_gram(A, system, x, epsilon, truncation, **kw))
    return Membership(bool(c <= N), c, float(N))


# ---------------------------------------------------------------------------
# batched evaluation along an orbit

def _frames_along(M, d, backward=False):
    """QR frames propagated through ``M`` (inverses when ``backward``); one frame per step."""
    out = np.empty((len(M) + 1, d, d))
    Q = _generic_frame(d)
    out[0] = Q
    for i in range(len(M)):
        Q, _ = qr_pos((np.linalg.solve(M[i], Q)) if backward else M[i] @ Q)
        out[i + 1] = Q
    return out


@dataclass
class OrbitCEpsilon:
    values: np.ndarray
    tail_bounds: np.ndarray
    min_eigenvalues: np.ndarray
    grams: np.ndarray = None
    blocks: list = None

    @property
    def certified(self):
        return self.tail_bounds < TAIL_FRACTION * self.min_eigenvalues


def oseledets_blocks_along(A, system, x, start, stop, multiplicities, burn=100):
    """Oseledets blocks at ``f^j x`` for ``j`` in ``[start, stop)``, as arrays ``(n, d, m_i)``."""
    d = A.dimension
    n = stop - start
    if len(multiplicities) == 1:
        return [np.broadcast_to(np.eye(d), (n, d, d))]
    M = A.along_orbit(system, x, start - burn, stop + burn)
    fast = _frames_along(M[: burn + n - 1], d)[burn:]
    slow = _frames_along(M[burn:][::-1], d, backward=True)[::-1][:n]
    cum = np.cumsum([0] + list(multiplicities))
    blocks = []
    for i, m in enumerate(multiplicities):
        F = fast[:, :, : cum[i + 1]]
        S = slow[:, :, : d - cum[i]]
        _, _, vt = np.linalg.svd(np.concatenate([F, -S], axis=-1))
        coeff = np.swapaxes(vt[:, -m:, : F.shape[-1]], -1, -2)
        E, _ = np.linalg.qr(F @ coeff)
        blocks.append(np.stack([_orient(e) for e in E]))
    return blocks


def c_epsilon_along_orbit(A, system, x, start, stop, epsilon, truncation=DEFAULT_TRUNCATION,
                          spectrum=None, burn=100):
    """``C_ε(f^j x)`` for every ``j`` in ``[start, stop)`` at once."""
    N_t = int(truncation)
    n = stop - start
    if spectrum is None:
        spectrum = lyapunov_spectrum(A, system, x, 10 ** 4)
    win = oseledets_blocks_along(A, system, x, start - N_t, stop + N_t, spectrum.multiplicities, burn)
    projs = _projectors(win)
    M = A.along_orbit(system, x, start - N_t, stop + N_t)
    Minv = _inverses(M)
    blocks = [np.ascontiguousarray(E[N_t:N_t + n]) for E in win]
    block_G, Ks = [], []
    for E, lam, P in zip(blocks, spectrum.exponents, projs):
        G, K = _block_sums(M, Minv, N_t, n, E, lam, epsilon, N_t, P)
        block_G.append(G)
        Ks.append(K)
    gram, tail = _assemble(block_G, blocks, epsilon, N_t, np.max(Ks, axis=0))
    ev = np.linalg.eigvalsh(gram)
    return OrbitCEpsilon(np.sqrt(ev[:, -1]), tail, ev[:, 0], gram, blocks)
