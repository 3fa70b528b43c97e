"""
Holonomies and the regularity of P
==================================

Holonomies transport fibers along stable and unstable leaves.  Chaining four
of them links any two nearby points, which is how regularity of ``P`` is
inherited from regularity of ``A``.
"""

import numpy as np

from cocycle_lab import testbeds
from cocycle_lab.base_dynamics import cat_map
from cocycle_lab.holonomy import domination_check, holder_estimate, holonomy_chain, stable_holonomy
from cocycle_lab.livsic import build_transfer, choose_anchor

T = cat_map()
A = testbeds.cat_coboundary(T)
P = A.transfer

y = np.array([0.31, 0.62])
print("dominated at y?", domination_check(A, T, y).passed)

# for a coboundary the stable holonomy is P(z) P(y)^-1
z = T.local_stable_point(y, 0.5 * T.leaf_radius)
H = stable_holonomy(A, T, y, z)
print("holonomy steps:", H.n_converged, " error:", np.abs(H.matrix - P(z) @ np.linalg.inv(P(y))).max())

# a u-s-u-s chain carries P(x) to P(w)
w = np.mod(y + [0.004, -0.003], 1.0)
ch = holonomy_chain(A, T, y, w, P(y), P(w))
print("chain error:", ch.error, " length / distance:", round(ch.K_ratio, 4), "<= K =", round(ch.K, 4))

# Hölder exponent of the rebuilt P, for a smooth and a square-root-rough transfer
for rough in (False, True):
    B = testbeds.cat_coboundary(T, rough=rough)
    n = 10 ** 5
    tab = build_transfer(B, T, choose_anchor(T, 7, n), n, 0.05 * B.alpha * T.leaf_rate, 20)
    he = holder_estimate(tab, seed=0)
    print(f"alpha = {B.alpha}: estimated exponent {he.exponent:.3f}")
