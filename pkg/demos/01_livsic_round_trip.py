"""
Recovering a transfer map from a coboundary
===========================================

Start from a known ``P`` on the cat-map torus, form ``A(x) = P(fx) P(x)^-1``
and rebuild ``P`` from ``A`` alone along one long orbit.
"""

import numpy as np

from cocycle_lab import testbeds
from cocycle_lab.base_dynamics import cat_map
from cocycle_lab.livsic import (build_transfer, choose_anchor, extend_transfer, ground_truth,
                                obstruction_audit, uniqueness_residual)

T = cat_map()
A = testbeds.cat_coboundary(T)

# every periodic orbit carries trivial data
audit = obstruction_audit(A, T, 5)
print("periodic orbits checked:", audit.count, " worst |A^n(p) - I|:", audit.max_defect)

# the table only needs A, a generic starting point and the recursion P(fx) = A(x) P(x)
n = 20000
x0 = choose_anchor(T, seed=1, horizon=n)
table = build_transfer(A, T, x0, n, epsilon=0.05 * A.alpha * T.leaf_rate, N=20)
print("entries:", len(table), " admitted fraction:", round(table.G_fraction, 4))

# the rebuilt P agrees with the true one up to a constant right factor
P = ground_truth(A)
print("uniqueness residual:", uniqueness_residual(table, P))

# off the orbit, P comes from a nearby admitted entry; the error is of order the distance
q = np.array([0.25, 0.5])
ext = extend_transfer(table, q)
err = np.linalg.norm(ext.matrix @ np.linalg.inv(table.matrix(0)) - P(q) @ np.linalg.inv(P(x0)), 2)
print("extension at", q, "used entry", ext.neighbor, "at distance", round(ext.distance, 5), "error", err)
