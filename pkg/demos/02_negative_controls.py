"""
Cocycles that are not coboundaries
==================================

Each control breaks one hypothesis and shows up in a different diagnostic.
"""

from cocycle_lab import testbeds
from cocycle_lab.base_dynamics import cat_map
from cocycle_lab.cocycle_core import zero_exponent_check
from cocycle_lab.errors import ZeroExponentCheckFailed
from cocycle_lab.livsic import build_transfer, choose_anchor, near_return_scan, obstruction_audit

T = cat_map()
samples = T.sample(0, 2, 10 ** 4)

# a constant hyperbolic matrix: nonzero exponents, nontrivial fixed-point data
D = testbeds.diagonal_control(T)
zc = zero_exponent_check(D, T, samples)
print("diag(2, 1/2): exponents vanish?", zc.passed, " worst:", round(zc.worst, 6))
print("diag(2, 1/2): fixed-point defect", obstruction_audit(D, T, 1).max_defect)
try:
    build_transfer(D, T, samples[0], 1000, 0.05, 20)
except ZeroExponentCheckFailed as exc:
    print("transfer refused:", exc)

# a constant rotation: exponents vanish, yet the periodic data do not
R = testbeds.rotation_control(0.3, T)
print("R(0.3): exponents vanish?", zero_exponent_check(R, T, samples).passed)
print("R(0.3): fixed-point defect", obstruction_audit(R, T, 1).max_defect)

# and its near-return defects do not shrink with the return distance
n = 20000
tab = build_transfer(R, T, choose_anchor(T, 11, n), n, 0.05, 20)
rep = near_return_scan(R, T, tab, beta=1e-2, h_min=1e-4, seed=0)
print("R(0.3): log-log slope of defect against return distance:", round(rep.slope, 3))

A = testbeds.cat_coboundary(T)
tab = build_transfer(A, T, choose_anchor(T, 11, n), n, 0.05, 20)
rep = near_return_scan(A, T, tab, beta=1e-2, h_min=1e-4, seed=0)
print("coboundary: same slope:", round(rep.slope, 3), " (close to alpha = 1)")
