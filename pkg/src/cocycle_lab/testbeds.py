"""Ready-made systems and cocycles with known answers."""
from __future__ import annotations

import itertools

import numpy as np

from .base_dynamics import FullShift, cat_map
from .cocycle_core import (CoboundaryCocycle, ConstantCocycle, CylinderTransfer, LocallyConstantCocycle,
                           RotationTransfer, TorusSmoothCocycle, TrigTerm, rotation)

DEFAULT_ANGLE = (TrigTerm((1, 0), 0.3),)
DEFAULT_STRETCH = (TrigTerm((0, 1), 0.2),)
ROUGH_ANGLE = (TrigTerm((1, 0), 0.3, "sin", 0.5),)


def rotation_transfer(rough=False):
    """``P(x) = R(theta(x)) diag(e^phi, e^-phi)``; ``theta = 0.3 sin(2 pi x1)`` or its square-root-rough variant."""
    return RotationTransfer(ROUGH_ANGLE if rough else DEFAULT_ANGLE, DEFAULT_STRETCH)


def cat_coboundary(system=None, rough=False):
    system = system or cat_map()
    return CoboundaryCocycle(rotation_transfer(rough), system)


def cat_derivative(system=None):
    system = system or cat_map()
    return ConstantCocycle(system.matrix.astype(float), system)


def diagonal_control(system=None):
    return ConstantCocycle(np.diag([2.0, 0.5]), system)


def rotation_control(angle=0.3, system=None):
    return ConstantCocycle(rotation(angle), system)


def cylinder_transfer(radius=1, alphabet=2, seed=0):
    """A cylinder-constant ``P`` on the shift: a random rotation-stretch per word."""
    rng = np.random.default_rng(seed)
    table = {}
    for w in itertools.product(range(alphabet), repeat=2 * radius + 1):
        th, ph = rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)
        table[w] = rotation(th) @ np.diag([np.exp(ph), np.exp(-ph)])
    return CylinderTransfer(radius, table, alphabet)


def shift_coboundary(system=None, radius=1, seed=0):
    system = system or FullShift()
    return CoboundaryCocycle(cylinder_transfer(radius, system.alphabet, seed), system)


def random_locally_constant(depth, system=None, scale=0.3, seed=0):
    """Depth-``m`` cocycle with an independent random matrix ``I + scale * G`` per word."""
    system = system or FullShift()
    rng = np.random.default_rng(seed)
    d = 2
    table = {w: np.eye(d) + scale * rng.standard_normal((d, d))
             for w in itertools.product(range(system.alphabet), repeat=2 * depth + 1)}
    return LocallyConstantCocycle(depth, table, system.alphabet, system)


def smooth_dominated(system=None, amp=0.05):
    """A torus cocycle close to the identity (so fiber-bunched) that is not a coboundary."""
    system = system or cat_map()
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    D = np.array([[1.0, 0.0], [0.0, -1.0]])
    return TorusSmoothCocycle(np.eye(2), [((1, 0), amp * J, None), ((0, 1), None, amp * D),
                                          ((1, 1), amp * np.array([[0.0, 1.0], [1.0, 0.0]]), None)], system)
