"""Strict JSON experiment configuration and the objects it describes.

Every key must appear in :data:`DEFAULTS`; anything else is rejected with
its dotted path.  ``null`` means "derive from the other settings".
"""
from __future__ import annotations

import copy
import json

import numpy as np

from .base_dynamics import FullShift, TorusAutomorphism
from .cocycle_core import (CoboundaryCocycle, ConstantCocycle, CylinderTransfer, LocallyConstantCocycle,
                           RotationTransfer, TorusSmoothCocycle, TrigTerm)
from .errors import ConfigError

REQUIRED = object()
FREE = object()  # a mapping whose keys are data (e.g. words of a lookup table)

DEFAULTS = {
    "seed": REQUIRED,
    "system": {
        "kind": "torus_automorphism",
        "matrix": [[2, 1], [1, 1]],
        "alphabet": 2,
        "leaf_radius": None,
        "bracket_radius": None,
        "max_period": 14,
    },
    "cocycle": {
        "variant": "coboundary_generated",
        "dimension": 2,
        "alpha": None,
        "cond_bound": 1e8,
        "matrix": None,
        "transfer": {
            "kind": "rotation",
            "angle": [{"freq": [1, 0], "amp": 0.3}],
            "stretch": [{"freq": [0, 1], "amp": 0.2}],
            "radius": 1,
            "table": FREE,
            "default": None,
        },
        "depth": 1,
        "table": FREE,
        "default": None,
        "base": None,
        "terms": [],
    },
    "lyapnorm": {"epsilon": None, "truncation": 200, "block_bound_N": 20},
    "spectrum": {"samples": 4, "n_iters": 100000, "zero_threshold": 1e-3},
    "livsic": {
        "n_max": 10,
        "n_points": 100000,
        "beta": None,
        "tolerance": 1e-8,
        "uniqueness_tolerance": 1e-6,
        "h_min": 1e-4,
        "max_return_time": None,
        "override": False,
        "pairs_per_decade": 2000,
        "extend_samples": 20,
        "slope_band": None,
        "measure_thresholds": [0.99, 0.9],
    },
    "holonomy": {
        "N": 4,
        "theta": None,
        "k_max": 25,
        "tol": 1e-10,
        "budget": 200,
        "pairs": 100,
        "pair_budget": 20000,
        "delta": None,
        "h_min": 1e-3,
        "band": None,
        "chains": 100,
    },
    "output": {"directory": "out", "formats": ["json", "csv"]},
    "verify": {"acceptance": False, "expected_fail": []},
}

TERM_KEYS = {"freq": REQUIRED, "amp": REQUIRED, "phase": "sin", "power": 1.0}
SMOOTH_TERM_KEYS = {"freq": REQUIRED, "cos": None, "sin": None}
TOLERANCES = ("livsic.tolerance", "livsic.uniqueness_tolerance", "holonomy.tol", "spectrum.zero_threshold",
              "cocycle.cond_bound", "livsic.h_min", "holonomy.h_min")
CHECK_NAMES = ("zero_exponents", "obstructions", "regular_block_measure", "transfer_uniqueness",
               "near_return_scaling", "holonomy_ground_truth", "holder_regularity", "chain_length")


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object")
    for key in given:
        if key not in defaults:
            raise ConfigError(f"unknown configuration key: {path + key}")
    out = {}
    for key, dv in defaults.items():
        if isinstance(dv, dict):
            out[key] = _merge(dv, given.get(key, {}), path + key + ".")
        elif key not in given:
            if dv is REQUIRED:
                raise ConfigError(f"missing required configuration key: {path + key}")
            out[key] = None if dv is FREE else copy.deepcopy(dv)
        else:
            out[key] = copy.deepcopy(given[key])
    return out


def _get(cfg, dotted):
    v = cfg
    for k in dotted.split("."):
        v = v[k]
    return v


def _terms(raw, path, schema):
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a list of terms")
    return [_merge(schema, t, f"{path}[{i}].") for i, t in enumerate(raw)]


def validate(cfg):
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    for key in TOLERANCES:
        v = _get(cfg, key)
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{key}: must be a positive number")
    eps = cfg["lyapnorm"]["epsilon"]
    if eps is not None and not eps > 0:
        raise ConfigError("lyapnorm.epsilon: must be positive")
    if cfg["system"]["kind"] not in ("torus_automorphism", "full_shift"):
        raise ConfigError("system.kind: expected 'torus_automorphism' or 'full_shift'")
    variants = ("constant", "coboundary_generated", "locally_constant", "torus_smooth")
    if cfg["cocycle"]["variant"] not in variants:
        raise ConfigError(f"cocycle.variant: expected one of {', '.join(variants)}")
    tr = cfg["cocycle"]["transfer"]
    if tr["kind"] not in ("rotation", "cylinder"):
        raise ConfigError("cocycle.transfer.kind: expected 'rotation' or 'cylinder'")
    tr["angle"] = _terms(tr["angle"], "cocycle.transfer.angle", TERM_KEYS)
    tr["stretch"] = _terms(tr["stretch"], "cocycle.transfer.stretch", TERM_KEYS)
    cfg["cocycle"]["terms"] = _terms(cfg["cocycle"]["terms"], "cocycle.terms", SMOOTH_TERM_KEYS)
    for name in cfg["verify"]["expected_fail"]:
        if name not in CHECK_NAMES:
            raise ConfigError(f"verify.expected_fail: unknown check {name!r}")
    alpha = cfg["cocycle"]["alpha"]
    if alpha is not None and not 0 < alpha <= 1:
        raise ConfigError("cocycle.alpha: must lie in (0, 1]")
    for key in ("holonomy.band", "livsic.slope_band"):
        band = _get(cfg, key)
        if band is not None and (len(band) != 2 or not band[0] < band[1]):
            raise ConfigError(f"{key}: expected [low, high] with low < high")
    return cfg


def load_config(source, seed=None):
    """Parse a path, JSON text or dict into a validated, fully populated config."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if seed is not None:
        raw["seed"] = seed
    cfg = _merge(DEFAULTS, raw, "")
    try:
        return validate(cfg)
    except (TypeError, KeyError, IndexError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None


# ---------------------------------------------------------------------------
# building the objects

def build_system(cfg):
    s = cfg["system"]
    try:
        if s["kind"] == "torus_automorphism":
            kw = {k: s[k] for k in ("leaf_radius", "bracket_radius") if s[k] is not None}
            return TorusAutomorphism(s["matrix"], max_period=s["max_period"], **kw)
        kw = {"bracket_radius": s["bracket_radius"]} if s["bracket_radius"] is not None else {}
        if s["leaf_radius"] is not None:
            kw["leaf_radius"] = s["leaf_radius"]
        return FullShift(s["alphabet"], max_period=s["max_period"], **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"system: {exc}") from None


def _word_table(raw, alphabet, length, path):
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"{path}: expected a non-empty object keyed by symbol words")
    table = {}
    for word, M in raw.items():
        w = tuple(int(c) for c in word)
        if len(w) != length or any(c >= alphabet for c in w):
            raise ConfigError(f"{path}.{word}: expected a word of {length} symbols below {alphabet}")
        table[w] = np.asarray(M, dtype=float)
    return table


def _trig(terms):
    return [TrigTerm(tuple(t["freq"]), float(t["amp"]), t["phase"], float(t["power"])) for t in terms]


def build_cocycle(cfg, system):
    c = cfg["cocycle"]
    kw = {"cond_bound": c["cond_bound"]}
    alpha = c["alpha"]
    variant = c["variant"]
    try:
        if variant == "constant":
            if c["matrix"] is None:
                raise ConfigError("cocycle.matrix: required for the constant variant")
            return ConstantCocycle(c["matrix"], system, alpha=alpha or 1.0, **kw)
        if variant == "coboundary_generated":
            tr = c["transfer"]
            if tr["kind"] == "rotation":
                if system.kind != "torus":
                    raise ConfigError("cocycle.transfer.kind: rotation transfers need a torus base")
                transfer = RotationTransfer(_trig(tr["angle"]), _trig(tr["stretch"]))
            else:
                if system.kind != "full_shift":
                    raise ConfigError("cocycle.transfer.kind: cylinder transfers need a full shift base")
                r = int(tr["radius"])
                table = _word_table(tr["table"], system.alphabet, 2 * r + 1, "cocycle.transfer.table")
                transfer = CylinderTransfer(r, table, system.alphabet, tr["default"])
            return CoboundaryCocycle(transfer, system, alpha=alpha, **kw)
        if variant == "locally_constant":
            if system.kind != "full_shift":
                raise ConfigError("cocycle.variant: locally_constant needs a full shift base")
            m = int(c["depth"])
            table = _word_table(c["table"], system.alphabet, 2 * m + 1, "cocycle.table")
            return LocallyConstantCocycle(m, table, system.alphabet, system, c["default"], alpha=alpha or 1.0, **kw)
        if system.kind != "torus":
            raise ConfigError("cocycle.variant: torus_smooth needs a torus base")
        base = np.eye(c["dimension"]) if c["base"] is None else c["base"]
        terms = [(t["freq"], t["cos"], t["sin"]) for t in c["terms"]]
        return TorusSmoothCocycle(base, terms, system, alpha=alpha or 1.0, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cocycle: {exc}") from None


def epsilon(cfg, system, A):
    eps = cfg["lyapnorm"]["epsilon"]
    return float(eps) if eps is not None else 0.05 * A.alpha * system.eta

