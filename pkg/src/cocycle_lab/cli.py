"""``cocycle-lab``: run experiments from a JSON config and write reports.

Every command writes ``report.json`` (config echo, summary, checks),
``<command>.csv`` and ``timings.json`` into the output directory.  Exit
status is 0 when every check passes (or fails as declared in
``verify.expected_fail``), 1 otherwise, and 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .acceptance import CheckResult, _plain, run_all
from .cocycle_core import zero_exponent_check
from .config import CHECK_NAMES, build_cocycle, build_system, epsilon, load_config
from .errors import CocycleLabError, ConfigError, ZeroExponentCheckFailed
from .holonomy import (default_theta, domination_check, domination_mask, holder_estimate, holonomy_chain,
                       stable_holonomy, table_chain, unstable_holonomy)
from .livsic import (build_transfer, choose_anchor, extend_transfer, ground_truth, near_return_scan,
                     obstruction_audit, point_label, uniqueness_residual)

COMMANDS = ("spectrum", "obstructions", "transfer", "holonomy", "regularity", "verify")


class Run:
    """Shared state for one invocation: config, base, cocycle, seeded helpers and timings."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.seed = cfg["seed"]
        self.system = build_system(cfg)
        self.A = build_cocycle(cfg, self.system)
        self.eps = epsilon(cfg, self.system, self.A)
        self.timings = {}
        self._table = None

    def rng(self, stream):
        return np.random.default_rng([self.seed, stream])

    def timed(self, label, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0

    def table(self):
        if self._table is None:
            lv = self.cfg["livsic"]
            # on a shift the anchor must be random (not periodic) over the whole span it is used on
            horizon = lv["n_points"] + self.cfg["lyapnorm"]["truncation"] + 10 ** 4
            anchor = choose_anchor(self.system, self.seed, horizon)
            self._table = self.timed("build_transfer", build_transfer, self.A, self.system, anchor,
                                     lv["n_points"], self.eps, self.cfg["lyapnorm"]["block_bound_N"],
                                     self.cfg["lyapnorm"]["truncation"], lv["beta"], lv["override"])
        return self._table


def _check(name, ok, detail):
    return CheckResult(name, "pass" if ok else "fail", detail)


def _skip(name, reason):
    return CheckResult(name, "skipped", {"reason": reason})


def _error_check(name, exc):
    if isinstance(exc, ZeroExponentCheckFailed):
        return _skip(name, f"transfer construction refused: {exc}")
    return CheckResult(name, "fail", {"error": type(exc).__name__, "message": str(exc)})


# ---------------------------------------------------------------------------
# commands; each returns (summary, csv header, csv rows, checks)

def cmd_spectrum(run):
    sc = run.cfg["spectrum"]
    samples = run.system.sample(run.seed, sc["samples"], sc["n_iters"])
    zc = run.timed("spectrum", zero_exponent_check, run.A, run.system, samples, sc["n_iters"],
                   sc["zero_threshold"])
    rows = []
    for i, (x, sp) in enumerate(zip(samples, zc.spectra)):
        for k, (lam, m) in enumerate(zip(sp.exponents, sp.multiplicities)):
            rows.append([i, k, lam, m, sp.drift, sp.converged])
    summary = {"samples": [{"point": point_label(run.system, x), "exponents": sp.exponents,
                            "multiplicities": sp.multiplicities, "drift": sp.drift, "converged": sp.converged}
                           for x, sp in zip(samples, zc.spectra)],
               "n_iters": sc["n_iters"], "max_abs_top": zc.max_abs_top, "max_abs_bottom": zc.max_abs_bottom}
    check = _check("zero_exponents", zc.passed, {"worst": zc.worst, "threshold": zc.threshold})
    return summary, ["sample", "index", "exponent", "multiplicity", "drift", "converged"], rows, [check]


def _period_point(system, p, n):
    if system.kind == "torus":
        return [float(c) for c in p]
    return ["".join(map(str, p.symbols(0, n).tolist()))]


def cmd_obstructions(run):
    lv = run.cfg["livsic"]
    rep = run.timed("obstructions", obstruction_audit, run.A, run.system, lv["n_max"], lv["tolerance"])
    width = run.system.dim if run.system.kind == "torus" else 1
    header = ["period"] + [f"point_{k}" for k in range(width)] + ["defect"]
    rows = [[e.period] + _period_point(run.system, e.point, e.period) + [e.defect] for e in rep.entries]
    worst = rep.entries[0] if rep.entries else None
    summary = {"n_max": lv["n_max"], "orbit_points": rep.count, "counts": {str(k): v for k, v in rep.counts.items()},
               "max_defect": rep.max_defect,
               "worst": None if worst is None else {"period": worst.period,
                                                    "point": _period_point(run.system, worst.point, worst.period)}}
    check = _check("obstructions", rep.passed, {"max_defect": rep.max_defect, "tolerance": lv["tolerance"]})
    return summary, header, rows, [check]


def _slope_band(cfg, alpha):
    band = cfg["livsic"]["slope_band"]
    return tuple(band) if band is not None else (0.85 * alpha, 1.15 * alpha)


def cmd_transfer(run):
    lv = run.cfg["livsic"]
    try:
        tab = run.table()
    except CocycleLabError as exc:
        checks = [_error_check(n, exc) for n in ("transfer_uniqueness", "near_return_scaling",
                                                    "regular_block_measure")]
        return {"error": str(exc)}, ["m", "n", "h", "defect", "K_fit_pass"], [], checks
    truth = ground_truth(run.A)
    summary = {"entries": len(tab), "epsilon": tab.epsilon, "N": tab.N, "beta": tab.beta,
               "G_fraction": tab.G_fraction, "T": tab.T, "T_half": tab.T_half,
               "recursion_residual": tab.recursion_residual(),
               "measure_thresholds": lv["measure_thresholds"]}
    checks = []
    target = lv["measure_thresholds"][-1]
    checks.append(_check("regular_block_measure", tab.G_fraction >= target,
                         {"G_fraction": tab.G_fraction, "target": target}))
    if truth is None:
        checks.append(_skip("transfer_uniqueness", "cocycle has no closed-form transfer map"))
    else:
        res = uniqueness_residual(tab, truth)
        summary["uniqueness_residual"] = res
        checks.append(_check("transfer_uniqueness", res <= lv["uniqueness_tolerance"],
                             {"residual": res, "tolerance": lv["uniqueness_tolerance"]}))
    nr = run.timed("near_return_scan", near_return_scan, run.A, run.system, tab, tab.beta, lv["h_min"],
                   None, lv["max_return_time"], lv["pairs_per_decade"], run.seed)
    band = _slope_band(run.cfg, run.A.alpha)
    summary["near_returns"] = {"pairs": len(nr.stats), "candidates": nr.candidate_pairs, "slope": nr.slope,
                               "intercept": nr.intercept, "C_fit": nr.C_fit, "K_fit": nr.K_fit,
                               "decade_constants": nr.decade_constants, "envelope_spread": nr.envelope_spread,
                               "K_decade_constants": nr.K_decade_constants, "L_fit": nr.L_fit,
                               "periodic_growth_pass": nr.periodic_growth_pass, "periodic_growth_checked": nr.periodic_growth_checked}
    worst = max(s.defect for s in nr.stats)
    if worst <= lv["uniqueness_tolerance"]:
        # a locally constant P: every return closes up to rounding, so there is no slope to fit
        checks.append(_check("near_return_scaling", True, {"degenerate": True, "max_defect": worst}))
    else:
        spread = nr.envelope_spread
        checks.append(_check("near_return_scaling", band[0] <= nr.slope <= band[1] and spread <= 10,
                             {"slope": nr.slope, "band": list(band), "envelope_spread": spread,
                              "max_defect": worst}))
    if truth is not None and lv["extend_samples"] > 0:
        summary["extensions"] = _extension_spot_checks(run, tab, truth, nr.K_envelope)
    rows = [[s.m, s.n, s.h, s.defect, s.K_fit_pass] for s in nr.stats]
    return summary, ["m", "n", "h", "defect", "K_fit_pass"], rows, checks


def _extension_spot_checks(run, tab, truth, K):
    """Extend to fresh points and compare with the ground truth up to the table's right factor."""
    qs = run.system.sample(run.seed + 1, run.cfg["livsic"]["extend_samples"])
    C = np.linalg.solve(truth(tab.anchor), tab.matrix(0))
    out = []
    for q in qs:
        try:
            ext = extend_transfer(tab, q)
        except CocycleLabError as exc:
            out.append({"error": str(exc)})
            continue
        err = float(np.linalg.norm(ext.matrix - truth(q) @ C, 2))
        out.append({"distance": ext.distance, "steps": ext.steps, "error": err,
                    "within_envelope": bool(err <= K * ext.distance ** run.A.alpha * 10 + 1e-9)})
    return out


def _leaf_pair(run, rng, direction):
    sys_ = run.system
    if sys_.kind == "torus":
        s = float(rng.uniform(-0.5, 0.5) * sys_.leaf_radius)
    else:
        s = int(rng.integers(1, 9))
    y = sys_.sample(int(rng.integers(1 << 30)), 1)[0]
    z = (sys_.local_stable_point if direction == "stable" else sys_.local_unstable_point)(y, s)
    return y, z


def cmd_holonomy(run):
    hc = run.cfg["holonomy"]
    theta = default_theta(run.system) if hc["theta"] is None else hc["theta"]
    rng = run.rng(3)
    dom = [domination_check(run.A, run.system, x, hc["N"], theta, hc["k_max"])
           for x in run.system.sample(run.seed, 8)]
    truth = ground_truth(run.A)
    rows, ratios, errors, failures = [], [], [], []
    for k in range(hc["pairs"]):
        direction = "stable" if k % 2 == 0 else "unstable"
        y, z = _leaf_pair(run, rng, direction)
        hol = stable_holonomy if direction == "stable" else unstable_holonomy
        try:
            H = run.timed("holonomy", hol, run.A, run.system, y, z, hc["tol"], hc["budget"], theta)
        except CocycleLabError as exc:
            failures.append(str(exc))
            continue
        rows.append([direction, H.distance, H.residuals[-1] if H.residuals else 0.0, H.n_converged])
        if H.distance > 0:
            ratios.append(H.deviation / H.distance ** run.A.alpha)
        if truth is not None:
            errors.append(float(np.max(np.abs(H.matrix - truth(z) @ np.linalg.inv(truth(y))))))
    ratios = np.array(ratios)
    order = rng.permutation(len(ratios))
    half = len(ratios) // 2
    L = float(ratios[order[:half]].max()) if half else math.nan
    outliers = int(np.sum(ratios[order[half:]] > 3 * L)) if half else 0
    summary = {"theta": theta, "N": hc["N"], "k_max": hc["k_max"],
               "domination_passed": [d.passed for d in dom], "pairs": len(rows),
               "failures": failures, "L_fit": L, "L_outliers_3x": outliers}
    checks = []
    if truth is None:
        checks.append(_skip("holonomy_ground_truth", "cocycle has no closed-form transfer map"))
    else:
        chain = _ground_truth_chains(run, truth, rng, hc, theta)
        summary["chains"] = chain
        worst = max(errors, default=math.nan)
        ok = not failures and worst <= 1e-8 and chain["all_length_ok"] and chain["max_error"] <= 1e-8
        checks.append(_check("holonomy_ground_truth", ok, {"max_error": worst, "chain_max_error": chain["max_error"],
                                                          "failures": len(failures)}))
    return summary, ["dir", "dist", "residual", "n_converged"], rows, checks


def _ground_truth_chains(run, truth, rng, hc, theta):
    sys_ = run.system
    errs, ratios, ok = [], [], True
    count = hc["chains"] if sys_.kind == "torus" else 0
    for x in sys_.sample(int(rng.integers(1 << 30)), count):
        v = rng.standard_normal(sys_.dim)
        y = np.mod(x + v / np.linalg.norm(v) * rng.uniform(0.1, 0.5) * sys_.bracket_radius, 1.0)
        c = holonomy_chain(run.A, sys_, x, y, truth(x), truth(y), hc["tol"], hc["budget"], theta)
        errs.append(c.error)
        ratios.append(c.K_ratio)
        ok &= c.length_ok
    return {"count": count, "max_error": max(errs, default=0.0), "max_length_ratio": max(ratios, default=0.0),
            "K": float(sys_.chain_constant), "all_length_ok": bool(ok)}


def cmd_regularity(run):
    hc = run.cfg["holonomy"]
    theta = default_theta(run.system) if hc["theta"] is None else hc["theta"]
    try:
        tab = run.table()
        mask = tab.in_G & run.timed("domination", domination_mask, run.A, run.system, tab, hc["N"], theta,
                                    hc["k_max"])
        he = run.timed("holder", holder_estimate, tab, mask, hc["pair_budget"], hc["delta"], hc["h_min"],
                       None, hc["band"], run.seed)
    except CocycleLabError as exc:
        return {"error": str(exc)}, ["dist", "pdiff"], [], [_error_check("holder_regularity", exc),
                                                            _error_check("chain_length", exc)]
    summary = {"pairs": he.pair_count, "degenerate": he.degenerate, "exponent": he.exponent,
               "ols_slope": he.ols_slope, "ols_intercept": he.ols_intercept, "C_eps": he.C_eps,
               "decade_constants": he.decade_constants, "band": list(he.band), "block_coverage": float(mask.mean()),
               "bins": [list(b) for b in he.bins]}
    checks = [_check("holder_regularity", he.passed, {"exponent": he.exponent, "band": list(he.band)})]
    if run.system.kind == "torus" and hc["chains"] > 0:
        rng = run.rng(8)
        idx = np.nonzero(mask)[0]
        pairs = run.system.near_pairs(tab.points[idx[:20000]], run.system.bracket_radius / 2)
        pick = pairs[np.sort(rng.choice(len(pairs), min(hc["chains"], len(pairs)), replace=False))]
        chains = [table_chain(run.A, run.system, tab, idx[a], idx[b], tol=hc["tol"], budget=hc["budget"],
                              theta=theta) for a, b in pick]
        ok = all(c.length_ok for c in chains)
        summary["chains"] = {"count": len(chains), "max_length_ratio": max((c.K_ratio for c in chains), default=0.0),
                             "max_error": max((c.error for c in chains), default=0.0),
                             "K": float(run.system.chain_constant)}
        checks.append(_check("chain_length", ok and len(chains) > 0, summary["chains"]))
    else:
        checks.append(_skip("chain_length", "bracket chains are sampled on torus bases only"))
    rows = [[h, v] for h, v in zip(he.dists.tolist(), he.pdiffs.tolist())] if he.dists is not None else []
    return summary, ["dist", "pdiff"], rows, checks


def cmd_verify(run, echo=None):
    checks, summary = [], {}
    for name, fn in (("spectrum", cmd_spectrum), ("obstructions", cmd_obstructions),
                     ("transfer", cmd_transfer), ("holonomy", cmd_holonomy), ("regularity", cmd_regularity)):
        try:
            s, _, _, c = fn(run)
        except CocycleLabError as exc:
            s, c = {"error": str(exc)}, [_error_check(name, exc)]
        summary[name] = s
        checks.extend(c)
    if run.cfg["verify"]["acceptance"]:
        for r in run_all(echo):
            run.timings["acceptance: " + r.name] = r.seconds
            checks.append(r)
    rows = [[c.name, c.status, c.name in run.cfg["verify"]["expected_fail"]] for c in checks]
    return summary, ["check", "status", "expected_fail"], rows, checks


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_plain(obj), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def exit_status(checks, expected_fail):
    """0 when every check passes or fails as declared; an expected failure that passes counts as a failure."""
    for c in checks:
        expected = c.name in expected_fail
        if c.status == "fail" and not expected:
            return 1
        if c.status == "pass" and expected:
            return 1
    return 0


def execute(command, cfg, out_dir, threads=1, echo=None):
    run = Run(cfg)
    t0 = time.perf_counter()
    fn = {"spectrum": cmd_spectrum, "obstructions": cmd_obstructions, "transfer": cmd_transfer,
          "holonomy": cmd_holonomy, "regularity": cmd_regularity}.get(command)
    if fn is None:
        summary, header, rows, checks = cmd_verify(run, echo)
    else:
        summary, header, rows, checks = fn(run)
    run.timings["total"] = time.perf_counter() - t0
    expected = cfg["verify"]["expected_fail"]
    os.makedirs(out_dir, exist_ok=True)
    report = {"version": __version__, "command": command, "config": cfg, "metric": run.system.metric,
              "summary": summary,
              "checks": [dict(c.as_dict(), expected_fail=c.name in expected) for c in checks],
              "check_names": list(CHECK_NAMES)}
    write_json(os.path.join(out_dir, "report.json"), report)
    write_csv(os.path.join(out_dir, f"{command}.csv"), header, rows)
    write_json(os.path.join(out_dir, "timings.json"), {"seconds": run.timings, "threads": threads})
    return exit_status(checks, expected), checks


def parser():
    p = argparse.ArgumentParser(prog="cocycle-lab", description="Livšic-theory experiments on hyperbolic bases.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (default: output.directory from the config)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=1, help="worker count (results do not depend on it)")
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config, args.seed)
        out = args.out or cfg["output"]["directory"]
        code, checks = execute(args.command, cfg, out, args.threads,
                               echo=lambda s: print(s, flush=True))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    for c in checks:
        tag = " (expected)" if c.name in cfg["verify"]["expected_fail"] and c.status == "fail" else ""
        print(f"{c.name}: {c.status}{tag}")
    return code


if __name__ == "__main__":
    sys.exit(main())
