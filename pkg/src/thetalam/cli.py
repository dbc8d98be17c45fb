"""Command line entry point: ``thetalam <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 non-convergence, 3 I/O failure.
Every JSON output carries the tool version and a hash of the effective
configuration of the command (config file merged with flags).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .fileio import (
    csv_text,
    dumps_json,
    emit_cross_section,
    read_solution,
    to_jsonable,
    write_json,
    write_solution,
    write_text,
)
from .geom import DomainError, HalfDiskGrid
from .theta_pde import BoundaryCurve, NonConvergence

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("thetalam")


class UsageError(ValueError):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for non-convergence here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# shared helpers


def _range(text: str, name: str):
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise UsageError(f"{name} must look like lo:hi:steps, got {text!r}") from None
    if steps < 1 or not lo <= hi or (steps == 1 and lo != hi):
        raise UsageError(f"{name}: need lo <= hi and steps >= 1 (steps = 1 only when lo = hi)")
    return np.linspace(lo, hi, steps)


def _ints(text: str):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected a comma separated list of integers, got {text!r}") from None


def _load_config(args) -> RunConfig:
    """Config file (if any) overridden by explicit flags, then validated."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    over = {}
    for name in ("metric", "grid_n", "delta_exhaustion", "target_set", "n_list"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if "metric" in over and over["metric"] != cfg.metric and "delta_exhaustion" not in over:
        over["delta_exhaustion"] = None
    tol = {k: getattr(args, k) for k in ("tol_EL", "tol_area", "tau") if getattr(args, k, None) is not None}
    t = cfg.tolerances
    tols = dataclasses.replace(t, **tol)
    return dataclasses.replace(cfg, **over, tolerances=tols).validated()


def _digest(cfg: RunConfig, command: str, params: dict) -> str:
    doc = {"command": command, "config": cfg.as_dict(), "params": to_jsonable(params)}
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _provenance(cfg: RunConfig, command: str, params: dict) -> dict:
    return {"command": command, "config_hash": _digest(cfg, command, params), "version": __version__}


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(out, text)


def _grid(cfg: RunConfig) -> HalfDiskGrid:
    return HalfDiskGrid.build(cfg.grid_n, cfg.radius)


# ---------------------------------------------------------------------------
# subcommands


def cmd_catenoid_family(args) -> int:
    from .rotmin import classify_Ma, disk_pair_area

    cfg = _load_config(args)
    metric = cfg.metric_profile()
    rows = []
    if metric.is_hyperbolic:
        header = ["a", "disk_area_clipped", "delta_stable", "delta_unstable", "verdict"]
    else:
        header = ["a", "disk_area", "catenoid_area_stable", "catenoid_area_unstable", "verdict"]
    for a in _range(args.a_range, "--a-range"):
        a = float(a)
        cls = classify_Ma(a, metric, cfg.tolerances.tol_area)
        cats = [s for s in cls.candidates if s.is_annulus]
        if metric.is_hyperbolic:
            vals = [s.params["delta"] for s in cats]
            disk = disk_pair_area(a, metric, s=args.clip_s)
        else:
            vals = [s.area for s in cats]
            disk = disk_pair_area(a)
        vals = (vals + [math.nan, math.nan])[:2]
        rows.append([a, disk, *[float(v) for v in vals], cls.verdict])
    _emit(csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_acrit(args) -> int:
    from .rotmin import classify_Ma, find_a_crit

    cfg = _load_config(args)
    metric = cfg.metric_profile()
    res = find_a_crit(metric)
    below = classify_Ma(res.a_crit - args.probe, metric, cfg.tolerances.tol_area).verdict
    above = classify_Ma(res.a_crit + args.probe, metric, cfg.tolerances.tol_area).verdict
    doc = {
        "a_crit": res.a_crit,
        "bracket": list(res.bracket),
        "metric": metric.kind,
        "verdict_below": below,
        "verdict_above": above,
        "verdict_flip": below == "AnnuliOnly" and above == "DisksOnly",
        "probe": args.probe,
        "provenance": _provenance(cfg, "acrit", {"probe": args.probe}),
    }
    _emit(dumps_json(doc), args.out)
    return EXIT_OK


def _boundary(spec: str) -> BoundaryCurve:
    kind, _, value = spec.partition(":")
    if kind in ("helicoid", "constant") and value:
        try:
            x = float(value)
        except ValueError:
            raise UsageError(f"bad number in --boundary {spec!r}") from None
        return BoundaryCurve.helicoid(x) if kind == "helicoid" else BoundaryCurve.constant(x)
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"boundary file {spec!r} not found (or use helicoid:ALPHA / constant:C)")
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=1)
    if data.shape[1] != 2:
        raise UsageError("boundary file needs two columns: z, theta")
    digest = hashlib.sha256(data.tobytes()).hexdigest()[:12]
    return BoundaryCurve.from_samples(data[:, 0], data[:, 1], label=f"file:{digest}")


def cmd_theta_solve(args) -> int:
    from .theta_pde import euler_lagrange_residual, solve_dirichlet

    cfg = _load_config(args)
    metric = cfg.metric_profile()
    bc = _boundary(args.boundary)
    grid = _grid(cfg)
    init = args.init
    if init == "file":
        if not args.init_file:
            raise UsageError("--init file needs --init-file")
        prev, _ = read_solution(args.init_file)
        if prev.grid.grid_n != grid.grid_n or prev.grid.radius != grid.radius:
            raise DomainError("--init-file was computed on a different grid")
        init = prev.theta
    tol = cfg.tolerances.tol_EL
    sol = solve_dirichlet(bc, metric, grid, init=init, tol=tol, max_iters=args.max_iters, method=args.method)
    el = np.abs(euler_lagrange_residual(sol))
    params = {"boundary": bc.label, "init": args.init, "max_iters": args.max_iters, "method": args.method}
    prov = _provenance(cfg, "theta-solve", params)
    write_solution(args.out, sol, __version__, {"config_hash": prov["config_hash"]})
    report = {
        "solution": Path(args.out).name,
        "boundary": bc.label,
        "boundary_digest": bc.digest(),
        "metric": metric.kind,
        "grid_n": grid.grid_n,
        "radius": grid.radius,
        "iterations": sol.iterations,
        "energy": sol.energy,
        "weak_residual_max": sol.residual,
        "tol_EL": tol,
        "converged": bool(sol.residual <= tol),
        "el_residual_nodal_max": float(el.max()),
        "el_residual_nodal_mean": float(el[grid.free].mean()),
        "el_residual_nodal_bound": tol / grid.h**2,
        "provenance": prov,
    }
    _emit(dumps_json(report), args.report)
    return EXIT_OK


def _leaf_doc(lf) -> dict:
    return {
        "kind": lf.kind,
        "level": lf.level,
        "s_min": lf.s_min,
        "height": lf.height,
        "center": lf.center,
        "profile": lf.profile,
    }


def cmd_lamination_run(args) -> int:
    from .lam_sim import match_minimizers, run_sequence

    cfg = _load_config(args)
    metric = cfg.metric_profile()
    T = cfg.target()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = _grid(cfg)
    params = {"max_iters": args.max_iters}
    prov = _provenance(cfg, "lamination-run", params)
    extra = {"config_hash": prov["config_hash"], "target_set": T.describe()}
    files = []

    def save(n, g):
        name = f"solution_n{n:04d}.csv"
        write_solution(out / name, g, __version__, {**extra, "n": n})
        files.append(name)
        log.info("n=%d: %d iterations, residual %.2e", n, g.iterations, g.residual)

    est = run_sequence(T, metric, cfg.n_list, grid, tau=cfg.tolerances.tau, tol=cfg.tolerances.tol_EL,
                       max_iters=args.max_iters, callback=save)
    matches = match_minimizers(est)
    doc = {
        "target_set": T.describe(),
        "metric": metric.kind,
        "grid_n": grid.grid_n,
        "radius": grid.radius,
        "h": grid.h,
        "n_list": est.n_list,
        "tau": est.tau,
        "solutions": files,
        "leaves": [_leaf_doc(lf) for lf in est.rotational_leaves],
        "blowup_K": est.blowup_K,
        "s_min_near_targets": est.s_min_near_targets,
        "winding_diagnostic": est.winding_diagnostic,
        "minimizers": [vars(m) for m in matches],
        "provenance": prov,
    }
    write_json(out / "leaves.json", doc)
    emit_cross_section(est, out / "cross_section.svg")
    summary = {
        "leaves": [lf.kind for lf in est.rotational_leaves],
        "blowup_K": est.blowup_K,
        "max_distance_over_h": max((m.distance / grid.h for m in matches), default=None),
        "out": str(out),
    }
    sys.stdout.write(dumps_json(summary))
    return EXIT_OK


GDT_SHELLS = ((0.0, 0.5, -0.3, 0.4), (0.2, 0.6, -0.3, 0.4))


def _leaf_boundary_height(lf, radius, h) -> float:
    P = lf.profile
    rim = np.hypot(P[:, 0], P[:, 1]) >= radius - 2 * h
    return float(np.max(np.abs(P[rim, 1])) / radius) if np.any(rim) else math.nan


def _competitor_checks(sol, head, cfg, n_random, seed):
    """competitor_test for the rotational surface matched by each detected leaf."""
    from .calib import competitor_test
    from .lam_sim import TargetSet, detect_rotational_leaves, hausdorff, reference_profiles
    from .rotmin import classify_Ma

    metric = sol.metric
    grid = sol.grid
    leaves = detect_rotational_leaves(sol, cfg.tolerances.tau)
    heights = TargetSet.parse(head["target_set"]).heights() if head.get("target_set") else None
    out = []
    seen = set()
    for i, lf in enumerate(leaves):
        a_hat = _leaf_boundary_height(lf, grid.radius, grid.h)
        a = a_hat
        if heights is not None and len(heights):
            a = float(heights[np.argmin(np.abs(heights - a_hat))])
        entry = {"leaf": i, "kind": lf.kind, "a_estimate": a_hat, "a": a}
        if not 0 < a < 1 or abs(a - a_hat) > 0.05:
            entry["skipped"] = "no boundary height in the target set near this leaf"
            out.append(entry)
            continue
        cls = classify_Ma(a, metric, cfg.tolerances.tol_area)
        pool = cls.candidates
        d = [min(hausdorff(lf.profile, P) for P in reference_profiles(s, grid.radius)) for s in pool]
        M = pool[int(np.argmin(d))]
        entry.update({"matched": M.kind, "branch": M.params.get("branch", ""), "distance": min(d),
                      "is_minimizer": any(M is m for m in cls.minimizers), "verdict": cls.verdict})
        if (a, M.kind) in seen:
            entry["skipped"] = "same surface as an earlier leaf"
            out.append(entry)
            continue
        seen.add((a, M.kind))
        rep = competitor_test(M, [s for s in pool if s is not M], metric, n_random=n_random, seed=seed,
                              tol=max(cfg.tolerances.tol_area, 1e-9))
        w = rep.worst
        entry.update({"passed": rep.passed, "n_competitors": rep.n_competitors,
                      "worst": {"name": w.name, "difference": w.difference, "allowance": w.allowance}})
        out.append(entry)
    return out


def cmd_calibrate(args) -> int:
    from .calib import CylinderShell, divergence_residual, foliation_normal, generalized_divergence_check

    sol, head = read_solution(args.solution)
    over = {"metric": sol.metric.kind, "grid_n": sol.grid.grid_n}
    if sol.metric.is_hyperbolic:
        over["delta_exhaustion"] = round(1.0 - sol.grid.radius, 12)
    cfg = _load_config(args)
    cfg = dataclasses.replace(cfg, delta_exhaustion=None, **over).validated()
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = sorted(set(checks) - {"div", "gdt", "competitors"})
    if bad:
        raise UsageError(f"unknown checks: {', '.join(bad)}")
    nf = foliation_normal(sol)
    report = {"solution": head, "checks": checks}
    if "div" in checks:
        rep = divergence_residual(nf)
        report["div"] = {"sup": rep.sup, "mean": rep.mean, "h": nf.h, "sup_over_h2": rep.sup / nf.h**2,
                         "samples": int(rep.values.size)}
    if "gdt" in checks:
        gd = []
        for shell in GDT_SHELLS:
            r = generalized_divergence_check(nf, CylinderShell(*shell))
            gd.append({"shell": list(shell), "flux": r.flux, "eps": r.eps, "residual": r.residual,
                       "bound": r.bound, "monotone": r.monotone, "passed": r.passed})
        report["gdt"] = gd
    if "competitors" in checks:
        report["competitors"] = _competitor_checks(sol, head, cfg, args.n_random, args.seed)
    params = {"checks": checks, "n_random": args.n_random, "seed": args.seed,
              "solution_digest": hashlib.sha256(Path(args.solution).read_bytes()).hexdigest()[:16]}
    report["provenance"] = _provenance(cfg, "calibrate", params)
    _emit(dumps_json(report), args.out)
    return EXIT_OK


def cmd_ribbon(args) -> int:
    from .rotmin import hyp_catenoid, hyp_geodesic, ribbon_length

    w = args.theta_waist
    cat = hyp_catenoid(w)
    upper = cat.branches[0]
    flat = hyp_geodesic(0.0, upper.t_ideal)
    th = _range(args.theta_range, "--theta-range")
    if args.log:
        th = np.geomspace(th[0], th[-1], th.size)
    if th[0] <= 0 or th[-1] > upper.theta_max:
        raise DomainError(f"theta range must lie in (0, {upper.theta_max:.6g}] for this waist")
    L = np.atleast_1d(ribbon_length(upper, flat, th))
    rows = [[float(t), float(x), float(x / t)] for t, x in zip(th, L)]
    _emit(csv_text(["theta", "ribbon_length", "ratio"], rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, run=False):
    p.add_argument("--config", help="key=value configuration file; flags override it")
    p.add_argument("--metric", choices=("euclidean", "poincare"), default=None)
    p.add_argument("--tol-area", dest="tol_area", type=float, default=None)
    if run:
        p.add_argument("--grid-n", dest="grid_n", type=int, default=None)
        p.add_argument("--delta", dest="delta_exhaustion", type=float, default=None,
                       help="exhaustion gap of the Poincare ball")
        p.add_argument("--tol", dest="tol_EL", type=float, default=None, help="Newton residual tolerance")
        p.add_argument("--tau", type=float, default=None, help="transversality threshold for leaves")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thetalam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("catenoid-family", help="areas of the rotational surfaces bounded by c(a)")
    _common(s)
    s.add_argument("--a-range", required=True, help="lo:hi:steps")
    s.add_argument("--clip-s", type=float, default=8.0, help="cutoff radius for hyperbolic disk areas")
    s.add_argument("--out", default=None, help="CSV path (default stdout)")
    s.set_defaults(func=cmd_catenoid_family)

    s = sub.add_parser("acrit", help="height where minimizers switch from annuli to disks")
    _common(s)
    s.add_argument("--probe", type=float, default=0.01, help="offset at which verdicts are compared")
    s.add_argument("--out", default=None, help="JSON path (default stdout)")
    s.set_defaults(func=cmd_acrit)

    s = sub.add_parser("theta-solve", help="minimal theta-graph with given boundary data")
    _common(s, run=True)
    s.add_argument("--boundary", required=True, help="helicoid:ALPHA, constant:C, or a CSV of z,theta")
    s.add_argument("--init", choices=("zero", "boundary", "file"), default="boundary")
    s.add_argument("--init-file", default=None)
    s.add_argument("--max-iters", type=int, default=60)
    s.add_argument("--method", choices=("primal-dual", "newton"), default="primal-dual")
    s.add_argument("--out", required=True, help="solution file")
    s.add_argument("--report", default=None, help="residual report JSON (default stdout)")
    s.set_defaults(func=cmd_theta_solve)

    s = sub.add_parser("lamination-run", help="solve along a boundary sequence and extract leaves")
    _common(s, run=True)
    s.add_argument("--target", dest="target_set", default=None, help="e.g. 0.25  or  0.25,0.75  or  [0.3:0.4]")
    s.add_argument("--n", dest="n_list", type=_ints, default=None, help="comma separated sequence indices")
    s.add_argument("--max-iters", type=int, default=300)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_lamination_run)

    s = sub.add_parser("calibrate", help="calibration checks on a stored solution")
    s.add_argument("--config", help="key=value configuration file (tolerances)")
    s.add_argument("--tol-area", dest="tol_area", type=float, default=None)
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--solution", required=True)
    s.add_argument("--checks", default="div,gdt,competitors")
    s.add_argument("--n-random", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="report JSON (default stdout)")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("ribbon", help="cone ribbon between a catenoid branch and its flat disk")
    s.add_argument("--theta-waist", type=float, required=True)
    s.add_argument("--theta-range", required=True, help="lo:hi:steps")
    s.add_argument("--log", action="store_true", help="geometric spacing")
    s.add_argument("--out", default=None, help="CSV path (default stdout)")
    s.set_defaults(func=cmd_ribbon)
    return p


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonConvergence as exc:
        where = f" at n={exc.n}" if exc.n is not None else ""
        print(f"error: no convergence{where}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
