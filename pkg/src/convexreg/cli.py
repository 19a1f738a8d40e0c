"""Command-line entry point: fit problems, construct functions, run
experiments and complexity scans, and tabulate rate exponents."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import complexity as cx
from . import harness, solver
from .functions import BumpPacking, tangent_approximant
from .geometry import SlabPolytope, grid_points, sample_uniform, unit_cube
from .qp import SolverConfig


class ConfigError(ValueError):
    pass


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def _require(obj, field, path):
    if field not in obj:
        raise ConfigError(f"{path}: missing required field '{field}'")
    return obj[field]


def _solver_config(obj):
    raw = obj.get("solver")
    if raw is None:
        return SolverConfig()
    try:
        return SolverConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from exc


def _domain_from(obj, dim=None):
    dom = obj.get("domain")
    if dom is None:
        if dim is None:
            raise ConfigError("config needs either 'domain' or 'dim'")
        return unit_cube(int(dim))
    return SlabPolytope.from_json(dom)


def cmd_fit(cfg, out_dir, strict):
    problem = solver.RegressionProblem.from_json(cfg)
    fit_result = solver.fit(problem, _solver_config(cfg))
    out = Path(out_dir) / "fit.json"
    out.write_text(json.dumps(fit_result.to_json(), indent=2))
    print(f"fit: n={problem.n} d={problem.d} variant={problem.variant} -> {out}")
    if strict and not fit_result.diagnostics["converged"]:
        print("solver did not converge", file=sys.stderr)
        return 2
    return 0


def cmd_construct(cfg, out_dir, strict):
    kind = _require(cfg, "kind", "construct config")
    dom = _domain_from(cfg, cfg.get("dim"))
    out = Path(out_dir)
    if kind in ("pwa_approx", "f_tilde"):
        k = int(_require(cfg, "pieces_budget", "construct config"))
        fn, anchors = tangent_approximant(dom, k, anchors=cfg.get("anchors", "grid"))
        payload = fn.to_json()
        payload["anchors"] = anchors.tolist()
        path = out / "pwa_approx.json"
        path.write_text(json.dumps(payload, indent=2))
        print(f"construct: {fn.n_pieces} pieces for budget {k} -> {path}")
        return 0
    if kind == "packing":
        delta = float(_require(cfg, "delta", "construct config"))
        grid = grid_points(dom, delta)
        packing = BumpPacking.build(
            grid,
            count=int(cfg.get("count", 8)),
            seed=int(cfg.get("seed", 0)),
        )
        payload = {
            "delta": grid.delta,
            "n": grid.n,
            "grid": grid.points.tolist(),
            "codewords": packing.codewords.tolist(),
            "separation_lower_bound": packing.separation_lower_bound(),
        }
        path = out / "packing.json"
        path.write_text(json.dumps(payload, indent=2))
        print(f"construct: packing with {packing.count} members on n={grid.n} -> {path}")
        return 0
    raise ConfigError(f"unknown construct kind {kind!r}")


def cmd_experiment(cfg, out_dir, strict, threads):
    try:
        exp = harness.ExperimentConfig.from_json(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    if exp.output_path is None:
        exp.output_path = str(Path(out_dir) / "experiment.csv")
    curve = harness.run_experiment(exp, threads=threads)
    for n, risk, err, lf, fails in zip(
        curve.ns, curve.mean_risks, curve.stderrs, curve.mean_lfraks, curve.failures
    ):
        print(f"n={n}: risk={risk:.6g} +- {err:.2g}  Lfrak={lf:.4g}  failures={fails}")
    print(f"experiment -> {exp.output_path}")
    if strict and int(np.sum(curve.failures)) > 0:
        print("some replicates did not converge", file=sys.stderr)
        return 2
    return 0


def cmd_complexity(cfg, out_dir, strict):
    design_spec = _require(cfg, "design", "complexity config")
    if "points" in design_spec:
        X = np.asarray(design_spec["points"], dtype=float)
        dom = _domain_from(cfg, X.shape[1] if X.ndim == 2 else 1)
    else:
        dom = _domain_from(cfg, design_spec.get("dim"))
        if design_spec.get("kind", "grid") == "grid":
            X = harness.grid_for_target(dom, int(design_spec.get("target_n", 32))).points
        else:
            X = sample_uniform(
                dom, int(design_spec.get("target_n", 32)), seed=int(cfg.get("seed", 0))
            ).points
    center = harness.build_truth(_require(cfg, "center", "complexity config"), dom)
    fvals = np.asarray(center(X), dtype=float)
    grid = cfg.get("t_grid")
    est = cx.locate_t_star(
        X,
        fvals,
        float(_require(cfg, "sigma", "complexity config")),
        t_grid=None if grid is None else np.asarray(grid, dtype=float),
        mc_reps=int(cfg.get("mc_reps", 64)),
        seed=int(cfg.get("seed", 0)),
    )
    path = Path(out_dir) / "complexity.csv"
    est.write_csv(path)
    print(
        f"complexity: t_star={est.t_star:.6g} upper_bracket={est.upper_bracket} "
        f"beyond_grid={est.beyond_grid} -> {path}"
    )
    if strict and int(est.solver_failures.sum()) > 0:
        return 2
    return 0


def cmd_rates(cfg, out_dir, strict):
    entries = []
    for row in _require(cfg, "entries", "rates config"):
        curve = harness.RiskCurve.read_csv(_require(row, "csv", "rates entry"))
        entries.append(
            (
                _require(row, "label", "rates entry"),
                curve,
                _require(row, "regime", "rates entry"),
                int(_require(row, "d", "rates entry")),
            )
        )
    table = harness.rate_report(entries)
    path = Path(out_dir) / "rates.csv"
    table.write_csv(path)
    for r in table.rows:
        mark = "FLAG" if r["flagged"] else "ok"
        print(
            f"{r['label']}: fitted={r['fitted']:.3f}+-{r['stderr']:.3f} "
            f"theory={r['theory']:.3f} [{mark}]"
        )
    print(f"rates -> {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="convexreg",
        description="Convex least-squares regression toolkit",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker cap for experiment replicates (default: CONVEXREG_THREADS or 1)",
    )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="force single-worker execution for byte-identical outputs",
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        help="exit with status 2 when any solve fails to converge",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("fit", "fit one regression problem from a JSON file"),
        ("construct", "build a piecewise-affine approximant or bump packing"),
        ("experiment", "run a replicated risk simulation"),
        ("complexity", "scan the localized complexity profile"),
        ("rates", "tabulate fitted against theoretical rate exponents"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--output-dir", default=".", help="directory for outputs")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("CONVEXREG_THREADS", "1"))
    if args.deterministic:
        threads = 1
    try:
        cfg = _load_config(args.config)
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "fit":
            return cmd_fit(cfg, out_dir, args.strict)
        if args.command == "construct":
            return cmd_construct(cfg, out_dir, args.strict)
        if args.command == "experiment":
            return cmd_experiment(cfg, out_dir, args.strict, threads)
        if args.command == "complexity":
            return cmd_complexity(cfg, out_dir, args.strict)
        if args.command == "rates":
            return cmd_rates(cfg, out_dir, args.strict)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
