"""Replicated risk simulations, loss evaluation, and rate-exponent fits."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .functions import AffineFunction, BumpPacking, PiecewiseAffineConvex, SquaredNorm, tangent_approximant
from .geometry import GeometryError, SlabPolytope, grid_points, sample_uniform, unit_cube
from .qp import SolverConfig


def empirical_loss(f_values, g_values):
    """Mean squared discrepancy over the design points."""
    f = np.asarray(f_values, dtype=float).ravel()
    g = np.asarray(g_values, dtype=float).ravel()
    if f.size != g.size:
        raise ValueError("value vectors must have equal length")
    return float(np.mean((f - g) ** 2))


def population_loss(f, g, poly, m, seed):
    """Monte Carlo mean of (f - g)^2 under the uniform law on the domain."""
    if m < 2:
        raise ValueError("need at least two integration points")
    pts = sample_uniform(poly, m, seed=seed).points
    vals = (np.asarray(f(pts), dtype=float) - np.asarray(g(pts), dtype=float)) ** 2
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(m))


def affine_distance(design, f_values):
    """Root-mean-square distance from the values to their best affine fit.

    Rank-deficient designs fall back to the minimum-norm least-squares fit.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    f = np.asarray(f_values, dtype=float).ravel()
    if X.shape[0] != f.size or f.size < 1:
        raise ValueError("design and values must have matching nonzero length")
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    coef, *_ = np.linalg.lstsq(A, f, rcond=None)
    resid = f - A @ coef
    return float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# truths


def build_truth(spec, domain):
    """Materialize a truth callable from its config description."""
    if callable(spec):
        return spec
    kind = spec["kind"]
    if kind == "quadratic":
        return SquaredNorm(domain.dim)
    if kind == "affine":
        return AffineFunction(spec.get("w", np.zeros(domain.dim)), spec.get("b", 0.0))
    if kind == "pwa":
        return PiecewiseAffineConvex.from_json(spec["function"])
    if kind == "pwa_approx":
        fn, _ = tangent_approximant(domain, int(spec["pieces_budget"]))
        return fn
    if kind == "packing_member":
        delta = float(spec["delta"])
        grid = grid_points(domain, delta)
        packing = BumpPacking.build(
            grid,
            count=int(spec.get("count", 2)),
            seed=int(spec.get("codeword_seed", 0)),
        )
        return packing.member(int(spec.get("index", 0)))
    raise ValueError(f"unknown truth kind {kind!r}")


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    dim: int
    n_list: list
    sigma: float
    truth: dict
    domain: SlabPolytope = None
    design_kind: str = "grid"
    variant: str = "full"
    bound: float = None
    lipschitz: float = None
    replicates: int = 10
    seed: int = 0
    mc_integration_points: int = None  # random design only; default 50 * n
    output_path: str = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.domain is None:
            self.domain = unit_cube(self.dim)
        if self.design_kind not in ("grid", "uniform"):
            raise ValueError("design_kind must be 'grid' or 'uniform'")
        if list(self.n_list) != sorted(self.n_list) or len(self.n_list) == 0:
            raise ValueError("n_list must be nonempty and increasing")
        if self.replicates < 2:
            raise ValueError("need at least two replicates")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        obj = dict(obj)
        domain = obj.pop("domain", None)
        if domain is not None and not isinstance(domain, SlabPolytope):
            domain = SlabPolytope.from_json(domain)
        solver_cfg = obj.pop("solver", None)
        if solver_cfg is None:
            solver_cfg = SolverConfig()
        elif isinstance(solver_cfg, dict):
            solver_cfg = SolverConfig(**solver_cfg)
        estimator = obj.pop("estimator", None)
        if estimator:
            obj.setdefault("variant", estimator.get("type", "full"))
            if "B" in estimator:
                obj.setdefault("bound", estimator["B"])
            if "L" in estimator:
                obj.setdefault("lipschitz", estimator["L"])
        return cls(domain=domain, solver=solver_cfg, **obj)


@dataclass
class RiskCurve:
    """One row per sample size: realized n, mean risk, stderr, mean affine
    distance of the truth, and the count of non-converged replicates."""

    ns: np.ndarray
    mean_risks: np.ndarray
    stderrs: np.ndarray
    mean_lfraks: np.ndarray
    failures: np.ndarray

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "mean_risk", "stderr", "mean_Lfrak", "failures"])
            for row in zip(self.ns, self.mean_risks, self.stderrs, self.mean_lfraks, self.failures):
                writer.writerow(
                    [int(row[0]), f"{row[1]:.12g}", f"{row[2]:.12g}", f"{row[3]:.12g}", int(row[4])]
                )

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
        return cls(
            ns=np.array([int(r["n"]) for r in rows]),
            mean_risks=np.array([float(r["mean_risk"]) for r in rows]),
            stderrs=np.array([float(r["stderr"]) for r in rows]),
            mean_lfraks=np.array([float(r["mean_Lfrak"]) for r in rows]),
            failures=np.array([int(r["failures"]) for r in rows]),
        )


def grid_for_target(poly, n_target):
    """Largest grid resolution giving at least n_target points; the realized
    count becomes the experiment's sample size."""

    def count(delta):
        try:
            return grid_points(poly, delta).n
        except GeometryError:
            return 0

    lo_box, hi_box = poly.bounding_box()
    extent = float(np.max(hi_box - lo_box))
    # find a resolution with enough points
    delta_lo = extent * (1.0 / max(n_target, 2)) ** (1.0 / poly.dim)
    for _ in range(80):
        if count(delta_lo) >= n_target:
            break
        delta_lo *= 0.5
    else:
        raise GeometryError(f"cannot reach {n_target} grid points on this domain")
    delta_hi = extent
    if count(delta_hi) >= n_target:
        return grid_points(poly, delta_hi)
    for _ in range(60):
        mid = 0.5 * (delta_lo + delta_hi)
        if count(mid) >= n_target:
            delta_lo = mid
        else:
            delta_hi = mid
    return grid_points(poly, delta_lo)


def _design_for(cfg, n, replicate_index):
    if cfg.design_kind == "grid":
        return grid_for_target(cfg.domain, n).points
    seed = np.random.SeedSequence((cfg.seed, n, replicate_index, 1))
    return sample_uniform(cfg.domain, n, seed=seed).points


def simulate_once(cfg, n, replicate_index):
    """One replicate: build design, draw responses, fit, evaluate the loss.

    Returns (loss, lfrak, converged, realized_n). Deterministic in
    (cfg, n, replicate_index).
    """
    truth = build_truth(cfg.truth, cfg.domain)
    X = _design_for(cfg, n, replicate_index)
    realized = X.shape[0]
    f0 = np.asarray(truth(X), dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, n, replicate_index)))
    Y = f0 + cfg.sigma * rng.standard_normal(realized)
    problem = solver.RegressionProblem(
        X, Y, variant=cfg.variant, bound=cfg.bound, lipschitz=cfg.lipschitz
    )
    fit_result = solver.fit(problem, cfg.solver)
    if cfg.design_kind == "grid":
        loss = empirical_loss(fit_result.theta, f0)
    else:
        m = cfg.mc_integration_points or 50 * realized
        est = lambda pts: solver.extend(fit_result, problem, pts)
        loss, _ = population_loss(
            est, truth, cfg.domain, m,
            seed=np.random.SeedSequence((cfg.seed, n, replicate_index, 2)),
        )
    lfrak = affine_distance(X, f0)
    return loss, lfrak, bool(fit_result.diagnostics["converged"]), realized


def _replicate_task(args):
    cfg, n, rep = args
    return simulate_once(cfg, n, rep)


def run_experiment(cfg, threads=1):
    """Replicated risk simulation over cfg.n_list; returns a RiskCurve.

    Replicates use independent seed streams derived from (seed, n, index), so
    results do not depend on scheduling; failures are counted per n, never
    dropped silently.
    """
    ns, means, errs, lfraks, fails = [], [], [], [], []
    for n in cfg.n_list:
        tasks = [(cfg, n, rep) for rep in range(cfg.replicates)]
        if threads and threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_replicate_task, tasks))
        else:
            results = [_replicate_task(t) for t in tasks]
        losses = np.array([r[0] for r in results])
        lfr = np.array([r[1] for r in results])
        conv = np.array([r[2] for r in results])
        realized = results[0][3]
        ns.append(realized)
        means.append(float(np.mean(losses)))
        errs.append(float(np.std(losses, ddof=1) / math.sqrt(cfg.replicates)))
        lfraks.append(float(np.mean(lfr)))
        fails.append(int(np.sum(~conv)))
    curve = RiskCurve(
        ns=np.array(ns),
        mean_risks=np.array(means),
        stderrs=np.array(errs),
        mean_lfraks=np.array(lfraks),
        failures=np.array(fails),
    )
    if cfg.output_path:
        curve.write_csv(cfg.output_path)
    return curve


# ---------------------------------------------------------------------------
# rate fitting


def fit_rate(curve):
    """OLS slope of log mean risk against log n, with its standard error."""
    ns = np.asarray(curve.ns, dtype=float)
    risks = np.asarray(curve.mean_risks, dtype=float)
    if ns.size < 3:
        raise ValueError("need at least three sample sizes to fit a rate")
    if np.any(risks <= 0):
        raise ValueError("rate fits need positive risks")
    x = np.log(ns)
    y = np.log(risks)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = ns.size - 2
    s2 = float(np.sum(resid**2) / dof) if dof > 0 else 0.0
    return slope, float(np.sqrt(s2 / sxx))


def worst_case_exponent(d):
    """Theoretical risk exponent for the convex LSE over the whole class."""
    return -4.0 / (d + 4.0) if d <= 4 else -2.0 / d


def adaptive_exponent(d):
    """Exponent at a piecewise-affine truth with a fixed number of pieces."""
    return -1.0 if d <= 4 else -4.0 / d


def minimax_exponent(d):
    """Minimax exponent over bounded Lipschitz convex functions."""
    return -4.0 / (d + 4.0)


_REGIMES = {
    "worst_case": worst_case_exponent,
    "adaptive": adaptive_exponent,
    "affine": adaptive_exponent,
    "minimax": minimax_exponent,
}

RATE_FLAG_MARGIN = 0.15


@dataclass
class RateTable:
    """Fitted versus theoretical rate exponents, with disagreement flags."""

    rows: list  # dicts: label, d, regime, fitted, stderr, theory, flagged

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["label", "d", "regime", "fitted_slope", "fitted_stderr", "theory_slope", "flagged"]
            )
            for r in self.rows:
                writer.writerow(
                    [
                        r["label"],
                        r["d"],
                        r["regime"],
                        f"{r['fitted']:.12g}",
                        f"{r['stderr']:.12g}",
                        f"{r['theory']:.12g}",
                        int(r["flagged"]),
                    ]
                )


def rate_report(entries):
    """Tabulate fitted against theoretical exponents.

    entries: iterables of (label, curve, regime, d). A row is flagged when
    |fitted - theory| > 2 * stderr + 0.15; the absolute margin absorbs the
    logarithmic factors that bend small-sample slopes.
    """
    rows = []
    for label, curve, regime, d in entries:
        if regime not in _REGIMES:
            raise ValueError(f"unknown regime {regime!r}")
        fitted, stderr = fit_rate(curve)
        theory = _REGIMES[regime](d)
        flagged = abs(fitted - theory) > 2.0 * stderr + RATE_FLAG_MARGIN
        rows.append(
            {
                "label": label,
                "d": d,
                "regime": regime,
                "fitted": fitted,
                "stderr": stderr,
                "theory": theory,
                "flagged": bool(flagged),
            }
        )
    return RateTable(rows=rows)
