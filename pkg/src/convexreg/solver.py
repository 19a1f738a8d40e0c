"""Convex least-squares estimators as fitted-value quadratic programs.

A fit returns the fitted values theta_i and one subgradient g_i per design
point, satisfying theta_j >= theta_i + g_i . (X_j - X_i) for all pairs, plus
the variant's box / Lipschitz constraints. Off the design points the fit is
extended as the max of the fitted tangent planes (clipped for the bounded
variant).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .qp import (
    SolverConfig,
    min_norm_in_halfspaces,
    snap_to_max_affine,
    solve_cone_qp,
)

VARIANTS = ("full", "bounded", "lipschitz", "bounded_lipschitz")

DUPLICATE_TOL = 1e-10


class ProblemError(ValueError):
    pass


class RegressionProblem:
    """Design points, responses and estimator variant.

    Duplicate design points (pairwise distance <= 1e-10) are merged at
    construction: their responses are averaged and the merged point carries a
    multiplicity weight in the least-squares objective.
    """

    def __init__(self, X, y, variant="full", bound=None, lipschitz=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ProblemError("X and y must have matching length")
        if X.shape[0] < 1:
            raise ProblemError("need at least one observation")
        if variant not in VARIANTS:
            raise ProblemError(f"unknown variant {variant!r}")
        if variant in ("bounded", "bounded_lipschitz"):
            if bound is None or bound <= 0:
                raise ProblemError("bounded variants need a positive bound")
        else:
            bound = None
        if variant in ("lipschitz", "bounded_lipschitz"):
            if lipschitz is None or lipschitz < 0:
                raise ProblemError("lipschitz variants need a nonnegative constant")
        else:
            lipschitz = None
        Xm, ym, w = _merge_duplicates(X, y)
        self.X = Xm
        self.y = ym
        self.weights = w
        self.variant = variant
        self.bound = bound
        self.lipschitz = lipschitz
        self.n, self.d = Xm.shape

    def to_json(self):
        v = {"type": self.variant}
        if self.bound is not None:
            v["B"] = self.bound
        if self.lipschitz is not None:
            v["L"] = self.lipschitz
        return {
            "X": self.X.tolist(),
            "Y": self.y.tolist(),
            "variant": v,
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        variant = obj.get("variant", {"type": "full"})
        if isinstance(variant, str):
            variant = {"type": variant}
        return cls(
            np.asarray(obj["X"], dtype=float),
            np.asarray(obj["Y"], dtype=float),
            variant=variant.get("type", "full"),
            bound=variant.get("B"),
            lipschitz=variant.get("L"),
        )


def _merge_duplicates(X, y):
    n = X.shape[0]
    order = np.lexsort(X.T[::-1])
    Xs = X[order]
    groups = [[order[0]]]
    for k in range(1, n):
        if np.max(np.abs(Xs[k] - Xs[k - 1])) <= DUPLICATE_TOL:
            groups[-1].append(order[k])
        else:
            groups.append([order[k]])
    if len(groups) == n:
        return X.copy(), y.copy(), np.ones(n)
    # keep first-occurrence order
    groups.sort(key=min)
    Xm = np.array([X[g[0]] for g in groups])
    ym = np.array([float(np.mean(y[g])) for g in groups])
    w = np.array([float(len(g)) for g in groups])
    return Xm, ym, w


@dataclass
class LSEFit:
    """Fitted values, subgradients and solver diagnostics for one problem."""

    theta: np.ndarray
    subgradients: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "theta": self.theta.tolist(),
            "subgradients": self.subgradients.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            theta=np.asarray(obj["theta"], dtype=float),
            subgradients=np.asarray(obj["subgradients"], dtype=float),
            diagnostics=dict(obj.get("diagnostics", {})),
        )


def fit(problem, config=None):
    """Least-squares fit over the problem's convex class.

    Non-convergence is reported through diagnostics["converged"], not raised.
    With config.polish (default) each subgradient is replaced afterwards by
    the minimum-norm one consistent with the fitted values, which pins a
    canonical extension off the design points.
    """
    cfg = config if config is not None else SolverConfig()
    theta, G, diag = solve_cone_qp(
        problem.X,
        problem.weights,
        problem.y,
        bound=problem.bound,
        lipschitz=problem.lipschitz,
        config=cfg,
    )
    if cfg.engine == "splitting" and problem.n > 1:
        # first-order iterates are only eps-feasible; snapping onto their own
        # max-affine envelope makes the pairwise constraints exact
        theta, G = snap_to_max_affine(theta, G, problem.X)
        if problem.bound is not None:
            theta = np.clip(theta, -problem.bound, problem.bound)
        diag.max_violation = 0.0
    if cfg.polish and problem.n > 1:
        G = _min_norm_subgradients(problem, theta, G, diag)
    return LSEFit(theta=theta, subgradients=G, diagnostics=diag.as_dict())


def _min_norm_subgradients(problem, theta, G, diag):
    """Replace each g_i by the smallest subgradient consistent with theta.

    Keeps the current maximum violation: the polish polyhedron is slackened
    by exactly that amount, and the incumbent g_i is kept whenever the
    minimum-norm solve fails to certify feasibility.
    """
    X = problem.X
    n = problem.n
    slack = max(float(diag.max_violation), 0.0) + 1e-12
    out = G.copy()
    for i in range(n):
        A = np.delete(X, i, axis=0) - X[i]
        b = np.delete(theta, i) - theta[i] + slack
        g = min_norm_in_halfspaces(A, b)
        if g is not None and np.linalg.norm(g) <= np.linalg.norm(G[i]) + 1e-12:
            out[i] = g
    return out


def extend(fit_result, problem, x):
    """Piecewise-affine extension max_i (theta_i + g_i . (x - X_i)).

    At a design point the maximum is attained by its own plane (up to the
    feasibility tolerance). The bounded variant clips the result to [-B, B].
    """
    theta = fit_result.theta
    G = fit_result.subgradients
    X = problem.X
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    offs = theta - np.einsum("id,id->i", G, X)
    vals = np.max(pts @ G.T + offs, axis=1)
    if problem.bound is not None:
        vals = np.clip(vals, -problem.bound, problem.bound)
    if np.ndim(x) == 1:
        return float(vals[0])
    return vals


def max_constraint_violation(fit_result, problem):
    """Worst violation over all pairwise and variant constraints."""
    theta = fit_result.theta
    G = fit_result.subgradients
    X = problem.X
    n = problem.n
    worst = 0.0
    block = max(1, (1 << 18) // max(n, 1))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        r = (
            theta[lo:hi, None]
            - theta[None, :]
            + np.einsum("pd,pjd->pj", G[lo:hi], X[None, :, :] - X[lo:hi, None, :])
        )
        rows = np.arange(lo, hi)
        r[rows - lo, rows] = -np.inf
        worst = max(worst, float(r.max(initial=0.0)))
    if problem.bound is not None:
        worst = max(worst, float(np.max(np.abs(theta)) - problem.bound))
    if problem.lipschitz is not None:
        worst = max(worst, float(np.max(np.linalg.norm(G, axis=1)) - problem.lipschitz))
    return max(worst, 0.0)


def check_kkt(fit_result, problem, probes=20, seed=0, config=None):
    """Verify the projection characterization of the fit.

    The fitted vector is the Euclidean projection (in the multiplicity-
    weighted inner product) of the responses onto the feasible fitted-value
    set, so <y - theta, theta' - theta> <= 0 for every feasible theta'.
    Probe points theta' come from fitting the same problem to perturbed
    responses. Returns the worst probe inner product and the worst
    constraint violation.
    """
    theta = fit_result.theta
    resid = problem.weights * (problem.y - theta)
    rng = np.random.default_rng(seed)
    scale = 0.5 * float(np.std(problem.y)) + 0.1
    probe_cfg = config
    if probe_cfg is None:
        probe_cfg = SolverConfig(
            engine="splitting",
            eps_primal=1e-3 * np.sqrt(problem.n),
            eps_dual=1e-3 * np.sqrt(problem.n),
            eps_feas=1e-7,
            round_iterations=300,
            max_rounds=6,
            polish=False,
        )
    stat = -np.inf
    for _ in range(int(probes)):
        y_probe = problem.y + scale * rng.standard_normal(problem.n)
        perturbed = RegressionProblem(
            problem.X,
            y_probe,
            variant=problem.variant,
            bound=problem.bound,
            lipschitz=problem.lipschitz,
        )
        probe_fit = fit(perturbed, probe_cfg)
        stat = max(stat, float(resid @ (probe_fit.theta - theta)))
    return {
        "max_violation": max_constraint_violation(fit_result, problem),
        "projection_statistic": stat,
        "probes": int(probes),
    }
