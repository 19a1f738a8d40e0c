"""Monte Carlo estimation of the localized noise complexity and its
critical radius.

For a center function f with values f_i at the design points, the profile

    H(t) = E sup { (1/n) sum_i xi_i (theta_i - f_i) } - t^2 / 2

is estimated by drawing Gaussian noise vectors xi and solving the inner
supremum as a convex program: linear objective over the convexity cone
intersected with the ball (1/n) sum (theta_i - f_i)^2 <= t^2. H is concave
with H(0) = 0; the maximizer's square tracks the least-squares risk, which is
what the critical-radius scan reports.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .qp import SolverConfig, solve_cone_qp


def default_sup_config(n):
    """Splitting-engine profile used for the inner supremum solves."""
    return SolverConfig(
        engine="splitting",
        eps_primal=1e-5 * math.sqrt(n),
        eps_dual=1e-5 * math.sqrt(n),
        eps_feas=1e-7,
        round_iterations=600,
        max_rounds=8,
        polish=False,
    )


def localized_sup(design, center_values, t, noise, config=None):
    """Supremum of (1/n) noise . (theta - f) over the localized convex cone.

    Returns (value, converged). The returned value always respects the
    Cauchy-Schwarz cap t * sqrt(mean(noise^2)) because theta is projected
    exactly onto the ball before evaluating the objective.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    f = np.asarray(center_values, dtype=float).ravel()
    xi = np.asarray(noise, dtype=float).ravel()
    n = X.shape[0]
    if f.size != n or xi.size != n:
        raise ValueError("design, center values and noise must have equal length")
    if t < 0:
        raise ValueError("radius must be nonnegative")
    if t == 0.0:
        return 0.0, True
    if n == 1:
        return float(abs(xi[0]) * t), True
    cfg = config if config is not None else default_sup_config(n)
    radius = t * math.sqrt(n)
    theta, _, diag = solve_cone_qp(
        X,
        np.zeros(n),
        f,
        linear=xi / n,
        ball_center=f,
        ball_radius=radius,
        config=cfg,
    )
    dev = theta - f
    nrm = float(np.linalg.norm(dev))
    if nrm > radius and nrm > 0:
        dev = dev * (radius / nrm)
    value = float(xi @ dev) / n
    return value, bool(diag.converged)


def estimate_H(design, center_values, t, sigma, mc_reps, seed, config=None):
    """Monte Carlo estimate of H(t); returns (mean, stderr, solver_failures).

    Deterministic given the seed: replicate r uses the noise stream derived
    from (seed, r). t = 0 and sigma = 0 short-circuit to their exact values.
    """
    if mc_reps < 2:
        raise ValueError("need at least two Monte Carlo replicates")
    if t == 0.0:
        return 0.0, 0.0, 0
    if sigma == 0.0:
        return -0.5 * t * t, 0.0, 0
    X = np.atleast_2d(np.asarray(design, dtype=float))
    n = X.shape[0]
    vals = np.empty(mc_reps)
    failures = 0
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    for rep in range(mc_reps):
        rng = np.random.default_rng(np.random.SeedSequence(base + (rep,)))
        xi = sigma * rng.standard_normal(n)
        sup, ok = localized_sup(X, center_values, t, xi, config=config)
        if not ok:
            failures += 1
        vals[rep] = sup - 0.5 * t * t
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(mc_reps))
    return mean, stderr, failures


@dataclass
class ComplexityEstimate:
    """Profile of H over a radius grid with the located critical radius."""

    t_grid: np.ndarray
    H_means: np.ndarray
    H_stderrs: np.ndarray
    t_star: float
    mc_reps: int
    sigma: float
    solver_failures: np.ndarray
    upper_bracket: float | None = None  # first grid radius with H <= 0
    beyond_grid: bool = False
    flat_region: tuple = field(default=())

    def rows(self):
        for t, m, s, fc in zip(
            self.t_grid, self.H_means, self.H_stderrs, self.solver_failures
        ):
            yield t, m, s, int(fc)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "H_mean", "H_stderr", "solver_failures"])
            for t, m, s, fc in self.rows():
                writer.writerow([f"{t:.12g}", f"{m:.12g}", f"{s:.12g}", fc])


def default_t_grid(design, center_values, sigma, size=12):
    """Geometric radius grid bracketing both the small-t and large-t regimes."""
    X = np.atleast_2d(np.asarray(design, dtype=float))
    n, d = X.shape
    f = np.asarray(center_values, dtype=float).ravel()
    lo = 0.05 * max(sigma, 1e-6) * n ** (-2.0 / d)
    spread = float(np.max(f) - np.min(f)) if f.size else 0.0
    hi = 4.0 * max(spread + sigma, 10.0 * lo)
    return np.geomspace(lo, hi, size)


def locate_t_star(
    design,
    center_values,
    sigma,
    t_grid=None,
    mc_reps=64,
    seed=0,
    config=None,
):
    """Scan H over the radius grid and locate its maximizer.

    Ties within one standard error of the maximum resolve toward the smaller
    radius (the profile is concave but the Monte Carlo estimates are noisy).
    Also reports the first radius with H <= 0, an upper bracket for the
    critical radius, and flags a maximizer sitting at the end of the grid.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    if t_grid is None:
        t_grid = default_t_grid(X, center_values, sigma)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2 or np.any(np.diff(t_grid) <= 0) or np.any(t_grid < 0):
        raise ValueError("t_grid must be increasing and nonnegative")
    means = np.empty(t_grid.size)
    errs = np.empty(t_grid.size)
    fails = np.zeros(t_grid.size, dtype=int)
    for k, t in enumerate(t_grid):
        means[k], errs[k], fails[k] = estimate_H(
            X, center_values, t, sigma, mc_reps, (int(seed), k), config=config
        )
    best = int(np.argmax(means))
    tol = errs[best]
    candidates = np.flatnonzero(means >= means[best] - tol)
    pick = int(candidates[0]) if candidates.size else best
    upper = None
    positive_radii = np.flatnonzero((means <= 0) & (t_grid > 0))
    if positive_radii.size:
        upper = float(t_grid[positive_radii[0]])
    beyond = best == t_grid.size - 1 and bool(np.all(np.diff(means) > 0))
    flat = tuple(
        float(t_grid[i]) for i in (candidates[0], candidates[-1])
    ) if candidates.size else ()
    return ComplexityEstimate(
        t_grid=t_grid,
        H_means=means,
        H_stderrs=errs,
        t_star=float(t_grid[pick]),
        mc_reps=mc_reps,
        sigma=sigma,
        solver_failures=fails,
        upper_bracket=upper,
        beyond_grid=beyond,
        flat_region=flat,
    )
