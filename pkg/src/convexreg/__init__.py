"""Convex least-squares regression toolkit.

Estimators over convex function classes as finite-dimensional quadratic
programs, hard-instance constructions (piecewise-affine approximants of the
squared norm and cosine-bump packings), localized-complexity scans, and a
replicated risk-simulation harness with rate-exponent fits.
"""

from .complexity import ComplexityEstimate, estimate_H, localized_sup, locate_t_star
from .estimator import ConvexLSE
from .functions import (
    AffineFunction,
    BumpPacking,
    PiecewiseAffineConvex,
    SquaredNorm,
    bump_value,
    tangent_approximant,
    varshamov_gilbert,
)
from .geometry import (
    GridDesign,
    RandomDesign,
    SlabPolytope,
    box,
    cube_cover,
    grid_points,
    sample_uniform,
    unit_cube,
)
from .harness import (
    ExperimentConfig,
    RateTable,
    RiskCurve,
    affine_distance,
    empirical_loss,
    fit_rate,
    population_loss,
    rate_report,
    run_experiment,
    simulate_once,
)
from .qp import Diagnostics, SolverConfig
from .solver import LSEFit, RegressionProblem, check_kkt, extend, fit

__version__ = "0.1.0"
