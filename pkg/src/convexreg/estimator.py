"""Scikit-learn style estimator wrapping the convex least-squares fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import solver
from .qp import SolverConfig


class ConvexLSE(RegressorMixin, BaseEstimator):
    """Least-squares regression over convex functions.

    Parameters
    ----------
    variant : {"full", "bounded", "lipschitz", "bounded_lipschitz"}
        Constraint class: all convex functions, or those uniformly bounded by
        `bound`, Lipschitz with constant `lipschitz`, or both.
    bound : float, optional
        Uniform bound B for the bounded variants.
    lipschitz : float, optional
        Lipschitz constant L for the Lipschitz variants.
    solver_config : SolverConfig, optional
        Tolerances and engine selection; defaults match the library.

    Attributes
    ----------
    theta_ : fitted values at the (merged) design points
    subgradients_ : one subgradient per design point
    diagnostics_ : solver report (iterations, residuals, convergence flag)
    """

    def __init__(self, variant="full", bound=None, lipschitz=None, solver_config=None):
        self.variant = variant
        self.bound = bound
        self.lipschitz = lipschitz
        self.solver_config = solver_config

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=1, y_numeric=True)
        self.problem_ = solver.RegressionProblem(
            X, y, variant=self.variant, bound=self.bound, lipschitz=self.lipschitz
        )
        cfg = self.solver_config if self.solver_config is not None else SolverConfig()
        self.fit_result_ = solver.fit(self.problem_, cfg)
        self.theta_ = self.fit_result_.theta
        self.subgradients_ = self.fit_result_.subgradients
        self.diagnostics_ = self.fit_result_.diagnostics
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_result_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features; expected {self.n_features_in_}"
            )
        return solver.extend(self.fit_result_, self.problem_, np.asarray(X, dtype=float))
