from itertools import combinations

import numpy as np
import pytest

from convexreg.qp import SolverConfig
from convexreg.solver import (
    LSEFit,
    ProblemError,
    RegressionProblem,
    check_kkt,
    extend,
    fit,
    max_constraint_violation,
)

TIGHT = SolverConfig(eps_primal=1e-9, eps_dual=1e-9, eps_feas=1e-9)


def brute_force_full_lse(X, y):
    """Active-set enumeration oracle for the full convex LSE (d=1, small n).

    Tries every subset of the pairwise constraints as the active set, solves
    the equality-constrained least squares through its KKT system, keeps the
    feasible candidate with the smallest objective.
    """
    X = np.atleast_2d(X)
    n, d = X.shape
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    nv = n + n * d

    def row(i, j):
        a = np.zeros(nv)
        a[i] = 1.0
        a[j] = -1.0
        a[n + i * d : n + (i + 1) * d] = X[j] - X[i]
        return a

    A_all = np.array([row(i, j) for (i, j) in pairs]) if pairs else np.zeros((0, nv))
    P = np.zeros((nv, nv))
    P[:n, :n] = np.eye(n)
    q = np.concatenate([-y, np.zeros(n * d)])
    best_obj, best_theta = np.inf, y.copy()
    for r in range(len(pairs) + 1):
        for S in combinations(range(len(pairs)), r):
            A = A_all[list(S)]
            k = len(S)
            K = np.block([[P, A.T], [A, np.zeros((k, k))]]) if k else P
            rhs = np.concatenate([-q, np.zeros(k)])
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            if np.linalg.norm(K @ sol - rhs) > 1e-8:
                continue
            x = sol[:nv]
            if pairs and (A_all @ x).max(initial=0.0) > 1e-9:
                continue
            obj = float(np.sum((y - x[:n]) ** 2))
            if obj < best_obj - 1e-12:
                best_obj, best_theta = obj, x[:n].copy()
    return best_theta, best_obj


def test_v_example_projection():
    # only active constraint is the middle second difference; projecting
    # (0,1,0) onto it gives the constant 1/3 with objective 2/3
    prob = RegressionProblem([[0.0], [1.0], [2.0]], [0.0, 1.0, 0.0])
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [1 / 3, 1 / 3, 1 / 3], atol=1e-7)
    assert f.diagnostics["objective"] == pytest.approx(2 / 3, abs=1e-7)
    assert f.diagnostics["converged"]


def test_already_convex_data_is_fixed_point():
    prob = RegressionProblem([[0.0], [1.0], [2.0]], [0.0, 0.0, 1.0])
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [0.0, 0.0, 1.0], atol=1e-7)


def test_two_points_interpolated():
    prob = RegressionProblem([[0.0], [1.0]], [3.0, -2.0])
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [3.0, -2.0], atol=1e-7)


def test_bounded_clipping():
    prob = RegressionProblem([[0.0], [1.0]], [1.0, 1.0], variant="bounded", bound=0.2)
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [0.2, 0.2], atol=1e-7)


def test_lipschitz_zero_gives_mean():
    prob = RegressionProblem(
        [[0.0], [1.0], [2.0]], [0.0, 1.0, 0.5], variant="lipschitz", lipschitz=0.0
    )
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [0.5, 0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(f.subgradients, 0.0)


def test_single_point():
    prob = RegressionProblem([[0.3, 0.4]], [2.0])
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [2.0])
    probb = RegressionProblem([[0.3, 0.4]], [2.0], variant="bounded", bound=1.0)
    fb = fit(probb, TIGHT)
    np.testing.assert_allclose(fb.theta, [1.0])


def test_duplicate_merging():
    X = [[0.0], [1.0], [1.0], [2.0]]
    y = [0.0, 0.5, 1.5, 0.0]
    prob = RegressionProblem(X, y)
    assert prob.n == 3
    np.testing.assert_allclose(prob.weights, [1.0, 2.0, 1.0])
    np.testing.assert_allclose(prob.y, [0.0, 1.0, 0.0])
    # weighted projection: minimize t1^2 + 2(1-t2)^2 + t3^2 with
    # t1 - 2 t2 + t3 >= 0 gives the constant 1/2 (hand KKT)
    f = fit(prob, TIGHT)
    np.testing.assert_allclose(f.theta, [0.5, 0.5, 0.5], atol=1e-6)


def test_problem_validation():
    with pytest.raises(ProblemError):
        RegressionProblem([[0.0]], [1.0, 2.0])
    with pytest.raises(ProblemError):
        RegressionProblem([[0.0]], [1.0], variant="bounded")
    with pytest.raises(ProblemError):
        RegressionProblem([[0.0]], [1.0], variant="huber")


def test_json_round_trip():
    prob = RegressionProblem(
        [[0.0], [1.0]], [1.0, 2.0], variant="bounded_lipschitz", bound=3.0, lipschitz=1.5
    )
    prob2 = RegressionProblem.from_json(prob.to_json())
    assert prob2.variant == "bounded_lipschitz"
    assert prob2.bound == 3.0 and prob2.lipschitz == 1.5
    f = fit(prob2, TIGHT)
    f2 = LSEFit.from_json(f.to_json())
    np.testing.assert_allclose(f.theta, f2.theta)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n", [2, 3, 4])
def test_brute_force_equivalence_small(seed, n):
    rng = np.random.default_rng(1000 * n + seed)
    X = np.sort(rng.uniform(-1, 1, size=n))[:, None]
    y = rng.normal(size=n)
    prob = RegressionProblem(X, y)
    f = fit(prob, TIGHT)
    theta_star, obj_star = brute_force_full_lse(X, y)
    np.testing.assert_allclose(f.theta, theta_star, atol=1e-6)
    assert f.diagnostics["objective"] == pytest.approx(obj_star, abs=1e-6)


def test_extend_at_design_points_and_beyond():
    prob = RegressionProblem([[0.0], [1.0], [2.0]], [0.0, 0.0, 1.0])
    f = fit(prob, TIGHT)
    for k, xk in enumerate(prob.X):
        assert extend(f, prob, xk) == pytest.approx(f.theta[k], abs=1e-6)
    # hand-made fit: theta=(0,0,1), g=(0,0,1): the steepest plane wins at x=3
    manual = LSEFit(
        theta=np.array([0.0, 0.0, 1.0]),
        subgradients=np.array([[0.0], [0.0], [1.0]]),
    )
    assert extend(manual, prob, np.array([3.0])) == pytest.approx(2.0)


def test_extend_is_convex():
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(20, 2))
    y = np.sum(X**2, axis=1) + 0.1 * rng.normal(size=20)
    prob = RegressionProblem(X, y)
    f = fit(prob, TIGHT)
    for _ in range(100):
        a, b = rng.uniform(-1.5, 1.5, size=2), rng.uniform(-1.5, 1.5, size=2)
        lam = rng.uniform()
        mid = extend(f, prob, lam * a + (1 - lam) * b)
        assert mid <= lam * extend(f, prob, a) + (1 - lam) * extend(f, prob, b) + 1e-10


def test_bounded_extension_clipped():
    prob = RegressionProblem(
        [[0.0], [1.0]], [0.5, 2.0], variant="bounded", bound=1.0
    )
    f = fit(prob, TIGHT)
    assert extend(f, prob, np.array([10.0])) <= 1.0 + 1e-9


def test_feasibility_within_tolerance():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 1, size=(60, 2))
    y = np.sum(X**2, axis=1) + 0.3 * rng.normal(size=60)
    prob = RegressionProblem(X, y)
    f = fit(prob)
    assert max_constraint_violation(f, prob) <= 1e-6
    assert f.diagnostics["converged"]


def test_projection_is_one_lipschitz():
    rng = np.random.default_rng(11)
    X = np.linspace(0, 1, 40)[:, None]
    y1 = X[:, 0] ** 2 + 0.2 * rng.normal(size=40)
    y2 = y1 + 0.1 * rng.normal(size=40)
    f1 = fit(RegressionProblem(X, y1), TIGHT)
    f2 = fit(RegressionProblem(X, y2), TIGHT)
    assert np.linalg.norm(f1.theta - f2.theta) <= np.linalg.norm(y1 - y2) + 1e-6


def test_variant_nesting_objectives():
    rng = np.random.default_rng(13)
    X = np.linspace(0, 1, 25)[:, None]
    y = np.abs(X[:, 0] - 0.4) + 0.3 * rng.normal(size=25)
    full = fit(RegressionProblem(X, y), TIGHT)
    lip = fit(RegressionProblem(X, y, variant="lipschitz", lipschitz=0.8), TIGHT)
    both = fit(
        RegressionProblem(
            X, y, variant="bounded_lipschitz", bound=0.3, lipschitz=0.8
        ),
        TIGHT,
    )
    tol = 1e-7
    assert full.diagnostics["objective"] <= lip.diagnostics["objective"] + tol
    assert lip.diagnostics["objective"] <= both.diagnostics["objective"] + tol


def test_affine_exactness():
    rng = np.random.default_rng(17)
    X = rng.uniform(-1, 1, size=(30, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.7
    f = fit(RegressionProblem(X, y), TIGHT)
    np.testing.assert_allclose(f.theta, y, atol=1e-6)


def test_scaling_equivariance():
    rng = np.random.default_rng(19)
    X = np.linspace(0, 1, 20)[:, None]
    y = X[:, 0] ** 2 + 0.3 * rng.normal(size=20)
    f1 = fit(RegressionProblem(X, y), TIGHT)
    f2 = fit(RegressionProblem(X, 3.0 * y), TIGHT)
    np.testing.assert_allclose(f2.theta, 3.0 * f1.theta, atol=1e-6)


def test_collinear_design_minimum_norm_subgradients():
    # points on a line in d=2: nothing constrains subgradients orthogonal to
    # the line, so the polish must zero that component
    t = np.linspace(0, 1, 12)
    X = np.stack([t, 2.0 * t], axis=1)
    rng = np.random.default_rng(23)
    y = t**2 + 0.05 * rng.normal(size=12)
    prob = RegressionProblem(X, y)
    f = fit(prob, TIGHT)
    direction = np.array([2.0, -1.0]) / np.sqrt(5.0)  # orthogonal to the line
    ortho = f.subgradients @ direction
    np.testing.assert_allclose(ortho, 0.0, atol=1e-6)


def test_kkt_interior_case():
    prob = RegressionProblem([[0.0], [1.0], [2.0]], [0.0, 0.0, 1.0])
    f = fit(prob, TIGHT)
    report = check_kkt(f, prob, probes=5, seed=0)
    assert report["projection_statistic"] <= 1e-8
    assert report["max_violation"] <= 1e-8


def test_kkt_hand_probe_v_example():
    prob = RegressionProblem([[0.0], [1.0], [2.0]], [0.0, 1.0, 0.0])
    f = fit(prob, TIGHT)
    resid = prob.y - f.theta
    probe = np.zeros(3)
    val = float(resid @ (probe - f.theta))
    assert val == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kkt_statistic_random_problems(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 60))
    d = int(rng.integers(1, 3))
    X = rng.uniform(0, 1, size=(n, d))
    y = np.sum(X**2, axis=1) + 0.3 * rng.normal(size=n)
    prob = RegressionProblem(X, y)
    f = fit(prob, TIGHT)
    report = check_kkt(f, prob, probes=20, seed=seed)
    assert report["projection_statistic"] <= 1e-6 * n
    assert report["max_violation"] <= 1e-6


def test_nonconvergence_is_reported_not_raised():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, size=(40, 2))
    y = np.sum(X**2, axis=1) + 0.3 * rng.normal(size=40)
    cfg = SolverConfig(max_iterations=1, max_rounds=1, round_iterations=1)
    f = fit(RegressionProblem(X, y), cfg)
    assert f.diagnostics["converged"] in (False, True)  # no exception path


def test_deterministic_given_problem():
    rng = np.random.default_rng(29)
    X = rng.uniform(0, 1, size=(30, 2))
    y = np.sum(X**2, axis=1) + 0.2 * rng.normal(size=30)
    f1 = fit(RegressionProblem(X, y))
    f2 = fit(RegressionProblem(X, y))
    np.testing.assert_array_equal(f1.theta, f2.theta)
    np.testing.assert_array_equal(f1.subgradients, f2.subgradients)
