"""
增广拉格朗日求解器测试
"""
import numpy as np
import pytest

from src.analysis.benchmark import gen_annulus
from src.analysis.pipeline import solve_original
from src.solver.direct import DirectNLP
from src.solver.nlp_solver import (
    AugmentedLagrangianSolver,
    CallableNLP,
    SolverConfig,
    SolveStatus,
    kkt_residual,
    solve,
)
from src.utils.exceptions import DimensionMismatchError


def shifted_square():
    """min (z-1)^2"""
    return CallableNLP(
        n_variables=1,
        objective=lambda z: (z[0] - 1.0) ** 2,
        gradient=lambda z: np.array([2.0 * (z[0] - 1.0)]),
    )


def pinned_square():
    """min z^2 s.t. z - 1 = 0，KKT 点 z* = 1, λ* = -2"""
    return CallableNLP(
        n_variables=1,
        objective=lambda z: z[0] ** 2,
        gradient=lambda z: np.array([2.0 * z[0]]),
        constraints=lambda z: np.array([z[0] - 1.0]),
        jacobian_transpose=lambda z, v: np.array([v[0]]),
        n_constraints=1,
    )


def projection_problem(a, B, b):
    """min ‖z - a‖² s.t. Bz = b"""
    return CallableNLP(
        n_variables=a.size,
        objective=lambda z: float(np.dot(z - a, z - a)),
        gradient=lambda z: 2.0 * (z - a),
        constraints=lambda z: B @ z - b,
        jacobian_transpose=lambda z, v: B.T @ v,
        n_constraints=B.shape[0],
    )


# ============================================================ solve
def test_unconstrained_quadratic():
    report = solve(shifted_square(), np.array([-3.0]), cfg=SolverConfig(tol=1e-6))
    assert report.status is SolveStatus.CONVERGED
    assert report.x[0] == pytest.approx(1.0, abs=1e-5)
    assert report.objective == pytest.approx(0.0, abs=1e-9)
    assert report.restarts == 0


def test_single_equality():
    cfg = SolverConfig(tol=1e-2)
    report = solve(pinned_square(), np.array([0.0]), cfg=cfg)
    assert report.converged
    assert report.x[0] == pytest.approx(1.0, abs=cfg.tol)
    assert report.objective == pytest.approx(1.0, abs=3 * cfg.tol)
    assert report.max_violation <= cfg.tol
    assert report.stationarity <= cfg.tol
    assert report.multipliers[0] == pytest.approx(-2.0, abs=0.1)


def test_converged_report_respects_tolerance():
    cfg = SolverConfig(tol=1e-4)
    report = solve(pinned_square(), np.array([5.0]), cfg=cfg)
    assert report.converged
    assert report.max_violation <= cfg.tol and report.stationarity <= cfg.tol


@pytest.mark.parametrize("seed", range(5))
def test_equality_constrained_projection_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    n, m = 5, 2
    a = rng.standard_normal(n)
    B = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    expected = a - B.T @ np.linalg.solve(B @ B.T, B @ a - b)

    report = solve(projection_problem(a, B, b), np.zeros(n), cfg=SolverConfig(tol=1e-7, max_inner=2000))
    assert report.converged
    np.testing.assert_allclose(report.x, expected, atol=1e-4)


def test_box_constraints_are_respected():
    nlp = CallableNLP(
        n_variables=2,
        objective=lambda z: (z[0] - 2.0) ** 2 + (z[1] + 0.5) ** 2,
        gradient=lambda z: np.array([2.0 * (z[0] - 2.0), 2.0 * (z[1] + 0.5)]),
    )
    box = (-np.ones(2), np.ones(2))
    report = solve(nlp, np.array([0.3, 0.9]), box=box, cfg=SolverConfig(tol=1e-6))
    assert report.converged
    np.testing.assert_allclose(report.x, [1.0, -0.5], atol=1e-5)
    assert np.all(np.abs(report.x) <= 1.0)


def test_inner_loop_is_monotone():
    cfg = SolverConfig(tol=1e-6, record_trace=True)
    nlp = DirectNLP(gen_annulus(2))
    report = AugmentedLagrangianSolver(cfg).solve(nlp, nlp.initial_point(3))
    assert report.trace
    for values in report.trace:
        for before, after in zip(values, values[1:]):
            assert after <= before + 1e-12 * max(1.0, abs(before))


def test_solve_is_deterministic():
    nlp = DirectNLP(gen_annulus(3))
    cfg = SolverConfig(tol=1e-3, seed=17)
    first = solve(nlp, nlp.initial_point(5), cfg=cfg)
    second = solve(nlp, nlp.initial_point(5), cfg=cfg)
    assert first.status is second.status
    np.testing.assert_array_equal(first.x, second.x)
    assert (first.outer_iterations, first.inner_iterations, first.restarts) == \
        (second.outer_iterations, second.inner_iterations, second.restarts)


def unsatisfiable():
    """z^2 + 1 = 0 无解，ρ 只能一路增长到上限"""
    return CallableNLP(
        n_variables=1,
        objective=lambda z: 0.0,
        gradient=lambda z: np.zeros(1),
        constraints=lambda z: np.array([z[0] ** 2 + 1.0]),
        jacobian_transpose=lambda z, v: np.array([2.0 * z[0] * v[0]]),
        n_constraints=1,
    )


def test_penalty_cap_triggers_restarts():
    cfg = SolverConfig(max_penalty=1e3, max_restarts=2, seed=1)
    report = solve(unsatisfiable(), np.array([0.5]), cfg=cfg)
    assert report.status is SolveStatus.RESTART_EXHAUSTED
    assert report.restarts == 2
    assert report.penalty <= cfg.max_penalty


def test_penalty_cap_without_restarts_reports_numeric_failure():
    cfg = SolverConfig(max_penalty=1e3, max_restarts=0)
    report = solve(unsatisfiable(), np.array([0.5]), cfg=cfg)
    assert report.status is SolveStatus.NUMERIC_FAILURE
    assert report.restarts == 0


def test_iteration_limit_is_not_restarted():
    report = solve(pinned_square(), np.array([0.0]), cfg=SolverConfig(max_outer=1, tol=1e-6))
    assert report.status is SolveStatus.ITERATION_LIMIT
    assert report.restarts == 0
    assert report.outer_iterations == 1


def test_non_finite_start_is_numeric_failure():
    nlp = CallableNLP(
        n_variables=1,
        objective=lambda z: float(np.log(z[0])),
        gradient=lambda z: np.array([1.0 / z[0]]),
    )
    report = solve(nlp, np.array([-1.0]))
    assert report.status is SolveStatus.NUMERIC_FAILURE
    assert report.outer_iterations == 0
    assert report.restarts == 0


def test_start_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        solve(shifted_square(), np.zeros(2))


def test_report_to_dict():
    payload = solve(shifted_square(), np.array([0.0])).to_dict()
    assert payload["status"] == "Converged"
    assert {"objective", "max_violation", "stationarity", "restarts", "wall_time_s"} <= set(payload)


# ============================================================ kkt_residual
def test_kkt_residual_at_analytic_solution():
    stationarity, feasibility = kkt_residual(pinned_square(), np.array([1.0]), np.array([-2.0]))
    assert stationarity <= 1e-8
    assert feasibility <= 1e-8


def test_kkt_residual_without_multipliers():
    stationarity, feasibility = kkt_residual(pinned_square(), np.array([1.0]), np.zeros(1), 0.0)
    assert feasibility == pytest.approx(0.0)
    assert stationarity == pytest.approx(2.0)


def test_kkt_residual_matches_definition(rng):
    n, m = 4, 2
    Q = rng.standard_normal((n, n))
    Q = Q @ Q.T
    B = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    nlp = CallableNLP(
        n_variables=n,
        objective=lambda z: 0.5 * z @ Q @ z,
        gradient=lambda z: Q @ z,
        constraints=lambda z: B @ z - b,
        jacobian_transpose=lambda z, v: B.T @ v,
        n_constraints=m,
    )
    x = rng.standard_normal(n)
    lam = rng.standard_normal(m)
    rho = 3.0
    stationarity, feasibility = kkt_residual(nlp, x, lam, rho)
    c = B @ x - b
    assert feasibility == pytest.approx(np.max(np.abs(c)))
    assert stationarity == pytest.approx(np.max(np.abs(Q @ x + B.T @ (lam + rho * c))))

    box = (-0.5 * np.ones(n), 0.5 * np.ones(n))
    clipped = np.clip(x, -0.5, 0.5)
    projected, _ = kkt_residual(nlp, clipped, lam, 0.0, box)
    grad = Q @ clipped + B.T @ lam
    assert projected == pytest.approx(np.max(np.abs(np.clip(clipped - grad, -0.5, 0.5) - clipped)))


def test_kkt_residual_shape_checks():
    with pytest.raises(DimensionMismatchError):
        kkt_residual(pinned_square(), np.zeros(2), np.zeros(1))
    with pytest.raises(DimensionMismatchError):
        kkt_residual(pinned_square(), np.zeros(1), np.zeros(3))


# ============================================================ SolverConfig
@pytest.mark.parametrize("kwargs", [
    {"tol": 0.0},
    {"penalty_growth": 1.0},
    {"max_outer": 0},
    {"max_restarts": -1},
    {"feasibility_improvement_ratio": 1.5},
    {"initial_penalty": 10.0, "max_penalty": 1.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_config_from_module_defaults():
    cfg = SolverConfig.from_config(tol=5e-2, seed=None)
    assert cfg.tol == 5e-2
    assert cfg.max_outer == 100
    assert cfg.penalty_growth == 10.0
    assert cfg.replace(seed=9).seed == 9


# ============================================================ 原始形式
def test_direct_nlp_shapes(half_line_problem):
    nlp = DirectNLP(half_line_problem)
    assert nlp.n_variables == 2
    assert nlp.n_constraints == 1
    x = nlp.initial_point(0)
    assert np.all(np.abs(x) <= 1.0)
    np.testing.assert_array_equal(nlp.initial_point(0), x)
    assert nlp.project_location(x).shape == (1,)


def test_direct_nlp_jacobian_product(annulus_2d, rng):
    nlp = DirectNLP(annulus_2d)
    x = rng.uniform(-1, 1, size=2)
    v = np.array([0.7])
    step = 1e-6
    numeric = np.array([
        (v @ nlp.eval_constraints(x + step * e) - v @ nlp.eval_constraints(x - step * e)) / (2 * step)
        for e in np.eye(2)
    ])
    np.testing.assert_allclose(nlp.eval_constraint_jacobian_product(x, v), numeric, rtol=1e-5, atol=1e-8)


@pytest.mark.slow
def test_direct_annulus_basin_fraction():
    problem = gen_annulus(2)
    successes = 0
    for seed in range(100):
        result = solve_original(problem, SolverConfig(tol=1e-2, seed=seed, max_restarts=0))
        if result.report.converged and abs(result.value + 1.21) <= 1e-2 * 1.21:
            successes += 1
    assert 0.10 <= successes / 100 <= 0.60
