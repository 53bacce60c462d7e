"""
最优解恢复、网格/枚举验证与求解流水线测试
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.analysis.benchmark import gen_annulus, gen_discrete, known_optimum
from src.analysis.pipeline import solve_original, solve_problem, solve_reformulation
from src.analysis.recovery import (
    brute_force_grid,
    enumerate_separable,
    polish_location,
    recover_location,
    relative_error,
    separable_minimum,
    verify_candidate,
)
from src.moments.moment_model import product_measure_moments
from src.polynomial.poly_core import ProblemSpec, SparsePoly, evaluate
from src.solver.nlp_solver import SolverConfig, SolveStatus
from src.utils.exceptions import (
    BandTooTightError,
    DegenerateSolutionError,
    DimensionMismatchError,
    NotSeparableError,
    OracleGuardError,
)

LATTICE_VALUE_2D = -529.0 / 450.0


# ============================================================ relative_error
def test_relative_error_scales_by_reference():
    assert relative_error(-1.2, -1.21) == pytest.approx(0.01 / 1.21)
    assert relative_error(0.5, 0.0) == pytest.approx(0.5)


# ============================================================ recover_location
def test_recover_dominant_lattice_point(discrete_2d):
    mu = product_measure_moments([[2 / 3, 2 / 3], [0.1, 0.2]], degree=3, weights=[1.0, 0.0])
    solution = recover_location(mu, discrete_2d)
    np.testing.assert_allclose(solution.location, [2 / 3, 2 / 3], atol=1e-12)
    assert solution.component == 1
    assert solution.value == pytest.approx(LATTICE_VALUE_2D, rel=1e-12)
    assert solution.max_equality_violation <= 1e-12


def test_recover_annulus_minimizer(annulus_2d):
    mu = product_measure_moments([[0.2, 0.3], [-1.0, 0.0]], degree=4, weights=[0.1, 0.9])
    solution = recover_location(mu, annulus_2d)
    np.testing.assert_allclose(solution.location, [-1.0, 0.0], atol=1e-12)
    assert solution.component == 2
    assert solution.value == pytest.approx(-1.21)


def test_recover_tie_prefers_first_component(discrete_2d):
    mu = product_measure_moments([[0.0, 2 / 3], [2 / 3, 0.0]], degree=3, weights=[0.5, 0.5])
    solution = recover_location(mu, discrete_2d)
    assert solution.component == 1
    np.testing.assert_allclose(solution.location, [0.0, 2 / 3], atol=1e-12)


def test_recover_degenerate_masses(discrete_2d):
    mu = product_measure_moments([[0.5, 0.5], [0.1, 0.1]], degree=3, weights=[1e-9, 0.0])
    with pytest.raises(DegenerateSolutionError):
        recover_location(mu, discrete_2d)


def test_recover_drops_slack_coordinates(half_line_problem):
    mu = product_measure_moments([[0.5, 0.0]], degree=2)
    solution = recover_location(mu, half_line_problem)
    assert solution.location.shape == (1,)
    assert solution.location[0] == pytest.approx(0.5)
    assert solution.max_inequality_violation == 0.0


def test_recover_needs_enough_coordinates(discrete_3d):
    with pytest.raises(DimensionMismatchError):
        recover_location(product_measure_moments([[0.1, 0.2]], degree=3), discrete_3d)


@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=3, max_size=3),
       st.floats(min_value=0.05, max_value=2.0))
def test_recover_exact_for_scaled_dirac(point, mass):
    problem = gen_discrete(3)
    mu = product_measure_moments([point], degree=3, weights=[mass])
    solution = recover_location(mu, problem)
    np.testing.assert_allclose(solution.location, point, atol=1e-12)


# ============================================================ verify_candidate
def test_verify_feasible_lattice_point(discrete_2d):
    report = verify_candidate(discrete_2d, [2 / 3, 2 / 3], reference_value=LATTICE_VALUE_2D)
    assert report.feasible and report.in_box
    assert report.rel_error == pytest.approx(0.0, abs=1e-12)
    assert report.to_dict()["feasible"] is True


def test_verify_infeasible_and_out_of_box(discrete_2d):
    report = verify_candidate(discrete_2d, [1.5, 0.0])
    assert not report.feasible
    assert not report.in_box
    assert report.box_violation == pytest.approx(0.5)
    assert report.rel_error is None


def test_verify_inequality_violation(half_line_problem):
    report = verify_candidate(half_line_problem, [0.25])
    assert report.max_inequality_violation == pytest.approx(0.25)
    assert not report.feasible


def test_verify_wrong_length(discrete_2d):
    with pytest.raises(DimensionMismatchError):
        verify_candidate(discrete_2d, [0.0])


# ============================================================ brute_force_grid
def test_grid_finds_annulus_optimum(annulus_2d):
    result = brute_force_grid(annulus_2d, points_per_axis=801, band=5e-3)
    assert result.value == pytest.approx(-1.21, abs=2e-2)
    assert result.location[0] == pytest.approx(-1.0, abs=2e-2)
    assert result.n_scanned == 801 ** 2
    assert 0 < result.n_kept < result.n_scanned


def test_grid_is_independent_of_jobs(annulus_2d):
    serial = brute_force_grid(annulus_2d, points_per_axis=601, band=5e-3, jobs=1)
    parallel = brute_force_grid(annulus_2d, points_per_axis=601, band=5e-3, jobs=2)
    assert serial.value == parallel.value
    np.testing.assert_array_equal(serial.location, parallel.location)
    assert serial.n_kept == parallel.n_kept


def test_grid_on_lattice_axis_is_exact(discrete_2d):
    result = brute_force_grid(discrete_2d, axis_values=[-1 / 3, 0.0, 2 / 3], band=1e-6)
    assert result.value == pytest.approx(LATTICE_VALUE_2D, rel=1e-12)
    np.testing.assert_allclose(result.location, [2 / 3, 2 / 3])
    assert result.n_kept == 9


def test_grid_band_too_tight(annulus_2d):
    with pytest.raises(BandTooTightError):
        brute_force_grid(annulus_2d, points_per_axis=100, band=0.0)


def test_grid_dimension_guard():
    with pytest.raises(OracleGuardError):
        brute_force_grid(gen_annulus(5), points_per_axis=3)


def test_grid_needs_two_points(annulus_2d):
    with pytest.raises(OracleGuardError):
        brute_force_grid(annulus_2d, points_per_axis=1)


# ============================================================ enumerate_separable
@pytest.mark.parametrize("dimension", [2, 3])
def test_enumerate_lattice(dimension):
    points = enumerate_separable(gen_discrete(dimension))
    assert points.shape == (3 ** dimension, dimension)
    np.testing.assert_allclose(np.unique(np.round(points, 9)), [-1 / 3, 0.0, 2 / 3], atol=1e-9)


def test_separable_minimum_matches_known_optimum(discrete_3d):
    value, location = separable_minimum(discrete_3d)
    expected_value, expected_location = known_optimum("discrete", 3)
    assert value == pytest.approx(expected_value, abs=1e-9)
    np.testing.assert_allclose(location, expected_location, atol=1e-9)


def test_enumerate_rejects_coupled_constraints(annulus_2d):
    with pytest.raises(NotSeparableError):
        enumerate_separable(annulus_2d)


def test_enumerate_rejects_unconstrained_variable():
    x1, x2 = SparsePoly.variable(2, 0), SparsePoly.variable(2, 1)
    problem = ProblemSpec(2, x1 + x2, (x1 * (x1 - 0.5),))
    with pytest.raises(NotSeparableError):
        enumerate_separable(problem)


def test_enumerate_filters_by_inequality():
    x1 = SparsePoly.variable(1, 0)
    problem = ProblemSpec(1, x1, (x1 * (x1 - 0.5),), (x1 - 0.25,))
    points = enumerate_separable(problem)
    np.testing.assert_allclose(points, [[0.5]], atol=1e-9)


# ============================================================ polish_location
def test_polish_reduces_violation(annulus_2d):
    start = np.array([-0.97, 0.05])
    polished = polish_location(annulus_2d, start)
    assert annulus_2d.max_equality_violation(polished) < annulus_2d.max_equality_violation(start)
    assert np.all(np.abs(polished) <= 1.0)


def test_polish_keeps_feasible_point(annulus_2d):
    np.testing.assert_array_equal(polish_location(annulus_2d, [-1.0, 0.0]), [-1.0, 0.0])


# ============================================================ pipeline
def test_original_method_on_half_line(half_line_problem):
    result = solve_original(half_line_problem, SolverConfig(tol=1e-4, seed=3))
    assert result.ok
    assert result.location[0] == pytest.approx(0.5, abs=1e-2)
    assert result.value == pytest.approx(evaluate(half_line_problem.objective, result.location))
    assert result.verification.feasible


def test_unknown_method(discrete_2d):
    with pytest.raises(ValueError):
        solve_problem(discrete_2d, "sdp")


def test_reformulation_result_is_consistent(discrete_2d):
    result = solve_reformulation(discrete_2d, cfg=SolverConfig(tol=1e-1, seed=11))
    payload = result.to_dict()
    assert payload["method"] == "reformulation"
    assert result.ok, result.error
    assert np.all(np.abs(result.location) <= 1.0)
    assert result.value == pytest.approx(evaluate(discrete_2d.objective, result.location))
    assert result.recovered.component in (1, 2)
    assert result.report.max_violation <= 1e-1


@pytest.mark.parametrize("family, tol", [("annulus", 1e-2), ("discrete", 1e-1)])
def test_reformulation_converges_in_two_dimensions(family, tol):
    problem = gen_annulus(2) if family == "annulus" else gen_discrete(2)
    optimum, _ = known_optimum(family, 2)
    result = solve_reformulation(problem, cfg=SolverConfig(tol=tol, seed=0))
    assert result.report.status == SolveStatus.CONVERGED
    assert relative_error(result.value, optimum) <= tol


@pytest.mark.slow
@pytest.mark.parametrize("dimension", [2, 3, 4])
def test_reformulation_agrees_with_enumeration(dimension):
    problem = gen_discrete(dimension)
    exact, _ = separable_minimum(problem)
    for seed in range(4):
        result = solve_reformulation(problem, cfg=SolverConfig(tol=1e-1, seed=seed))
        assert result.ok, result.error
        assert abs(result.value - exact) <= 1e-1


@pytest.mark.slow
def test_reformulation_annulus_acceptance():
    problem = gen_annulus(2)
    converged = 0
    for seed in range(4):
        result = solve_reformulation(problem, cfg=SolverConfig(tol=1e-2, seed=seed))
        if result.ok:
            converged += 1
            assert relative_error(result.value, -1.21) <= 1e-2
    assert converged >= 3
