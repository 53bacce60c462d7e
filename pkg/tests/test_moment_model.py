"""
乘积测度矩模型测试
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from src.moments.moment_model import (
    MomentVector,
    assemble_moment_matrix,
    dirac_moments,
    gamma_dot_phi,
    hankel_blocks,
    is_psd,
    localizing_blocks,
    localizing_weight,
    min_eigenvalue,
    phi,
    phi_gradient,
    product_measure_moments,
    psd_factor,
    psd_sqrt,
)
from src.polynomial.poly_core import SparsePoly, evaluate, square_to_gamma
from src.utils.exceptions import DimensionMismatchError, MomentRangeError, NumericError

FD_STEP = 1e-6


def random_moments(rng, n_components, dimension, degree):
    return rng.uniform(-1.0, 1.0, size=(n_components, dimension, 2 * degree + 1))


# ============================================================ MomentVector
def test_moment_vector_shape_and_properties():
    mu = MomentVector(np.ones((2, 3, 5)))
    assert (mu.n_components, mu.dimension, mu.degree) == (2, 3, 2)
    with pytest.raises(ValueError):
        mu.data[0, 0, 0] = 2.0


def test_moment_vector_rejects_even_length():
    with pytest.raises(DimensionMismatchError):
        MomentVector(np.ones((1, 2, 4)))


def test_moment_vector_rejects_non_finite():
    data = np.ones((1, 1, 3))
    data[0, 0, 1] = np.nan
    with pytest.raises(NumericError):
        MomentVector(data)


# ============================================================ phi
def test_phi_normalization_of_unit_measure():
    assert phi(np.ones((1, 3, 5)), (0, 0, 0)) == 1.0


def test_phi_dirac_product():
    mu = product_measure_moments([[0.5, -0.25]], degree=1)
    assert phi(mu, (2, 1)) == pytest.approx(-0.0625)


def test_phi_weighted_mixture():
    mu = product_measure_moments([[1.0, 0.0], [0.0, 1.0]], degree=1, weights=[0.3, 0.7])
    assert phi(mu, (2, 0)) == pytest.approx(0.3)
    assert phi(mu, (0, 0)) == pytest.approx(1.0)


def test_phi_out_of_range():
    mu = np.ones((1, 2, 3))
    with pytest.raises(MomentRangeError):
        phi(mu, (3, 0))
    with pytest.raises(DimensionMismatchError):
        phi(mu, (1, 0, 0))


@given(
    seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
    n_components=st.integers(min_value=1, max_value=3),
    dimension=st.integers(min_value=1, max_value=4),
    alpha=st.floats(min_value=-2.0, max_value=2.0),
    beta=st.floats(min_value=-2.0, max_value=2.0),
)
def test_phi_is_multilinear(seed, n_components, dimension, alpha, beta):
    rng = np.random.default_rng(seed)
    degree = 2
    mu = random_moments(rng, n_components, dimension, degree)
    n = tuple(rng.integers(0, 2 * degree + 1, size=dimension))
    l, i = rng.integers(n_components), rng.integers(dimension)
    u, v = rng.uniform(-1, 1, size=(2, 2 * degree + 1))

    def phi_with(slot):
        trial = mu.copy()
        trial[l, i] = slot
        return phi(trial, n)

    base = phi_with(np.zeros(2 * degree + 1))
    combined = phi_with(alpha * u + beta * v) - base
    expected = alpha * (phi_with(u) - base) + beta * (phi_with(v) - base)
    assert combined == pytest.approx(expected, abs=1e-12)


# ============================================================ phi_gradient
def test_phi_gradient_single_factor():
    mu = np.random.default_rng(0).uniform(size=(1, 1, 5))
    grad = phi_gradient(mu, (3,))
    expected = np.zeros_like(mu)
    expected[0, 0, 3] = 1.0
    np.testing.assert_array_equal(grad, expected)


def test_phi_gradient_dirac_by_hand():
    mu = product_measure_moments([[0.5, -0.25]], degree=1).data
    grad = phi_gradient(mu, (2, 1))
    assert grad[0, 0, 2] == pytest.approx(-0.25)
    assert grad[0, 1, 1] == pytest.approx(0.25)
    mask = np.ones_like(grad, dtype=bool)
    mask[0, 0, 2] = mask[0, 1, 1] = False
    assert np.all(grad[mask] == 0.0)


def test_phi_gradient_matches_central_differences(rng):
    for _ in range(100):
        n_components = int(rng.integers(1, 4))
        dimension = int(rng.integers(1, 5))
        degree = int(rng.integers(1, 4))
        mu = random_moments(rng, n_components, dimension, degree)
        n = tuple(rng.integers(0, 2 * degree + 1, size=dimension))
        analytic = phi_gradient(mu, n)

        numeric = np.zeros_like(mu)
        for index in np.ndindex(mu.shape):
            plus, minus = mu.copy(), mu.copy()
            plus[index] += FD_STEP
            minus[index] -= FD_STEP
            numeric[index] = (phi(plus, n) - phi(minus, n)) / (2 * FD_STEP)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


# ============================================================ moment matrices
def test_dirac_moment_matrix_is_rank_one():
    matrix = assemble_moment_matrix([1.0, 0.5, 0.25], order=1)
    np.testing.assert_allclose(matrix, [[1.0, 0.5], [0.5, 0.25]])
    np.testing.assert_allclose(np.linalg.eigvalsh(matrix), [0.0, 1.25], atol=1e-12)
    assert is_psd(matrix)


def test_uniform_measure_moment_matrix():
    # [-1,1] 上均匀分布的矩，数值积分得到
    moments = [integrate.quad(lambda t, k=k: 0.5 * t ** k, -1.0, 1.0)[0] for k in range(3)]
    matrix = assemble_moment_matrix(moments, order=1)
    np.testing.assert_allclose(matrix, [[1.0, 0.0], [0.0, 1.0 / 3.0]], atol=1e-9)
    assert is_psd(matrix)


def test_localizing_matrix_sign_encodes_box():
    inside = assemble_moment_matrix(dirac_moments([0.5], 3)[0], localizing_weight(), order=0)
    outside = assemble_moment_matrix(dirac_moments([1.5], 3)[0], localizing_weight(), order=0)
    np.testing.assert_allclose(inside, [[0.75]])
    np.testing.assert_allclose(outside, [[-1.25]])
    assert is_psd(inside)
    assert not is_psd(outside)


def test_insufficient_moments():
    with pytest.raises(MomentRangeError):
        assemble_moment_matrix([1.0, 0.5, 0.25], order=2)
    with pytest.raises(MomentRangeError):
        assemble_moment_matrix([1.0, 0.5, 0.25], localizing_weight(), order=1)


def test_weight_must_be_univariate():
    with pytest.raises(DimensionMismatchError):
        assemble_moment_matrix([1.0] * 5, SparsePoly.variable(2, 0), order=1)


@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=9, max_size=9))
def test_hankel_structure(moments):
    matrix = assemble_moment_matrix(moments, order=4)
    np.testing.assert_array_equal(matrix, matrix.T)
    for m in range(4):
        for n in range(4):
            assert matrix[m + 1, n] == matrix[m, n + 1]


@given(st.floats(min_value=-1.0, max_value=1.0), st.integers(min_value=1, max_value=6))
def test_dirac_moments_are_representable(x, degree):
    moments = dirac_moments([x], 2 * degree + 1)[0]
    assert min_eigenvalue(assemble_moment_matrix(moments, order=degree)) >= -1e-10
    localizing = assemble_moment_matrix(moments, localizing_weight(), order=degree - 1)
    assert min_eigenvalue(localizing) >= -1e-10


def test_batched_blocks_match_single_assembly(rng):
    mu = random_moments(rng, 2, 3, 3)
    hankel = hankel_blocks(mu, 3)
    localizing = localizing_blocks(mu, 2)
    for l in range(2):
        for i in range(3):
            np.testing.assert_allclose(hankel[l, i], assemble_moment_matrix(mu[l, i], order=3))
            np.testing.assert_allclose(
                localizing[l, i], assemble_moment_matrix(mu[l, i], localizing_weight(), order=2)
            )


# ============================================================ gamma_dot_phi
@pytest.fixture
def annulus_gamma(annulus_2d):
    return square_to_gamma(annulus_2d.equalities[0])


def test_gamma_dot_phi_vanishes_on_feasible_dirac(annulus_gamma):
    mu = product_measure_moments([[-1.0, 0.0]], degree=4)
    assert gamma_dot_phi(mu, 0, annulus_gamma) == pytest.approx(0.0, abs=1e-15)


def test_gamma_dot_phi_at_origin(annulus_gamma):
    mu = product_measure_moments([[0.0, 0.0]], degree=4)
    assert gamma_dot_phi(mu, 0, annulus_gamma) == pytest.approx(0.0625)


def test_gamma_dot_phi_constant():
    mu = np.random.default_rng(3).uniform(size=(2, 3, 5))
    mu[:, :, 0] = 1.0
    assert gamma_dot_phi(mu, 1, SparsePoly.constant(3, 1.0)) == pytest.approx(1.0)


def test_gamma_dot_phi_component_index(annulus_gamma):
    mu = product_measure_moments([[-1.0, 0.0], [0.0, 0.0]], degree=4)
    assert gamma_dot_phi(mu, 1, annulus_gamma) == pytest.approx(0.0625)
    with pytest.raises(DimensionMismatchError):
        gamma_dot_phi(mu, 2, annulus_gamma)


def test_gamma_dot_phi_exponent_out_of_range(annulus_gamma):
    mu = product_measure_moments([[0.1, 0.2]], degree=3)
    with pytest.raises(MomentRangeError):
        gamma_dot_phi(mu, 0, annulus_gamma)


def test_gamma_dot_phi_equals_squared_constraint(annulus_2d, annulus_gamma, rng):
    g = annulus_2d.equalities[0]
    for x in rng.uniform(-1.0, 1.0, size=(100, 2)):
        mu = product_measure_moments([x], degree=4)
        assert gamma_dot_phi(mu, 0, annulus_gamma) == pytest.approx(evaluate(g, x) ** 2, rel=1e-10, abs=1e-12)


# ============================================================ PSD helpers
def test_psd_sqrt_reconstructs_matrix(rng):
    factor = rng.normal(size=(4, 4))
    matrix = factor @ factor.T
    root = psd_sqrt(matrix)
    np.testing.assert_allclose(root, root.T, atol=1e-12)
    np.testing.assert_allclose(root @ root.T, matrix, atol=1e-10)


def test_psd_sqrt_clips_negative_eigenvalues():
    root = psd_sqrt(np.diag([1.0, -1.0]), floor=1e-6)
    np.testing.assert_allclose(root @ root.T, np.diag([1.0, 1e-6]), atol=1e-15)


def test_psd_factor_low_rank():
    matrix = assemble_moment_matrix(dirac_moments([0.3], 5)[0], order=2)
    factor = psd_factor(matrix, rank=1)
    assert factor.shape == (3, 1)
    np.testing.assert_allclose(factor @ factor.T, matrix, atol=1e-12)
