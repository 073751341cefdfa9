import math

import numpy as np
import pytest

from src.measures.correlation import (EXACT, MONTE_CARLO, CorrelationAtoms, correlation_atoms,
                                      correlation_matrix, correlation_table)
from src.measures.distributions import (NULL, DenseAlternate, ExplicitPrior, GaussianMeanShift, GaussianNull,
                                        ProductAlternate, ProductNull, SampledPrior, fourier_coefficients,
                                        log_likelihood_ratio)
from src.measures import kernels
from src.measures.kernels import (FiniteKernel, TestingProblem, covariance_correlation,
                                  covariance_correlation_alternative, inner_product, low_degree_correlation,
                                  trivial_problem)
from src.utils.errors import (DimensionMismatchError, FixedCoordinateError, PreconditionError, PriorModeError,
                              StateCapExceededError, UnsupportedBackendError)


class TestProductNull:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(PreconditionError):
            ProductNull([0, 1], [[0.5, 0.6]])

    def test_zero_probability_is_a_fixed_coordinate(self):
        with pytest.raises(FixedCoordinateError) as err:
            ProductNull([0, 1], [[0.5, 0.5], [1.0, 0.0]])
        assert err.value.subject == "coordinate 1"

    def test_alphabet_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ProductNull([0, 1, 2], [[0.5, 0.5]])

    def test_single_symbol_alphabet(self):
        with pytest.raises((PreconditionError, DimensionMismatchError)):
            ProductNull([1.0], [[1.0]])

    def test_shape_and_states(self):
        null = ProductNull.bernoulli(3, 0.25)
        assert null.shape == (2, 2, 2)
        assert null.state_count == 8
        assert null.homogeneous
        assert null.table().sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("marginal", [[0.5, 0.5], [0.2, 0.8], [0.1, 0.3, 0.6]])
    def test_character_basis_is_orthonormal(self, marginal):
        null = ProductNull.repeated(list(range(len(marginal))), marginal, 1)
        B = null.character_basis()[0]
        gram = B @ np.diag(marginal) @ B.T
        np.testing.assert_allclose(gram, np.eye(len(marginal)), atol=1e-12)
        np.testing.assert_allclose(B[0], 1.0)

    def test_state_cap(self):
        from src.measures import distributions
        distributions.LIMITS["state_cap"] = 4
        with pytest.raises(StateCapExceededError):
            ProductNull.uniform_signs(3).table()


class TestAlternates:
    def test_dense_table_must_be_a_distribution(self):
        with pytest.raises(PreconditionError):
            DenseAlternate(np.full((2, 2), 0.3))

    def test_null_coefficients(self):
        null = ProductNull.bernoulli(2, 0.3)
        coefficients = fourier_coefficients(NULL, null)
        assert coefficients[0, 0] == 1.0
        assert np.count_nonzero(coefficients) == 1

    def test_null_table_has_trivial_coefficients(self):
        null = ProductNull.bernoulli(2, 0.3)
        coefficients = fourier_coefficients(DenseAlternate(null.table()), null)
        expected = np.zeros((2, 2))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(coefficients, expected, atol=1e-12)

    def test_log_likelihood_ratio(self, rng):
        null = ProductNull.bernoulli(2, 0.4)
        product = ProductAlternate(rng.dirichlet(np.ones(2), size=2))
        dense = DenseAlternate(product.dense(null))
        expected = np.log(product.dense(null) / null.table())
        np.testing.assert_allclose(log_likelihood_ratio(product, null), expected, atol=1e-12)
        np.testing.assert_allclose(log_likelihood_ratio(dense, null), expected, atol=1e-12)


class TestFiniteKernel:
    @pytest.mark.parametrize("d", [0, 1, 2, 3, math.inf])
    def test_product_and_dense_paths_agree(self, rng, d):
        null = ProductNull([-1.0, 1.0], rng.dirichlet(np.ones(2) * 3, size=3))
        u = ProductAlternate(rng.dirichlet(np.ones(2), size=3))
        v = ProductAlternate(rng.dirichlet(np.ones(2), size=3))
        kernel = FiniteKernel(null)
        dense_u, dense_v = DenseAlternate(u.dense(null)), DenseAlternate(v.dense(null))
        assert kernel.low_degree(u, v, d) == pytest.approx(kernel.low_degree(dense_u, dense_v, d), abs=1e-12)

    def test_gram_matches_pairwise(self, sign_problem):
        kernel = sign_problem.kernel
        alternates = sign_problem.prior.alternates
        gram = kernel.gram(alternates, 1)
        for i, u in enumerate(alternates):
            for j, v in enumerate(alternates):
                assert gram[i, j] == pytest.approx(kernel.low_degree(u, v, 1))

    def test_degree_zero_is_one(self, sign_problem):
        u, v = sign_problem.prior.alternates
        assert sign_problem.kernel.low_degree(u, v, 0) == pytest.approx(1.0)

    def test_negative_degree(self, sign_problem):
        u, v = sign_problem.prior.alternates
        with pytest.raises(PreconditionError):
            sign_problem.kernel.low_degree(u, v, -1)

    def test_gaussian_alternate_rejected(self):
        null = ProductNull.uniform_signs(2)
        with pytest.raises(UnsupportedBackendError):
            TestingProblem(null, ExplicitPrior([GaussianMeanShift([0.1, 0.2])]))

    def test_short_product_alternate_is_rejected(self):
        null = ProductNull.uniform_signs(3)
        problem = TestingProblem(null, ExplicitPrior([ProductAlternate([[0.9, 0.1]] * 3)]))
        short = ProductAlternate([[0.9, 0.1]])
        with pytest.raises(DimensionMismatchError):
            inner_product(short, short, problem)
        with pytest.raises(DimensionMismatchError):
            low_degree_correlation(short, NULL, 1, problem)

    def test_inner_product_of_prior_members(self):
        null = ProductNull.uniform_signs(3)
        u = ProductAlternate([[0.9, 0.1]] * 3)
        problem = TestingProblem(null, ExplicitPrior([u]))
        # (0.81 + 0.01) / 0.5 per coordinate
        assert inner_product(u, u, problem) == pytest.approx(1.64 ** 3)

    def test_coefficient_cache_is_bounded(self, rng, monkeypatch):
        monkeypatch.setattr(kernels, "COEFFICIENT_CACHE_SIZE", 4)
        null = ProductNull.uniform_signs(2)
        kernel = FiniteKernel(null)
        tables = [DenseAlternate(rng.dirichlet(np.ones(4)).reshape(2, 2)) for _ in range(10)]
        first = kernel.coefficients(tables[0])
        for table in tables[1:]:
            kernel.coefficients(table)
        assert len(kernel._coefficients) == 4
        np.testing.assert_allclose(kernel.coefficients(tables[0]), first)


class TestGaussianKernels:
    def test_mean_shift_full_correlation(self):
        mu, nu = np.array([0.3, -0.2]), np.array([0.5, 0.4])
        problem = TestingProblem(GaussianNull(2), ExplicitPrior([GaussianMeanShift(mu), GaussianMeanShift(nu)]))
        u, v = problem.prior.alternates
        assert problem.kernel.full(u, v) == pytest.approx(math.exp(mu @ nu))
        assert problem.kernel.low_degree(u, v, 1) == pytest.approx(1.0 + mu @ nu)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            TestingProblem(GaussianNull(3), ExplicitPrior([GaussianMeanShift([0.1, 0.2])]))

    def test_covariance_forms_agree(self, rng):
        for _ in range(5):
            A = rng.normal(scale=0.1, size=(3, 3))
            B = rng.normal(scale=0.1, size=(3, 3))
            A, B = (A + A.T) / 2, (B + B.T) / 2
            assert covariance_correlation(A, B) == pytest.approx(covariance_correlation_alternative(A, B),
                                                                 rel=1e-10)

    def test_covariance_not_positive_definite(self):
        with pytest.raises(PreconditionError) as err:
            covariance_correlation(-2.0 * np.eye(2), np.zeros((2, 2)))
        assert err.value.subject == "Id+A"


class TestCorrelationAtoms:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(PreconditionError):
            CorrelationAtoms([0.5, 0.4], [1.0, 0.0])

    def test_zero_weights_dropped(self):
        atoms = CorrelationAtoms([0.5, 0.0, 0.5], [1.0, 7.0, -1.0])
        assert atoms.values.tolist() == [1.0, -1.0]

    def test_compressed_merges_duplicates(self):
        atoms = CorrelationAtoms([0.25, 0.25, 0.5], [0.1, 0.1, -0.2]).compressed()
        assert sorted(zip(atoms.values.tolist(), atoms.weights.tolist())) == [(-0.2, 0.5), (0.1, 0.5)]

    def test_trivial_problem_has_single_zero_atom(self):
        atoms = correlation_atoms(trivial_problem(ProductNull.uniform_signs(2)))
        assert atoms.values.tolist() == [0.0]

    def test_exact_expectation_matches_matrix(self, sign_problem):
        weights, matrix = correlation_matrix(sign_problem)
        atoms = correlation_atoms(sign_problem)
        direct = weights @ (matrix - 1.0) @ weights
        assert atoms.expectation(atoms.values) == pytest.approx(direct, abs=1e-12)

    def test_monte_carlo_is_reproducible(self, sign_problem):
        first = correlation_atoms(sign_problem, MONTE_CARLO, budget=500, seed=3)
        second = correlation_atoms(sign_problem, MONTE_CARLO, budget=500, seed=3)
        np.testing.assert_array_equal(first.values, second.values)
        assert first.empirical
        assert first.budget == 500

    def test_monte_carlo_needs_budget(self, sign_problem):
        with pytest.raises(PreconditionError):
            correlation_table(sign_problem, mode=MONTE_CARLO, budget=None)

    def test_sampled_prior_has_no_exact_mode(self):
        null = ProductNull.uniform_signs(1)
        prior = SampledPrior(lambda rng: ProductAlternate([[0.4, 0.6]]), seed=1)
        problem = TestingProblem(null, prior)
        with pytest.raises(PriorModeError):
            prior.alternates
        assert not problem.exact_available
        table = correlation_table(problem, mode=MONTE_CARLO, budget=100, seed=1)
        assert table.full.shape == (100,)

    def test_degree_table(self, sign_problem):
        table = correlation_table(sign_problem, degrees=(0, 1, math.inf), mode=EXACT)
        np.testing.assert_allclose(table.correlation(0), 1.0)
        assert table.correlation(1).shape == table.full.shape
        np.testing.assert_allclose(table.weights.sum(), 1.0)
