import numpy as np
import pytest

from src.ldlr.corpus import random_product_instance
from src.measures.correlation import correlation_atoms
from src.measures.distributions import ProductNull
from src.noise.operators import (MarkovOperator, attenuation_check, certify_d_eps, noise_operator, resampler,
                                 scalar_eigenvalue)
from src.noise.restrictions import (COORDINATE, SUBSET, SUBTENSOR, RestrictionSpec, apply_noise,
                                    niceness_certificate, restriction_factor, subtensor_index,
                                    verify_restriction_bounds)
from src.sda.verifiers import verify_noisy_sda, verify_restricted_sda
from src.utils.errors import NonStationaryOperatorError, PreconditionError, UnsupportedBackendError
from src.zoo.sparse_parity import make_sparse_parity

UNIFORM = [0.5, 0.5]
# doubly stochastic, so the uniform law is stationary, but a rotation on mean-zero functions
CYCLIC = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]


class TestMarkovOperator:
    def test_noise_operator(self):
        op = noise_operator(0.4, [0.3, 0.7])
        np.testing.assert_allclose(op.matrix.sum(axis=1), 1.0)
        assert op.rho == pytest.approx(0.4)
        assert op.binary_eigenvalue == pytest.approx(0.4)
        assert op.name == "T_0.4"

    def test_resampler_and_identity(self):
        assert resampler(UNIFORM).rho == pytest.approx(0.0, abs=1e-12)
        assert MarkovOperator.identity(UNIFORM).rho == pytest.approx(1.0)

    def test_adjoint_of_reversible_operator(self):
        op = noise_operator(0.3, [0.2, 0.8])
        np.testing.assert_allclose(op.adjoint(), op.matrix, atol=1e-12)

    def test_non_stationary(self):
        with pytest.raises(NonStationaryOperatorError):
            MarkovOperator([[1.0, 0.0], [1.0, 0.0]], UNIFORM)

    def test_rows_must_be_distributions(self):
        with pytest.raises(PreconditionError):
            MarkovOperator([[0.5, 0.6], [0.5, 0.5]], UNIFORM)

    @pytest.mark.parametrize("rho", [-0.1, 1.5])
    def test_rho_range(self, rho):
        with pytest.raises(PreconditionError):
            noise_operator(rho, UNIFORM)

    def test_null_with_other_marginal(self):
        op = noise_operator(0.5, UNIFORM)
        with pytest.raises(NonStationaryOperatorError):
            op.check_null(ProductNull.bernoulli(2, 0.3))

    def test_cyclic_operator_is_not_scalar(self):
        op = MarkovOperator(CYCLIC, [1 / 3] * 3)
        assert op.rho == pytest.approx(0.5)
        with pytest.raises(UnsupportedBackendError):
            scalar_eigenvalue(op, ProductNull.repeated([0, 1, 2], [1 / 3] * 3, 1))


class TestCertification:
    def test_certified(self):
        cert = certify_d_eps(noise_operator(0.4, UNIFORM), UNIFORM, 2, 0.16)
        assert cert.certified and not cert.borderline
        assert cert.attenuation == pytest.approx(0.16)

    def test_borderline(self):
        cert = certify_d_eps(noise_operator(0.4, UNIFORM), UNIFORM, 2, 0.16 - 1e-10)
        assert cert.borderline and not cert.certified

    def test_not_certified(self):
        cert = certify_d_eps(noise_operator(0.4, UNIFORM), UNIFORM, 2, 0.15)
        assert not cert.certified and not cert.borderline

    def test_degree_zero(self):
        assert certify_d_eps(noise_operator(0.4, UNIFORM), UNIFORM, 0, 1.0).certified

    def test_marginal_mismatch(self):
        with pytest.raises(NonStationaryOperatorError):
            certify_d_eps(noise_operator(0.4, UNIFORM), [0.3, 0.7], 1, 0.5)


class TestNoisedProblems:
    @pytest.mark.parametrize("index", range(5))
    def test_attenuation(self, index):
        problem = random_product_instance(7, index, n_coords=3, dense=True)
        report = attenuation_check(problem, noise_operator(0.4, UNIFORM))
        assert report.passed, report.values

    def test_parity_strength(self):
        problem = make_sparse_parity(6, 2, family_size=4).problem
        noised = apply_noise(problem, noise_operator(0.5, UNIFORM))
        assert [a.strength for a in noised.prior.alternates] == pytest.approx([0.25] * 4)
        assert noised.problem_id.endswith("|T_0.5")

    def test_noise_shrinks_correlations(self):
        problem = random_product_instance(7, 0, n_coords=3)
        before = correlation_atoms(problem).magnitudes.max()
        after = correlation_atoms(apply_noise(problem, noise_operator(0.5, UNIFORM))).magnitudes.max()
        assert after < before

    def test_unknown_noise(self, sign_problem):
        with pytest.raises(PreconditionError):
            apply_noise(sign_problem, "T_0.5")


class TestRestrictions:
    def test_subtensor_index(self):
        index = subtensor_index(3, 2)
        assert index.shape == (9, 2)
        assert index[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]

    def test_exact_law(self):
        spec = RestrictionSpec(COORDINATE, 0.25, noise_operator(0.4, UNIFORM))
        law = spec.restriction_law(ProductNull.uniform_signs(4))
        assert len(law) == 16
        assert sum(w for w, _ in law) == pytest.approx(1.0)

    def test_sampled_law(self):
        from src.measures import distributions
        distributions.LIMITS["restriction_enum_max_n"] = 2
        spec = RestrictionSpec(COORDINATE, 0.25, noise_operator(0.4, UNIFORM), samples=32)
        law = spec.restriction_law(ProductNull.uniform_signs(4), seed=3)
        assert len(law) == 32
        assert [m.tolist() for _, m in law] == [m.tolist() for _, m in spec.restriction_law(
            ProductNull.uniform_signs(4), seed=3)]

    def test_tensor_modes_need_layout(self):
        with pytest.raises(PreconditionError):
            RestrictionSpec(SUBSET, 0.25, noise_operator(0.4, UNIFORM))

    def test_restricted_prior_weights(self):
        problem = random_product_instance(7, 0, n_coords=3)
        spec = RestrictionSpec(COORDINATE, 0.5, noise_operator(0.4, UNIFORM))
        restricted = apply_noise(problem, spec)
        assert len(restricted.prior) == 8 * 3
        assert restricted.prior.weights.sum() == pytest.approx(1.0)

    def test_coordinate_bound(self):
        problem = random_product_instance(7, 0, n_coords=6)
        spec = RestrictionSpec(COORDINATE, 0.25, noise_operator(0.4, UNIFORM))
        report = verify_restriction_bounds(problem, spec, 1, 2)
        assert report.passed, report.values

    def test_subtensor_bound(self):
        problem = random_product_instance(7, 1, n_coords=9)
        spec = RestrictionSpec(SUBTENSOR, 0.25, noise_operator(0.4, UNIFORM), p=2, n=3)
        report = verify_restriction_bounds(problem, spec, 1, 2)
        assert report.passed, report.values

    def test_too_many_units(self):
        problem = random_product_instance(7, 0, n_coords=11)
        spec = RestrictionSpec(COORDINATE, 0.25, noise_operator(0.4, UNIFORM))
        report = verify_restriction_bounds(problem, spec, 1, 2)
        assert not report
        assert report.error.startswith("InfeasibleSizeError")

    def test_tensor_factor_precondition(self):
        spec = RestrictionSpec(SUBTENSOR, 0.25, noise_operator(0.8, UNIFORM), p=2, n=3)
        with pytest.raises(PreconditionError):
            restriction_factor(spec, ProductNull.uniform_signs(9), 1, 2)


class TestNoisyEquivalence:
    def test_noisy_sda(self):
        problem = random_product_instance(7, 0, n_coords=6)
        report = verify_noisy_sda(problem, noise_operator(0.4, UNIFORM), 16, 1, 2, 2)
        assert report.passed, report.values

    def test_restricted_sda(self):
        problem = random_product_instance(7, 0, n_coords=6)
        spec = RestrictionSpec(COORDINATE, 0.25, noise_operator(0.4, UNIFORM))
        report = verify_restricted_sda(problem, spec, 16, 1, 2, 2, seed=7)
        assert report.passed, report.values

    def test_niceness(self):
        problem = random_product_instance(7, 0, n_coords=6)
        certificate = niceness_certificate(problem, 4, 2)
        assert certificate.delta >= 0
        assert certificate.threshold == pytest.approx(4 ** -1 / 4)
        assert bool(certificate) == (certificate.delta <= certificate.threshold)
