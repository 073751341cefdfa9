import math

import numpy as np
import pytest

from src.measures.distributions import DenseAlternate
from src.measures.kernels import FiniteKernel
from src.utils.errors import PreconditionError, SpecFormatError
from src.zoo import claims
from src.zoo.registry import ZOO, build_instance, family_parameters
from src.zoo.sparse_parity import ParityKernel, make_sparse_parity
from src.zoo.tensor_pca import hypothesis_boundary, make_tensor_pca


class TestClosedForms:
    @pytest.mark.parametrize("q", [0.5, 0.75])
    def test_hpc_correlation(self, q):
        report = claims.hpc_closed_form(6, 3, 2, q)
        assert report.passed, report.values

    @pytest.mark.parametrize("n", [6, 8])
    @pytest.mark.parametrize("r", [2, 3])
    @pytest.mark.parametrize("k", [2, 4])
    def test_tensor_pca_bounds(self, n, r, k):
        report = claims.tensor_pca_bounds(n, r, k, ms=(4, 8))
        assert report.passed, report.values

    def test_sparse_parity_tightness(self):
        report = claims.sparse_parity_tightness(8, 3, 3, 4, seed=7)
        assert report.passed, report.values

    def test_hpc_fourier(self):
        report = claims.hpc_fourier_identity(6, 3, 2, 0.5, 3, 2, 2)
        assert report.passed, report.values

    def test_pds_fourier(self):
        report = claims.pds_fourier_identity(5, 2, 0.9, 0.5, 3, 1, 2)
        assert report.passed, report.values

    def test_wishart_hermite(self):
        report = claims.wishart_hermite_identity(4, 0.5, 0.3, 3, 2, 2)
        assert report.passed, report.values
        assert report["odd_coefficient"] == 0.0
        assert "high_degree" in report.values

    def test_wishart_hermite_in_bound_regime(self):
        report = claims.wishart_hermite_identity(8, 0.1, 0.3, 3, 2, 2)
        assert report.passed, report.values
        assert isinstance(report["high_degree_bound"], float)
        assert "high_degree_bound_holds" in report.values

    def test_ggm_determinant(self):
        report = claims.ggm_determinant_check(4, 200_000, seed=7)
        assert report.passed, report.values

    @pytest.mark.slow
    def test_ggm_moment(self):
        report = claims.ggm_moment_check(60, 6, 3, 0.1, 2, 500, seed=7)
        assert report.passed, report.values

    @pytest.mark.slow
    def test_counterexample(self):
        report = claims.counterexample_check(256, seed=7)
        assert report.passed, report.values


class TestParityKernel:
    @pytest.mark.parametrize("d", [0, 1, 2, math.inf])
    def test_matches_dense_backend(self, d):
        problem = make_sparse_parity(4, 2, family_size=3, seed=7).problem
        alternates = problem.prior.alternates
        dense = [DenseAlternate(a.dense(problem.null)) for a in alternates]
        np.testing.assert_allclose(ParityKernel().gram(alternates, d),
                                   FiniteKernel(problem.null).gram(dense, d), atol=1e-12)

    def test_noised_strength(self):
        problem = make_sparse_parity(6, 3, family_size=4, rho=0.5).problem
        assert {a.strength for a in problem.prior.alternates} == {0.125}

    def test_sampled_family(self):
        problem = make_sparse_parity(400, 40, seed=7).problem
        assert problem.params["family_size"] == math.comb(400, 40)
        assert problem.pair_law is not None

    def test_family_validation(self):
        with pytest.raises(PreconditionError):
            make_sparse_parity(6, 2, parity_set=[(0, 1), (1, 0)])
        with pytest.raises(PreconditionError):
            make_sparse_parity(6, 2, parity_set=[(0, 1, 2)])
        with pytest.raises(PreconditionError):
            make_sparse_parity(4, 2, family_size=7)


class TestTensorPca:
    def test_exact_prior_size(self):
        instance = make_tensor_pca(4, 2, 0.5)
        assert len(instance.problem.prior) == 16
        assert instance.family == "tensor_pca"

    def test_exact_prior_limit(self):
        with pytest.raises(PreconditionError):
            make_tensor_pca(15, 2, 0.5)

    def test_sampled_prior(self):
        instance = make_tensor_pca(20, 2, 0.5, prior="sampled", seed=3)
        assert instance.params["prior"] == "sampled"

    def test_boundary_is_positive(self):
        assert 0 < hypothesis_boundary(8, 3, 4, 2) < math.inf


class TestRegistry:
    def test_every_family_is_listed(self):
        assert {"tensor_pca", "multisample_hpc", "bipartite_pds", "sparse_parity", "spiked_wishart",
                "prs_ggm", "sda_counterexample"} == set(ZOO)

    def test_lambda_alias(self):
        instance = build_instance("tensor_pca", {"n": 4, "r": 2, "lambda": 0.5})
        assert instance.params["lambda"] == 0.5

    def test_seed_fills_in(self):
        first = build_instance("sparse_parity", {"n": 6, "s": 2, "family_size": 4}, seed=3)
        second = build_instance("sparse_parity", {"n": 6, "s": 2, "family_size": 4, "seed": 3})
        assert [a.subset for a in first.problem.prior.alternates] == \
            [a.subset for a in second.problem.prior.alternates]

    def test_unknown_family(self):
        with pytest.raises(SpecFormatError):
            build_instance("planted_forest", {})
        with pytest.raises(SpecFormatError):
            family_parameters("planted_forest")

    def test_unknown_parameter(self):
        with pytest.raises(SpecFormatError):
            build_instance("tensor_pca", {"n": 4, "r": 2, "lam": 0.5, "mu": 1})

    def test_missing_parameter(self):
        with pytest.raises(SpecFormatError):
            build_instance("tensor_pca", {"n": 4})
