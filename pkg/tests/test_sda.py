import math

import numpy as np
import pytest

from src.ldlr.corpus import finite_corpus, random_discrete_variable
from src.measures.correlation import MONTE_CARLO, CorrelationAtoms, correlation_atoms
from src.measures.distributions import ProductNull
from src.measures.kernels import trivial_problem
from src.sda.dimension import (TailProfile, conditional_moment_bound, product_sda, sda, sda_from_atoms,
                               sda_profile, tail_conditional_expectation)
from src.sda.verifiers import (fact_moment_tail_check, ggm_sda_formula, implied_oracle_parameter,
                               sda_hypothesis_grid, verify_ldlr_to_sda, verify_sda_to_ldlr)
from src.utils.errors import PreconditionError
from src.zoo.claims import exact_zoo_instances, ldlr_to_sda_on_zoo
from src.zoo.sparse_parity import make_sparse_parity


@pytest.fixture
def skewed_atoms():
    """|X| = 1 with probability 1/100, else 0."""
    return CorrelationAtoms([0.01, 0.99], [1.0, 0.0])


class TestTailProfile:
    def test_conditional_means(self):
        profile = TailProfile(CorrelationAtoms([0.25, 0.25, 0.5], [1.0, -0.5, 0.0]))
        assert profile.conditional_mean(0.25) == pytest.approx(1.0)
        assert profile.conditional_mean(0.5) == pytest.approx(0.75)
        assert profile.conditional_mean(1.0) == pytest.approx(0.375)

    def test_boundary_atom_split(self):
        atoms = CorrelationAtoms([0.5, 0.5], [2.0, 0.0])
        assert tail_conditional_expectation(atoms, 0.75) == pytest.approx(2.0 * 0.5 / 0.75)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(PreconditionError):
            TailProfile(CorrelationAtoms.single(0.1)).conditional_mean(alpha)


class TestSda:
    def test_known_value(self, skewed_atoms):
        # E[|X| | A] <= 1/10 needs Pr(A) >= 1/10, so q^2 <= 10
        report = sda_from_atoms(skewed_atoms, 10)
        assert report.q == 3
        assert not report.unbounded and not report.capped
        assert report.witness_prob == pytest.approx(1 / 16)
        assert report.witness_mean > 0.1
        assert report.at_least(3) and not report.at_least(4)

    def test_unbounded_when_every_correlation_is_small(self):
        report = sda_from_atoms(CorrelationAtoms([0.5, 0.5], [0.05, -0.1]), 10)
        assert report.unbounded
        assert math.isinf(report.q)

    def test_zero_when_the_sure_event_fails(self):
        report = sda_from_atoms(CorrelationAtoms([0.5, 0.5], [1.0, 0.5]), 10)
        assert report.q == 0

    def test_capped(self):
        atoms = CorrelationAtoms([1e-6, 1 - 1e-6], [1.0, 0.0])
        report = sda_from_atoms(atoms, 10, cap=100)
        assert report.capped
        assert report.q == 100

    def test_trivial_problem(self):
        assert sda(trivial_problem(ProductNull.uniform_signs(2)), 1e6).unbounded

    def test_nonpositive_m(self, skewed_atoms):
        with pytest.raises(PreconditionError):
            sda_from_atoms(skewed_atoms, 0)

    def test_nonincreasing_in_m(self):
        for instance in finite_corpus(7, 20):
            atoms = correlation_atoms(instance.problem)
            qs = [r.q for r in sda_profile(atoms, [1, 2, 4, 8, 16, 32])]
            assert all(a >= b for a, b in zip(qs, qs[1:])), qs

    def test_parities(self):
        problem = make_sparse_parity(6, 2, family_size=4).problem
        assert sda(problem, 2).q == 1
        assert sda(problem, 10).q == 0

    def test_monte_carlo_interval(self):
        problem = make_sparse_parity(6, 2, family_size=4).problem
        report = sda(problem, 2, MONTE_CARLO, budget=400, seed=1, bootstrap=20)
        assert report.interval is not None
        assert report.interval[0] <= report.interval[1]
        assert "caveat" in report.extra
        assert report.to_record()["mode"] == MONTE_CARLO


class TestProductSda:
    def test_parities(self):
        # A x A over j of the 4 parities has mean 1/j, so only single parities violate at m = 2
        report = product_sda(make_sparse_parity(6, 2, family_size=4).problem, 2)
        assert report.q == 3
        assert report.q_lower == report.q_upper == 3
        assert report.witness_prob == pytest.approx(0.25)

    def test_greedy_search_reports_an_upper_bound(self):
        report = product_sda(make_sparse_parity(6, 2, family_size=4).problem, 2, exact_max=0)
        assert report.extra["search"] == "greedy"
        assert report.q == report.q_upper
        assert report.q_lower <= report.q_upper

    def test_unbounded(self):
        report = product_sda(make_sparse_parity(6, 2, family_size=4, rho=0.1).problem, 2)
        assert report.unbounded


class TestMomentBounds:
    def test_conditional_moment_bound(self):
        for instance in finite_corpus(7, 20):
            atoms = correlation_atoms(instance.problem)
            for k in (1, 2, 4):
                tail, bound = conditional_moment_bound(atoms, k, 2.0)
                assert tail <= bound * (1 + 1e-12) + 1e-15

    def test_conditional_moment_bound_arguments(self, skewed_atoms):
        with pytest.raises(PreconditionError):
            conditional_moment_bound(skewed_atoms, 0, 2.0)

    @pytest.mark.parametrize("index", range(200))
    def test_moment_tail_inequality(self, index):
        values, weights, p, q = random_discrete_variable(7, index)
        report = fact_moment_tail_check(values, weights, p, q)
        assert report.error is None
        assert report.passed, report.values

    def test_moment_tail_rejects_large_supports(self):
        report = fact_moment_tail_check(np.ones(13), np.full(13, 1 / 13), 2.0, 1.0)
        assert not report
        assert report.error.startswith("PreconditionError")

    def test_moment_tail_needs_ordered_exponents(self):
        assert not fact_moment_tail_check([1.0], [1.0], 1.0, 2.0)


class TestEquivalenceVerifiers:
    def test_ldlr_to_sda_on_exact_instances(self):
        reports = ldlr_to_sda_on_zoo(exact_zoo_instances(7), m=16, d=2, k=2, qs=(2, 4, 8))
        assert reports
        failures = [(r.values.get("problem_id"), r.values) for r in reports if not r]
        assert not failures

    def test_ldlr_to_sda_needs_even_k(self, sign_problem):
        report = verify_ldlr_to_sda(sign_problem, 4, 1, 3, 2)
        assert not report and "PreconditionError" in report.error

    def test_sda_to_ldlr_on_sparse_parity(self):
        problem = make_sparse_parity(400, 40, seed=7).problem
        report = verify_sda_to_ldlr(problem, 2, 8)
        assert report.passed, report.values
        assert report["k_eff"] == 1
        assert report["hypothesis"]
        assert report["conclusion"] <= 1

    def test_sda_to_ldlr_vacuous_for_small_k(self, sign_problem):
        report = verify_sda_to_ldlr(sign_problem, 4, 4)
        assert report.passed
        assert report["vacuous"]

    def test_hypothesis_grid_stops_at_floor(self, skewed_atoms):
        holds, failing, points = sda_hypothesis_grid(skewed_atoms, 0.5, 2)
        assert holds and failing is None and points == 0

    def test_implied_oracle_parameter(self):
        assert math.isinf(implied_oracle_parameter(10, 2, 2, 0.0, 0.0))
        assert implied_oracle_parameter(10, 4, 2, 1.0, 0.0) == pytest.approx(10 / (4 * 2))

    def test_ggm_formula(self):
        value = ggm_sda_formula(1000, 4, 3, 0.05, 2, 2)
        assert 0 < value < math.inf
        assert math.isinf(ggm_sda_formula(1000, 4, 3, 0.0, 2, 2))
