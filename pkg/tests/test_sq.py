import math

import numpy as np
import pytest

from src.ldlr.corpus import finite_corpus
from src.ldlr.norms import SamplewiseDegree, ldlr_norm
from src.measures.distributions import NULL, ProductNull
from src.measures.kernels import trivial_problem
from src.sq.algorithms import (EmptyPolicy, FirstQPolicy, ParityScanPolicy, make_policy,
                               nonadaptive_consistency_check, parity_scan_tightness, run_sq_algorithm)
from src.sq.distinguisher import (CharacterPolynomial, distinguisher_score, projection_distinguisher,
                                  projection_distinguisher_check, score_from_moments)
from src.sq.oracle import (ComplementQuery, ConstantQuery, ParityQuery, TabulatedQuery, VstatOracle,
                           make_adversary, pair_expectation, vstat_answer, vstat_tolerance)
from src.sq.polynomial import (FPsi, build_f_psi, orient_queries, truncation_check, vstat_tolerance_bound)
from src.utils.errors import (PreconditionError, QueryCapExceededError, QueryRangeError, SpecFormatError,
                              ToleranceViolationError)
from src.zoo.sparse_parity import make_sparse_parity


@pytest.fixture
def parities():
    """Four parities of size 2 over 6 signs at full strength."""
    return make_sparse_parity(6, 2, family_size=4, seed=7).problem


@pytest.fixture
def weak_parities():
    return make_sparse_parity(6, 2, family_size=4, rho=0.9, seed=7).problem


class TestOracle:
    @pytest.mark.parametrize("p,m,expected", [(0.5, 100, 0.05), (0.0, 100, 0.01), (0.9, 4, 0.25)])
    def test_tolerance(self, p, m, expected):
        assert vstat_tolerance(p, m) == pytest.approx(expected)

    def test_tolerance_needs_positive_m(self):
        with pytest.raises(PreconditionError):
            vstat_tolerance(0.5, 0)

    def test_query_ranges(self):
        with pytest.raises(QueryRangeError):
            ConstantQuery(1.5)
        with pytest.raises(QueryRangeError):
            TabulatedQuery([[0.0, 2.0], [0.5, 0.5]])

    def test_parity_closed_form_matches_table(self, parities):
        null = parities.null
        alternate = parities.prior.alternates[0]
        for subset in [alternate.subset, (0, 5), (1, 2, 3), ()]:
            query = ParityQuery(subset)
            table = TabulatedQuery(query.tabulate(null))
            assert query.expectation(alternate, null) == pytest.approx(table.expectation(alternate, null))

    def test_parity_pair_expectation(self, parities):
        null = parities.null
        alternate = parities.prior.alternates[1]
        first, second = ParityQuery(alternate.subset), ParityQuery((0, 1, 2))
        tabulated = TabulatedQuery(first.tabulate(null))
        assert pair_expectation(first, second, alternate, null) == pytest.approx(
            tabulated.pair_expectation(second, alternate, null))

    def test_complement(self, parities):
        alternate = parities.prior.alternates[0]
        query = ParityQuery(alternate.subset)
        assert ComplementQuery(query).expectation(alternate, parities.null) == pytest.approx(0.0)

    def test_honest_answer(self, parities):
        alternate = parities.prior.alternates[0]
        value, tau = vstat_answer(parities, ParityQuery(alternate.subset), 100, alternate=alternate)
        assert value == pytest.approx(1.0)
        assert tau == pytest.approx(0.01)

    def test_toward_null_clamps(self, weak_parities):
        alternate = weak_parities.prior.alternates[0]
        query = ParityQuery(alternate.subset)
        p = query.expectation(alternate, weak_parities.null)
        value, tau = vstat_answer(weak_parities, query, 4, "toward_null", alternate)
        assert value == pytest.approx(max(0.5, p - tau))

    def test_violating_hook(self, parities):
        oracle = VstatOracle(parities, NULL, 100, adversary=lambda p, tau, transcript: p + 2 * tau)
        with pytest.raises(ToleranceViolationError):
            oracle.answer(ParityQuery((0, 1)))

    def test_query_cap(self, parities):
        oracle = VstatOracle(parities, NULL, 100, query_cap=2)
        oracle.answer(ConstantQuery(0.5))
        oracle.answer(ConstantQuery(0.5))
        with pytest.raises(QueryCapExceededError):
            oracle.answer(ConstantQuery(0.5))
        assert len(oracle.transcript) == 2

    def test_uniform_noise_stays_in_band(self, parities, rng):
        oracle = VstatOracle(parities, NULL, 16, "uniform_noise", rng=rng)
        for subset in [(0, 1), (2, 3), (4, 5)]:
            oracle.answer(ParityQuery(subset))
        assert all(abs(e.returned - e.true_value) <= e.tolerance for e in oracle.transcript)

    def test_unknown_adversary(self):
        with pytest.raises(PreconditionError):
            make_adversary("psychic")


class TestPolicies:
    def test_make_policy(self):
        assert isinstance(make_policy("empty"), EmptyPolicy)
        assert isinstance(make_policy({"policy": "first_q", "q": 2}), FirstQPolicy)
        policy = ParityScanPolicy()
        assert make_policy(policy) is policy

    @pytest.mark.parametrize("spec", ["guess", {"policy": "first_q", "depth": 3}, {"q": 2}])
    def test_bad_policy(self, spec):
        with pytest.raises(SpecFormatError):
            make_policy(spec)

    def test_empty_policy(self, parities):
        report = run_sq_algorithm("empty", parities, 100, trials=10, seed=1)
        assert report.type_one_rate == 0.0
        assert report.type_two_rate == 1.0
        assert report.success_rate == 0.5
        assert report.queries == 0

    def test_scan_with_strong_oracle(self, parities):
        report = run_sq_algorithm("parity_scan", parities, 100, trials=20, seed=1, keep_transcripts=True)
        assert report.success_rate == 1.0
        assert report.to_record()["mean_queries"] == 4
        assert {row["hypothesis"] for row in report.transcripts} == {"null", "alternate"}

    def test_scan_fooled_by_weak_oracle(self, weak_parities):
        report = run_sq_algorithm("parity_scan", weak_parities, 0.5, "toward_null", trials=20, seed=1)
        assert report.success_rate <= 0.5

    def test_seeded_runs_repeat(self, weak_parities):
        first = run_sq_algorithm("parity_scan", weak_parities, 30, "uniform_noise", trials=30, seed=4)
        second = run_sq_algorithm("parity_scan", weak_parities, 30, "uniform_noise", trials=30, seed=4)
        assert first.to_record() == second.to_record()

    def test_tightness_small(self):
        report = parity_scan_tightness(8, 3, 4, 0.8, trials=50, seed=7)
        assert report.passed, report.values

    @pytest.mark.slow
    def test_tightness_full(self):
        report = parity_scan_tightness(8, 3, 4, 0.8, trials=1000, seed=7)
        assert report.passed, report.values

    @pytest.mark.slow
    def test_nonadaptive_consistency(self):
        problem = make_sparse_parity(8, 3, family_size=16, rho=0.8, seed=7).problem
        report = nonadaptive_consistency_check(problem, 0.8 ** -6 / 9.0, trials=200, seed=7)
        assert report.passed, report.values


class TestDistinguishers:
    def test_score_from_moments(self):
        assert score_from_moments(0.0, 4.0, 1.0).beta == pytest.approx(0.5)
        assert score_from_moments(0.0, 0.0, 1.0).unbounded
        assert score_from_moments(1.0, 0.0, 1.0).beta == 0.0

    @pytest.mark.parametrize("instance", finite_corpus(7, 10), ids=lambda i: i.problem.problem_id)
    def test_projection_beta_is_ldlr_norm(self, instance):
        report = projection_distinguisher_check(instance.problem, instance.m, instance.degree)
        assert report.passed, report.values

    def test_projection_of_null_problem(self):
        table, score = projection_distinguisher(trivial_problem(ProductNull.uniform_signs(1)), 2,
                                                SamplewiseDegree(1, 1))
        assert not table.any()
        assert score.beta == 0.0

    def test_character_polynomial(self, parities):
        # sum over the family of chi_S(x_1) chi_S(x_2): each term has null variance 1
        terms = {(a.subset, a.subset): 1.0 for a in parities.prior.alternates}
        p = CharacterPolynomial(terms, 2)
        assert p.degree == 2
        assert p.null_moments() == (0.0, 4.0)
        score = distinguisher_score(p, parities, 2)
        assert score.advantage == pytest.approx(1.0)
        assert score.beta == pytest.approx(0.5)
        expected = math.sqrt(ldlr_norm(parities, 2, SamplewiseDegree(2, 2)).value
                             - ldlr_norm(parities, 2, SamplewiseDegree(2, 1)).value)
        assert score.beta == pytest.approx(expected)


class TestSimulatingPolynomial:
    @pytest.mark.parametrize("m", [2, 4, 8])
    @pytest.mark.parametrize("k", [1, 2])
    def test_moments(self, weak_parities, m, k):
        queries = [ParityQuery(a.subset) for a in weak_parities.prior.alternates]
        tau = 0.9 ** 4 / 2
        f, report = build_f_psi(queries, weak_parities, m, k, tau)
        assert report.passed, report.values
        assert report["null_mean"] == pytest.approx(0.0, abs=1e-12)
        assert report["eta"] == 0.0
        assert truncation_check(f, math.inf, tau).passed

    def test_evaluate_matches_definition(self, parities):
        queries = [ParityQuery((0, 1)), ParityQuery((2, 3))]
        f = FPsi(queries, parities, 2, 1)
        samples = np.array([[1, 1, 1, -1, 1, 1], [1, 1, -1, -1, 1, 1]], dtype=float)
        # psibar = (psi - 1/2) / sqrt(1/2) with psi in {0, 1}; e_1 sums over queries and samples
        values = [1.0, 1.0, 0.0, 1.0]
        expected = sum((v - 0.5) / math.sqrt(0.5) for v in values) / math.sqrt(2)
        assert f.evaluate(samples) == pytest.approx(expected)

    def test_orientation(self, parities):
        queries = orient_queries([ConstantQuery(0.8), ParityQuery((0, 1))], parities)
        assert isinstance(queries[0], ComplementQuery)
        assert isinstance(queries[1], ParityQuery)
        with pytest.raises(PreconditionError):
            FPsi([ConstantQuery(0.8)], parities, 2, 1)

    def test_k_above_m(self, parities):
        with pytest.raises(PreconditionError):
            FPsi([ParityQuery((0, 1))], parities, 2, 3)

    def test_tolerance_bound(self):
        assert vstat_tolerance_bound(1.0, 0.0, 8, 2, 4) == pytest.approx(4 * 4 ** (2 / 2) / 8 * 2)
        with pytest.raises(PreconditionError):
            vstat_tolerance_bound(1.0, 0.0, 8, 1, 4)
