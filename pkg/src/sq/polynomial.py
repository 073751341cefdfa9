"""
Simulating an SQ algorithm by a low-degree m-sample polynomial. Queries psi_1..psi_q with
null means 0 < p_t <= 1/2 are re-centered as psibar_t = (psi_t - p_t) / sqrt(p_t), and

    f(x_1..x_m) = sum_t C(m,k)^{-1/2} sum_{i_1 < ... < i_k} prod_l psibar_t(x_{i_l}).

f is kept factored: its moments under the null and the alternates follow from independence
of the samples, so it is never tabulated over (Omega^N)^m.
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.ldlr.norms import SamplewiseDegree, high_degree_norm, ldlr_norm
from src.measures.distributions import NULL, Alternate, require_explicit
from src.measures.kernels import TestingProblem
from src.sq.distinguisher import DistinguisherScore, score_from_moments
from src.sq.oracle import ComplementQuery, Query, pair_expectation
from src.utils.errors import PreconditionError
from src.utils.logger import Logger
from src.utils.numerics import binomial, is_unbounded, root
from src.utils.report_utils import CheckReport, margin_report, report_errors

logger = Logger().get_logger()

MOMENT_TOL = 1e-12


def orient_queries(queries: Sequence[Query], problem: TestingProblem) -> List[Query]:
    """Replaces every query with null mean above 1/2 by its complement."""
    return [ComplementQuery(q) if q.expectation(NULL, problem.null) > 0.5 else q for q in queries]


class FPsi:
    """The symmetric-product polynomial of a query list, in factored form."""

    def __init__(self, queries: Sequence[Query], problem: TestingProblem, m: int, k: int):
        if not 1 <= k <= m:
            raise PreconditionError(f"need 1 <= k={k} <= m={m}", subject="k")
        if not queries:
            raise PreconditionError("at least one query is needed", subject="queries")
        self.queries = list(queries)
        self.problem = problem
        self.m = int(m)
        self.k = int(k)
        self.null_means = np.array([q.expectation(NULL, problem.null) for q in self.queries])
        for query, p in zip(self.queries, self.null_means):
            if not 0.0 < p <= 0.5 + MOMENT_TOL:
                raise PreconditionError(f"query {query.query_id} has null mean {p:.6g} outside (0, 1/2]; "
                                        f"use its complement 1 - psi (see orient_queries)", subject="queries")
        self.scale = math.sqrt(binomial(self.m, self.k))

    @property
    def q(self) -> int:
        return len(self.queries)

    def centered_means(self, alternate: Alternate) -> np.ndarray:
        """E_{D_u} psibar_t for every query."""
        means = np.array([q.expectation(alternate, self.problem.null) for q in self.queries])
        return (means - self.null_means) / np.sqrt(self.null_means)

    def null_cross_moments(self) -> np.ndarray:
        """E_null psibar_s psibar_t."""
        p = self.null_means
        raw = np.array([[pair_expectation(a, b, NULL, self.problem.null) for b in self.queries]
                        for a in self.queries])
        return (raw - np.outer(p, p)) / np.sqrt(np.outer(p, p))

    def null_mean(self) -> float:
        return float(self.scale * np.sum(self.centered_means(NULL) ** self.k))

    def null_second_moment(self) -> float:
        """Cross terms over distinct index sets vanish, leaving sum_{s,t} (E psibar_s psibar_t)^k."""
        return float(np.sum(self.null_cross_moments() ** self.k))

    def alternate_mean(self, alternate: Alternate) -> float:
        return float(self.scale * np.sum(self.centered_means(alternate) ** self.k))

    def prior_mean(self) -> float:
        prior = require_explicit(self.problem.prior)
        return math.fsum(w * self.alternate_mean(u) for w, u in zip(prior.weights, prior.alternates))

    def score(self) -> DistinguisherScore:
        mean = self.null_mean()
        return score_from_moments(mean, self.null_second_moment() - mean ** 2, self.prior_mean())

    def evaluate(self, samples) -> float:
        """f at one m-tuple of samples (rows of `samples`)."""
        samples = np.asarray(samples, dtype=float)
        if samples.shape[0] != self.m:
            raise PreconditionError(f"expected {self.m} samples, got {samples.shape[0]}", subject="samples")
        values = np.array([[q.value_at(x, self.problem.null) for x in samples] for q in self.queries])
        centered = (values - self.null_means[:, None]) / np.sqrt(self.null_means[:, None])
        return float(np.sum(_elementary_symmetric(centered, self.k)) / self.scale)

    def caught_fraction(self, tau: float) -> Tuple[float, np.ndarray]:
        """
        Prior mass of alternates some query separates by max(tau, sqrt(tau p (1 - p))), and the
        per-alternate flags.
        """
        prior = require_explicit(self.problem.prior)
        p = self.null_means
        thresholds = np.maximum(tau, np.sqrt(tau * p * (1.0 - p)))
        caught = np.array([np.any(np.abs(self.centered_means(u) * np.sqrt(p)) >= thresholds * (1.0 - MOMENT_TOL))
                           for u in prior.alternates])
        return float(np.sum(prior.weights[caught])), caught

    def missed_fraction(self, tau: float) -> float:
        """eta: prior mass of alternates no query separates at tau."""
        _, caught = self.caught_fraction(tau)
        return float(np.sum(require_explicit(self.problem.prior).weights[~caught]))


def _elementary_symmetric(values: np.ndarray, k: int) -> np.ndarray:
    """e_k of each row of `values`."""
    e = np.zeros((values.shape[0], k + 1))
    e[:, 0] = 1.0
    for column in values.T:
        e[:, 1:] = e[:, 1:] + e[:, :-1] * column[:, None]
    return e[:, k]


def build_f_psi(queries: Sequence[Query], problem: TestingProblem, m: int, k: int,
                tau: Optional[float] = None) -> Tuple[FPsi, CheckReport]:
    """
    The polynomial f and a report of its exact moments: E_null f = 0, E_null f^2 <= q^2 and,
    when a tolerance tau is given and k is even, E_S f >= (1 - eta) sqrt(C(m,k) (tau/2)^k) with
    eta the prior mass of alternates no query catches at tau.
    """
    f = FPsi(queries, problem, m, k)
    null_mean = f.null_mean()
    second = f.null_second_moment()
    prior_mean = f.prior_mean()
    values = {"q": f.q, "m": m, "k": k, "null_mean": null_mean, "null_second_moment": second,
              "prior_mean": prior_mean}
    passed = abs(null_mean) <= MOMENT_TOL and second <= f.q ** 2 * (1.0 + MOMENT_TOL)
    if tau is not None:
        eta = f.missed_fraction(tau)
        lower = (1.0 - eta) * math.sqrt(binomial(m, k) * (tau / 2.0) ** k)
        values.update({"tau": tau, "eta": eta, "lower_bound": lower})
        if k % 2 == 0:
            values["lower_bound_holds"] = prior_mean >= lower * (1.0 - MOMENT_TOL)
            passed = passed and values["lower_bound_holds"]
    report = CheckReport("f_psi", passed=passed, values=values,
                         margin=f.q ** 2 - second)
    logger.debug(f"{problem.problem_id}: f_psi with {f.q} queries, m={m}, k={k}: {values}")
    return f, report


def vstat_tolerance_bound(ldlr: float, delta: float, m: float, k: int, q: float, eta: float = 0.0) -> float:
    """
    Largest tolerance tau at which q queries can still catch a (1 - eta) share of the prior:
    4 q^{2/k} / (m (1 - eta)^{2/k}) (k ldlr^{1/k} + delta^{1/k} m), with `ldlr` the squared
    (d,k)-LDLR_m and `delta` the squared high-degree norm.
    """
    if k < 2:
        raise PreconditionError(f"k={k} must be at least 2", subject="k")
    if not 0.0 <= eta < 1.0:
        raise PreconditionError(f"eta={eta} must lie in [0, 1)", subject="eta")
    return 4.0 * q ** (2.0 / k) / (m * (1.0 - eta) ** (2.0 / k)) * (k * root(ldlr, k) + root(delta, k) * m)


@report_errors("truncated_simulation")
def truncation_check(f: FPsi, d=math.inf, tau: Optional[float] = None) -> CheckReport:
    """
    (LDLR^{1/k} + delta^{1/k} C(m,k)^{1/k})^{k/2} >= (1/2) E_S f / sqrt(E_null f^2), with LDLR the
    squared (d,k)-LDLR_m and delta the squared degree-above-d norm; exact on explicit priors.
    With a tolerance tau the implied tolerance bound is reported too.
    """
    problem, m, k = f.problem, f.m, f.k
    degree = SamplewiseDegree(d, k)
    ldlr = ldlr_norm(problem, m, degree).value
    delta = 0.0 if is_unbounded(degree.d) else high_degree_norm(problem, degree.d, k)
    bound = (root(ldlr, k) + root(delta, k) * binomial(m, k) ** (1.0 / k)) ** (k / 2.0)
    second = f.null_second_moment()
    advantage = f.prior_mean() - f.null_mean()
    if second > 0:
        ratio = 0.5 * advantage / math.sqrt(second)
    else:
        ratio = 0.0 if abs(advantage) <= MOMENT_TOL else math.inf
    values: Dict = {"ldlr": ldlr, "delta": delta, "d": degree.label, "m": m, "k": k, "q": f.q,
                    "advantage": advantage, "null_second_moment": second}
    if tau is not None and k % 2 == 0 and k >= 2:
        eta = f.missed_fraction(tau)
        if eta < 1.0:
            tolerance_bound = vstat_tolerance_bound(ldlr, delta, m, k, f.q, eta)
            values.update({"tau": tau, "eta": eta, "tolerance_bound": tolerance_bound,
                           "tolerance_bound_holds": tau <= tolerance_bound})
    return margin_report("truncated_simulation", ratio, bound, tol=MOMENT_TOL, values=values)
