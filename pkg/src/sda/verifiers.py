"""
Verifiers for both directions of the LDLR/SDA equivalence and its noisy and restricted forms.
Each returns a CheckReport carrying every intermediate quantity.
"""
import itertools
import math

import numpy as np

from src.ldlr.norms import (SamplewiseDegree, high_degree_from_table, k_sample_lr_norm, ldlr_from_table,
                            require_even)
from src.measures.correlation import CorrelationAtoms, correlation_table
from src.measures.kernels import TestingProblem
from src.noise.operators import MarkovOperator
from src.noise.restrictions import RestrictionSpec, apply_noise, restriction_factor
from src.sda.dimension import TailProfile, sda_from_atoms
from src.utils.errors import PreconditionError
from src.utils.logger import Logger
from src.utils.numerics import root
from src.utils.report_utils import CheckReport, report_errors

logger = Logger().get_logger()

# grid of oracle parameters m' = m * 2^{-j/GRID_STEPS_PER_OCTAVE}
GRID_STEPS_PER_OCTAVE = 4
MAX_GRID_POINTS = 4096
FACT_MAX_ATOMS = 12


def implied_oracle_parameter(m: float, q: float, k: int, ldlr: float, high: float) -> float:
    """m / (q^{2/k} (k eps^{2/k} + delta^{2/k} m)) with eps^2 = ldlr, delta^2 = high."""
    denominator = q ** (2.0 / k) * (k * root(ldlr, k) + root(high, k) * m)
    return math.inf if denominator == 0 else m / denominator


def _sda_at(atoms: CorrelationAtoms, m_star: float, problem_id: str):
    """SDA at m*, or None when m* is infinite (then only X == 0 qualifies)."""
    if math.isinf(m_star):
        return None
    return sda_from_atoms(atoms, m_star, bootstrap=0, problem_id=problem_id)


def _sda_values(atoms: CorrelationAtoms, m_star: float, q: float, problem_id: str) -> dict:
    report = _sda_at(atoms, m_star, problem_id)
    if report is None:
        passed = float(np.max(atoms.magnitudes)) == 0.0
        return {"passed": passed, "sda": math.inf if passed else 0, "sda_unbounded": passed}
    return {"passed": report.at_least(q), "sda": report.q, "sda_unbounded": report.unbounded,
            "sda_capped": report.capped}


@report_errors("ldlr_to_sda")
def verify_ldlr_to_sda(problem: TestingProblem, m: float, d, k: int, q: float,
                       eps_inflation: float = 1.0) -> CheckReport:
    """
    LDLR eps^2 and high-degree delta^2 imply SDA(m / (q^{2/k}(k eps^{2/k} + delta^{2/k} m))) >= q.
    `eps_inflation` multiplies eps (the bound only gets weaker).
    """
    require_even(k)
    if q < 1:
        raise PreconditionError(f"q={q} must be >= 1", subject="q")
    table = correlation_table(problem, (d,))
    ldlr = ldlr_from_table(table, m, SamplewiseDegree(d, k)).value * eps_inflation ** 2
    high = high_degree_from_table(table, d, k)
    m_star = implied_oracle_parameter(m, q, k, ldlr, high)
    atoms = table.atoms(math.inf)
    values = {"m": m, "d": d, "k": k, "q": q, "eps_squared": ldlr, "delta_squared": high, "m_star": m_star}
    outcome = _sda_values(atoms, m_star, q, problem.problem_id)
    passed = outcome.pop("passed")
    values.update(outcome)
    logger.debug(f"ldlr_to_sda {problem!r}: {values}")
    return CheckReport("ldlr_to_sda", passed=passed, values=values)


def _hypothesis_holds(profile: TailProfile, m_prime: float, log_q: float) -> bool:
    """SDA(m') >= Q with log Q given; below the top atom weight the best event is the top atom."""
    alpha = 1.0 / math.ceil(math.exp(log_q)) ** 2 if log_q < 700 else 0.0
    threshold = (1.0 / m_prime) * (1.0 + 1e-12)
    if alpha <= profile.weights[0]:
        return profile.max_magnitude <= threshold
    return profile.conditional_mean(alpha) <= threshold


def sda_hypothesis_grid(atoms: CorrelationAtoms, m: float, k: int):
    """
    Checks SDA(m') >= 100^k (m/m')^k on m' = m 2^{-j/4} down to m' <= 1/max|X|, where the
    hypothesis holds automatically. Returns (holds, first failing m' or None, grid size).
    """
    profile = TailProfile(atoms)
    floor = math.inf if profile.max_magnitude == 0 else 1.0 / profile.max_magnitude
    for j in range(MAX_GRID_POINTS):
        m_prime = m * 2.0 ** (-j / GRID_STEPS_PER_OCTAVE)
        if m_prime <= floor:
            return True, None, j
        log_q = k * (math.log(100.0) + math.log(m / m_prime))
        if not _hypothesis_holds(profile, m_prime, log_q):
            return False, m_prime, j + 1
    return True, None, MAX_GRID_POINTS


@report_errors("sda_to_ldlr")
def verify_sda_to_ldlr(problem: TestingProblem, m: int, k: int) -> CheckReport:
    """
    If SDA(m') >= 100^k (m/m')^k for all m' <= m then E|X|^t <= 4 (1/(100 m))^t for t <= k/8
    and the (inf, k/8)-LDLR_m is at most 1. Hypothesis status is reported separately.
    """
    require_even(k)
    table = correlation_table(problem)
    atoms = table.atoms(math.inf)
    hypothesis, failing_m, grid = sda_hypothesis_grid(atoms, m, k)
    k_eff = k // 8
    values = {"m": m, "k": k, "k_eff": k_eff, "hypothesis": hypothesis, "hypothesis_failing_m": failing_m,
              "grid_points": grid}
    if k_eff == 0:
        values.update({"vacuous": True, "moment_ok": True, "conclusion": 0.0})
        return CheckReport("sda_to_ldlr", passed=True, values=values)
    magnitudes = np.abs(table.full - 1.0)
    moments = [table.expectation(magnitudes ** t) for t in range(1, k_eff + 1)]
    moment_ok = all(mt <= 4.0 * (1.0 / (100.0 * m)) ** t * (1.0 + 1e-12) for t, mt in enumerate(moments, 1))
    conclusion = ldlr_from_table(table, m, SamplewiseDegree(math.inf, k_eff)).value
    conclusion_ok = conclusion <= 1.0
    values.update({"moments": moments, "moment_ok": moment_ok, "conclusion": conclusion,
                   "conclusion_ok": conclusion_ok})
    passed = (not hypothesis) or (moment_ok and conclusion_ok)
    return CheckReport("sda_to_ldlr", passed=passed, values=values, margin=1.0 - conclusion)


def _best_event_term(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """sup_A Pr(A) E[X|A]^p over every union of atoms."""
    best = 0.0
    n = values.size
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            idx = list(subset)
            prob = float(weights[idx].sum())
            mean = float(weights[idx] @ values[idx]) / prob
            if mean > 0:
                best = max(best, prob * mean ** p)
    return best


@report_errors("moment_tail")
def fact_moment_tail_check(values, weights, p: float, q: float, tol: float = 1e-12) -> CheckReport:
    """
    E|X|^q <= (2 sup_A Pr[A] E[X|A]^p)^{q/p} * p/(p-q) for p > q > 0, with the supremum taken
    over every event of a discrete X (at most 12 atoms).
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not p > q > 0:
        raise PreconditionError(f"need p > q > 0, got p={p}, q={q}", subject="p")
    if values.size > FACT_MAX_ATOMS:
        raise PreconditionError(f"{values.size} atoms exceed the enumeration limit {FACT_MAX_ATOMS}",
                                subject="values")
    weights = weights / weights.sum()
    lhs = float(weights @ np.abs(values) ** q)
    sup_term = _best_event_term(np.abs(values), weights, p)
    rhs = (2.0 * sup_term) ** (q / p) * p / (p - q)
    return CheckReport("moment_tail", passed=lhs <= rhs * (1.0 + tol) + tol, margin=rhs - lhs,
                       values={"lhs": lhs, "rhs": rhs, "sup_term": sup_term, "p": p, "q": q})


@report_errors("noisy_sda")
def verify_noisy_sda(problem: TestingProblem, operator: MarkovOperator, m: float, d: int, k: int,
                     q: float) -> CheckReport:
    """
    For the noised problem T S with noised LDLR eps^2 and ||E_u Dbar_u^{(x)k}||^2 <= C^k:
    SDA(T S, m / (q^{2/k}(k eps^{2/k} + rho^{2(d+1)} C m))) >= q.
    """
    require_even(k)
    noised = apply_noise(problem, operator)
    table = correlation_table(noised, (d,))
    ldlr = ldlr_from_table(table, m, SamplewiseDegree(d, k)).value
    C = root(k_sample_lr_norm(problem, k).uncentered, k)
    rho = operator.rho
    denominator = q ** (2.0 / k) * (k * root(ldlr, k) + rho ** (2 * (d + 1)) * C * m)
    m_star = math.inf if denominator == 0 else m / denominator
    values = {"m": m, "d": d, "k": k, "q": q, "rho": rho, "C": C, "eps_squared": ldlr, "m_star": m_star}
    outcome = _sda_values(table.atoms(math.inf), m_star, q, noised.problem_id)
    passed = outcome.pop("passed")
    values.update(outcome)
    return CheckReport("noisy_sda", passed=passed, values=values)


@report_errors("restricted_sda")
def verify_restricted_sda(problem: TestingProblem, spec: RestrictionSpec, m: float, d: int, k: int,
                          q: float, seed: int = 0) -> CheckReport:
    """
    SDA(S', m / (q^{2/k}(k eps^{2/k} + factor^{1/k} C m))) >= q for the restricted problem S',
    with factor the restriction multiplier of the k-sample likelihood ratio.
    """
    require_even(k)
    restricted = apply_noise(problem, spec, seed)
    table = correlation_table(restricted, (d,))
    ldlr = ldlr_from_table(table, m, SamplewiseDegree(d, k)).value
    C = root(k_sample_lr_norm(problem, k).uncentered, k)
    factor = restriction_factor(spec, problem.null, d, k)
    denominator = q ** (2.0 / k) * (k * root(ldlr, k) + root(factor, k) * C * m)
    m_star = math.inf if denominator == 0 else m / denominator
    values = {"m": m, "d": d, "k": k, "q": q, "mode": spec.mode, "factor": factor, "C": C,
              "eps_squared": ldlr, "m_star": m_star}
    outcome = _sda_values(table.atoms(math.inf), m_star, q, restricted.problem_id)
    passed = outcome.pop("passed")
    values.update(outcome)
    return CheckReport("restricted_sda", passed=passed, values=values)


def ggm_sda_formula(n: int, s: int, d: int, kappa: float, k: int, q: float) -> float:
    """Oracle parameter (n/(q^2 s^2))^{1/k} / (exp(s d kappa^2 / 2) - 1) of the sparse GGM bound."""
    growth = math.expm1(0.5 * s * d * kappa ** 2)
    if growth <= 0:
        return math.inf
    return (n / (q * q * s * s)) ** (1.0 / k) / growth
