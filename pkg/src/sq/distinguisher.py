"""
Distinguishing power of m-sample test functions: |E_null p - E_S p| against the null
standard deviation of p.
"""
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from src.ldlr.brute_force import ldlr_projection, m_sample_table, synthesize_table
from src.ldlr.norms import SamplewiseDegree, ldlr_norm
from src.measures.distributions import ProductNull, check_state_cap, require_explicit
from src.measures.kernels import TestingProblem
from src.sq.oracle import ParityQuery
from src.utils.errors import DimensionMismatchError, UnsupportedBackendError
from src.utils.logger import Logger
from src.utils.report_utils import CheckReport, report_errors

logger = Logger().get_logger()

# null standard deviations below this count as zero
ZERO_STD = 1e-14


@dataclass
class DistinguisherScore:
    advantage: float
    null_std: float
    beta: float
    unbounded: bool = False

    @property
    def good(self) -> bool:
        return self.beta > 1.0

    def to_record(self) -> Dict:
        return {"advantage": self.advantage, "null_std": self.null_std, "beta": self.beta,
                "unbounded": self.unbounded, "good": self.good}


def score_from_moments(null_mean: float, null_variance: float, alternate_mean: float) -> DistinguisherScore:
    advantage = abs(null_mean - alternate_mean)
    std = math.sqrt(max(null_variance, 0.0))
    if std <= ZERO_STD:
        if advantage <= ZERO_STD:
            return DistinguisherScore(advantage, std, 0.0)
        return DistinguisherScore(advantage, std, math.inf, unbounded=True)
    return DistinguisherScore(advantage, std, advantage / std)


def null_m_sample_table(null: ProductNull, m: int) -> np.ndarray:
    check_state_cap(null.state_count ** m)
    single = null.table()
    joint = np.ones(())
    for _ in range(m):
        joint = np.multiply.outer(joint, single)
    return joint


def _is_sign_cube(null) -> bool:
    return (isinstance(null, ProductNull) and null.alphabet_size == 2
            and np.allclose(np.sort(null.values), [-1.0, 1.0]) and np.allclose(null.probs, 0.5))


class CharacterPolynomial:
    """
    sum_key c_key prod_i x_i^{S_i} on m samples from the sign hypercube; each key lists one
    subset S_i per sample. Moments follow from orthonormality of the characters, so the
    polynomial is never tabulated.
    """

    def __init__(self, terms: Mapping[Sequence[Sequence[int]], float], m: int):
        self.m = m
        self.terms: Dict[Tuple[Tuple[int, ...], ...], float] = {}
        for key, coefficient in terms.items():
            if len(key) != m:
                raise DimensionMismatchError(f"term {key} names {len(key)} samples, expected {m}")
            key = tuple(tuple(sorted(subset)) for subset in key)
            self.terms[key] = self.terms.get(key, 0.0) + float(coefficient)

    @property
    def degree(self) -> int:
        """Largest per-sample degree among nonzero terms."""
        return max((len(s) for key, c in self.terms.items() if c for s in key), default=0)

    def null_moments(self) -> Tuple[float, float]:
        constant = ((),) * self.m
        mean = self.terms.get(constant, 0.0)
        variance = math.fsum(c * c for key, c in self.terms.items() if key != constant)
        return mean, variance

    def expectation(self, alternate, null) -> float:
        """E_{D_u^{(x)m}} p, one character mean per sample."""
        cache: Dict[Tuple[int, ...], float] = {}

        def character_mean(subset):
            if subset not in cache:
                cache[subset] = 2.0 * ParityQuery(subset).expectation(alternate, null) - 1.0
            return cache[subset]

        return math.fsum(c * math.prod(character_mean(s) for s in key) for key, c in self.terms.items())


def distinguisher_score(p: Union[np.ndarray, CharacterPolynomial], problem: TestingProblem,
                        m: int) -> DistinguisherScore:
    """
    Exact moments of p under D_null^{(x)m} and E_u D_u^{(x)m}: tabulated p over (Omega^N)^m,
    or a character polynomial in closed form.
    """
    null = problem.null
    prior = require_explicit(problem.prior)
    if isinstance(p, CharacterPolynomial):
        if not _is_sign_cube(null):
            raise UnsupportedBackendError("character polynomials live on the uniform sign hypercube")
        if p.m != m:
            raise DimensionMismatchError(f"polynomial on {p.m} samples scored with m={m}")
        mean, variance = p.null_moments()
        alternate_mean = math.fsum(w * p.expectation(u, null) for w, u in zip(prior.weights, prior.alternates))
        return score_from_moments(mean, variance, alternate_mean)
    if not isinstance(null, ProductNull):
        raise UnsupportedBackendError("tabulated test functions need a finite product null")
    p = np.asarray(p, dtype=float)
    if p.shape != null.shape * m:
        raise DimensionMismatchError(f"test function of shape {p.shape} on {m} samples of {null.shape}")
    null_joint = null_m_sample_table(null, m)
    mean = float(np.sum(null_joint * p))
    variance = float(np.sum(null_joint * (p - mean) ** 2))
    alternate_mean = float(np.sum(m_sample_table(problem, m) * p))
    return score_from_moments(mean, variance, alternate_mean)


def projection_distinguisher(problem: TestingProblem, m: int,
                             degree: SamplewiseDegree) -> Tuple[np.ndarray, DistinguisherScore]:
    """
    The optimal (d,k) test Pi(E_u Dbar_u^{(x)m} - 1) / ||.||, tabulated; its beta is the
    norm of the projection.
    """
    projected, _ = ldlr_projection(problem, m, degree)
    norm = math.sqrt(math.fsum((projected ** 2).ravel().tolist()))
    if norm == 0.0:
        return np.zeros(problem.null.shape * m), DistinguisherScore(0.0, 0.0, 0.0)
    logger.debug(f"{problem.problem_id}: projection test for {degree.label} at m={m} has norm {norm:.6g}")
    table = synthesize_table(projected, problem.null) / norm
    return table, distinguisher_score(table, problem, m)


@report_errors("projection_distinguisher")
def projection_distinguisher_check(problem: TestingProblem, m: int, degree: SamplewiseDegree,
                                   tol: float = 1e-9) -> CheckReport:
    """beta of the projection test against sqrt of the multi-sample identity."""
    _, score = projection_distinguisher(problem, m, degree)
    expected = math.sqrt(max(ldlr_norm(problem, m, degree).value, 0.0))
    gap = abs(score.beta - expected)
    return CheckReport("projection_distinguisher", passed=gap <= tol, margin=tol - gap,
                       values={"problem_id": problem.problem_id, "m": m, "degree": degree.label,
                               "beta": score.beta, "sqrt_ldlr": expected, **score.to_record()})
