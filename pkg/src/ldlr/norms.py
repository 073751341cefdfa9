"""
Samplewise-degree LDLR norms, k-sample likelihood-ratio norms and high-degree norms, all
computed from the pair correlations through the multi-sample identity

    <(Dbar_u^{(x)m})^{<=d,k}, (Dbar_v^{(x)m})^{<=d,k}> - 1 = sum_{t=1..k} C(m,t) x_uv^t,
    x_uv = <Dbar_u^{<=d}, Dbar_v^{<=d}> - 1.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.measures.correlation import EXACT, CorrelationTable, correlation_table, normalize_degree
from src.measures.distributions import INF_DEGREE
from src.measures.kernels import TestingProblem, low_degree_correlation  # noqa: F401 (re-exported)
from src.utils.errors import PreconditionError
from src.utils.numerics import binomial, is_unbounded, signed_power


@dataclass(frozen=True)
class SamplewiseDegree:
    """Per-sample degree bound d (math.inf when unbounded) and active-sample bound k."""
    d: float
    k: int

    def __post_init__(self):
        d = INF_DEGREE if is_unbounded(self.d) else self.d
        object.__setattr__(self, "d", d)
        if not is_unbounded(d) and (d < 0 or float(d) != int(d)):
            raise PreconditionError(f"degree d={d} must be a nonnegative integer", subject="d")
        if self.k < 0:
            raise PreconditionError(f"active-sample bound k={self.k} must be >= 0", subject="k")

    def check_samples(self, m: float) -> None:
        if self.k > m:
            raise PreconditionError(f"k={self.k} exceeds the sample count m={m}", subject="k")

    @property
    def label(self) -> str:
        d = "inf" if is_unbounded(self.d) else str(int(self.d))
        return f"({d},{self.k})"


@dataclass
class LdlrReport:
    m: float
    degree: SamplewiseDegree
    value: float
    contributions: List[float]
    backend: str = "identity"
    stderr: Optional[float] = None
    seed: Optional[int] = None
    problem_id: str = ""
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return math.sqrt(max(self.value, 0.0))

    def to_record(self) -> Dict:
        """Flat CSV row."""
        return {
            "problem_id": self.problem_id,
            "m": self.m,
            "d": "inf" if is_unbounded(self.degree.d) else int(self.degree.d),
            "k": self.degree.k,
            "value": self.value,
            "stderr": "" if self.stderr is None else self.stderr,
            "backend": self.backend,
            "seed": "" if self.seed is None else self.seed,
        }


def require_even(k: int) -> None:
    if k < 1 or k % 2:
        raise PreconditionError(f"k={k} must be a positive even integer", subject="k")


def _table(problem: TestingProblem, degrees, mode: str, budget, seed) -> CorrelationTable:
    return correlation_table(problem, degrees, mode, budget, seed)


def ldlr_from_table(table: CorrelationTable, m: float, degree: SamplewiseDegree,
                    problem_id: str = "") -> LdlrReport:
    """
    Squared (d,k)-LDLR_m from tabulated correlations; the series stops at t = k exactly and
    negative x_uv enter with their sign.
    """
    degree.check_samples(m)
    x = table.correlation(degree.d) - 1.0
    per_pair = np.zeros_like(x)
    contributions = []
    for t in range(1, degree.k + 1):
        term = binomial(m, t) * signed_power(x, t)
        contributions.append(table.expectation(term))
        per_pair += term
    value = math.fsum(contributions)
    return LdlrReport(m, degree, value, contributions, "identity", table.stderr(per_pair),
                      table.seed, problem_id)


def ldlr_norm(problem: TestingProblem, m: float, degree: SamplewiseDegree, mode: str = EXACT,
              budget: Optional[int] = None, seed: Optional[int] = None) -> LdlrReport:
    """
    ||E_u (Dbar_u^{(x)m})^{<=d,k} - 1||^2 by the multi-sample identity, exact or Monte-Carlo.
    """
    table = _table(problem, (degree.d,), mode, budget, seed)
    return ldlr_from_table(table, m, degree, problem.problem_id)


@dataclass
class KSampleReport:
    k: int
    uncentered: float
    centered: Optional[float]
    stderr: Optional[float] = None


def k_sample_from_table(table: CorrelationTable, k: int) -> KSampleReport:
    full = table.full
    uncentered = table.expectation(full ** k)
    centered = table.expectation((full - 1.0) ** k) if k % 2 == 0 else None
    return KSampleReport(k, uncentered, centered, table.stderr(full ** k))


def k_sample_lr_norm(problem: TestingProblem, k: int, mode: str = EXACT,
                     budget: Optional[int] = None, seed: Optional[int] = None) -> KSampleReport:
    """
    ||E_u Dbar_u^{(x)k}||^2 = E <Dbar_u, Dbar_v>^k and, for even k, the centered
    ||E_u (Dbar_u - 1)^{(x)k}||^2 = E (<Dbar_u, Dbar_v> - 1)^k.
    """
    if k < 1:
        raise PreconditionError(f"k={k} must be >= 1", subject="k")
    return k_sample_from_table(_table(problem, (), mode, budget, seed), k)


def high_degree_from_table(table: CorrelationTable, d, k: int) -> float:
    require_even(k)
    if is_unbounded(d):
        return 0.0
    tail = table.full - table.correlation(d)
    return table.expectation(tail ** k)


def high_degree_norm(problem: TestingProblem, d, k: int, mode: str = EXACT,
                     budget: Optional[int] = None, seed: Optional[int] = None) -> float:
    """
    ||E_u (Dbar_u^{>d})^{(x)k}||^2 = E (<Dbar_u, Dbar_v> - <Dbar_u^{<=d}, Dbar_v^{<=d}>)^k
    """
    require_even(k)
    if is_unbounded(d):
        return 0.0
    return high_degree_from_table(_table(problem, (d,), mode, budget, seed), d, k)


def centered_low_degree_from_table(table: CorrelationTable, d, k: int) -> float:
    """E (<Dbar_u^{<=d}, Dbar_v^{<=d}> - 1)^k = ||E_u (Dbar_u^{<=d} - 1)^{(x)k}||^2."""
    return table.expectation((table.correlation(d) - 1.0) ** k)


def ldlr_curve(problem: TestingProblem, ms, degree_d, k: int, mode: str = EXACT,
               budget: Optional[int] = None, seed: Optional[int] = None) -> List[LdlrReport]:
    """LDLR over several sample counts sharing a single correlation table."""
    table = _table(problem, (degree_d,), mode, budget, seed)
    return [ldlr_from_table(table, m, SamplewiseDegree(normalize_degree(degree_d), k), problem.problem_id)
            for m in ms]
