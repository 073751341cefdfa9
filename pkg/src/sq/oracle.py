"""
VSTAT(m) oracle simulation. A query phi maps one sample into [0, 1]; the oracle answers
E_D phi up to the tolerance max(1/m, sqrt(p(1 - p)/m)), choosing the answer inside that
window through an adversary. Every answer is recorded in an SqTranscript.
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from src.measures.distributions import (NULL, Alternate, GaussianCovarianceAlternate, GaussianMeanShift,
                                        GaussianNull, NullAlternate, ProductNull)
from src.utils.errors import (DimensionMismatchError, PreconditionError, QueryCapExceededError,
                              QueryRangeError, ToleranceViolationError, UnsupportedBackendError)
from src.utils.logger import Logger
from src.zoo.sparse_parity import ParityAlternate, parity_query_value

logger = Logger().get_logger()

RANGE_TOL = 1e-12
# relative slack on the transcript check, absorbs rounding in p +- tau
TOLERANCE_SLACK = 1e-12


def vstat_tolerance(p: float, m: float) -> float:
    """max(1/m, sqrt(p (1 - p) / m))."""
    if m <= 0:
        raise PreconditionError(f"oracle parameter m={m} must be positive", subject="m")
    p = min(max(p, 0.0), 1.0)
    return max(1.0 / m, math.sqrt(p * (1.0 - p) / m))


# ---------------------------------------------------------------- queries

class Query:
    query_id: str = ""

    def expectation(self, alternate: Alternate, null) -> float:
        raise NotImplementedError

    def value_at(self, x: np.ndarray, null) -> float:
        """phi at one sample x (a vector of symbols or reals)."""
        raise NotImplementedError

    def pair_expectation(self, other: "Query", alternate: Alternate, null) -> float:
        """E_D [phi * phi'], used by the polynomial simulation."""
        raise UnsupportedBackendError(f"no product expectation for {type(self).__name__} "
                                      f"and {type(other).__name__}")

    def __repr__(self):
        return f"{type(self).__name__}({self.query_id})"


class ConstantQuery(Query):
    def __init__(self, value: float, query_id: Optional[str] = None):
        if not -RANGE_TOL <= value <= 1.0 + RANGE_TOL:
            raise QueryRangeError(f"constant query {value} outside [0, 1]")
        self.value = float(value)
        self.query_id = query_id or f"const:{value:g}"

    def expectation(self, alternate: Alternate, null) -> float:
        return self.value

    def value_at(self, x, null):
        return self.value

    def pair_expectation(self, other: Query, alternate: Alternate, null) -> float:
        return self.value * other.expectation(alternate, null)


class TabulatedQuery(Query):
    """phi given by its value on every state of a finite product null."""

    def __init__(self, values, query_id: Optional[str] = None):
        values = np.asarray(values, dtype=float)
        if values.size and (values.min() < -RANGE_TOL or values.max() > 1.0 + RANGE_TOL):
            raise QueryRangeError(f"tabulated query takes values in [{values.min():.6g}, {values.max():.6g}]")
        self.values = np.clip(values, 0.0, 1.0)
        self.query_id = query_id or "table:" + hashlib.sha256(self.values.tobytes()).hexdigest()[:10]

    def _density(self, alternate: Alternate, null) -> np.ndarray:
        if not isinstance(null, ProductNull):
            raise UnsupportedBackendError("tabulated queries need a finite product null")
        if self.values.shape != null.shape:
            raise DimensionMismatchError(f"query table {self.values.shape} does not match null {null.shape}")
        return alternate.dense(null)

    def expectation(self, alternate: Alternate, null) -> float:
        return float(np.sum(self._density(alternate, null) * self.values))

    def value_at(self, x, null):
        index = tuple(int(np.argmin(np.abs(null.values - xi))) for xi in np.asarray(x, dtype=float))
        return float(self.values[index])

    def pair_expectation(self, other: Query, alternate: Alternate, null) -> float:
        if isinstance(other, ConstantQuery):
            return other.value * self.expectation(alternate, null)
        other_values = other.tabulate(null) if isinstance(other, ParityQuery) else getattr(other, "values", None)
        if other_values is None:
            return super().pair_expectation(other, alternate, null)
        return float(np.sum(self._density(alternate, null) * self.values * other_values))


class ParityQuery(Query):
    """phi_S(x) = (1 + x^S) / 2 on the sign hypercube."""

    def __init__(self, subset: Sequence[int], query_id: Optional[str] = None):
        self.subset = tuple(sorted(int(i) for i in subset))
        self.query_id = query_id or "parity:" + ",".join(map(str, self.subset))

    def tabulate(self, null: ProductNull) -> np.ndarray:
        if not self.subset:
            return np.ones(null.shape)
        signs = null.values[np.indices(null.shape)[list(self.subset)]]
        return 0.5 * (1.0 + np.prod(signs, axis=0))

    def value_at(self, x, null):
        return 0.5 * (1.0 + float(np.prod(np.asarray(x, dtype=float)[list(self.subset)])))

    def expectation(self, alternate: Alternate, null) -> float:
        if isinstance(alternate, (NullAlternate, ParityAlternate)):
            return parity_query_value(alternate, self.subset)
        if isinstance(null, ProductNull):
            return float(np.sum(alternate.dense(null) * self.tabulate(null)))
        raise UnsupportedBackendError(f"parity query on {type(alternate).__name__}")

    def pair_expectation(self, other: Query, alternate: Alternate, null) -> float:
        if isinstance(other, ConstantQuery):
            return other.value * self.expectation(alternate, null)
        if not isinstance(other, ParityQuery):
            return other.pair_expectation(self, alternate, null)
        # (1 + x^S)(1 + x^T) / 4 = (1 + x^S + x^T + x^{S xor T}) / 4
        product = tuple(sorted(set(self.subset) ^ set(other.subset)))
        terms = [2.0 * ParityQuery(q).expectation(alternate, null) - 1.0
                 for q in (self.subset, other.subset, product)]
        return 0.25 * (1.0 + sum(terms))


class ThresholdQuery(Query):
    """phi(x) = 1{<w, x> > t} for Gaussian backends, evaluated through the normal CDF."""

    def __init__(self, direction, threshold: float, query_id: Optional[str] = None):
        self.direction = np.asarray(direction, dtype=float)
        if not np.any(self.direction):
            raise PreconditionError("threshold direction must be nonzero", subject="direction")
        self.threshold = float(threshold)
        self.query_id = query_id or f"threshold:{self.threshold:g}"

    def value_at(self, x, null):
        return float(np.dot(self.direction, x) > self.threshold)

    def expectation(self, alternate: Alternate, null) -> float:
        if not isinstance(null, GaussianNull):
            raise UnsupportedBackendError("threshold queries need a Gaussian null")
        w = self.direction
        if w.size != null.dim:
            raise DimensionMismatchError(f"direction of length {w.size} vs dimension {null.dim}")
        mean, variance = 0.0, float(w @ w)
        if isinstance(alternate, GaussianMeanShift):
            mean = float(w @ alternate.mean)
        elif isinstance(alternate, GaussianCovarianceAlternate):
            covariance = np.linalg.inv(np.eye(alternate.dim) + alternate.perturbation)
            variance = float(w @ covariance @ w)
        elif not isinstance(alternate, NullAlternate):
            raise UnsupportedBackendError(f"threshold query on {type(alternate).__name__}")
        return float(stats.norm.sf((self.threshold - mean) / math.sqrt(variance)))


class ComplementQuery(Query):
    """1 - phi."""

    def __init__(self, base: Query):
        self.base = base
        self.query_id = f"not:{base.query_id}"

    def expectation(self, alternate, null):
        return 1.0 - self.base.expectation(alternate, null)

    def value_at(self, x, null):
        return 1.0 - self.base.value_at(x, null)

    def pair_expectation(self, other, alternate, null):
        return pair_expectation(self, other, alternate, null)


def pair_expectation(first: Query, second: Query, alternate: Alternate, null) -> float:
    """E_D [phi phi'] for any two queries, unwrapping complements."""
    if isinstance(first, ComplementQuery):
        return second.expectation(alternate, null) - pair_expectation(first.base, second, alternate, null)
    if isinstance(second, ComplementQuery):
        return first.expectation(alternate, null) - pair_expectation(first, second.base, alternate, null)
    return first.pair_expectation(second, alternate, null)


# ---------------------------------------------------------------- transcripts

@dataclass
class TranscriptEntry:
    query_id: str
    true_value: float
    tolerance: float
    returned: float
    adversary: str


@dataclass
class SqTranscript:
    entries: List[TranscriptEntry] = field(default_factory=list)

    def record(self, entry: TranscriptEntry) -> None:
        if abs(entry.returned - entry.true_value) > entry.tolerance * (1.0 + TOLERANCE_SLACK):
            raise ToleranceViolationError(
                f"answer {entry.returned:.12g} to {entry.query_id} is outside "
                f"{entry.true_value:.12g} +- {entry.tolerance:.6g}")
        self.entries.append(entry)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def answers(self) -> List[float]:
        return [e.returned for e in self.entries]

    def to_records(self, **extra) -> List[Dict]:
        return [{**extra, "step": i, **vars(e)} for i, e in enumerate(self.entries)]


# ---------------------------------------------------------------- adversaries

class Adversary:
    name = "adversary"

    def answer(self, p: float, tau: float, null_value: float, transcript: SqTranscript,
               rng: Optional[np.random.Generator]) -> float:
        raise NotImplementedError


class HonestAdversary(Adversary):
    name = "honest"

    def answer(self, p, tau, null_value, transcript, rng):
        return p


class TowardNullAdversary(Adversary):
    """Returns the point of [p - tau, p + tau] closest to the null expectation."""
    name = "toward_null"

    def answer(self, p, tau, null_value, transcript, rng):
        return min(max(null_value, p - tau), p + tau)


class UniformNoiseAdversary(Adversary):
    name = "uniform_noise"

    def answer(self, p, tau, null_value, transcript, rng):
        if rng is None:
            raise PreconditionError("uniform_noise needs a random generator", subject="rng")
        return float(rng.uniform(p - tau, p + tau))


class CallableAdversary(Adversary):
    """Wraps a user hook (p, tau, transcript) -> value; the transcript check validates it."""

    def __init__(self, hook: Callable[[float, float, SqTranscript], float], name: str = "custom"):
        self.hook = hook
        self.name = name

    def answer(self, p, tau, null_value, transcript, rng):
        return float(self.hook(p, tau, transcript))


ADVERSARIES = {cls.name: cls for cls in (HonestAdversary, TowardNullAdversary, UniformNoiseAdversary)}

AdversaryLike = Union[str, Adversary, Callable[[float, float, SqTranscript], float]]


def make_adversary(adversary: AdversaryLike) -> Adversary:
    if isinstance(adversary, Adversary):
        return adversary
    if isinstance(adversary, str):
        if adversary not in ADVERSARIES:
            raise PreconditionError(f"unknown adversary {adversary!r}; known: {', '.join(ADVERSARIES)}",
                                    subject="adversary")
        return ADVERSARIES[adversary]()
    if callable(adversary):
        return CallableAdversary(adversary)
    raise PreconditionError(f"cannot use {adversary!r} as an adversary", subject="adversary")


# ---------------------------------------------------------------- oracle

class VstatOracle:
    """
    VSTAT(m) answering queries about one distribution (the null, or an alternate of `problem`).
    """

    def __init__(self, problem, alternate: Alternate = NULL, m: float = 1.0,
                 adversary: AdversaryLike = "honest", query_cap: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None):
        if m <= 0:
            raise PreconditionError(f"oracle parameter m={m} must be positive", subject="m")
        self.problem = problem
        self.alternate = alternate
        self.m = m
        self.adversary = make_adversary(adversary)
        self.query_cap = query_cap
        self.rng = rng
        self.transcript = SqTranscript()

    def answer(self, query: Query) -> float:
        if self.query_cap is not None and len(self.transcript) >= self.query_cap:
            logger.warning(f"oracle for {self.alternate!r} refused query {query.query_id}: cap {self.query_cap}")
            raise QueryCapExceededError(f"query cap {self.query_cap} reached")
        null = self.problem.null
        p = query.expectation(self.alternate, null)
        null_value = p if isinstance(self.alternate, NullAlternate) else query.expectation(NULL, null)
        tau = vstat_tolerance(p, self.m)
        returned = self.adversary.answer(p, tau, null_value, self.transcript, self.rng)
        self.transcript.record(TranscriptEntry(query.query_id, p, tau, returned, self.adversary.name))
        return returned


def vstat_answer(problem, query: Query, m_oracle: float, adversary: AdversaryLike = "honest",
                 alternate: Alternate = NULL, rng: Optional[np.random.Generator] = None):
    """One VSTAT(m_oracle) answer about `alternate` (the null by default): (value, tau)."""
    oracle = VstatOracle(problem, alternate, m_oracle, adversary, rng=rng)
    value = oracle.answer(query)
    return value, oracle.transcript.entries[-1].tolerance
