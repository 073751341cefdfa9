"""
The law of <Dbar_u, Dbar_v> - 1 under independent prior draws u, v, exactly over explicit
priors / pair laws or by seeded Monte-Carlo.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from src.measures.distributions import INF_DEGREE, require_explicit
from src.measures.kernels import TestingProblem
from src.utils.errors import PreconditionError, PriorModeError
from src.utils.logger import Logger
from src.utils.numerics import is_unbounded
from src.utils.seeding import derive_rng

logger = Logger().get_logger()

MONTE_CARLO_CHUNK = 4096
EXACT = "exact"
MONTE_CARLO = "montecarlo"


def normalize_degree(d):
    return INF_DEGREE if is_unbounded(d) else int(d)


@dataclass
class CorrelationAtoms:
    """
    Discrete law of X = <Dbar_u, Dbar_v> - 1: `values` are signed, `weights` sum to 1.
    Monte-Carlo atoms carry uniform weights plus their seed and budget.
    """
    weights: np.ndarray
    values: np.ndarray
    mode: str = EXACT
    seed: Optional[int] = None
    budget: Optional[int] = None

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if weights.size != values.size:
            raise PreconditionError("atoms need one weight per value", subject="weights")
        keep = weights > 0
        self.weights, self.values = weights[keep], values[keep]
        if self.values.size == 0 or abs(self.weights.sum() - 1.0) > 1e-10:
            raise PreconditionError(f"atom weights sum to {self.weights.sum()}", subject="weights")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("correlation atoms must be finite", subject="values")

    @classmethod
    def single(cls, value: float = 0.0) -> "CorrelationAtoms":
        return cls(np.ones(1), np.array([value]))

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def empirical(self) -> bool:
        return self.mode == MONTE_CARLO

    def expectation(self, values: np.ndarray) -> float:
        return math.fsum((self.weights * np.asarray(values, dtype=float)).tolist())

    def compressed(self) -> "CorrelationAtoms":
        """Merge atoms with identical values (weights added)."""
        unique, inverse = np.unique(self.values, return_inverse=True)
        merged = np.zeros(unique.size)
        np.add.at(merged, inverse, self.weights)
        return CorrelationAtoms(merged, unique, self.mode, self.seed, self.budget)

    def resample(self, rng: np.random.Generator) -> "CorrelationAtoms":
        """Bootstrap replicate with the same size."""
        idx = rng.choice(self.values.size, size=self.values.size, p=self.weights)
        return CorrelationAtoms(np.full(idx.size, 1.0 / idx.size), self.values[idx], self.mode,
                                self.seed, self.budget)

    def to_records(self):
        return [{"weight": float(w), "value": float(v)} for w, v in zip(self.weights, self.values)]


@dataclass
class CorrelationTable:
    """
    Per-pair correlations <Dbar_u^{<=d}, Dbar_v^{<=d}> for several degrees d, all on the
    same pairs (exact atoms with weights, or Monte-Carlo draws with uniform weights)
    """
    weights: np.ndarray
    values: Dict[float, np.ndarray]
    mode: str = EXACT
    seed: Optional[int] = None
    budget: Optional[int] = None
    stats: Optional[np.ndarray] = field(default=None, repr=False)

    def correlation(self, d) -> np.ndarray:
        key = normalize_degree(d)
        if key not in self.values:
            raise KeyError(f"degree {d} was not tabulated")
        return self.values[key]

    @property
    def full(self) -> np.ndarray:
        return self.correlation(INF_DEGREE)

    @property
    def size(self) -> int:
        return self.weights.size

    def expectation(self, values: np.ndarray) -> float:
        return math.fsum((self.weights * np.asarray(values, dtype=float)).tolist())

    def stderr(self, values: np.ndarray) -> Optional[float]:
        """Standard error of the Monte-Carlo mean; None for exact tables."""
        if self.mode == EXACT:
            return None
        values = np.asarray(values, dtype=float)
        if values.size < 2:
            return math.inf
        return float(np.std(values, ddof=1) / math.sqrt(values.size))

    def atoms(self, d=INF_DEGREE) -> CorrelationAtoms:
        return CorrelationAtoms(self.weights, self.correlation(d) - 1.0, self.mode, self.seed, self.budget)


def correlation_matrix(problem: TestingProblem, d=INF_DEGREE) -> Tuple[np.ndarray, np.ndarray]:
    """Prior weights and the matrix of correlations over all pairs of an explicit prior."""
    prior = require_explicit(problem.prior)
    return prior.weights, problem.kernel.gram(prior.alternates, normalize_degree(d))


def _exact_table(problem: TestingProblem, degrees) -> CorrelationTable:
    if problem.pair_law is not None:
        law = problem.pair_law
        values = {d: law.correlation(d) for d in degrees}
        return CorrelationTable(law.weights.copy(), values, EXACT, stats=law.stats)
    if not problem.explicit:
        raise PriorModeError("exact correlations need an explicit-list prior or a pair law")
    prior = problem.prior
    weights = np.outer(prior.weights, prior.weights).ravel()
    values = {d: problem.kernel.gram(prior.alternates, d).ravel() for d in degrees}
    return CorrelationTable(weights, values, EXACT)


def _monte_carlo_table(problem: TestingProblem, degrees, budget: int, seed: int) -> CorrelationTable:
    chunks = []
    for index, start in enumerate(range(0, budget, MONTE_CARLO_CHUNK)):
        size = min(MONTE_CARLO_CHUNK, budget - start)
        # each chunk has its own derived stream so chunks may run on separate workers
        rng = derive_rng(seed, "pairs", index)
        if problem.pair_law is not None:
            stats = problem.pair_law.sample(rng, size)
            chunks.append({d: problem.pair_law.correlation(d, stats) for d in degrees})
        else:
            left = problem.prior.sample(rng, size)
            right = problem.prior.sample(rng, size)
            chunks.append({d: problem.kernel.pairwise(left, right, d) for d in degrees})
    values = {d: np.concatenate([chunk[d] for chunk in chunks]) for d in degrees}
    weights = np.full(budget, 1.0 / budget)
    return CorrelationTable(weights, values, MONTE_CARLO, seed, budget)


def correlation_table(problem: TestingProblem, degrees: Iterable = (INF_DEGREE,), mode: str = EXACT,
                      budget: Optional[int] = None, seed: Optional[int] = None) -> CorrelationTable:
    """
    Tabulate pair correlations at every requested degree on one common set of pairs.

    Args:
        problem: the testing problem
        degrees: samplewise degrees to tabulate (math.inf or None for the full inner product)
        mode: "exact" (explicit prior or pair law) or "montecarlo"
        budget: number of i.i.d. pairs in Monte-Carlo mode
        seed: Monte-Carlo seed

    Returns:
        CorrelationTable
    """
    degrees = sorted({normalize_degree(d) for d in degrees} | {INF_DEGREE})
    if mode == EXACT:
        return _exact_table(problem, degrees)
    if mode != MONTE_CARLO:
        raise PreconditionError(f"unknown correlation mode {mode!r}", subject="mode")
    if not budget or budget < 1:
        raise PreconditionError("Monte-Carlo mode needs a positive budget", subject="budget")
    seed = 0 if seed is None else seed
    logger.debug(f"sampling {budget} pairs for {problem!r} with seed {seed}")
    return _monte_carlo_table(problem, degrees, int(budget), seed)


def correlation_atoms(problem: TestingProblem, mode: str = EXACT, budget: Optional[int] = None,
                      seed: Optional[int] = None) -> CorrelationAtoms:
    """
    Law of <Dbar_u, Dbar_v> - 1; exact atoms are merged by value
    """
    atoms = correlation_table(problem, (INF_DEGREE,), mode, budget, seed).atoms()
    return atoms.compressed() if mode == EXACT else atoms
