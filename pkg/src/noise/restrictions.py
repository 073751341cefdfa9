"""
Noised and randomly restricted testing problems.

A (T, s)-random restriction draws R by including every unit independently with probability
`rate`, keeps the coordinates whose indices all lie in R and pushes every other coordinate
through T. Units are the N coordinates (coordinate mode), the n indices of an [n]^p tensor
(subtensor mode) or of the p-subsets C([n], p) (subset mode). One R is shared by all samples
drawn from the same alternate.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from src.ldlr.norms import high_degree_norm, k_sample_lr_norm, require_even
from src.measures.distributions import LIMITS, ExplicitPrior, ProductNull, require_explicit
from src.measures.kernels import TestingProblem
from src.noise.operators import MarkovOperator, apply_operator
from src.utils.errors import DimensionMismatchError, InfeasibleSizeError, PreconditionError, UnsupportedBackendError
from src.utils.logger import Logger
from src.utils.numerics import colex_subsets
from src.utils.report_utils import CheckReport, margin_report, report_errors
from src.utils.seeding import derive_rng

logger = Logger().get_logger()

COORDINATE = "coordinate"
SUBTENSOR = "subtensor"
SUBSET = "subset"
MODES = (COORDINATE, SUBTENSOR, SUBSET)

DEFAULT_RESTRICTION_SAMPLES = 256
# exact bound verification enumerates every R; units per mode
VERIFY_MAX_UNITS = {COORDINATE: 10, SUBTENSOR: 5, SUBSET: 6}


def subtensor_index(n: int, p: int) -> np.ndarray:
    """[n]^p in row-major order."""
    return np.array(list(itertools.product(range(n), repeat=p)), dtype=int).reshape(-1, p)


@dataclass
class RestrictionSpec:
    mode: str
    rate: float
    operator: MarkovOperator
    p: int = 1
    n: Optional[int] = None
    samples: int = DEFAULT_RESTRICTION_SAMPLES

    def __post_init__(self):
        if self.mode not in MODES:
            raise PreconditionError(f"unknown restriction mode {self.mode!r}", subject="mode")
        if not 0.0 <= self.rate <= 1.0:
            raise PreconditionError(f"restriction rate {self.rate} must lie in [0, 1]", subject="rate")
        if self.mode != COORDINATE and (self.n is None or self.p < 1):
            raise PreconditionError(f"{self.mode} restrictions need n and p >= 1", subject="n")

    def coordinate_index(self, null: ProductNull) -> np.ndarray:
        """(N, p) array listing the units each coordinate depends on."""
        N = null.n_coords
        if self.mode == COORDINATE:
            return np.arange(N).reshape(N, 1)
        index = subtensor_index(self.n, self.p) if self.mode == SUBTENSOR else colex_subsets(self.n, self.p)
        if index.shape[0] != N:
            raise DimensionMismatchError(f"{self.mode} layout with n={self.n}, p={self.p} has "
                                         f"{index.shape[0]} coordinates, the null has {N}")
        return index

    def n_units(self, null: ProductNull) -> int:
        return null.n_coords if self.mode == COORDINATE else self.n

    def expected_size(self, null: ProductNull) -> float:
        """s = rate * (number of units)."""
        return self.rate * self.n_units(null)

    def restriction_law(self, null: ProductNull, seed: int = 0) -> List[Tuple[float, np.ndarray]]:
        """
        (weight, unit mask) pairs: every R exactly when the unit count is small, seeded
        independent draws otherwise.
        """
        units = self.n_units(null)
        if units <= LIMITS["restriction_enum_max_n"]:
            law = []
            for bits in itertools.product((False, True), repeat=units):
                mask = np.array(bits, dtype=bool)
                size = int(mask.sum())
                weight = self.rate ** size * (1.0 - self.rate) ** (units - size)
                if weight > 0:
                    law.append((weight, mask))
            return law
        rng = derive_rng(seed, "restriction", self.mode)
        draws = rng.random((self.samples, units)) < self.rate
        logger.debug(f"sampled {self.samples} restrictions over {units} units")
        return [(1.0 / self.samples, mask) for mask in draws]

    def keep_mask(self, unit_mask: np.ndarray, index: np.ndarray) -> np.ndarray:
        return np.all(unit_mask[index], axis=1)


def _require_finite(problem: TestingProblem) -> ProductNull:
    if not isinstance(problem.null, ProductNull):
        raise UnsupportedBackendError("noise operators act on finite product nulls only")
    return problem.null


def _rebuild(problem: TestingProblem, alternates, weights, suffix: str) -> TestingProblem:
    prior = ExplicitPrior(alternates, np.asarray(weights) / math.fsum(weights))
    try:
        return TestingProblem(problem.null, prior, problem.kernel, problem_id=f"{problem.problem_id}{suffix}",
                              params=problem.params)
    except UnsupportedBackendError:
        # the noised alternates left the family the original kernel understands
        return TestingProblem(problem.null, prior, problem_id=f"{problem.problem_id}{suffix}",
                              params=problem.params)


def noised_problem(problem: TestingProblem, operator: MarkovOperator) -> TestingProblem:
    """(D_0, T S): every alternate pushed through the operator on every coordinate."""
    null = _require_finite(problem)
    operator.check_null(null)
    prior = require_explicit(problem.prior)
    alternates = [apply_operator(a, operator, null) for a in prior.alternates]
    return _rebuild(problem, alternates, prior.weights, f"|{operator.name}")


def restricted_problem(problem: TestingProblem, spec: RestrictionSpec, seed: int = 0) -> TestingProblem:
    """Prior over composite labels (label_u, R) with weight mu(u) * Pr(R)."""
    null = _require_finite(problem)
    spec.operator.check_null(null)
    prior = require_explicit(problem.prior)
    index = spec.coordinate_index(null)
    alternates, weights = [], []
    for r_weight, unit_mask in spec.restriction_law(null, seed):
        keep = spec.keep_mask(unit_mask, index)
        R = tuple(int(i) for i in np.flatnonzero(unit_mask))
        for u_weight, alternate in zip(prior.weights, prior.alternates):
            noised = apply_operator(alternate, spec.operator, null, keep)
            if noised is alternate:
                noised = _relabelled(alternate, (alternate.label, R))
            else:
                noised.label = (alternate.label, R)
            alternates.append(noised)
            weights.append(u_weight * r_weight)
    logger.debug(f"restricted {problem!r} to {len(alternates)} composite alternates")
    return _rebuild(problem, alternates, weights, f"|{spec.mode}:{spec.rate:g}")


def _relabelled(alternate, label):
    clone = object.__new__(type(alternate))
    clone.__dict__.update(alternate.__dict__)
    clone.label = label
    return clone


def apply_noise(problem: TestingProblem, noise: Union[MarkovOperator, RestrictionSpec],
                seed: int = 0) -> TestingProblem:
    """Noised problem for a Markov operator, restricted problem for a restriction spec."""
    if isinstance(noise, RestrictionSpec):
        return restricted_problem(problem, noise, seed)
    if isinstance(noise, MarkovOperator):
        return noised_problem(problem, noise)
    raise PreconditionError(f"cannot apply {type(noise).__name__} as noise", subject="noise")


def restriction_factor(spec: RestrictionSpec, null: ProductNull, d: int, k: int) -> float:
    """
    Multiplier of ||E_u Dbar_u^{(x)k}||^2 bounding the restricted high-degree norm:
    coordinate mode  max{4^{d+1} rho^{2(d+1)k}, (2s/N)^{2(d+1)}},
    tensor modes     max{4^{d+1} rho^{(d+1)k/p}, (2s/n)^{2((d+1)/2)^{1/p}}}.
    """
    rho = spec.operator.rho
    ratio = 2.0 * spec.expected_size(null) / spec.n_units(null)
    if spec.mode == COORDINATE:
        return max(4.0 ** (d + 1) * rho ** (2 * (d + 1) * k), ratio ** (2 * (d + 1)))
    if ratio > 1.0 or 2.0 ** (spec.p / k) * rho > 1.0 + 1e-12:
        raise PreconditionError("tensor restriction bounds need 2s <= n and 2^{p/k} rho <= 1", subject="rate")
    return max(4.0 ** (d + 1) * rho ** ((d + 1) * k / spec.p),
               ratio ** (2.0 * (0.5 * (d + 1)) ** (1.0 / spec.p)))


@report_errors("restriction_bounds")
def verify_restriction_bounds(problem: TestingProblem, spec: RestrictionSpec, d: int, k: int,
                              tol: float = 1e-10) -> CheckReport:
    """
    Exact check of ||E_{R,u} (T^{R^c} Dbar_u^{>d})^{(x)k}||^2 <= factor * ||E_u Dbar_u^{(x)k}||^2.
    """
    require_even(k)
    if d < 0:
        raise PreconditionError(f"d={d} must be >= 0", subject="d")
    null = _require_finite(problem)
    if null.alphabet_size != 2:
        raise UnsupportedBackendError("restriction bounds are stated for binary coordinates")
    units = spec.n_units(null)
    if units > VERIFY_MAX_UNITS[spec.mode]:
        raise InfeasibleSizeError(f"{units} units exceed the exact {spec.mode} limit {VERIFY_MAX_UNITS[spec.mode]}")
    restricted = restricted_problem(problem, spec)
    lhs = high_degree_norm(restricted, d, k)
    k_lr = k_sample_lr_norm(problem, k).uncentered
    factor = restriction_factor(spec, null, d, k)
    return margin_report("restriction_bounds", lhs, factor * k_lr, tol,
                         {"mode": spec.mode, "rate": spec.rate, "rho": spec.operator.rho, "factor": factor,
                          "k_sample_lr": k_lr, "d": d, "k": k, "composites": len(restricted.prior)})


@dataclass
class NicenessCertificate:
    delta: float
    k: int
    m: float
    threshold: float
    values: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.delta <= self.threshold

    def __bool__(self):
        return self.valid


def niceness_certificate(problem: TestingProblem, m: float, k: int) -> NicenessCertificate:
    """(delta, k)-niceness via delta^2 = ||E_u (Dbar_u^{>k})^{(x)k}||^2 against m^{-k/2}/4."""
    require_even(k)
    delta_sq = high_degree_norm(problem, k, k)
    delta = math.sqrt(max(delta_sq, 0.0))
    threshold = m ** (-k / 2.0) / 4.0
    certificate = NicenessCertificate(delta, k, m, threshold, {"delta_squared": delta_sq})
    if not certificate.valid:
        logger.info(f"{problem!r} is not certified ({threshold:g}, {k})-nice: delta={delta:g}")
    return certificate
