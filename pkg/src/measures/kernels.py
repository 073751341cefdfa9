"""
Correlation kernels: the inner products <Dbar_u^{<=d}, Dbar_v^{<=d}> under the null for each
backend, plus the TestingProblem container that ties a null, a prior and a kernel together.
"""
import math
from abc import ABC, abstractmethod
from collections import OrderedDict
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.ldlr.symmetric import elementary_symmetric_all
from src.measures.distributions import (LOG_SPACE_THRESHOLD, NULL, Alternate, DenseAlternate,
                                        ExplicitPrior, GaussianCovarianceAlternate, GaussianMeanShift,
                                        GaussianNull, NullAlternate, ProductAlternate, ProductNull,
                                        TensorSpikeAlternate, coordinate_degrees, fourier_coefficients)
from src.utils.errors import DimensionMismatchError, PreconditionError, UnsupportedBackendError
from src.utils.numerics import LIMITS, exp_head, is_unbounded

# Fourier coefficients kept per finite kernel, least recently used evicted first
COEFFICIENT_CACHE_SIZE = 4096


def check_degree(d) -> None:
    if not is_unbounded(d) and d < 0:
        raise PreconditionError(f"degree {d} must be >= 0", subject="d")


class CorrelationKernel(ABC):
    """
    Computes <Dbar_u^{<=d}, Dbar_v^{<=d}>; an unbounded d gives the full inner product.
    """

    @abstractmethod
    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        raise NotImplementedError

    def full(self, u: Alternate, v: Alternate) -> float:
        return self.low_degree(u, v, math.inf)

    def gram(self, alternates: Sequence[Alternate], d) -> np.ndarray:
        """Matrix of low-degree correlations over all ordered pairs."""
        size = len(alternates)
        out = np.empty((size, size))
        for i in range(size):
            for j in range(i, size):
                out[i, j] = out[j, i] = self.low_degree(alternates[i], alternates[j], d)
        return out

    def pairwise(self, left: Sequence[Alternate], right: Sequence[Alternate], d) -> np.ndarray:
        """Correlations of the pairs (left[i], right[i])."""
        return np.array([self.low_degree(u, v, d) for u, v in zip(left, right)], dtype=float)

    def validate(self, alternate: Alternate, null) -> None:
        pass


class FiniteKernel(CorrelationKernel):
    """
    Exact backend for tabulated or product-form alternates over a ProductNull. Degree is the
    number of non-constant coordinates of a character.
    """

    def __init__(self, null: ProductNull):
        self.null = null
        self._coefficients: "OrderedDict[int, Tuple[Alternate, np.ndarray]]" = OrderedDict()
        self._degrees = None

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if isinstance(alternate, ProductAlternate):
            if alternate.probs.shape != self.null.probs.shape:
                raise DimensionMismatchError(
                    f"product alternate shape {alternate.probs.shape} vs null {self.null.probs.shape}")
        elif isinstance(alternate, DenseAlternate):
            if alternate.table.shape != self.null.shape:
                raise DimensionMismatchError(f"table shape {alternate.table.shape} vs null {self.null.shape}")
        else:
            raise UnsupportedBackendError(f"{type(alternate).__name__} is not a finite alternate")

    def _product_probs(self, alternate: Alternate) -> Optional[np.ndarray]:
        if isinstance(alternate, NullAlternate):
            return self.null.probs
        if isinstance(alternate, ProductAlternate):
            return alternate.probs
        return None

    def coefficients(self, alternate: Alternate) -> np.ndarray:
        key = id(alternate)
        if key in self._coefficients:
            self._coefficients.move_to_end(key)
            return self._coefficients[key][1]
        # the alternate is held alongside its coefficients so the id stays unique while cached
        coefficients = fourier_coefficients(alternate, self.null).ravel()
        self._coefficients[key] = (alternate, coefficients)
        if len(self._coefficients) > COEFFICIENT_CACHE_SIZE:
            self._coefficients.popitem(last=False)
        return coefficients

    def degrees(self) -> np.ndarray:
        if self._degrees is None:
            self._degrees = coordinate_degrees(self.null.shape).ravel()
        return self._degrees

    def full(self, u: Alternate, v: Alternate) -> float:
        if isinstance(u, NullAlternate) or isinstance(v, NullAlternate):
            return 1.0
        pu, pv = self._product_probs(u), self._product_probs(v)
        if pu is not None and pv is not None:
            return float(np.prod(np.sum(pu * pv / self.null.probs, axis=1)))
        table_u, table_v = u.dense(self.null), v.dense(self.null)
        null_table = self.null.table()
        if null_table.min() < LOG_SPACE_THRESHOLD:
            with np.errstate(divide="ignore"):
                log_terms = np.log(table_u) + np.log(table_v) - np.log(null_table)
            return math.fsum(np.exp(log_terms).ravel().tolist())
        return math.fsum((table_u * table_v / null_table).ravel().tolist())

    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        check_degree(d)
        if is_unbounded(d):
            return self.full(u, v)
        if isinstance(u, NullAlternate) or isinstance(v, NullAlternate):
            return 1.0
        pu, pv = self._product_probs(u), self._product_probs(v)
        if pu is not None and pv is not None:
            overlaps = np.sum(pu * pv / self.null.probs, axis=1) - 1.0
            return float(np.sum(elementary_symmetric_all(overlaps, d)))
        mask = self.degrees() <= d
        return math.fsum((self.coefficients(u)[mask] * self.coefficients(v)[mask]).tolist())

    def _all_product(self, alternates: Sequence[Alternate]) -> bool:
        return all(isinstance(a, (ProductAlternate, NullAlternate)) for a in alternates)

    def _product_from_overlaps(self, overlaps: np.ndarray, d) -> np.ndarray:
        if is_unbounded(d):
            return np.prod(1.0 + overlaps, axis=-1)
        return np.sum(elementary_symmetric_all(overlaps, d), axis=-1)

    def gram(self, alternates: Sequence[Alternate], d) -> np.ndarray:
        check_degree(d)
        size = len(alternates)
        if self._all_product(alternates):
            probs = np.stack([self._product_probs(a) for a in alternates])
            scaled = probs / self.null.probs[None]
            out = np.empty((size, size))
            chunk = LIMITS["pair_chunk_rows"]
            for start in range(0, size, chunk):
                stop = min(start + chunk, size)
                overlaps = np.einsum("ica,jca->ijc", scaled[start:stop], probs) - 1.0
                out[start:stop] = self._product_from_overlaps(overlaps, d)
            return out
        if is_unbounded(d):
            # full inner products straight from the likelihood ratios; large alphabets make the
            # character basis ill-conditioned
            null_table = self.null.table().ravel()
            ratios = np.stack([np.ones_like(null_table) if isinstance(a, NullAlternate)
                               else a.dense(self.null).ravel() / null_table for a in alternates])
            return (ratios * null_table) @ ratios.T
        F = np.stack([self.coefficients(a) for a in alternates])[:, self.degrees() <= d]
        return F @ F.T

    def pairwise(self, left: Sequence[Alternate], right: Sequence[Alternate], d) -> np.ndarray:
        check_degree(d)
        if self._all_product(left) and self._all_product(right):
            pu = np.stack([self._product_probs(a) for a in left])
            pv = np.stack([self._product_probs(a) for a in right])
            overlaps = np.sum(pu * pv / self.null.probs[None], axis=-1) - 1.0
            return self._product_from_overlaps(overlaps, d)
        return super().pairwise(left, right, d)


def mean_inner_matrix(alternates: Sequence[Alternate]) -> np.ndarray:
    """<mu_u, mu_v> over all pairs of Gaussian mean-shift alternates."""
    spikes = [a for a in alternates if isinstance(a, TensorSpikeAlternate)]
    if len(spikes) == len(alternates) and len({(a.n, a.r) for a in spikes}) == 1:
        signs = np.stack([a.signs for a in spikes])
        lam = np.array([a.lam for a in spikes])
        n, r = spikes[0].n, spikes[0].r
        return np.outer(lam, lam) * ((signs @ signs.T) / n) ** r
    dims = {a.dim for a in alternates if not isinstance(a, NullAlternate)}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mean dimensions differ: {sorted(dims)}")
    dim = dims.pop() if dims else 1
    means = np.stack([np.zeros(dim) if isinstance(a, NullAlternate) else a.mean for a in alternates])
    return means @ means.T


class GaussianMeanKernel(CorrelationKernel):
    """
    N(mu, Id) against N(0, Id): <Dbar_u, Dbar_v> = exp(<mu_u, mu_v>) and the degree-d
    projection keeps the head sum_{t<=d} <mu_u, mu_v>^t / t!
    """

    @staticmethod
    def mean_inner(u: Alternate, v: Alternate) -> float:
        if isinstance(u, NullAlternate) or isinstance(v, NullAlternate):
            return 0.0
        return u.mean_inner(v)

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if not isinstance(alternate, GaussianMeanShift):
            raise UnsupportedBackendError(f"{type(alternate).__name__} is not a Gaussian mean shift")
        if isinstance(null, GaussianNull) and alternate.dim != null.dim:
            raise DimensionMismatchError(f"alternate dimension {alternate.dim} vs null {null.dim}")

    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        check_degree(d)
        return float(exp_head(self.mean_inner(u, v), d))

    def gram(self, alternates: Sequence[Alternate], d) -> np.ndarray:
        check_degree(d)
        return exp_head(mean_inner_matrix(alternates), d)

    def pairwise(self, left, right, d) -> np.ndarray:
        check_degree(d)
        c = np.array([self.mean_inner(u, v) for u, v in zip(left, right)], dtype=float)
        return exp_head(c, d)


def covariance_correlation(A: np.ndarray, B: np.ndarray) -> float:
    """
    <Dbar_a, Dbar_b> = det(Id - (Id + A)^{-1} A B (Id + B)^{-1})^{-1/2} for
    D_a = N(0, (Id + A)^{-1}); raises PreconditionError naming the failing matrix
    """
    n = A.shape[0]
    if B.shape != A.shape:
        raise DimensionMismatchError(f"perturbations of shape {A.shape} and {B.shape}")
    eye = np.eye(n)
    for name, matrix, strict in (("Id+A", eye + A, True), ("Id+B", eye + B, False),
                                 ("Id+A+B", eye + A + B, True)):
        smallest = np.linalg.eigvalsh((matrix + matrix.T) / 2).min()
        if smallest < 0 or (strict and smallest <= 0):
            raise PreconditionError(f"{name} is not positive {'definite' if strict else 'semidefinite'}"
                                    f" (smallest eigenvalue {smallest:.3g})", subject=name)
    inner = eye - np.linalg.solve(eye + A, A) @ B @ np.linalg.inv(eye + B)
    sign, logdet = np.linalg.slogdet(inner)
    if sign <= 0:
        raise PreconditionError("determinant is not positive", subject="Id+A+B")
    return float(math.exp(-0.5 * logdet))


def covariance_correlation_alternative(A: np.ndarray, B: np.ndarray) -> float:
    """sqrt(det(Id+A) det(Id+B) / det(Id+A+B)), algebraically equal to covariance_correlation."""
    eye = np.eye(A.shape[0])
    logdets = [np.linalg.slogdet(M)[1] for M in (eye + A, eye + B, eye + A + B)]
    return float(math.exp(0.5 * (logdets[0] + logdets[1] - logdets[2])))


class CovarianceKernel(CorrelationKernel):
    """Precision-perturbation alternates; only the full inner product is available in closed form."""

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if not isinstance(alternate, GaussianCovarianceAlternate):
            raise UnsupportedBackendError(f"{type(alternate).__name__} is not a covariance alternate")
        if isinstance(null, GaussianNull) and alternate.dim != null.dim:
            raise DimensionMismatchError(f"alternate dimension {alternate.dim} vs null {null.dim}")

    def full(self, u: Alternate, v: Alternate) -> float:
        if isinstance(u, NullAlternate) or isinstance(v, NullAlternate):
            return 1.0
        return covariance_correlation(u.perturbation, v.perturbation)

    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        check_degree(d)
        if not is_unbounded(d):
            raise UnsupportedBackendError("the covariance backend has no closed-form degree truncation")
        return self.full(u, v)


class PairLaw:
    """
    Exact law of a scalar pair statistic s(u, v) (an overlap, an intersection size, ...)
    together with closed-form maps s -> <Dbar_u^{<=d}, Dbar_v^{<=d}>. Lets exact computations
    run over families too large to enumerate.
    """

    def __init__(self, weights, stats, full_fn: Callable[[np.ndarray], np.ndarray],
                 low_fn: Optional[Callable[[np.ndarray, int], np.ndarray]] = None, name: str = "stat"):
        weights = np.asarray(weights, dtype=float)
        stats = np.asarray(stats, dtype=float)
        keep = weights > 0
        self.weights = weights[keep] / weights[keep].sum()
        self.stats = stats[keep]
        self.full_fn = full_fn
        self.low_fn = low_fn
        self.name = name

    def correlation(self, d, stats: Optional[np.ndarray] = None) -> np.ndarray:
        check_degree(d)
        stats = self.stats if stats is None else stats
        if is_unbounded(d):
            return np.asarray(self.full_fn(stats), dtype=float)
        if self.low_fn is None:
            raise UnsupportedBackendError(f"pair law on {self.name} has no degree truncation")
        return np.asarray(self.low_fn(stats, d), dtype=float)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.stats[rng.choice(self.stats.size, size=size, p=self.weights)]

    def expectation(self, values: np.ndarray) -> float:
        return math.fsum((self.weights * values).tolist())


def default_kernel(null) -> CorrelationKernel:
    if isinstance(null, ProductNull):
        return FiniteKernel(null)
    if isinstance(null, GaussianNull):
        return GaussianMeanKernel()
    raise UnsupportedBackendError(f"no default kernel for {type(null).__name__}")


class TestingProblem:
    """
    A null D_0, a prior over alternates and the kernel computing their correlations.
    """
    __test__ = False

    def __init__(self, null, prior, kernel: Optional[CorrelationKernel] = None,
                 pair_law: Optional[PairLaw] = None, problem_id: str = "",
                 params: Optional[Dict[str, Any]] = None):
        self.null = null
        self.prior = prior
        self.kernel = kernel or default_kernel(null)
        self.pair_law = pair_law
        self.problem_id = problem_id
        self.params = dict(params or {})
        if isinstance(prior, ExplicitPrior):
            for alternate in prior.alternates:
                self.kernel.validate(alternate, null)

    @property
    def explicit(self) -> bool:
        return isinstance(self.prior, ExplicitPrior)

    @property
    def exact_available(self) -> bool:
        return self.explicit or self.pair_law is not None

    def with_prior(self, prior, problem_id: Optional[str] = None, kernel=None) -> "TestingProblem":
        return TestingProblem(self.null, prior, kernel or self.kernel, None,
                              problem_id or self.problem_id, self.params)

    def __repr__(self):
        return f"TestingProblem({self.problem_id or self.null!r})"


def trivial_problem(null) -> TestingProblem:
    """The degenerate problem whose only alternate is the null itself."""
    return TestingProblem(null, ExplicitPrior([NULL]), problem_id="null-only")


def _validate_pair(u: Alternate, v: Alternate, problem: TestingProblem) -> None:
    problem.kernel.validate(u, problem.null)
    problem.kernel.validate(v, problem.null)


def inner_product(u: Alternate, v: Alternate, problem: TestingProblem) -> float:
    _validate_pair(u, v, problem)
    return problem.kernel.full(u, v)


def low_degree_correlation(u: Alternate, v: Alternate, d, problem: TestingProblem) -> float:
    """<Dbar_u^{<=d}, Dbar_v^{<=d}> under the problem's null."""
    _validate_pair(u, v, problem)
    return problem.kernel.low_degree(u, v, d)
