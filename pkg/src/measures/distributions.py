"""
Null distributions, alternates and priors.

Finite problems live on Omega^N with a product null D_0 = prod_j p_j. Alternates are either
dense probability tables of shape (|Omega|,) * N or product-form per-coordinate vectors.
Gaussian problems use the standard normal null with mean-shift or precision-perturbation
alternates, whose correlations are available in closed form.
"""
import math
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from src.utils.errors import (DimensionMismatchError, FixedCoordinateError, PreconditionError,
                              PriorModeError, StateCapExceededError)
from src.utils.logger import Logger
from src.utils.numerics import LIMITS, configure_limits  # noqa: F401

logger = Logger().get_logger()

INF_DEGREE = math.inf
# probabilities below this switch likelihood ratios to log space
LOG_SPACE_THRESHOLD = 1e-300


def check_state_cap(states: int, cap: Optional[int] = None) -> None:
    cap = LIMITS["state_cap"] if cap is None else cap
    if states > cap:
        raise StateCapExceededError(states, cap)


# ---------------------------------------------------------------- nulls

class ProductNull:
    """
    D_0^{(1)} x ... x D_0^{(N)} over a common alphabet (the `values` of one coordinate)
    """

    def __init__(self, values: Sequence[float], probs):
        self.values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if probs.ndim == 1:
            probs = probs[None, :]
        if probs.shape[1] != self.values.size:
            raise DimensionMismatchError(
                f"probability vectors have {probs.shape[1]} entries for an alphabet of {self.values.size}")
        if self.values.size < 2:
            raise PreconditionError("alphabet must have at least two symbols", subject="values")
        if np.unique(self.values).size != self.values.size:
            raise PreconditionError("alphabet symbols must be distinct", subject="values")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-12):
            raise PreconditionError("coordinate probabilities must sum to 1", subject="probs")
        if np.any(probs < 0):
            raise PreconditionError("coordinate probabilities must be nonnegative", subject="probs")
        zero = np.argwhere(probs <= 0)
        if zero.size:
            j, a = zero[0]
            raise FixedCoordinateError(
                f"coordinate {j} gives symbol {self.values[a]} probability 0", subject=f"coordinate {j}")
        self.probs = probs
        self._basis = None

    @classmethod
    def uniform_signs(cls, n_coords: int) -> "ProductNull":
        return cls([-1.0, 1.0], np.full((n_coords, 2), 0.5))

    @classmethod
    def bernoulli(cls, n_coords: int, q: float) -> "ProductNull":
        """Ber(q) on {0, 1} in every coordinate."""
        return cls([0.0, 1.0], np.tile([1.0 - q, q], (n_coords, 1)))

    @classmethod
    def repeated(cls, values: Sequence[float], marginal: Sequence[float], n_coords: int) -> "ProductNull":
        return cls(values, np.tile(np.asarray(marginal, dtype=float), (n_coords, 1)))

    def with_coords(self, n_coords: int) -> "ProductNull":
        if not self.homogeneous:
            raise PreconditionError("only homogeneous nulls can be resized", subject="null")
        return ProductNull.repeated(self.values, self.probs[0], n_coords)

    @property
    def n_coords(self) -> int:
        return self.probs.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.values.size

    @property
    def shape(self):
        return (self.alphabet_size,) * self.n_coords

    @property
    def state_count(self) -> int:
        return self.alphabet_size ** self.n_coords

    @property
    def homogeneous(self) -> bool:
        return bool(np.allclose(self.probs, self.probs[0], atol=0, rtol=0))

    def table(self) -> np.ndarray:
        check_state_cap(self.state_count)
        return _outer_table(self.probs)

    def character_basis(self) -> List[np.ndarray]:
        if self._basis is None:
            self._basis = [_coordinate_characters(self.values, self.probs[j])
                           for j in range(self.n_coords)]
        return self._basis

    def __repr__(self):
        return f"ProductNull(N={self.n_coords}, alphabet={self.values.tolist()})"


class GaussianNull:
    """N(0, Id_n)."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __repr__(self):
        return f"GaussianNull(n={self.dim})"


def _outer_table(probs: np.ndarray) -> np.ndarray:
    table = np.ones(())
    for row in probs:
        table = np.multiply.outer(table, row)
    return table


def _coordinate_characters(values: np.ndarray, marginal: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis of functions of one coordinate under `marginal`, by weighted
    Gram-Schmidt on the monomials 1, x, x^2, ... with one re-orthogonalization pass.
    Row 0 is the constant; row a is the character of polynomial degree a, with positive
    leading coefficient, so chi(x) >= 0 at the largest symbol.
    """
    size = values.size
    scale = max(np.max(np.abs(values)), 1.0)
    monomials = np.vstack([(values / scale) ** a for a in range(size)])
    basis = np.zeros((size, size))
    for a in range(size):
        vec = monomials[a].copy()
        for _ in range(2):
            for b in range(a):
                vec -= np.sum(marginal * vec * basis[b]) * basis[b]
        norm = math.sqrt(np.sum(marginal * vec * vec))
        if norm < 1e-12:
            raise FixedCoordinateError("character basis is degenerate", subject="marginal")
        basis[a] = vec / norm
    return basis


def character_basis(null: ProductNull) -> List[np.ndarray]:
    """
    Per-coordinate orthonormal characters of the null: entry j is a (|Omega|, |Omega|) matrix
    whose row a holds chi_a evaluated at every symbol (row 0 is the constant 1)
    """
    return null.character_basis()


# ---------------------------------------------------------------- alternates

class Alternate:
    label: Any = None

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


class NullAlternate(Alternate):
    """The null distribution itself, usable with every backend."""
    label = "null"

    def dense(self, null: "ProductNull") -> np.ndarray:
        return null.table()


NULL = NullAlternate()


class DenseAlternate(Alternate):
    def __init__(self, table, label: Any = None):
        table = np.asarray(table, dtype=float)
        if np.any(table < 0):
            raise PreconditionError("alternate probabilities must be nonnegative", subject="table")
        total = table.sum()
        if abs(total - 1.0) > 1e-10:
            raise PreconditionError(f"alternate table sums to {total}", subject="table")
        self.table = table
        self.label = label

    def dense(self, null: ProductNull) -> np.ndarray:
        if self.table.shape != null.shape:
            raise DimensionMismatchError(f"table shape {self.table.shape} does not match null {null.shape}")
        return self.table


class ProductAlternate(Alternate):
    """Product-form alternate: probs[j] is the law of coordinate j."""

    def __init__(self, probs, label: Any = None):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2:
            raise DimensionMismatchError("product alternate needs an (N, |Omega|) array")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-10):
            raise PreconditionError("per-coordinate probabilities must be a distribution", subject="probs")
        self.probs = probs
        self.label = label

    def dense(self, null: ProductNull) -> np.ndarray:
        if self.probs.shape != null.probs.shape:
            raise DimensionMismatchError(f"product shape {self.probs.shape} does not match null {null.probs.shape}")
        check_state_cap(null.state_count)
        return _outer_table(self.probs)

    def overlaps(self, other: "ProductAlternate", null: ProductNull) -> np.ndarray:
        """Per-coordinate <Dbar_u^(j), Dbar_v^(j)> - 1."""
        return np.sum(self.probs * other.probs / null.probs, axis=1) - 1.0


class GaussianMeanShift(Alternate):
    """N(mu, Id)."""

    def __init__(self, mean, label: Any = None):
        mean = np.asarray(mean, dtype=float)
        if not np.all(np.isfinite(mean)):
            raise PreconditionError("mean-shift entries must be finite", subject="mean")
        self._mean = mean
        self.label = label

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def dim(self) -> int:
        return self.mean.size

    def mean_inner(self, other: Alternate) -> float:
        if isinstance(other, NullAlternate):
            return 0.0
        if self.dim != other.dim:
            raise DimensionMismatchError(f"mean dimensions {self.dim} and {other.dim} differ")
        return float(np.dot(self.mean, other.mean))


class TensorSpikeAlternate(GaussianMeanShift):
    """
    N(lam * u^{(x) r}, Id) with u = signs / sqrt(n); the mean tensor is only built on request.
    """

    def __init__(self, signs, lam: float, r: int, label: Any = None):
        self.signs = np.asarray(signs, dtype=float)
        self.lam = float(lam)
        self.r = int(r)
        self.label = label if label is not None else tuple(int(s) for s in self.signs)
        self._mean = None

    @property
    def n(self) -> int:
        return self.signs.size

    @property
    def dim(self) -> int:
        return self.n ** self.r

    @property
    def mean(self) -> np.ndarray:
        if self._mean is None:
            check_state_cap(self.dim)
            u = self.signs / math.sqrt(self.n)
            tensor = np.ones(())
            for _ in range(self.r):
                tensor = np.multiply.outer(tensor, u)
            self._mean = self.lam * tensor.ravel()
        return self._mean

    def mean_inner(self, other: Alternate) -> float:
        if isinstance(other, TensorSpikeAlternate) and other.r == self.r and other.n == self.n:
            overlap = float(np.dot(self.signs, other.signs)) / self.n
            return self.lam * other.lam * overlap ** self.r
        return super().mean_inner(other)


class GaussianCovarianceAlternate(Alternate):
    """N(0, (Id + A)^{-1}) for a symmetric perturbation A with Id + A positive definite."""

    def __init__(self, perturbation, label: Any = None):
        A = np.asarray(perturbation, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("covariance perturbation must be square")
        if not np.allclose(A, A.T, atol=1e-12):
            raise PreconditionError("covariance perturbation must be symmetric", subject="A")
        if np.linalg.eigvalsh(np.eye(A.shape[0]) + A).min() <= 0:
            raise PreconditionError("Id + A is not positive definite", subject="Id+A")
        self.perturbation = A
        self.label = label

    @property
    def dim(self) -> int:
        return self.perturbation.shape[0]


def fourier_coefficients(alternate: Alternate, null: ProductNull) -> np.ndarray:
    """
    Character coefficients <Dbar_u, chi_alpha> = sum_x D_u(x) chi_alpha(x) as a tensor of
    shape (|Omega|,) * N indexed by the per-coordinate character index alpha_j
    """
    if isinstance(alternate, NullAlternate):
        coefficients = np.zeros(null.shape)
        coefficients[(0,) * null.n_coords] = 1.0
        return coefficients
    check_state_cap(null.state_count)
    table = alternate.dense(null)
    return transform_table(table, null)


def transform_table(table: np.ndarray, null: ProductNull) -> np.ndarray:
    """
    Per-axis character transform of a probability table. Tables over m independent
    copies of the null (N * m axes) use the basis of coordinate axis mod N.
    """
    basis = null.character_basis()
    coefficients = table
    for axis in range(table.ndim):
        B = basis[axis % null.n_coords]
        coefficients = np.moveaxis(np.tensordot(B, coefficients, axes=([1], [axis])), 0, axis)
    return coefficients


def coordinate_degrees(shape) -> np.ndarray:
    """Number of non-constant coordinates of each character index."""
    grids = np.indices(shape)
    return np.sum(grids != 0, axis=0)


def log_likelihood_ratio(alternate: Alternate, null: ProductNull) -> np.ndarray:
    """log Dbar_u on every state (-inf where D_u vanishes)."""
    if isinstance(alternate, NullAlternate):
        return np.zeros(null.shape)
    if isinstance(alternate, ProductAlternate):
        with np.errstate(divide="ignore"):
            per_coordinate = np.log(alternate.probs) - np.log(null.probs)
        check_state_cap(null.state_count)
        total = np.zeros(())
        for row in per_coordinate:
            total = np.add.outer(total, row)
        return total
    with np.errstate(divide="ignore"):
        log_null = np.zeros(())
        for row in np.log(null.probs):
            log_null = np.add.outer(log_null, row)
        return np.log(alternate.dense(null)) - log_null


# ---------------------------------------------------------------- priors

class ExplicitPrior:
    """A finite weighted list of alternates."""

    def __init__(self, alternates: Sequence[Alternate], weights=None):
        self.alternates = list(alternates)
        if not self.alternates:
            raise PreconditionError("a prior needs at least one alternate", subject="alternates")
        if weights is None:
            weights = np.full(len(self.alternates), 1.0 / len(self.alternates))
        weights = np.asarray(weights, dtype=float)
        if weights.size != len(self.alternates):
            raise DimensionMismatchError("one weight per alternate is required")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise PreconditionError("prior weights must be nonnegative and sum to 1", subject="weights")
        self.weights = weights

    @property
    def labels(self):
        return [a.label for a in self.alternates]

    def __len__(self):
        return len(self.alternates)

    def sample(self, rng: np.random.Generator, size: int) -> List[Alternate]:
        idx = rng.choice(len(self.alternates), size=size, p=self.weights)
        return [self.alternates[i] for i in idx]


class SampledPrior:
    """Seeded sampler of alternates; exact enumeration is not available."""

    def __init__(self, sampler: Callable[[np.random.Generator], Alternate], seed: int = 0,
                 description: str = ""):
        self.sampler = sampler
        self.seed = seed
        self.description = description

    def sample(self, rng: np.random.Generator, size: int) -> List[Alternate]:
        return [self.sampler(rng) for _ in range(size)]

    @property
    def alternates(self):
        raise PriorModeError("a sampled prior has no explicit alternate list")


def require_explicit(prior) -> ExplicitPrior:
    if not isinstance(prior, ExplicitPrior):
        raise PriorModeError("this computation needs an explicit-list prior")
    return prior
