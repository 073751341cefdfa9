"""
Single-coordinate Markov noise operators and their (d, eps) certification.

An operator is a row-stochastic matrix P over the alphabet, stationary for the null marginal
pi. Applied to a distribution it is the push-forward D -> D P; on relative densities this
acts as the pi-adjoint P*(x, y) = pi(y) P(y, x) / pi(x).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.measures.distributions import (Alternate, DenseAlternate, NullAlternate, ProductAlternate, ProductNull,
                                        coordinate_degrees, fourier_coefficients, require_explicit)
from src.utils.errors import (DefectiveOperatorError, NonStationaryOperatorError, PreconditionError,
                              UnsupportedBackendError)
from src.utils.logger import Logger
from src.utils.numerics import LIMITS
from src.utils.report_utils import CheckReport, report_errors

logger = Logger().get_logger()

MAX_ALPHABET = 64
# eigenvector matrices worse conditioned than this are treated as defective
DEFECTIVE_CONDITION = 1e10


class MarkovOperator:
    """
    Row-stochastic single-coordinate kernel with stationary law `marginal`
    """

    def __init__(self, matrix, marginal, name: str = "custom"):
        P = np.asarray(matrix, dtype=float)
        pi = np.asarray(marginal, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != pi.size:
            raise PreconditionError(f"operator of shape {P.shape} does not act on an alphabet of {pi.size}",
                                    subject="matrix")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise PreconditionError("operator rows must be probability vectors", subject="matrix")
        if np.max(np.abs(pi @ P - pi)) > 1e-10:
            raise NonStationaryOperatorError("the null marginal is not stationary for this operator",
                                             subject="matrix")
        self.matrix = P
        self.marginal = pi
        self.name = name
        self._spectrum = None

    @classmethod
    def identity(cls, marginal) -> "MarkovOperator":
        marginal = np.asarray(marginal, dtype=float)
        return cls(np.eye(marginal.size), marginal, "identity")

    @classmethod
    def resampler(cls, marginal) -> "MarkovOperator":
        """Replace the coordinate by a fresh draw from the null marginal (rho = 0)."""
        marginal = np.asarray(marginal, dtype=float)
        return cls(np.tile(marginal, (marginal.size, 1)), marginal, "resample")

    @classmethod
    def noise_operator(cls, rho: float, marginal) -> "MarkovOperator":
        """T_rho = rho * Id + (1 - rho) * resample."""
        if not 0.0 <= rho <= 1.0:
            raise PreconditionError(f"rho={rho} must lie in [0, 1]", subject="rho")
        marginal = np.asarray(marginal, dtype=float)
        matrix = rho * np.eye(marginal.size) + (1.0 - rho) * np.tile(marginal, (marginal.size, 1))
        return cls(matrix, marginal, f"T_{rho:g}")

    @property
    def alphabet_size(self) -> int:
        return self.marginal.size

    def adjoint(self) -> np.ndarray:
        pi = self.marginal
        return (self.matrix.T * pi[None, :]) / pi[:, None]

    def check_null(self, null: ProductNull) -> None:
        """The operator must be stationary for every coordinate marginal of the null."""
        if null.alphabet_size != self.alphabet_size:
            raise PreconditionError("operator and null alphabets differ", subject="matrix")
        for j in range(null.n_coords):
            if np.max(np.abs(null.probs[j] @ self.matrix - null.probs[j])) > 1e-10:
                raise NonStationaryOperatorError(f"coordinate {j} marginal is not stationary",
                                                 subject=f"coordinate {j}")

    def push(self, probs: np.ndarray) -> np.ndarray:
        """Push a (..., |Omega|) array of coordinate laws through the kernel."""
        return probs @ self.matrix

    def push_table(self, table: np.ndarray, axes) -> np.ndarray:
        for axis in axes:
            table = np.moveaxis(np.tensordot(table, self.matrix, axes=([axis], [0])), -1, axis)
        return table

    def mean_zero_matrix(self, basis: np.ndarray) -> np.ndarray:
        """<chi_a, P chi_b>_pi over the non-constant characters."""
        chars = basis[1:]
        return (chars * self.marginal[None, :]) @ self.matrix @ chars.T

    def spectrum(self, basis: Optional[np.ndarray] = None) -> np.ndarray:
        """Eigenvalues of the operator on mean-zero functions of one coordinate."""
        if self._spectrum is None:
            if basis is None:
                basis = ProductNull(np.arange(self.alphabet_size, dtype=float), self.marginal).character_basis()[0]
            M = self.mean_zero_matrix(basis)
            eigenvalues, vectors = np.linalg.eig(M)
            if M.size and np.linalg.cond(vectors) > DEFECTIVE_CONDITION:
                raise DefectiveOperatorError(f"operator {self.name} is not diagonalizable within tolerance")
            self._spectrum = eigenvalues
        return self._spectrum

    @property
    def rho(self) -> float:
        """Largest |lambda| on mean-zero functions: the operator is a (1, rho)-operator."""
        spectrum = self.spectrum()
        return float(np.max(np.abs(spectrum))) if spectrum.size else 0.0

    @property
    def binary_eigenvalue(self) -> float:
        """The single non-trivial eigenvalue of a binary-alphabet operator (signed)."""
        if self.alphabet_size != 2:
            raise PreconditionError("only binary operators have a single non-trivial eigenvalue",
                                    subject="matrix")
        return float(np.real(self.spectrum()[0]))

    def __repr__(self):
        return f"MarkovOperator({self.name})"


@dataclass
class Certification:
    certified: bool
    d: int
    eps: float
    spectrum: np.ndarray
    attenuation: float
    borderline: bool = False


def certify_d_eps(operator: MarkovOperator, marginal, d: int, eps: float,
                  tol: Optional[float] = None) -> Certification:
    """
    Certify that operator^{(x)N} is a (d, eps)-operator: characters of coordinate degree >= d
    are eigenfunctions with |lambda| <= max|lambda_1|^d. Values within `tol` above eps are
    reported as borderline and uncertified.
    """
    tol = LIMITS["certify_tol"] if tol is None else tol
    marginal = np.asarray(marginal, dtype=float)
    if marginal.size > MAX_ALPHABET:
        raise PreconditionError(f"alphabet of {marginal.size} exceeds {MAX_ALPHABET}", subject="marginal")
    if np.max(np.abs(marginal - operator.marginal)) > 1e-10:
        raise NonStationaryOperatorError("certification marginal differs from the operator's stationary law",
                                         subject="marginal")
    if d < 0:
        raise PreconditionError(f"d={d} must be >= 0", subject="d")
    spectrum = operator.spectrum()
    attenuation = 1.0 if d == 0 else operator.rho ** d
    excess = attenuation - eps
    certified = excess <= 1e-12
    borderline = 1e-12 < excess <= tol
    if borderline:
        logger.warning(f"{operator!r} is borderline for (d={d}, eps={eps}): attenuation {attenuation}")
    return Certification(certified, d, eps, spectrum, attenuation, borderline)


def noise_operator(rho: float, marginal) -> MarkovOperator:
    return MarkovOperator.noise_operator(rho, marginal)


def resampler(marginal) -> MarkovOperator:
    return MarkovOperator.resampler(marginal)


def apply_operator(alternate: Alternate, operator: MarkovOperator, null: ProductNull,
                   keep: Optional[np.ndarray] = None) -> Alternate:
    """
    Push an alternate through the operator on every coordinate whose `keep` flag is False
    (all coordinates when keep is None). Alternates exposing `noised(operator, null, keep)`
    handle themselves and may return None to fall back to the dense table.
    """
    noised_axes = np.arange(null.n_coords) if keep is None else np.flatnonzero(~np.asarray(keep, dtype=bool))
    if isinstance(alternate, NullAlternate) or noised_axes.size == 0:
        return alternate
    hook = getattr(alternate, "noised", None)
    if hook is not None:
        result = hook(operator, null, keep)
        if result is not None:
            return result
    if isinstance(alternate, ProductAlternate):
        probs = alternate.probs.copy()
        probs[noised_axes] = operator.push(probs[noised_axes])
        return ProductAlternate(probs, alternate.label)
    if isinstance(alternate, DenseAlternate) or hasattr(alternate, "dense"):
        table = operator.push_table(alternate.dense(null), noised_axes.tolist())
        return DenseAlternate(table / table.sum(), alternate.label)
    raise UnsupportedBackendError(f"{type(alternate).__name__} cannot be pushed through a Markov operator")


def scalar_eigenvalue(operator: MarkovOperator, null: ProductNull) -> float:
    """lambda with P chi = lambda chi for every mean-zero character of one coordinate."""
    M = operator.mean_zero_matrix(null.character_basis()[0])
    lam = float(M[0, 0]) if M.size else 0.0
    if np.max(np.abs(M - lam * np.eye(M.shape[0])), initial=0.0) > 1e-12:
        raise UnsupportedBackendError(f"{operator!r} does not act as a scalar on mean-zero characters")
    return lam


@report_errors("attenuation")
def attenuation_check(problem, operator: MarkovOperator, tol: float = 1e-12) -> CheckReport:
    """
    Every Fourier coefficient of a noised alternate equals lambda^{|alpha|} times the
    original, |alpha| the number of non-constant coordinates of the character.
    """
    null = problem.null
    if not isinstance(null, ProductNull):
        raise UnsupportedBackendError("attenuation is checked on finite product nulls")
    operator.check_null(null)
    lam = scalar_eigenvalue(operator, null)
    factors = lam ** coordinate_degrees(null.shape)
    gap = 0.0
    for alternate in require_explicit(problem.prior).alternates:
        original = fourier_coefficients(alternate, null)
        noised = fourier_coefficients(apply_operator(alternate, operator, null), null)
        gap = max(gap, float(np.max(np.abs(noised - factors * original))))
    return CheckReport("attenuation", passed=gap <= tol, margin=tol - gap,
                       values={"operator": operator.name, "eigenvalue": lam, "max_gap": gap})
