"""
Independent projection oracle: tabulates the m-sample likelihood ratio E_u Dbar_u^{(x)m} on
(Omega^N)^m, expands it in the tensor character basis and keeps the samplewise-degree (d,k)
part. Only feasible for tiny instances; used to cross-check the multi-sample identity.
"""
import math
from typing import Tuple

import numpy as np

from src.ldlr.norms import SamplewiseDegree
from src.measures.distributions import ProductNull, check_state_cap, require_explicit, transform_table
from src.measures.kernels import TestingProblem
from src.utils.errors import UnsupportedBackendError
from src.utils.numerics import is_unbounded


def m_sample_table(problem: TestingProblem, m: int) -> np.ndarray:
    """E_u D_u^{(x)m} as a probability table with N * m axes (sample-major)."""
    null = problem.null
    if not isinstance(null, ProductNull):
        raise UnsupportedBackendError("brute-force projection needs a finite product null")
    prior = require_explicit(problem.prior)
    check_state_cap(null.alphabet_size ** (null.n_coords * m))
    joint = np.zeros((null.alphabet_size,) * (null.n_coords * m))
    for weight, alternate in zip(prior.weights, prior.alternates):
        single = alternate.dense(null)
        power = np.ones(())
        for _ in range(m):
            power = np.multiply.outer(power, single)
        joint += weight * power
    return joint


def samplewise_mask(null: ProductNull, m: int, degree: SamplewiseDegree) -> np.ndarray:
    """Boolean mask over tensor character indices lying in the (d,k) space, constant excluded."""
    shape = (null.alphabet_size,) * (null.n_coords * m)
    nonconstant = np.indices(shape) != 0
    per_sample = nonconstant.reshape((m, null.n_coords) + shape).sum(axis=1)
    active = (per_sample > 0).sum(axis=0)
    mask = (active >= 1) & (active <= degree.k)
    if not is_unbounded(degree.d):
        mask &= np.all(per_sample <= degree.d, axis=0)
    return mask


def ldlr_projection(problem: TestingProblem, m: int, degree: SamplewiseDegree) -> Tuple[np.ndarray, np.ndarray]:
    """
    Character coefficients of Pi_{(d,k)}(E_u Dbar_u^{(x)m} - 1) and the mask of the space.
    """
    degree.check_samples(m)
    coefficients = transform_table(m_sample_table(problem, m), problem.null)
    mask = samplewise_mask(problem.null, m, degree)
    return np.where(mask, coefficients, 0.0), mask


def synthesize_table(coefficients: np.ndarray, null: ProductNull) -> np.ndarray:
    """Values of sum_alpha c_alpha chi_alpha on every state (inverse of the character transform)."""
    basis = null.character_basis()
    values = coefficients
    for axis in range(coefficients.ndim):
        B = basis[axis % null.n_coords]
        values = np.moveaxis(np.tensordot(B.T, values, axes=([1], [axis])), 0, axis)
    return values


def brute_force_ldlr(problem: TestingProblem, m: int, degree: SamplewiseDegree) -> float:
    """
    ||Pi_{(d,k)}(E_u Dbar_u^{(x)m} - 1)||^2 by explicit projection.
    """
    if degree.k == 0:
        return 0.0
    projected, _ = ldlr_projection(problem, m, degree)
    return math.fsum((projected ** 2).ravel().tolist())
