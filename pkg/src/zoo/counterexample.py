"""
A single-coordinate problem over the alphabet [n] whose product-SDA greatly exceeds its SDA.

M = G + 3 sqrt(n) Id for a symmetric Gaussian G is positive definite with high probability;
factoring M = V V^T gives rows v_i whose centered versions w_i define the densities
Dbar_i(k) = (w_ik + 2 v_max) / (2 v_max), so <Dbar_i, Dbar_j> - 1 = <w_i, w_j> / (4 n v_max^2).
"""
import math
from typing import Dict, Sequence

import numpy as np
from scipy import linalg

from src.measures.correlation import correlation_atoms
from src.measures.distributions import DenseAlternate, ExplicitPrior, ProductNull
from src.measures.kernels import FiniteKernel, TestingProblem
from src.sda.dimension import TailProfile, product_sda, sda
from src.utils.data_utils import generate_problem_id
from src.utils.errors import PreconditionError, RejectionBudgetError
from src.utils.logger import Logger
from src.utils.seeding import derive_rng
from src.zoo.instance import ZooInstance

logger = Logger().get_logger()

MAX_ALPHABET = 4096
MAX_REDRAWS = 10


def _factor(n: int, seed: int) -> np.ndarray:
    """Rows v_i of V with V V^T = M, re-drawing G until M is positive semidefinite."""
    for attempt in range(MAX_REDRAWS):
        rng = derive_rng(seed, "gaussian_matrix", attempt)
        A = rng.standard_normal((n, n))
        M = (A + A.T) / math.sqrt(2.0) + 3.0 * math.sqrt(n) * np.eye(n)
        eigenvalues, Q = linalg.eigh(M)
        if eigenvalues.min() >= 0:
            return Q * np.sqrt(eigenvalues)
        logger.warning(f"M is not PSD on draw {attempt} (smallest eigenvalue {eigenvalues.min():.3g})")
    raise RejectionBudgetError(f"no PSD draw of M in {MAX_REDRAWS} attempts", {"attempts": MAX_REDRAWS})


def make_sda_counterexample(n: int, seed: int = 0) -> ZooInstance:
    if not 2 <= n <= MAX_ALPHABET:
        raise PreconditionError(f"alphabet size n={n} must lie in [2, {MAX_ALPHABET}]", subject="n")
    V = _factor(n, seed)
    W = V - V.mean(axis=1, keepdims=True)
    v_max = float(np.max(np.abs(V)))
    tables = (W + 2.0 * v_max) / (2.0 * v_max) / n
    null = ProductNull(np.arange(n, dtype=float), np.full((1, n), 1.0 / n))
    alternates = [DenseAlternate(row, label=i) for i, row in enumerate(tables)]
    params = {"family": "sda_counterexample", "n": n, "seed": seed}
    problem_id = generate_problem_id("sda_counterexample", params)
    problem = TestingProblem(null, ExplicitPrior(alternates), FiniteKernel(null), problem_id=problem_id,
                             params=params)
    return ZooInstance(problem_id, problem, params, extras={"centered_rows": W, "v_max": v_max})


def formula_correlations(instance: ZooInstance) -> np.ndarray:
    """<Dbar_i, Dbar_j> from the centered rows alone."""
    W, n = instance.extras["centered_rows"], instance.params["n"]
    return 1.0 + (W @ W.T) / (4.0 * n * instance.extras["v_max"] ** 2)


def counterexample_gap(instance: ZooInstance, levels: Sequence[int] = (2, 3, 4, 8, 16)) -> Dict[str, float]:
    """
    For each level q0 the oracle parameter m puts 1/m just below the top-1/q0^2 tail mean of the
    correlation atoms, so that sda < q0; product_sda is computed at the same m and the level
    with the largest product_sda / sda ratio is reported.
    """
    atoms = correlation_atoms(instance.problem)
    profile = TailProfile(atoms)
    candidates = []
    for level in levels:
        tail = profile.conditional_mean(1.0 / level ** 2)
        if tail <= 0:
            raise PreconditionError("the top correlation tail is not positive", subject="levels")
        m = (1.0 + 1e-6) / tail
        plain = sda(atoms, m)
        product = product_sda(instance.problem, m)
        ratio = product.q / plain.q if plain.q else math.inf
        candidates.append({"level": level, "m": m, "tail_mean": tail, "sda": plain.q,
                           "product_sda": product.q, "ratio": ratio})
        logger.debug(f"{instance.problem_id}: level {level} sda={plain.q:g} product_sda={product.q:g} at m={m:.6g}")
    best = max(candidates, key=lambda c: c["ratio"])
    logger.info(f"{instance.problem_id}: best gap sda={best['sda']:g} product_sda={best['product_sda']:g} "
                f"at m={best['m']:.6g}")
    return {**best, "candidates": candidates}
