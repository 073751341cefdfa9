"""
Tensor PCA: N(0, Id_{n^r}) against N(lam * u^{(x) r}, Id) with u uniform on {+-1/sqrt(n)}^n.

<Dbar_u, Dbar_v> = exp(lam^2 <u, v>^r); <u, v> = (n - 2j)/n where j ~ Bin(n, 1/2) counts the
sign disagreements of two independent draws.
"""
import itertools
import math

import numpy as np
from scipy import stats

from src.measures.distributions import ExplicitPrior, GaussianNull, SampledPrior, TensorSpikeAlternate
from src.measures.kernels import GaussianMeanKernel, PairLaw, TestingProblem
from src.utils.data_utils import generate_problem_id
from src.utils.errors import PreconditionError
from src.utils.numerics import exp_head
from src.zoo.instance import ZooInstance

EXACT_PRIOR_MAX_N = 14


def overlap_pair_law(n: int, r: int, lam: float) -> PairLaw:
    j = np.arange(n + 1)
    weights = stats.binom.pmf(j, n, 0.5)
    overlaps = (n - 2.0 * j) / n
    c = lam * lam
    return PairLaw(weights, overlaps,
                   full_fn=lambda o: np.exp(c * o ** r),
                   low_fn=lambda o, d: exp_head(c * o ** r, d),
                   name="overlap")


def make_tensor_pca(n: int, r: int, lam: float, prior: str = "exact", seed: int = 0) -> ZooInstance:
    if n < 1 or r < 1:
        raise PreconditionError(f"tensor PCA needs n, r >= 1 (got n={n}, r={r})", subject="n")
    if prior not in ("exact", "sampled"):
        raise PreconditionError(f"unknown prior mode {prior!r}", subject="prior")
    if prior == "exact" and n > EXACT_PRIOR_MAX_N:
        raise PreconditionError(f"an exact prior lists 2^{n} spikes; n must be <= {EXACT_PRIOR_MAX_N}",
                                subject="n")
    params = {"family": "tensor_pca", "n": n, "r": r, "lambda": lam, "prior": prior}
    problem_id = generate_problem_id("tensor_pca", params)
    null = GaussianNull(n ** r)
    if prior == "exact":
        alternates = [TensorSpikeAlternate(signs, lam, r)
                      for signs in itertools.product((-1.0, 1.0), repeat=n)]
        mixture = ExplicitPrior(alternates)
    else:
        mixture = SampledPrior(lambda rng: TensorSpikeAlternate(rng.choice((-1.0, 1.0), size=n), lam, r),
                               seed, f"uniform spikes on {{+-1/sqrt({n})}}^{n}")
    law = overlap_pair_law(n, r, lam)
    problem = TestingProblem(null, mixture, GaussianMeanKernel(), pair_law=law,
                             problem_id=problem_id, params=params)
    return ZooInstance(problem_id, problem, params, law.full_fn)


def k_sample_lr_bound(n: int, k: int, lam: float) -> float:
    """sqrt(2 pi / (1 - 2 k lam^2 / n)), valid when k lam^2 < n/2."""
    if k * lam * lam >= n / 2.0:
        raise PreconditionError("the k-sample bound needs k lam^2 < n/2", subject="lambda")
    return math.sqrt(2.0 * math.pi / (1.0 - 2.0 * k * lam * lam / n))


def degree_one_ldlr_bound(n: int, r: int, m: int, k: int, lam: float) -> float:
    """2 e^{r+1} m lam^2 k^{(r-2)/2} / n^{r/2}, valid when 2 e m lam^2 k^{(r-2)/2} <= n^{r/2}."""
    scale = m * lam * lam * k ** ((r - 2) / 2.0)
    if 2.0 * math.e * scale > n ** (r / 2.0):
        raise PreconditionError("the degree-1 LDLR bound needs 2 e m lam^2 k^{(r-2)/2} <= n^{r/2}",
                                subject="lambda")
    return 2.0 * math.e ** (r + 1) * scale / n ** (r / 2.0)


def hypothesis_boundary(n: int, r: int, m: int, k: int) -> float:
    """Largest lam satisfying both bound hypotheses (the k-sample one strictly in the limit)."""
    lam_sq = min(n / (2.0 * k), n ** (r / 2.0) / (2.0 * math.e * m * k ** ((r - 2) / 2.0)))
    return math.sqrt(lam_sq)
