"""
Sparse PCA with Wishart noise: N(0, Id_n) against N(0, Id + lam s s^T), where s = s'/sqrt(rho n)
for s' with i.i.d. entries 0 (prob 1 - rho) and +-1 (prob rho/2 each), and s = 0 whenever
||s'||^2 > 2 rho n.

<Dbar_u, Dbar_v> = (1 - lam^2 <s_u, s_v>^2)^{-1/2} = phi(lam^2 <s_u, s_v>^2 / 4) with
phi(x) = (1 - 4x)^{-1/2} = sum_l C(2l, l) x^l; the Hermite-degree-d part keeps l <= d/2.
"""
import itertools
import math
from typing import Sequence

import numpy as np
from scipy import special, stats

from src.measures.distributions import (NULL, Alternate, ExplicitPrior, GaussianCovarianceAlternate,
                                        GaussianNull, NullAlternate, SampledPrior)
from src.measures.kernels import CovarianceKernel, PairLaw, TestingProblem, check_degree
from src.utils.data_utils import generate_problem_id
from src.utils.errors import DimensionMismatchError, InfeasibleSizeError, PreconditionError, UnsupportedBackendError
from src.utils.logger import Logger
from src.utils.numerics import central_binomial_series_head, is_unbounded
from src.zoo.instance import ZooInstance

logger = Logger().get_logger()

EXACT_PAIR_LAW_MAX_N = 20
EXPLICIT_PRIOR_MAX_N = 6
HERMITE_MAX_TERMS = 2_000_000


class SpikedCovarianceAlternate(GaussianCovarianceAlternate):
    """N(0, Id + lam s s^T), stored as the precision perturbation -lam s s^T / (1 + lam ||s||^2)."""

    def __init__(self, spike, lam: float, label=None):
        self.spike = np.asarray(spike, dtype=float)
        self.lam = float(lam)
        scale = self.lam / (1.0 + self.lam * float(self.spike @ self.spike))
        super().__init__(-scale * np.outer(self.spike, self.spike), label)


def _series_argument(u: Alternate, v: Alternate) -> float:
    if isinstance(u, NullAlternate) or isinstance(v, NullAlternate):
        return 0.0
    if u.spike.size != v.spike.size:
        raise DimensionMismatchError(f"spikes of dimension {u.spike.size} and {v.spike.size}")
    return u.lam * v.lam * float(u.spike @ v.spike) ** 2 / 4.0


class SpikedCovarianceKernel(CovarianceKernel):
    """Rank-one covariance spikes, where the Hermite-degree truncation has a closed form."""

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if not isinstance(alternate, SpikedCovarianceAlternate):
            raise UnsupportedBackendError(f"{type(alternate).__name__} is not a spiked covariance")
        if isinstance(null, GaussianNull) and alternate.dim != null.dim:
            raise DimensionMismatchError(f"alternate dimension {alternate.dim} vs null {null.dim}")

    def full(self, u: Alternate, v: Alternate) -> float:
        x = _series_argument(u, v)
        if 4.0 * x >= 1.0:
            raise PreconditionError("lam_u lam_v <s_u, s_v>^2 >= 1: the correlation diverges", subject="lambda")
        return float(1.0 / math.sqrt(1.0 - 4.0 * x))

    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        check_degree(d)
        if is_unbounded(d):
            return self.full(u, v)
        return float(central_binomial_series_head(_series_argument(u, v), int(d) // 2))


def spike_pair_law(n: int, rho: float, lam: float) -> PairLaw:
    """
    Exact law of c = <s_u, s_v> from the multinomial counts of coordinates where only u is
    nonzero (a), only v (b), both with equal signs (p) and with opposite signs (o).
    """
    if n > EXACT_PAIR_LAW_MAX_N:
        raise InfeasibleSizeError(f"the exact spike pair law enumerates n <= {EXACT_PAIR_LAW_MAX_N}")
    r = np.arange(n + 1)
    a, b, p, o = (g.ravel() for g in np.meshgrid(r, r, r, r, indexing="ij"))
    z = n - a - b - p - o
    keep = z >= 0
    a, b, p, o, z = a[keep], b[keep], p[keep], o[keep], z[keep]
    cell = [rho * (1.0 - rho), rho * (1.0 - rho), rho * rho / 2.0, rho * rho / 2.0, (1.0 - rho) ** 2]
    log_pmf = special.gammaln(n + 1) - sum(special.gammaln(c + 1) for c in (a, b, p, o, z))
    with np.errstate(divide="ignore", invalid="ignore"):
        for count, lc in zip((a, b, p, o, z), np.log(cell)):
            log_pmf = log_pmf + np.where(count > 0, count * lc, 0.0)
    budget = 2.0 * rho * n
    untruncated = (a + p + o <= budget) & (b + p + o <= budget)
    c = np.where(untruncated, (p - o) / (rho * n), 0.0)
    weights = np.exp(log_pmf)
    c4 = lam * lam / 4.0
    return PairLaw(weights, c,
                   full_fn=lambda stat: 1.0 / np.sqrt(1.0 - 4.0 * c4 * stat ** 2),
                   low_fn=lambda stat, d: central_binomial_series_head(c4 * stat ** 2, int(d) // 2),
                   name="spike_overlap")


def _spike(raw, rho: float, n: int) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw @ raw > 2.0 * rho * n:
        return np.zeros(n)
    return raw / math.sqrt(rho * n)


def make_spiked_wishart(n: int, rho: float, lam: float, seed: int = 0) -> ZooInstance:
    if not 0.0 < rho <= 1.0:
        raise PreconditionError(f"sparsity rho={rho} must lie in (0, 1]", subject="rho")
    if not 0.0 <= lam < 0.5:
        raise PreconditionError(f"lam={lam} must lie in [0, 1/2) for the series form", subject="lambda")
    params = {"family": "spiked_wishart", "n": n, "rho": rho, "lambda": lam}
    problem_id = generate_problem_id("spiked_wishart", params)
    null = GaussianNull(n)
    if n <= EXPLICIT_PRIOR_MAX_N:
        alternates, weights = [], []
        for raw in itertools.product((-1, 0, 1), repeat=n):
            nonzero = sum(1 for x in raw if x)
            weights.append((rho / 2.0) ** nonzero * (1.0 - rho) ** (n - nonzero))
            spike = _spike(raw, rho, n)
            alternates.append(NULL if not spike.any() else SpikedCovarianceAlternate(spike, lam, raw))
        prior = ExplicitPrior(alternates, np.asarray(weights) / math.fsum(weights))
    else:
        def sampler(rng):
            raw = rng.choice((-1, 0, 1), size=n, p=(rho / 2.0, 1.0 - rho, rho / 2.0))
            return SpikedCovarianceAlternate(_spike(raw, rho, n), lam, tuple(int(x) for x in raw))
        prior = SampledPrior(sampler, seed, f"truncated {rho:g}-sparse spikes in dimension {n}")
    law = spike_pair_law(n, rho, lam) if n <= EXACT_PAIR_LAW_MAX_N else None
    problem = TestingProblem(null, prior, SpikedCovarianceKernel(), pair_law=law,
                             problem_id=problem_id, params=params)
    logger.debug(f"{problem_id}: exact pair law {'available' if law else 'unavailable'}")
    return ZooInstance(problem_id, problem, params, law.full_fn if law else None)


def spike_moment(beta: Sequence[int], n: int, rho: float) -> float:
    """
    E s^beta with the truncation included: zero unless every beta_j is even; otherwise
    (rho n)^{-|beta|/2} rho^l Pr[Bin(n - l, rho) <= 2 rho n - l] with l the support size.
    """
    beta = np.asarray(beta, dtype=int)
    if beta.size != n:
        raise DimensionMismatchError(f"multi-index of length {beta.size} for dimension {n}")
    if np.any(beta % 2):
        return 0.0
    total = int(beta.sum())
    if total == 0:
        return 1.0
    support = int(np.count_nonzero(beta))
    room = math.floor(2.0 * rho * n + 1e-12) - support
    if room < 0:
        return 0.0
    tail = float(stats.binom.cdf(room, n - support, rho))
    return (rho * n) ** (-total / 2.0) * rho ** support * tail


def _double_factorial_odd(k: int) -> int:
    """(k - 1)!! for even k >= 0."""
    return math.prod(range(k - 1, 0, -2)) if k > 0 else 1


def wishart_hermite_coefficient(alphas: Sequence[Sequence[int]], n: int, rho: float, lam: float) -> float:
    """
    (E_u <Dbar_u^{(x)t}, H_alpha>)^2 for alpha = (alpha_1, ..., alpha_t):
    lam^{sum |alpha_i|} prod ((|alpha_i| - 1)!!)^2 / alpha_i! (E s^{sum alpha_i})^2,
    zero when some |alpha_i| is odd.
    """
    alphas = [np.asarray(a, dtype=int) for a in alphas]
    degrees = [int(a.sum()) for a in alphas]
    if any(deg % 2 for deg in degrees):
        return 0.0
    factor = 1.0
    for a, deg in zip(alphas, degrees):
        factor *= _double_factorial_odd(deg) ** 2 / math.prod(math.factorial(int(x)) for x in a)
    moment = spike_moment(np.sum(alphas, axis=0), n, rho)
    return lam ** sum(degrees) * factor * moment ** 2


def _multi_indices(n: int, low: int, high: int):
    for total in range(low, high + 1):
        for cut in itertools.combinations(range(total + n - 1), n - 1):
            bounds = (-1,) + cut + (total + n - 1,)
            yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(n))


def wishart_hermite_ldlr(n: int, rho: float, lam: float, m: int, d: int, k: int) -> float:
    """
    ||E_u (Dbar_u^{(x)m})^{<=d,k} - 1||^2 summed over Hermite coefficients: t <= k active
    samples, each of total degree between 1 and d.
    """
    per_sample = [a for a in _multi_indices(n, 2, d) if sum(a) % 2 == 0]
    total = 0.0
    for t in range(1, min(k, m) + 1):
        if len(per_sample) ** t > HERMITE_MAX_TERMS:
            raise InfeasibleSizeError(f"{len(per_sample)}^{t} Hermite tuples exceed {HERMITE_MAX_TERMS}")
        inner = math.fsum(wishart_hermite_coefficient(tup, n, rho, lam)
                          for tup in itertools.product(per_sample, repeat=t))
        total += math.comb(m, t) * inner
    return total


def high_degree_bound(n: int, rho: float, lam: float, d: int, k: int) -> float:
    """(lam^2 / (4 rho n))^{k(d+1)} under 2 n k (d+1) rho^2 <= 1, lam < 1/2 and even d."""
    if 2.0 * n * k * (d + 1) * rho * rho > 1.0:
        raise PreconditionError("the high-degree bound needs 2 n k (d+1) rho^2 <= 1", subject="rho")
    if lam >= 0.5 or d % 2:
        raise PreconditionError("the high-degree bound needs lam < 1/2 and even d", subject="d")
    return (lam * lam / (4.0 * rho * n)) ** (k * (d + 1))
