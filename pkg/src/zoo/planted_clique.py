"""
Planted-subset families over Bernoulli coordinates.

Multi-sample s-uniform hypergraph planted clique: D_0 = G_s(N, q), D_u forces every hyperedge
inside the K-set u. <Dbar_u, Dbar_v> = q^{-C(|u cap v|, s)} with |u cap v| hypergeometric.

Bipartite planted dense subgraph: D_0 = Ber(q)^N, D_u = (K/N) D'_u + (1 - K/N) D_0 where D'_u
raises the density to p on u; u includes every index independently with probability K/N.
<Dbar_u, Dbar_v> = 1 + (K/N)^2 ((1 + gamma)^{|u cap v|} - 1), gamma = (p - q)^2 / (q (1 - q)).
"""
import itertools
import math
from typing import Callable, Dict, Optional

import numpy as np
from scipy import special, stats

from src.cloning.hypergraph_io import clique_edges
from src.measures.distributions import (Alternate, DenseAlternate, ExplicitPrior, NullAlternate,
                                        ProductAlternate, ProductNull, SampledPrior, check_state_cap)
from src.measures.kernels import CorrelationKernel, PairLaw, TestingProblem, check_degree
from src.utils.data_utils import generate_problem_id
from src.utils.errors import DimensionMismatchError, InfeasibleSizeError, PreconditionError, UnsupportedBackendError
from src.utils.logger import Logger
from src.utils.numerics import is_unbounded
from src.zoo.instance import ZooInstance

logger = Logger().get_logger()

TABULATED_MAX_EDGES = 2 ** 20
EXPLICIT_PRIOR_MAX = 4096
FOURIER_MAX_TERMS = 2_000_000


def _binomial_sum(j, d, gamma) -> np.ndarray:
    """sum_{1 <= t <= d} C(j, t) gamma^t for every entry of j."""
    j = np.asarray(j, dtype=float)
    top = int(j.max()) if j.size else 0
    t = np.arange(1, (top if is_unbounded(d) else min(int(d), top)) + 1)
    if t.size == 0:
        return np.zeros_like(j)
    return np.sum(special.comb(j[..., None], t) * gamma ** t, axis=-1)


class PlantedSetAlternate(Alternate):
    """A planted vertex set without a tabulated law; only the intersection kernel reads it."""

    def __init__(self, vertices):
        self.vertices = tuple(sorted(int(v) for v in vertices))
        self.label = self.vertices


class CliqueAlternate(ProductAlternate):
    """G_s(N, u, q) as a product alternate over the colex-ordered hyperedges."""

    def __init__(self, vertices, N: int, s: int, q: float):
        self.vertices = tuple(sorted(int(v) for v in vertices))
        forced = clique_edges(N, s, self.vertices)
        probs = np.tile([1.0 - q, q], (forced.size, 1))
        probs[forced] = [0.0, 1.0]
        super().__init__(probs, self.vertices)


class MixtureSubsetAlternate(Alternate):
    """(K/N) D'_u + (1 - K/N) Ber(q)^N over {0, 1}^N."""

    def __init__(self, vertices, N: int, weight: float, p: float, q: float):
        self.vertices = tuple(sorted(int(v) for v in vertices))
        self.N = N
        self.weight = weight
        self.p = p
        self.q = q
        self.label = self.vertices

    def dense(self, null: ProductNull) -> np.ndarray:
        if null.n_coords != self.N:
            raise DimensionMismatchError(f"subset over {self.N} coordinates vs null with {null.n_coords}")
        check_state_cap(null.state_count)
        planted = null.probs.copy()
        planted[list(self.vertices)] = [1.0 - self.p, self.p]
        table = ProductAlternate(planted).dense(null)
        return self.weight * table + (1.0 - self.weight) * null.table()

    def as_dense(self, null: ProductNull) -> DenseAlternate:
        return DenseAlternate(self.dense(null), self.label)


class IntersectionKernel(CorrelationKernel):
    """
    Correlations depending only on j = |u cap v|: full_fn(j) and low_fn(j, d). Alternates
    expose their planted set as `vertices`.
    """

    def __init__(self, N: int, full_fn: Callable, low_fn: Callable):
        self.N = N
        self.full_fn = full_fn
        self.low_fn = low_fn

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if not hasattr(alternate, "vertices"):
            raise UnsupportedBackendError(f"{type(alternate).__name__} carries no planted vertex set")

    def _members(self, alternates) -> np.ndarray:
        M = np.zeros((len(alternates), self.N))
        for i, a in enumerate(alternates):
            if not isinstance(a, NullAlternate):
                M[i, list(a.vertices)] = 1.0
        return M

    def _apply(self, j: np.ndarray, d, nulls: np.ndarray) -> np.ndarray:
        values = self.full_fn(j) if is_unbounded(d) else self.low_fn(j, d)
        return np.where(nulls, 1.0, values)

    def low_degree(self, u, v, d) -> float:
        return float(self.pairwise([u], [v], d)[0])

    def gram(self, alternates, d) -> np.ndarray:
        check_degree(d)
        M = self._members(alternates)
        is_null = np.array([isinstance(a, NullAlternate) for a in alternates])
        return self._apply(M @ M.T, d, is_null[:, None] | is_null[None, :])

    def pairwise(self, left, right, d) -> np.ndarray:
        check_degree(d)
        j = np.sum(self._members(left) * self._members(right), axis=1)
        nulls = np.array([isinstance(u, NullAlternate) or isinstance(v, NullAlternate)
                          for u, v in zip(left, right)])
        return self._apply(j, d, nulls)


# ---------------------------------------------------------------- hypergraph planted clique

def hpc_correlation(s: int, q: float) -> Dict[str, Callable]:
    """full(j) = q^{-C(j, s)}; low(j, d) sums C(C(j, s), t) gamma^t over t <= d, gamma = (1-q)/q."""
    gamma = (1.0 - q) / q

    def full(j):
        return np.power(1.0 / q, special.comb(np.asarray(j, dtype=float), s))

    def low(j, d):
        edges = special.comb(np.asarray(j, dtype=float), s)
        return 1.0 + _binomial_sum(edges, d, gamma)

    return {"full": full, "low": low}


def _size_law(K: int, N: int, size_prior: str, delta: Optional[float]):
    """(sizes, probabilities) of the planted set."""
    if size_prior == "fixed":
        return np.array([K]), np.array([1.0])
    if size_prior == "binomial":
        if delta is None or delta < 0:
            raise PreconditionError("the binomial size prior needs delta >= 0", subject="delta")
        sizes = np.arange(K + 1)
        return sizes, stats.binom.pmf(sizes, K, N ** (-delta))
    raise PreconditionError(f"unknown size prior {size_prior!r}", subject="size_prior")


def _intersection_law(N: int, sizes: np.ndarray, size_probs: np.ndarray):
    """Law of |u cap v| for independent uniform sets whose sizes follow the size law."""
    top = int(sizes.max())
    j = np.arange(top + 1)
    law = np.zeros(top + 1)
    for a, pa in zip(sizes, size_probs):
        for b, pb in zip(sizes, size_probs):
            if pa * pb > 0:
                law += pa * pb * stats.hypergeom.pmf(j, N, int(a), int(b))
    return j, law


def make_multisample_hpc(N: int, K: int, s: int, q: float, size_prior: str = "fixed",
                         delta: Optional[float] = None, seed: int = 0) -> ZooInstance:
    if K > N:
        raise PreconditionError(f"clique size K={K} exceeds N={N}", subject="K")
    if not 0.0 < q < 1.0:
        raise PreconditionError(f"edge density q={q} must lie in (0, 1)", subject="q")
    if s < 1 or s > N:
        raise PreconditionError(f"uniformity s={s} must lie in [1, N]", subject="s")
    params = {"family": "multisample_hpc", "N": N, "K": K, "s": s, "q": q, "size_prior": size_prior}
    if delta is not None:
        params["delta"] = delta
    problem_id = generate_problem_id("hpc", params)
    sizes, size_probs = _size_law(K, N, size_prior, delta)
    correlation = hpc_correlation(s, q)
    j, law = _intersection_law(N, sizes, size_probs)
    pair_law = PairLaw(law, j, correlation["full"], correlation["low"], name="intersection")
    kernel = IntersectionKernel(N, correlation["full"], correlation["low"])
    edges = math.comb(N, s)
    count = sum(math.comb(N, int(a)) for a, pa in zip(sizes, size_probs) if pa > 0)
    if edges <= TABULATED_MAX_EDGES and count <= EXPLICIT_PRIOR_MAX:
        null = ProductNull.bernoulli(edges, q)
        alternates, weights = [], []
        for a, pa in zip(sizes, size_probs):
            if pa <= 0:
                continue
            for vertices in itertools.combinations(range(N), int(a)):
                alternates.append(CliqueAlternate(vertices, N, s, q))
                weights.append(pa / math.comb(N, int(a)))
        prior = ExplicitPrior(alternates, np.asarray(weights) / math.fsum(weights))
    else:
        # hyperedge indicators are never materialized past the tabulation limit
        null = ProductNull.bernoulli(edges if edges <= TABULATED_MAX_EDGES else 1, q)

        def sampler(rng):
            a = int(rng.choice(sizes, p=size_probs))
            return PlantedSetAlternate(rng.choice(N, size=a, replace=False))
        prior = SampledPrior(sampler, seed, f"planted {s}-uniform cliques in [{N}]")
    problem = TestingProblem(null, prior, kernel, pair_law=pair_law, problem_id=problem_id, params=params)
    logger.debug(f"{problem_id}: {'explicit' if problem.explicit else 'sampled'} prior over {count} planted sets")
    return ZooInstance(problem_id, problem, params, correlation["full"])


def hpc_fourier_ldlr(N: int, K: int, s: int, q: float, m: int, d: int, k: int) -> float:
    """
    ||E_u (Dbar_u^{(x)m})^{<=d,k} - 1||^2 as the sum of squared prior-averaged coefficients
    C(K, |V|)/C(N, |V|) gamma^{sum |alpha_i| / 2} over families of at most d hyperedges in
    each of t <= k samples.
    """
    gamma = (1.0 - q) / q
    edge_masks = [sum(1 << v for v in e) for e in itertools.combinations(range(N), s)]
    families = []
    for size in range(1, d + 1):
        for combo in itertools.combinations(edge_masks, size):
            mask = 0
            for e in combo:
                mask |= e
            families.append((mask, size))
    total = 0.0
    for t in range(1, min(k, m) + 1):
        if len(families) ** t > FOURIER_MAX_TERMS:
            raise InfeasibleSizeError(f"{len(families)}^{t} coefficient tuples exceed {FOURIER_MAX_TERMS}")
        inner = 0.0
        for tup in itertools.product(families, repeat=t):
            union = 0
            degree = 0
            for mask, size in tup:
                union |= mask
                degree += size
            v = bin(union).count("1")
            inner += (math.comb(K, v) / math.comb(N, v)) ** 2 * gamma ** degree
        total += math.comb(m, t) * inner
    return total


# ---------------------------------------------------------------- bipartite planted dense subgraph

def pds_correlation(weight: float, p: float, q: float) -> Dict[str, Callable]:
    gamma = (p - q) ** 2 / (q * (1.0 - q))
    a2 = weight * weight

    def full(j):
        return 1.0 + a2 * np.expm1(np.asarray(j, dtype=float) * math.log1p(gamma))

    def low(j, d):
        return 1.0 + a2 * _binomial_sum(j, d, gamma)

    return {"full": full, "low": low, "gamma": gamma}


def make_bipartite_pds(N: int, K: int, p: float, q: float, seed: int = 0) -> ZooInstance:
    if K > N:
        raise PreconditionError(f"planted size K={K} exceeds N={N}", subject="K")
    if not 0.0 < q < p <= 1.0:
        raise PreconditionError(f"densities must satisfy 0 < q < p <= 1 (got p={p}, q={q})", subject="p")
    weight = K / N
    params = {"family": "bipartite_pds", "N": N, "K": K, "p": p, "q": q}
    problem_id = generate_problem_id("bipartite_pds", params)
    correlation = pds_correlation(weight, p, q)
    j = np.arange(N + 1)
    pair_law = PairLaw(stats.binom.pmf(j, N, weight * weight), j, correlation["full"], correlation["low"],
                       name="intersection")
    kernel = IntersectionKernel(N, correlation["full"], correlation["low"])
    null = ProductNull.bernoulli(N, q)
    if 2 ** N <= EXPLICIT_PRIOR_MAX:
        alternates, weights = [], []
        for bits in itertools.product((False, True), repeat=N):
            vertices = [i for i, b in enumerate(bits) if b]
            alternates.append(MixtureSubsetAlternate(vertices, N, weight, p, q))
            weights.append(weight ** len(vertices) * (1.0 - weight) ** (N - len(vertices)))
        prior = ExplicitPrior(alternates, np.asarray(weights) / math.fsum(weights))
    else:
        def sampler(rng):
            return MixtureSubsetAlternate(np.flatnonzero(rng.random(N) < weight), N, weight, p, q)
        prior = SampledPrior(sampler, seed, f"independent inclusion at rate {weight:g}")
    problem = TestingProblem(null, prior, kernel, pair_law=pair_law, problem_id=problem_id, params=params)
    return ZooInstance(problem_id, problem, params, correlation["full"])


def pds_fourier_ldlr(N: int, K: int, p: float, q: float, m: int, d: int, k: int) -> float:
    """
    Sum of squared coefficients (K/N)^{2(|L| + t)} gamma^{sum |alpha_i|} over t <= k samples
    with 1 <= |alpha_i| <= d, L the union of the alpha_i.
    """
    a = K / N
    gamma = (p - q) ** 2 / (q * (1.0 - q))
    families = [(sum(1 << i for i in combo), size)
                for size in range(1, d + 1) for combo in itertools.combinations(range(N), size)]
    total = 0.0
    for t in range(1, min(k, m) + 1):
        if len(families) ** t > FOURIER_MAX_TERMS:
            raise InfeasibleSizeError(f"{len(families)}^{t} coefficient tuples exceed {FOURIER_MAX_TERMS}")
        inner = 0.0
        for tup in itertools.product(families, repeat=t):
            union = 0
            degree = 0
            for mask, size in tup:
                union |= mask
                degree += size
            inner += a ** (2 * (bin(union).count("1") + t)) * gamma ** degree
        total += math.comb(m, t) * inner
    return total
