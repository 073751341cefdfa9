"""
s-sparse parities: uniform null on {+-1}^n against D_u = uniform conditioned on x^u = 1,
optionally noised by T_rho, which scales the density 1 + chi_u to 1 + rho^s chi_u.
"""
import itertools
import math
from typing import Optional, Sequence

import numpy as np

from src.measures.distributions import (Alternate, ExplicitPrior, NullAlternate, ProductNull,
                                        SampledPrior, check_state_cap)
from src.measures.kernels import CorrelationKernel, PairLaw, TestingProblem, check_degree
from src.utils.data_utils import generate_problem_id
from src.utils.errors import DimensionMismatchError, PreconditionError, UnsupportedBackendError
from src.utils.numerics import is_unbounded
from src.utils.seeding import derive_rng
from src.zoo.instance import ZooInstance

EXPLICIT_FAMILY_MAX = 4096


def _is_uniform_signs(null) -> bool:
    return (isinstance(null, ProductNull) and null.alphabet_size == 2
            and np.allclose(np.sort(null.values), [-1.0, 1.0]) and np.allclose(null.probs, 0.5))


class ParityAlternate(Alternate):
    """Relative density 1 + strength * chi_S over the uniform hypercube."""

    def __init__(self, subset: Sequence[int], n: int, strength: float = 1.0, label=None):
        subset = tuple(sorted(int(i) for i in subset))
        if len(set(subset)) != len(subset) or (subset and not 0 <= subset[0] <= subset[-1] < n):
            raise PreconditionError(f"parity {subset} is not a subset of range({n})", subject="subset")
        if not -1.0 <= strength <= 1.0:
            raise PreconditionError(f"parity strength {strength} must lie in [-1, 1]", subject="strength")
        self.subset = subset
        self.n = n
        self.strength = float(strength)
        self.label = label if label is not None else subset

    @property
    def degree(self) -> int:
        return len(self.subset)

    def character(self, x: np.ndarray) -> np.ndarray:
        """chi_S on rows of a (..., n) array of +-1 values."""
        return np.prod(x[..., list(self.subset)], axis=-1) if self.subset else np.ones(x.shape[:-1])

    def dense(self, null: ProductNull) -> np.ndarray:
        if null.n_coords != self.n:
            raise DimensionMismatchError(f"parity over {self.n} coordinates vs null with {null.n_coords}")
        if not _is_uniform_signs(null):
            raise UnsupportedBackendError("parity alternates live on the uniform hypercube")
        check_state_cap(null.state_count)
        grid = np.array(list(itertools.product(null.values, repeat=self.n)))
        return ((1.0 + self.strength * self.character(grid)) / null.state_count).reshape(null.shape)

    def noised(self, operator, null, keep) -> Optional["ParityAlternate"]:
        """chi_S is an eigenfunction of a binary operator: each noised coordinate of S scales by lambda."""
        if not _is_uniform_signs(null):
            return None
        eigenvalue = operator.binary_eigenvalue
        noised = [i for i in self.subset if keep is None or not keep[i]]
        return ParityAlternate(self.subset, self.n, self.strength * eigenvalue ** len(noised), self.label)


class ParityKernel(CorrelationKernel):
    """<Dbar_u^{<=d}, Dbar_v^{<=d}> = 1 + s_u s_v 1{S_u = S_v} 1{|S_u| <= d} (|S| >= 1)."""

    def validate(self, alternate: Alternate, null) -> None:
        if isinstance(alternate, NullAlternate):
            return
        if not isinstance(alternate, ParityAlternate):
            raise UnsupportedBackendError(f"{type(alternate).__name__} is not a parity alternate")
        if null.n_coords != alternate.n:
            raise DimensionMismatchError(f"parity over {alternate.n} coordinates vs null with {null.n_coords}")

    @staticmethod
    def _terms(alternates):
        keys = [a.subset if isinstance(a, ParityAlternate) else None for a in alternates]
        strengths = np.array([a.strength if isinstance(a, ParityAlternate) else 0.0 for a in alternates])
        degrees = np.array([len(k) if k is not None else 0 for k in keys])
        return keys, strengths, degrees

    def low_degree(self, u: Alternate, v: Alternate, d) -> float:
        return float(self.pairwise([u], [v], d)[0])

    def gram(self, alternates, d) -> np.ndarray:
        check_degree(d)
        keys, strengths, degrees = self._terms(alternates)
        codes = {key: i for i, key in enumerate(dict.fromkeys(k for k in keys if k is not None))}
        ids = np.array([codes[k] if k is not None else -1 - i for i, k in enumerate(keys)])
        same = ids[:, None] == ids[None, :]
        visible = np.ones(len(keys), dtype=bool) if is_unbounded(d) else degrees <= d
        return 1.0 + np.outer(strengths * visible, strengths) * same

    def pairwise(self, left, right, d) -> np.ndarray:
        check_degree(d)
        lk, ls, ld = self._terms(left)
        rk, rs, _ = self._terms(right)
        same = np.array([a is not None and a == b for a, b in zip(lk, rk)])
        visible = np.ones(len(lk), dtype=bool) if is_unbounded(d) else ld <= d
        return 1.0 + ls * rs * same * visible


def parity_pair_law(family_size: int, s: int, strength: float = 1.0) -> PairLaw:
    """Uniform prior over `family_size` distinct s-parities: u = v with probability 1/|S|."""
    same = 1.0 / family_size
    factor = strength * strength
    return PairLaw([same, 1.0 - same], [1.0, 0.0],
                   full_fn=lambda stat: 1.0 + factor * stat,
                   low_fn=lambda stat, d: 1.0 + factor * stat * (1.0 if s <= d else 0.0),
                   name="same_parity")


def random_parities(n: int, s: int, count: int, rng: np.random.Generator):
    """`count` distinct s-subsets of range(n), drawn uniformly."""
    if count > math.comb(n, s):
        raise PreconditionError(f"only C({n},{s}) distinct {s}-parities exist", subject="family_size")
    if math.comb(n, s) <= 4 * EXPLICIT_FAMILY_MAX:
        every = list(itertools.combinations(range(n), s))
        picks = rng.choice(len(every), size=count, replace=False)
        return sorted(every[i] for i in picks)
    chosen = set()
    while len(chosen) < count:
        chosen.add(tuple(sorted(rng.choice(n, size=s, replace=False).tolist())))
    return sorted(chosen)


def make_sparse_parity(n: int, s: int, parity_set: Optional[Sequence[Sequence[int]]] = None,
                       family_size: Optional[int] = None, rho: float = 1.0, seed: int = 0) -> ZooInstance:
    """
    Explicit prior over `parity_set` (or `family_size` seeded random parities when that is
    small enough to list); a family too large to list is a sampled prior with an exact pair law.
    `rho` applies T_rho, giving strength rho^s.
    """
    strength = rho ** s
    params = {"family": "sparse_parity", "n": n, "s": s, "rho": rho}
    null = ProductNull.uniform_signs(n)
    kernel = ParityKernel()
    if parity_set is not None:
        subsets = [tuple(sorted(p)) for p in parity_set]
        if len(set(subsets)) != len(subsets):
            raise PreconditionError("duplicate parities in the family", subject="parity_set")
        if any(len(p) != s for p in subsets):
            raise PreconditionError(f"every parity must have exactly {s} elements", subject="parity_set")
        family_size = len(subsets)
    else:
        family_size = math.comb(n, s) if family_size is None else int(family_size)
        if family_size > EXPLICIT_FAMILY_MAX and family_size != math.comb(n, s):
            raise PreconditionError(f"a sampled family must be all C({n},{s}) parities", subject="family_size")
    params["family_size"] = family_size
    problem_id = generate_problem_id("sparse_parity", params)
    law = parity_pair_law(family_size, s, strength)
    if parity_set is None and family_size <= EXPLICIT_FAMILY_MAX:
        subsets = random_parities(n, s, family_size, derive_rng(seed, "parities"))
    if parity_set is not None or family_size <= EXPLICIT_FAMILY_MAX:
        prior = ExplicitPrior([ParityAlternate(p, n, strength) for p in subsets])
    else:
        def sampler(rng):
            return ParityAlternate(rng.choice(n, size=s, replace=False), n, strength)
        prior = SampledPrior(sampler, seed, f"uniform over {family_size} {s}-parities")
    problem = TestingProblem(null, prior, kernel, pair_law=law, problem_id=problem_id, params=params)
    return ZooInstance(problem_id, problem, params, law.full_fn)


def parity_query_value(alternate: Alternate, subset: Sequence[int]) -> float:
    """E_{D_u} (1 + x^S)/2 in closed form."""
    if isinstance(alternate, NullAlternate) or not subset:
        return 1.0 if not subset else 0.5
    if isinstance(alternate, ParityAlternate):
        match = alternate.subset == tuple(sorted(subset))
        return 0.5 * (1.0 + (alternate.strength if match else 0.0))
    raise UnsupportedBackendError(f"no closed-form parity expectation for {type(alternate).__name__}")
