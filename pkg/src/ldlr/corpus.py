"""
Seeded corpora of small random instances for the identity and inequality suites.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.ldlr.norms import SamplewiseDegree
from src.measures.distributions import NULL, DenseAlternate, ExplicitPrior, ProductAlternate, ProductNull
from src.measures.kernels import TestingProblem
from src.utils.seeding import derive_rng

MAX_COORDS = 3
MAX_ALTERNATES = 4
MAX_SAMPLES = 5
MAX_DEGREE = 2
MAX_ACTIVE = 3
MAX_ATOMS = 12


@dataclass
class CorpusInstance:
    index: int
    problem: TestingProblem
    m: int
    degree: SamplewiseDegree

    @property
    def even_k(self) -> int:
        """Nearest even active-sample bound not above m (the inequality checks need even k)."""
        k = self.degree.k + self.degree.k % 2
        return k if k <= self.m else k - 2


def _random_alternate(rng: np.random.Generator, null: ProductNull, label: int):
    kind = rng.integers(3)
    if kind == 0:
        return NULL
    if kind == 1:
        return DenseAlternate(rng.dirichlet(np.ones(null.state_count)).reshape(null.shape), label)
    return ProductAlternate(rng.dirichlet(np.ones(null.alphabet_size), size=null.n_coords), label)


def random_finite_instance(seed: int, index: int) -> CorpusInstance:
    """
    N <= 3 binary coordinates with marginals in [0.2, 0.8], at most 4 alternates (dense,
    product or the null) with random weights, m <= 5, d <= 2 and k <= min(3, m).
    """
    rng = derive_rng(seed, "finite_corpus", index)
    n_coords = int(rng.integers(1, MAX_COORDS + 1))
    values = [-1.0, 1.0] if rng.random() < 0.5 else [0.0, 1.0]
    bias = rng.uniform(0.2, 0.8, size=n_coords)
    null = ProductNull(values, np.column_stack([1.0 - bias, bias]))
    size = int(rng.integers(1, MAX_ALTERNATES + 1))
    alternates = [_random_alternate(rng, null, i) for i in range(size)]
    prior = ExplicitPrior(alternates, rng.dirichlet(np.ones(size)))
    m = int(rng.integers(2, MAX_SAMPLES + 1))
    degree = SamplewiseDegree(int(rng.integers(0, MAX_DEGREE + 1)), int(rng.integers(1, min(MAX_ACTIVE, m) + 1)))
    problem = TestingProblem(null, prior, problem_id=f"corpus-{seed}-{index}",
                             params={"family": "corpus", "N": n_coords, "alternates": size})
    return CorpusInstance(index, problem, m, degree)


def finite_corpus(seed: int, size: int) -> List[CorpusInstance]:
    return [random_finite_instance(seed, i) for i in range(size)]


def random_discrete_variable(seed: int, index: int) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """
    (values, weights, p, q): at most 12 signed atoms with Dirichlet weights and exponents
    p > q > 0.
    """
    rng = derive_rng(seed, "discrete_corpus", index)
    atoms = int(rng.integers(1, MAX_ATOMS + 1))
    values = rng.normal(scale=rng.uniform(0.1, 3.0), size=atoms)
    weights = rng.dirichlet(np.ones(atoms))
    q = float(rng.uniform(0.25, 4.0))
    p = q + float(rng.uniform(0.1, 4.0))
    return values, weights, p, q


def random_product_instance(seed: int, index: int, n_coords: int, size: int = 3, bias: float = 0.5,
                            dense: bool = False) -> TestingProblem:
    """
    Homogeneous binary null Ber(bias) on {-1, 1}^N with `size` random product alternates
    (one dense alternate among them when `dense` is set).
    """
    rng = derive_rng(seed, "product_corpus", index, n_coords)
    null = ProductNull.repeated([-1.0, 1.0], [1.0 - bias, bias], n_coords)
    alternates = []
    for i in range(size):
        if dense and i == 0:
            alternates.append(DenseAlternate(rng.dirichlet(np.ones(null.state_count)).reshape(null.shape), i))
            continue
        up = rng.uniform(0.1, 0.9, size=n_coords)
        alternates.append(ProductAlternate(np.column_stack([1.0 - up, up]), i))
    return TestingProblem(null, ExplicitPrior(alternates), problem_id=f"product-{seed}-{index}-{n_coords}",
                          params={"family": "product_corpus", "N": n_coords, "alternates": size})
