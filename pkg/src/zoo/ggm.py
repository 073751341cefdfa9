"""
Planted randomly signed sparse Gaussian graphical model: N(0, Id_n) against N(0, (Id + kappa Delta)^{-1}),
where Delta is the signed adjacency matrix of a random d-regular graph on a uniform s-subset,
conditioned on ||Delta||_op <= 2 sqrt(d).
"""
import math
from typing import Dict, Tuple

import networkx as nx
import numpy as np

from src.measures.correlation import MONTE_CARLO, correlation_table
from src.measures.distributions import ExplicitPrior, GaussianCovarianceAlternate, GaussianNull, SampledPrior
from src.measures.kernels import CovarianceKernel, TestingProblem
from src.utils.data_utils import generate_problem_id
from src.utils.errors import PreconditionError, RejectionBudgetError
from src.utils.logger import Logger
from src.utils.seeding import derive_rng
from src.zoo.instance import ZooInstance

logger = Logger().get_logger()

DEFAULT_MAX_ATTEMPTS = 1000


class SignedRegularGraphSampler:
    """
    Configuration-model sampler for signed d-regular graphs on s vertices; rejects self-loops,
    multi-edges and spectral norms above 2 sqrt(d). Keeps running acceptance statistics.
    """

    def __init__(self, s: int, d: int, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        if d >= s or (s * d) % 2:
            raise PreconditionError(f"no simple {d}-regular graph on {s} vertices", subject="d")
        self.s = s
        self.d = d
        self.max_attempts = max_attempts
        self.stats = {"draws": 0, "attempts": 0, "multigraph_rejections": 0, "spectral_rejections": 0}

    @property
    def acceptance_rate(self) -> float:
        return self.stats["draws"] / self.stats["attempts"] if self.stats["attempts"] else math.nan

    def report(self) -> Dict[str, float]:
        return {**self.stats, "acceptance_rate": self.acceptance_rate}

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        bound = 2.0 * math.sqrt(self.d)
        for _ in range(self.max_attempts):
            self.stats["attempts"] += 1
            multigraph = nx.configuration_model([self.d] * self.s, seed=int(rng.integers(2 ** 31)))
            graph = nx.Graph(multigraph)
            if nx.number_of_selfloops(multigraph) or graph.number_of_edges() != multigraph.number_of_edges():
                self.stats["multigraph_rejections"] += 1
                continue
            delta = np.zeros((self.s, self.s))
            for (i, j), sign in zip(graph.edges(), rng.choice((-1.0, 1.0), size=graph.number_of_edges())):
                delta[i, j] = delta[j, i] = sign
            if np.max(np.abs(np.linalg.eigvalsh(delta))) > bound:
                self.stats["spectral_rejections"] += 1
                continue
            self.stats["draws"] += 1
            return delta
        raise RejectionBudgetError(f"no admissible signed {self.d}-regular graph on {self.s} vertices "
                                   f"in {self.max_attempts} attempts", self.report())


def _embed(delta: np.ndarray, subset: np.ndarray, n: int) -> np.ndarray:
    full = np.zeros((n, n))
    full[np.ix_(subset, subset)] = delta
    return full


def make_prs_ggm(n: int, s: int, d: int, kappa: float, seed: int = 0,
                 max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> ZooInstance:
    if s > n:
        raise PreconditionError(f"support size s={s} exceeds n={n}", subject="s")
    if kappa * math.sqrt(d) >= 1.0 / 6.0:
        raise PreconditionError(f"kappa sqrt(d) = {kappa * math.sqrt(d):.4g} must be below 1/6", subject="kappa")
    params = {"family": "prs_ggm", "n": n, "s": s, "d": d, "kappa": kappa}
    problem_id = generate_problem_id("prs_ggm", params)
    graphs = SignedRegularGraphSampler(s, d, max_attempts)

    def sampler(rng):
        subset = np.sort(rng.choice(n, size=s, replace=False))
        delta = graphs(rng)
        return GaussianCovarianceAlternate(kappa * _embed(delta, subset, n), tuple(subset.tolist()))

    prior = SampledPrior(sampler, seed, f"signed {d}-regular graphs on random {s}-subsets of {n}")
    problem = TestingProblem(GaussianNull(n), prior, CovarianceKernel(), problem_id=problem_id, params=params)
    return ZooInstance(problem_id, problem, params, extras={"graph_sampler": graphs})


def ggm_sub_prior(instance: ZooInstance, count: int, seed: int = 0) -> TestingProblem:
    """Explicit uniform prior over `count` seeded draws, for exact pair enumeration."""
    problem = instance.problem
    rng = derive_rng(seed, "sub_prior", instance.problem_id)
    alternates = problem.prior.sample(rng, count)
    graphs = instance.extras.get("graph_sampler")
    if graphs is not None:
        logger.info(f"{instance.problem_id}: graph sampler acceptance {graphs.report()}")
    return problem.with_prior(ExplicitPrior(alternates), problem_id=f"{instance.problem_id}-sub{count}")


def sampled_pair_moment(instance: ZooInstance, k: int, pairs: int, seed: int = 0) -> Tuple[float, float]:
    """Monte-Carlo E(<Dbar_u, Dbar_v> - 1)^k over independent prior pairs, with its standard error."""
    table = correlation_table(instance.problem, mode=MONTE_CARLO, budget=pairs, seed=seed)
    samples = (table.full - 1.0) ** k
    graphs = instance.extras.get("graph_sampler")
    if graphs is not None:
        logger.info(f"{instance.problem_id}: graph sampler acceptance {graphs.report()}")
    return float(np.mean(samples)), table.stderr(samples)


def monte_carlo_covariance_correlation(A: np.ndarray, B: np.ndarray, samples: int,
                                       rng: np.random.Generator) -> Tuple[float, float]:
    """
    Average of Dbar_A(x) Dbar_B(x) over x ~ N(0, Id), Dbar_A(x) = sqrt(det(Id + A)) exp(-x^T A x / 2);
    returns the estimate and its standard error.
    """
    eye = np.eye(A.shape[0])
    log_norm = 0.5 * (np.linalg.slogdet(eye + A)[1] + np.linalg.slogdet(eye + B)[1])
    x = rng.standard_normal((samples, A.shape[0]))
    quadratic = np.einsum("ij,jk,ik->i", x, A + B, x)
    values = np.exp(log_norm - 0.5 * quadratic)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def moment_bound(n: int, s: int, d: int, kappa: float, k: int) -> float:
    """(s^2/n) ((1 + kappa^2 d)^{s/2} - 1)^k."""
    return (s * s / n) * ((1.0 + kappa * kappa * d) ** (s / 2.0) - 1.0) ** k


def k_sample_bound(n: int, s: int, d: int, kappa: float, k: int) -> float:
    """(1 + (s^2/n)^{1/k} (exp(s d kappa^2 / 2) - 1))^k."""
    return (1.0 + (s * s / n) ** (1.0 / k) * math.expm1(0.5 * s * d * kappa * kappa)) ** k
