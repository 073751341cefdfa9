"""
Statistical dimension (SDA) and product-SDA as optimizations over tail events of the
correlation variable X = <Dbar_u, Dbar_v> - 1.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.measures.correlation import (EXACT, MONTE_CARLO, CorrelationAtoms, correlation_atoms,
                                      correlation_matrix)
from src.measures.distributions import require_explicit
from src.measures.kernels import TestingProblem
from src.utils.errors import PreconditionError
from src.utils.logger import Logger
from src.utils.numerics import LIMITS
from src.utils.seeding import derive_rng

logger = Logger().get_logger()

# relative slack absorbing rounding in the threshold comparison E[|X| | A] <= 1/m
THRESHOLD_RTOL = 1e-12
SUBSET_CHUNK = 1 << 14


@dataclass
class SdaReport:
    """
    q is math.inf when the problem is unbounded (max |X| <= 1/m); `capped` marks q >= cap.
    The witness is the smallest violating event found: probability and conditional mean.
    """
    m: float
    q: float
    kind: str = "sda"
    unbounded: bool = False
    capped: bool = False
    witness_prob: Optional[float] = None
    witness_mean: Optional[float] = None
    mode: str = EXACT
    seed: Optional[int] = None
    q_lower: Optional[float] = None
    q_upper: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    problem_id: str = ""
    extra: Dict = field(default_factory=dict)

    def at_least(self, q: float) -> bool:
        return self.unbounded or self.q >= q

    def to_record(self) -> Dict:
        return {
            "problem_id": self.problem_id,
            "m": self.m,
            "q": "inf" if self.unbounded else (f">={int(self.q)}" if self.capped else int(self.q)),
            "witness_prob": "" if self.witness_prob is None else self.witness_prob,
            "witness_mean": "" if self.witness_mean is None else self.witness_mean,
            "mode": self.mode,
            "seed": "" if self.seed is None else self.seed,
        }


class TailProfile:
    """
    Atoms sorted by |X| descending with cumulative weight and mass, so the best event of
    probability alpha (top-alpha average, the boundary atom split fractionally) costs a
    binary search.
    """

    def __init__(self, atoms: CorrelationAtoms):
        order = np.argsort(-atoms.magnitudes, kind="stable")
        self.magnitudes = atoms.magnitudes[order]
        self.weights = atoms.weights[order]
        self.cum_weight = np.cumsum(self.weights)
        self.cum_mass = np.cumsum(self.weights * self.magnitudes)
        self.max_magnitude = float(self.magnitudes[0])

    def conditional_mean(self, alpha: float) -> float:
        if not 0 < alpha <= 1:
            raise PreconditionError(f"alpha={alpha} must lie in (0, 1]", subject="alpha")
        i = int(np.searchsorted(self.cum_weight, alpha, side="left"))
        i = min(i, self.magnitudes.size - 1)
        before_weight = self.cum_weight[i - 1] if i > 0 else 0.0
        before_mass = self.cum_mass[i - 1] if i > 0 else 0.0
        partial = max(alpha - before_weight, 0.0)
        return float((before_mass + partial * self.magnitudes[i]) / alpha)

    def satisfies(self, q: int, m: float) -> bool:
        """E[|X| | A] <= 1/m for every event A with Pr(A) >= 1/q^2."""
        return self.conditional_mean(1.0 / (q * q)) <= (1.0 / m) * (1.0 + THRESHOLD_RTOL)


def tail_conditional_expectation(atoms: CorrelationAtoms, alpha: float) -> float:
    """
    max over events A with Pr(A) >= alpha of E[|X| | A]: the average of |X| over its top
    alpha mass
    """
    return TailProfile(atoms).conditional_mean(alpha)


def conditional_moment_bound(atoms: CorrelationAtoms, k: int, q: float) -> Tuple[float, float]:
    """
    (max over events of probability >= 1/q^2 of E[|X| | A], (q^2 E|X|^k)^{1/k}); the first
    never exceeds the second by Hoelder.
    """
    if k < 1 or q < 1:
        raise PreconditionError(f"need k >= 1 and q >= 1, got k={k}, q={q}", subject="q")
    tail = TailProfile(atoms).conditional_mean(1.0 / (q * q))
    moment = atoms.expectation(atoms.magnitudes ** k)
    return tail, (q * q * moment) ** (1.0 / k)


def _search_q(profile: TailProfile, m: float, cap: int) -> Tuple[float, bool, bool]:
    if profile.max_magnitude <= (1.0 / m) * (1.0 + THRESHOLD_RTOL):
        return math.inf, True, False
    if not profile.satisfies(1, m):
        return 0, False, False
    if profile.satisfies(cap, m):
        return cap, False, True
    lo, hi = 1, cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if profile.satisfies(mid, m):
            lo = mid
        else:
            hi = mid
    return lo, False, False


def sda_from_atoms(atoms: CorrelationAtoms, m: float, cap: Optional[int] = None,
                   bootstrap: Optional[int] = None, problem_id: str = "") -> SdaReport:
    """Largest integer q with E[|X| | A] <= 1/m on every event of probability >= 1/q^2."""
    cap = LIMITS["sda_q_cap"] if cap is None else cap
    bootstrap = LIMITS["bootstrap_resamples"] if bootstrap is None else bootstrap
    if m <= 0:
        raise PreconditionError(f"oracle parameter m={m} must be positive", subject="m")
    profile = TailProfile(atoms)
    q, unbounded, capped = _search_q(profile, m, cap)
    report = SdaReport(m, q, "sda", unbounded, capped, mode=atoms.mode, seed=atoms.seed, problem_id=problem_id)
    if not unbounded and not capped:
        alpha = 1.0 / ((q + 1) ** 2)
        report.witness_prob = alpha
        report.witness_mean = profile.conditional_mean(alpha)
    if atoms.empirical and bootstrap:
        report.interval = _bootstrap_interval(atoms, m, cap, bootstrap)
        report.extra["caveat"] = "plug-in estimate from Monte-Carlo atoms"
    return report


def _bootstrap_interval(atoms: CorrelationAtoms, m: float, cap: int, resamples: int) -> Tuple[float, float]:
    seed = 0 if atoms.seed is None else atoms.seed
    estimates = []
    for index in range(resamples):
        replicate = atoms.resample(derive_rng(seed, "bootstrap", index))
        estimates.append(_search_q(TailProfile(replicate), m, cap)[0])
    estimates = np.array(estimates, dtype=float)
    return float(np.percentile(estimates, 2.5)), float(np.percentile(estimates, 97.5))


def sda(source: Union[TestingProblem, CorrelationAtoms], m: float, mode: str = EXACT,
        budget: Optional[int] = None, seed: Optional[int] = None, cap: Optional[int] = None,
        bootstrap: Optional[int] = None) -> SdaReport:
    """
    SDA(S, mu, m) of a problem (atoms computed in `mode`) or of precomputed atoms.
    """
    if isinstance(source, CorrelationAtoms):
        return sda_from_atoms(source, m, cap, bootstrap)
    atoms = correlation_atoms(source, mode, budget, seed)
    return sda_from_atoms(atoms, m, cap, bootstrap, source.problem_id)


# ---------------------------------------------------------------- product-SDA

def _violation_bound(weights: np.ndarray, means: np.ndarray, m: float) -> Tuple[float, Optional[int]]:
    """
    Largest q such that no listed event with mean > 1/m has probability >= 1/q, and the
    index of the event that binds it.
    """
    threshold = (1.0 / m) * (1.0 + THRESHOLD_RTOL)
    violating = np.flatnonzero(means > threshold)
    if violating.size == 0:
        return math.inf, None
    bounds = np.ceil(1.0 / weights[violating] - 1e-12) - 1.0
    best = int(np.argmin(bounds))
    return float(max(bounds[best], 0.0)), int(violating[best])


def _exact_product_events(weights: np.ndarray, X: np.ndarray):
    n = weights.size
    all_probs, all_means = [], []
    codes = np.arange(1, 1 << n, dtype=np.int64)
    bits = np.arange(n, dtype=np.int64)
    WX = weights[:, None] * X * weights[None, :]
    for start in range(0, codes.size, SUBSET_CHUNK):
        chunk = codes[start:start + SUBSET_CHUNK]
        masks = ((chunk[:, None] >> bits[None, :]) & 1).astype(float)
        probs = masks @ weights
        mass = np.einsum("ci,ij,cj->c", masks, WX, masks)
        all_probs.append(probs)
        all_means.append(mass / probs ** 2)
    return codes, np.concatenate(all_probs), np.concatenate(all_means)


def _greedy_chains(weights: np.ndarray, X: np.ndarray, starts: Optional[int] = None):
    """
    Nested events grown greedily from each starting alternate, adding at every step the
    alternate that maximizes the new conditional mean. Yields (probability, mean) pairs.
    """
    n = weights.size
    WX = X * weights[None, :]
    order = np.argsort(-np.diag(X))
    probs, means = [], []
    for start in order[: (starts or n)]:
        member = np.zeros(n, dtype=bool)
        member[start] = True
        W = weights[start]
        mass = weights[start] ** 2 * X[start, start]
        link = WX[:, start].copy()
        probs.append(W)
        means.append(mass / W ** 2)
        for _ in range(n - 1):
            gain = 2.0 * weights * link + weights ** 2 * np.diag(X)
            candidate = (mass + gain) / (W + weights) ** 2
            candidate[member] = -np.inf
            c = int(np.argmax(candidate))
            member[c] = True
            mass += gain[c]
            W += weights[c]
            link += WX[:, c]
            probs.append(W)
            means.append(mass / W ** 2)
    return np.array(probs), np.array(means)


def _sorted_marginal_certificate(X: np.ndarray, m: float) -> float:
    """
    Uniform priors: the mass of any s-subset is at most the sum of the s largest row
    top-s sums; returns the largest q for which this certifies every event of size >= n/q.
    """
    n = X.shape[0]
    rows_sorted = -np.sort(-X, axis=1)
    row_prefix = np.cumsum(rows_sorted, axis=1)
    ok = np.zeros(n + 1, dtype=bool)
    for s in range(1, n + 1):
        top_rows = -np.sort(-row_prefix[:, s - 1])
        ok[s] = top_rows[:s].sum() / (s * s) <= (1.0 / m) * (1.0 + THRESHOLD_RTOL)
    # q certified iff every size s >= ceil(n/q) is certified
    certified_from = n + 1
    for s in range(n, 0, -1):
        if not ok[s]:
            break
        certified_from = s
    if certified_from == 1:
        return math.inf
    if certified_from > n:
        return 0.0
    # largest q with ceil(n/q) >= certified_from
    return float(math.floor(n / (certified_from - 1) - 1e-12)) if certified_from > 1 else math.inf


def product_sda(problem: TestingProblem, m: float, exact_max: Optional[int] = None,
                starts: Optional[int] = None) -> SdaReport:
    """
    Largest q such that every product event A x A with Pr(A) >= 1/q has
    E[|X| | u, v in A] <= 1/m. Exact subset search up to `exact_max` alternates; beyond it
    the greedy violating events give q_upper (reported as q) and, for uniform priors, the
    sorted-marginal certificate gives q_lower.

    A violating event of mass 1/q certifies product-SDA < q, so the greedy value bounds the
    dimension from above; only q_lower is a certified lower bound on the greedy path.
    """
    if m <= 0:
        raise PreconditionError(f"oracle parameter m={m} must be positive", subject="m")
    require_explicit(problem.prior)
    weights, G = correlation_matrix(problem)
    X = np.abs(G - 1.0)
    report = SdaReport(m, math.inf, "product_sda", problem_id=problem.problem_id)
    if X.max() <= (1.0 / m) * (1.0 + THRESHOLD_RTOL):
        report.unbounded = True
        return report
    if weights.size <= (LIMITS["product_sda_exact_max"] if exact_max is None else exact_max):
        codes, probs, means = _exact_product_events(weights, X)
        q, index = _violation_bound(probs, means, m)
        report.q = q
        report.q_lower = report.q_upper = q
        report.extra["search"] = "exact"
    else:
        probs, means = _greedy_chains(weights, X, starts)
        q, index = _violation_bound(probs, means, m)
        report.q = report.q_upper = q
        uniform = np.allclose(weights, weights[0])
        report.q_lower = _sorted_marginal_certificate(X, m) if uniform else None
        report.extra["search"] = "greedy"
        logger.debug(f"product-SDA greedy bounds for {problem!r}: [{report.q_lower}, {report.q_upper}]")
    report.unbounded = math.isinf(report.q)
    if index is not None:
        report.witness_prob = float(probs[index])
        report.witness_mean = float(means[index])
    return report


def sda_profile(atoms: CorrelationAtoms, ms: List[float], cap: Optional[int] = None) -> List[SdaReport]:
    """SDA over several oracle parameters on one set of atoms."""
    return [sda_from_atoms(atoms, m, cap, bootstrap=0) for m in ms]
