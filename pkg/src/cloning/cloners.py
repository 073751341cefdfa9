"""
Exact one-sample -> m-sample reductions and their inverses.

Gaussian cloning rotates (x, Z_2, ..., Z_m) by an orthogonal matrix whose first column is
1/sqrt(m): N(mu, 1) becomes m independent N(mu/sqrt(m), 1). Bernoulli cloning maps a bit
x ~ Ber(gamma) to m i.i.d. Ber(gamma^{1/m}) bits whose AND is x. Planted-clique cloning
applies the Bernoulli clone to every hyperedge indicator.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import stats

from src.utils.errors import DimensionMismatchError, PreconditionError
from src.utils.logger import Logger
from src.utils.report_utils import CheckReport, report_errors
from src.utils.seeding import derive_rng

logger = Logger().get_logger()


@dataclass(frozen=True)
class CloneConfig:
    m: int
    gamma: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise PreconditionError(f"clone count m={self.m} must be >= 1", subject="m")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise PreconditionError(f"base density gamma={self.gamma} must lie in (0, 1)", subject="gamma")

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise PreconditionError("Bernoulli cloning needs a base density gamma", subject="gamma")
        return self.gamma


# ---------------------------------------------------------------- Gaussian

def householder_vector(m: int) -> np.ndarray:
    """v with (Id - 2 v v^T / v^T v) e_1 = 1/sqrt(m); zero when m == 1."""
    v = -np.full(m, 1.0 / math.sqrt(m))
    v[0] += 1.0
    return v


def householder_matrix(m: int) -> np.ndarray:
    """Symmetric orthogonal matrix whose first column is the constant 1/sqrt(m)."""
    v = householder_vector(m)
    norm_sq = float(v @ v)
    if norm_sq == 0.0:
        return np.eye(m)
    return np.eye(m) - 2.0 * np.outer(v, v) / norm_sq


def _reflect(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    norm_sq = float(v @ v)
    if norm_sq == 0.0:
        return z
    return z - np.outer(z @ v, v) * (2.0 / norm_sq)


def gaussian_clone(x, config: CloneConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    One value (or a vector of independent trials) -> m values per trial; shape (m,) for a
    scalar input, (trials, m) otherwise.
    """
    rng = rng or derive_rng(config.seed, "gaussian_clone")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    z = np.empty((flat.size, config.m))
    z[:, 0] = flat
    z[:, 1:] = rng.standard_normal((flat.size, config.m - 1))
    y = _reflect(z, householder_vector(config.m))
    return y[0] if x.ndim == 0 else y


def gaussian_unclone(y) -> np.ndarray:
    """sum_i y_i / sqrt(m) along the last axis."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] == 0:
        raise DimensionMismatchError("cannot unclone an empty sample")
    return y.sum(axis=-1) / math.sqrt(y.shape[-1])


# ---------------------------------------------------------------- Bernoulli

def support_size_pmf(m: int, gamma: float) -> np.ndarray:
    """
    Law of |y|_1 for the clone of x = 0: C(m, j) g^j (1-g)^{m-j} / (1 - gamma), j < m,
    with g = gamma^{1/m}; evaluated in log space and normalized explicitly.
    """
    log_g = math.log(gamma) / m
    log_one_minus_g = math.log(-math.expm1(log_g))
    j = np.arange(m)
    log_binom = (math.lgamma(m + 1) - np.array([math.lgamma(t + 1) for t in j])
                 - np.array([math.lgamma(m - t + 1) for t in j]))
    log_pmf = log_binom + j * log_g + (m - j) * log_one_minus_g - math.log(-math.expm1(math.log(gamma)))
    pmf = np.exp(log_pmf - log_pmf.max())
    return pmf / pmf.sum()


def bernoulli_clone(x, config: CloneConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Bits (scalar or array of trials) -> m bits each. x = 1 maps to all ones; x = 0 draws a
    support size below m by inverse CDF and places it uniformly.
    """
    gamma = config.require_gamma()
    rng = rng or derive_rng(config.seed, "bernoulli_clone")
    x = np.asarray(x)
    flat = x.reshape(-1).astype(int)
    if np.any((flat != 0) & (flat != 1)):
        raise PreconditionError("Bernoulli cloning needs 0/1 inputs", subject="x")
    m = config.m
    out = np.ones((flat.size, m), dtype=np.int8)
    zeros = np.flatnonzero(flat == 0)
    if zeros.size:
        cdf = np.cumsum(support_size_pmf(m, gamma))
        sizes = np.minimum(np.searchsorted(cdf, rng.random(zeros.size), side="right"), m - 1)
        ranks = np.argsort(np.argsort(rng.random((zeros.size, m)), axis=1), axis=1)
        out[zeros] = (ranks < sizes[:, None]).astype(np.int8)
    return out[0] if x.ndim == 0 else out


def bernoulli_unclone(y) -> np.ndarray:
    """AND along the last axis."""
    y = np.asarray(y)
    return np.prod(y, axis=-1).astype(np.int8)


def clone_pattern_probabilities(m: int, gamma: float) -> np.ndarray:
    """
    Exact law of the clone of x = 0 over the 2^m patterns (pattern index bit i = y_i).
    """
    pmf = support_size_pmf(m, gamma)
    patterns = np.arange(2 ** m)
    weights = np.array([bin(p).count("1") for p in patterns])
    probs = np.zeros(2 ** m)
    for size in range(m):
        mask = weights == size
        probs[mask] = pmf[size] / math.comb(m, size)
    return probs


# ---------------------------------------------------------------- planted clique

def pc_clone(graph, config: CloneConfig, edge_probs=None,
             rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Hyperedge indicator vector -> (m, E) array of cloned graphs. Every edge must be drawn
    with probability gamma or forced present (probability 1).
    """
    gamma = config.require_gamma()
    graph = np.asarray(graph)
    if graph.ndim != 1:
        raise DimensionMismatchError("a hypergraph is a flat vector of hyperedge indicators")
    if edge_probs is not None:
        edge_probs = np.asarray(edge_probs, dtype=float)
        if edge_probs.shape != graph.shape:
            raise DimensionMismatchError("one edge probability per hyperedge is required")
        allowed = np.isclose(edge_probs, gamma, atol=1e-12) | np.isclose(edge_probs, 1.0, atol=1e-12)
        if not np.all(allowed):
            raise PreconditionError("planted-clique cloning only handles edge probabilities gamma and 1",
                                    subject="edge_probs")
    rng = rng or derive_rng(config.seed, "pc_clone")
    return bernoulli_clone(graph, config, rng).T.copy()


def pc_unclone(graphs) -> np.ndarray:
    """Entrywise AND of m hyperedge indicator vectors."""
    graphs = np.asarray(graphs)
    if graphs.ndim != 2:
        raise DimensionMismatchError("expected an (m, E) stack of hypergraphs")
    return np.prod(graphs, axis=0).astype(np.int8)


# ---------------------------------------------------------------- statistical validation

def bernoulli_clone_gof(config: CloneConfig, trials: int) -> Dict[str, float]:
    """
    Chi-square goodness of fit of clone patterns from x ~ Ber(gamma) against m i.i.d.
    Ber(gamma^{1/m}) bits over all 2^m outcomes.
    """
    gamma = config.require_gamma()
    rng = derive_rng(config.seed, "gof", config.m)
    x = (rng.random(trials) < gamma).astype(int)
    clones = bernoulli_clone(x, config, rng)
    codes = clones.astype(int) @ (1 << np.arange(config.m))
    observed = np.bincount(codes, minlength=2 ** config.m)
    g = gamma ** (1.0 / config.m)
    ones = np.array([bin(p).count("1") for p in range(2 ** config.m)])
    expected = g ** ones * (1.0 - g) ** (config.m - ones)
    statistic, p_value = stats.chisquare(observed, expected * (observed.sum() / expected.sum()))
    marginal = clones.mean(axis=0)
    logger.info(f"bernoulli clone m={config.m} gamma={gamma}: chi2={statistic:.3f} p={p_value:.4f}")
    return {"m": config.m, "gamma": gamma, "trials": trials, "statistic": float(statistic),
            "p_value": float(p_value), "max_marginal_error": float(np.max(np.abs(marginal - g)))}


def gaussian_clone_moments(config: CloneConfig, trials: int, mu: float = 0.0) -> Dict[str, float]:
    """
    Clones of x ~ N(mu, 1): per-coordinate means and pairwise correlations, plus Mardia
    skewness/kurtosis with their asymptotic 4-sigma bands.
    """
    rng = derive_rng(config.seed, "gaussian_moments", config.m)
    x = mu + rng.standard_normal(trials)
    y = gaussian_clone(x, config, rng)
    m = config.m
    band = 4.0 / math.sqrt(trials)
    means = y.mean(axis=0) - mu / math.sqrt(m)
    corr = np.corrcoef(y, rowvar=False) if m > 1 else np.ones((1, 1))
    off_diagonal = corr[~np.eye(m, dtype=bool)] if m > 1 else np.zeros(0)
    centered = y - y.mean(axis=0)
    cov = centered.T @ centered / trials
    w = np.linalg.solve(np.linalg.cholesky(cov), centered.T).T
    third = np.einsum("ni,nj,nk->ijk", w, w, w) / trials
    skewness = float(np.sum(third ** 2))
    kurtosis = float(np.mean(np.sum(w ** 2, axis=1) ** 2))
    df = m * (m + 1) * (m + 2) / 6.0
    skew_stat = trials * skewness / 6.0
    kurt_mean = m * (m + 2.0)
    kurt_sd = math.sqrt(8.0 * m * (m + 2.0) / trials)
    return {
        "m": m, "trials": trials, "band": band,
        "max_mean_error": float(np.max(np.abs(means))),
        "max_correlation": float(np.max(np.abs(off_diagonal))) if off_diagonal.size else 0.0,
        "mardia_skewness_stat": skew_stat,
        "skewness_ok": bool(abs(skew_stat - df) <= 4.0 * math.sqrt(2.0 * df)),
        "mardia_kurtosis": kurtosis,
        "kurtosis_ok": bool(abs(kurtosis - kurt_mean) <= 4.0 * kurt_sd),
    }


# ---------------------------------------------------------------- suite checks

ORTHOGONALITY_TOL = 1e-12


@report_errors("clone_round_trip")
def clone_round_trip_check(config: CloneConfig, trials: int = 1000) -> CheckReport:
    """AND of Bernoulli clones, scaled sum of Gaussian clones and AND of PC clones recover the input."""
    rng = derive_rng(config.seed, "round_trip", config.m)
    gamma = config.require_gamma()
    bits = (rng.random(trials) < gamma).astype(int)
    bernoulli_ok = bool(np.array_equal(bernoulli_unclone(bernoulli_clone(bits, config, rng)), bits))
    x = rng.standard_normal(trials)
    gaussian_gap = float(np.max(np.abs(gaussian_unclone(gaussian_clone(x, config, rng)) - x)))
    graph = (rng.random(trials) < gamma).astype(np.int8)
    pc_ok = bool(np.array_equal(pc_unclone(pc_clone(graph, config, rng=rng)), graph))
    passed = bernoulli_ok and pc_ok and gaussian_gap <= 1e-10
    return CheckReport("clone_round_trip", passed=passed,
                       values={"m": config.m, "bernoulli_exact": bernoulli_ok, "pc_exact": pc_ok,
                               "gaussian_max_gap": gaussian_gap})


@report_errors("householder")
def householder_check(m: int, tol: float = ORTHOGONALITY_TOL) -> CheckReport:
    """H H^T = Id and the first column is the constant 1/sqrt(m)."""
    H = householder_matrix(m)
    orthogonality = float(np.max(np.abs(H @ H.T - np.eye(m))))
    column = float(np.max(np.abs(H[:, 0] - 1.0 / math.sqrt(m))))
    gap = max(orthogonality, column)
    return CheckReport("householder", passed=gap <= tol, margin=tol - gap,
                       values={"m": m, "orthogonality_gap": orthogonality, "first_column_gap": column})


@report_errors("bernoulli_gof")
def bernoulli_gof_check(config: CloneConfig, trials: int, alpha: float = 0.001) -> CheckReport:
    stats_record = bernoulli_clone_gof(config, trials)
    return CheckReport("bernoulli_gof", passed=stats_record["p_value"] > alpha,
                       margin=stats_record["p_value"] - alpha, values={**stats_record, "alpha": alpha})


@report_errors("gaussian_moments")
def gaussian_moment_check(config: CloneConfig, trials: int, mu: float = 0.0) -> CheckReport:
    """Means and correlations inside 4/sqrt(trials), Mardia statistics inside their 4-sigma bands."""
    record = gaussian_clone_moments(config, trials, mu)
    passed = (record["max_mean_error"] <= record["band"] and record["max_correlation"] <= record["band"]
              and record["skewness_ok"] and record["kurtosis_ok"])
    return CheckReport("gaussian_moments", passed=passed, values=record)
