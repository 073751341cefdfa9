"""
Scalar numerics shared by every module: binomials that survive m up to 1e9,
truncated exponential / central-binomial series, and compensated sums.
"""
import itertools
import math
from typing import Iterable, Optional, Union

import numpy as np
from scipy import special

from src.utils.errors import BinomialOverflowError

ArrayLike = Union[float, np.ndarray]

# largest exponent whose exp() is still a finite double
MAX_LOG_FLOAT = math.log(np.finfo(float).max)
# the `numerics` config section; configure_limits applies a loaded config or a CLI override
LIMITS = {
    "state_cap": 2 ** 22,
    "sda_q_cap": 10 ** 9,
    "exact_binomial_max_m": 60,
    "restriction_enum_max_n": 12,
    "product_sda_exact_max": 20,
    "certify_tol": 1e-9,
    "bootstrap_resamples": 200,
    "pair_chunk_rows": 256,
}


def configure_limits(numerics: dict) -> None:
    """Apply the `numerics` config section (e.g. a --cap-states override)."""
    for key, default in LIMITS.items():
        if key in numerics and numerics[key] is not None:
            LIMITS[key] = type(default)(numerics[key])


def is_unbounded(degree) -> bool:
    return degree is None or (isinstance(degree, float) and math.isinf(degree))


def log_binomial(m: float, t: int) -> float:
    if t < 0 or t > m:
        return -math.inf
    return float(special.gammaln(m + 1) - special.gammaln(t + 1) - special.gammaln(m - t + 1))


def binomial(m: float, t: int, exact_max_m: Optional[int] = None) -> float:
    """
    C(m, t) as a float: exact integer arithmetic for integral m <= exact_max_m,
    log-gamma otherwise; raises BinomialOverflowError when the value is not representable
    """
    if t < 0 or t > m:
        return 0.0
    exact_max_m = LIMITS["exact_binomial_max_m"] if exact_max_m is None else exact_max_m
    if float(m).is_integer() and m <= exact_max_m:
        return float(math.comb(int(m), int(t)))
    log_value = log_binomial(m, t)
    if log_value > MAX_LOG_FLOAT:
        raise BinomialOverflowError(
            f"C({m}, {t}) = exp({log_value:.1f}) is not representable as a double")
    return math.exp(log_value)


def fsum(values: Iterable[float]) -> float:
    """Compensated summation."""
    return math.fsum(float(v) for v in values)


def weighted_mean(weights: np.ndarray, values: np.ndarray) -> float:
    """Compensated E[values] under the (already normalized) weights."""
    products = np.asarray(weights, dtype=float) * np.asarray(values, dtype=float)
    return math.fsum(products.ravel().tolist())


def exp_head(c: ArrayLike, d) -> ArrayLike:
    """sum_{t <= d} c^t / t!  (d unbounded gives exp(c))."""
    c = np.asarray(c, dtype=float)
    if is_unbounded(d):
        return np.exp(c)
    term = np.ones_like(c)
    total = np.ones_like(c)
    for t in range(1, int(d) + 1):
        term = term * c / t
        total = total + term
    return total


def exp_tail(c: ArrayLike, d, rel_tol: float = 1e-18) -> ArrayLike:
    """
    sum_{t > d} c^t / t!, summed directly so that small tails do not cancel
    """
    c = np.asarray(c, dtype=float)
    if is_unbounded(d):
        return np.zeros_like(c)
    d = int(d)
    if d < 0:
        return np.exp(c)
    # first term c^(d+1)/(d+1)! built in log space to avoid overflow
    with np.errstate(divide="ignore"):
        log_abs = (d + 1) * np.log(np.abs(c)) - special.gammaln(d + 2)
    sign = np.where(c < 0, (-1.0) ** (d + 1), 1.0)
    term = np.where(c == 0, 0.0, sign * np.exp(np.minimum(log_abs, MAX_LOG_FLOAT)))
    total = term.copy()
    max_abs = float(np.max(np.abs(c))) if c.size else 0.0
    t = d + 1
    limit = d + 2 + int(math.ceil(2 * max_abs)) + 200
    while t < limit:
        t += 1
        term = term * c / t
        total = total + term
        if np.all(np.abs(term) <= rel_tol * np.abs(total)) and t > max_abs:
            break
    return total


def central_binomial_series_head(x: ArrayLike, ell) -> ArrayLike:
    """sum_{j <= ell} C(2j, j) x^j  (ell unbounded gives (1 - 4x)^(-1/2))."""
    x = np.asarray(x, dtype=float)
    if is_unbounded(ell):
        return 1.0 / np.sqrt(1.0 - 4.0 * x)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for j in range(1, int(ell) + 1):
        term = term * x * (2 * j) * (2 * j - 1) / (j * j)
        total = total + term
    return total


def central_binomial_series_tail(x: ArrayLike, ell, rel_tol: float = 1e-18,
                                 max_terms: int = 20000) -> ArrayLike:
    """sum_{j > ell} C(2j, j) x^j for |x| < 1/4."""
    x = np.asarray(x, dtype=float)
    if is_unbounded(ell):
        return np.zeros_like(x)
    ell = int(ell)
    if ell < 0:
        return 1.0 / np.sqrt(1.0 - 4.0 * x)
    term = np.ones_like(x)
    for j in range(1, ell + 2):
        term = term * x * (2 * j) * (2 * j - 1) / (j * j)
    total = term.copy()
    j = ell + 1
    while j < ell + 1 + max_terms:
        j += 1
        term = term * x * (2 * j) * (2 * j - 1) / (j * j)
        total = total + term
        if np.all(np.abs(term) <= rel_tol * np.abs(total)):
            break
    return total


def signed_power(x: ArrayLike, k: float) -> ArrayLike:
    """x^k for integer k (sign kept), |x|^k otherwise."""
    x = np.asarray(x, dtype=float)
    if float(k).is_integer():
        return x ** int(k)
    return np.abs(x) ** k


def root(value: float, k: float) -> float:
    """value^(1/k) for value >= 0, tolerating tiny negative rounding."""
    if value < 0:
        value = max(value, 0.0) if value > -1e-14 else value
    if value < 0:
        raise ValueError(f"negative value {value} has no real {k}-th root")
    return value ** (1.0 / k)


def colex_subsets(n: int, p: int) -> np.ndarray:
    """All p-subsets of range(n) in colexicographic order, one sorted subset per row."""
    combos = sorted(itertools.combinations(range(n), p), key=lambda c: c[::-1])
    return np.array(combos, dtype=int).reshape(-1, p)
