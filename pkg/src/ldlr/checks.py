"""
Numeric verifiers for the LDLR inequalities: Hoelder split, samplewise boosting, the
Gaussian and product-measure high-degree bounds, the elementary-symmetric claims and
monotonicity of the LDLR in (d, k, m).
"""
import itertools
import math
from typing import Iterable, List

import numpy as np

from src.ldlr.brute_force import brute_force_ldlr
from src.ldlr.norms import (SamplewiseDegree, centered_low_degree_from_table, high_degree_from_table,
                            ldlr_from_table, require_even)
from src.ldlr.symmetric import elementary_symmetric_all
from src.measures.correlation import correlation_table
from src.measures.distributions import NullAlternate, ProductAlternate, ProductNull, require_explicit
from src.measures.kernels import TestingProblem
from src.utils.errors import UnsupportedBackendError
from src.utils.numerics import binomial, is_unbounded, root
from src.utils.report_utils import CheckReport, margin_report, report_errors

IDENTITY_TOL = 1e-9
MARGIN_TOL = 1e-10


@report_errors("identity")
def identity_check(problem: TestingProblem, m: int, degree: SamplewiseDegree,
                   tol: float = IDENTITY_TOL) -> CheckReport:
    """Multi-sample identity against the brute-force projection."""
    table = correlation_table(problem, (degree.d,))
    identity = ldlr_from_table(table, m, degree).value
    brute = brute_force_ldlr(problem, m, degree)
    gap = abs(identity - brute)
    return CheckReport("identity", passed=gap <= tol, margin=tol - gap,
                       values={"identity": identity, "brute_force": brute, "m": m,
                               "d": degree.d, "k": degree.k})


@report_errors("holder_split")
def holder_split_check(problem: TestingProblem, d, k: int, tol: float = MARGIN_TOL) -> CheckReport:
    """
    ||E(Dbar-1)^{(x)k}||^{2/k} <= ||E(Dbar^{<=d}-1)^{(x)k}||^{2/k} + ||E(Dbar^{>d})^{(x)k}||^{2/k}
    """
    require_even(k)
    table = correlation_table(problem, (d,))
    full_centered = table.expectation((table.full - 1.0) ** k)
    low_centered = centered_low_degree_from_table(table, d, k)
    high = high_degree_from_table(table, d, k)
    lhs = root(full_centered, k)
    rhs = root(low_centered, k) + root(high, k)
    return margin_report("holder_split", lhs, rhs, tol,
                         {"full_centered": full_centered, "low_centered": low_centered,
                          "high_degree": high, "d": d, "k": k})


@report_errors("boosting")
def boosting_bound_check(problem: TestingProblem, m: int, d, k: int, tol: float = MARGIN_TOL) -> CheckReport:
    """
    ||E(Dbar^{<=d}-1)^{(x)k}||^2 <= ||E(Dbar^{(x)m})^{<=d,k} - 1||^2 / C(m, k)
    """
    require_even(k)
    degree = SamplewiseDegree(d, k)
    table = correlation_table(problem, (d,))
    lhs = centered_low_degree_from_table(table, d, k)
    report = ldlr_from_table(table, m, degree)
    rhs = report.value / binomial(m, k)
    return margin_report("boosting", lhs, rhs, tol,
                         {"ldlr": report.value, "contributions": report.contributions, "m": m, "d": d, "k": k})


@report_errors("gaussian_high_degree")
def gaussian_high_degree_bound(problem: TestingProblem, d: int, k: int, tol: float = MARGIN_TOL) -> CheckReport:
    """
    Mean-shift problems: ||E(Dbar^{>d})^{(x)k}||^{2/k}
        <= E[<mu_u,mu_v>^{2k(d+1)}]^{1/2k} (1 + E<Dbar_u,Dbar_v>^{2k})^{1/2k} / (d+1)!
    """
    require_even(k)
    table = correlation_table(problem, (d,))
    full = table.full
    if np.any(full <= 0):
        raise UnsupportedBackendError("mean-shift correlations must be positive")
    c = np.log(full)
    lhs = root(high_degree_from_table(table, d, k), k)
    moment = table.expectation(c ** (2 * k * (d + 1)))
    rhs = (root(moment, 2 * k) * root(1.0 + table.expectation(full ** (2 * k)), 2 * k)
           / math.factorial(d + 1))
    return margin_report("gaussian_high_degree", lhs, rhs, tol, {"d": d, "k": k})


@report_errors("product_high_degree")
def product_high_degree_bound(problem: TestingProblem, d: int, k: int, tol: float = MARGIN_TOL) -> CheckReport:
    """
    Product alternates: ||E(Dbar^{>d})^{(x)k}||^2
        <= E[(<Dbar_u^{<=1}, Dbar_v^{<=1}> - 1)^{2k(d+1)}]^{1/2} ||E Dbar^{(x)2k}||
    """
    require_even(k)
    table = correlation_table(problem, (d, 1))
    lhs = high_degree_from_table(table, d, k)
    linear = table.correlation(1) - 1.0
    rhs = (math.sqrt(max(table.expectation(linear ** (2 * k * (d + 1))), 0.0))
           * math.sqrt(table.expectation(table.full ** (2 * k))))
    return margin_report("product_high_degree", lhs, rhs, tol, {"d": d, "k": k})


def bias_vectors(problem: TestingProblem) -> np.ndarray:
    """u_i = E_{D_u} chi_i for binary product alternates (one row per alternate)."""
    null = problem.null
    if not isinstance(null, ProductNull) or null.alphabet_size != 2:
        raise UnsupportedBackendError("bias vectors need a binary product null")
    prior = require_explicit(problem.prior)
    basis = null.character_basis()
    rows = []
    for alternate in prior.alternates:
        if isinstance(alternate, NullAlternate):
            rows.append(np.zeros(null.n_coords))
        elif isinstance(alternate, ProductAlternate):
            rows.append(np.array([alternate.probs[j] @ basis[j][1] for j in range(null.n_coords)]))
        else:
            raise UnsupportedBackendError("the symmetric-polynomial claims need product alternates")
    return np.stack(rows)


def _monomial_positive_polynomials(x: np.ndarray, d: int) -> List[np.ndarray]:
    e = elementary_symmetric_all(x)
    tail = e[..., d + 1:].sum(axis=-1) if d + 1 < e.shape[-1] else np.zeros(x.shape[:-1])
    return [np.ones(x.shape[:-1]), e[..., 1], e[..., 1] * e[..., 2] if e.shape[-1] > 2 else e[..., 1],
            tail, tail ** 3, x[..., 0] ** 2, np.prod(x, axis=-1) ** 2]


@report_errors("symmetric_claims")
def symmetric_claims_check(problem: TestingProblem, max_order: int = 4, d: int = 1,
                           tol: float = 1e-12) -> CheckReport:
    """
    E_{u,v}(u o v)^A = (E_u u^A)^2 >= 0 for multisets A, and
    E[e_{a+b}(u o v) p(u o v)] <= E[e_a e_b p] for monomial-positive p.
    """
    U = bias_vectors(problem)
    weights = require_explicit(problem.prior).weights
    n = U.shape[1]
    pair_w = np.outer(weights, weights)
    X = U[:, None, :] * U[None, :, :]
    worst = math.inf
    monomial_failures = 0
    for order in range(1, max_order + 1):
        for A in itertools.combinations_with_replacement(range(n), order):
            pair_moment = float(np.sum(pair_w * np.prod(X[..., list(A)], axis=-1)))
            square = float(weights @ np.prod(U[:, list(A)], axis=-1)) ** 2
            if pair_moment < -tol or abs(pair_moment - square) > 1e-10:
                monomial_failures += 1
            worst = min(worst, pair_moment)
    e = elementary_symmetric_all(X)
    claim_margin = math.inf
    for p in _monomial_positive_polynomials(X, d):
        for a in range(1, n):
            for b in range(1, n - a + 1):
                lhs = float(np.sum(pair_w * e[..., a + b] * p))
                rhs = float(np.sum(pair_w * e[..., a] * e[..., b] * p))
                claim_margin = min(claim_margin, rhs - lhs)
    passed = monomial_failures == 0 and claim_margin >= -tol
    return CheckReport("symmetric_claims", passed=passed, margin=claim_margin,
                       values={"min_monomial_moment": worst, "monomial_failures": monomial_failures,
                               "min_product_claim_margin": claim_margin})


@report_errors("monotonicity")
def monotonicity_check(problem: TestingProblem, ms: Iterable[int], ds: Iterable, ks: Iterable[int],
                       rel_tol: float = 1e-10) -> CheckReport:
    """LDLR is nondecreasing in each of d, k and m on the given grid."""
    ms, ks = sorted(ms), sorted(ks)
    ds = sorted(ds, key=lambda d: math.inf if is_unbounded(d) else d)
    table = correlation_table(problem, ds)
    grid = np.full((len(ds), len(ks), len(ms)), np.nan)
    for (i, d), (j, k), (l, m) in itertools.product(enumerate(ds), enumerate(ks), enumerate(ms)):
        if k <= m:
            grid[i, j, l] = ldlr_from_table(table, m, SamplewiseDegree(d, k)).value
    violations = 0
    for axis in range(3):
        diffs = np.diff(grid, axis=axis)
        scale = np.maximum(np.abs(np.delete(grid, 0, axis=axis)), 1.0)
        violations += int(np.sum(np.nan_to_num(diffs, nan=0.0) < -rel_tol * scale))
    return CheckReport("monotonicity", passed=violations == 0, values={"violations": violations,
                                                                       "grid": grid.tolist()})
