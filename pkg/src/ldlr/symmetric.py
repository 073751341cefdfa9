"""
Elementary symmetric polynomials e_t(x) = sum over |S| = t of prod_{i in S} x_i.
"""
import numpy as np

from src.utils.errors import PreconditionError


def elementary_symmetric_all(x, t_max: int = None) -> np.ndarray:
    """
    All e_0..e_{t_max} along the last axis of x by the stable recurrence
    E_t <- E_t + x_i * E_{t-1} (no Newton power sums, no cancellation for |x_i| <= 1).

    Args:
        x: array of shape (..., n)
        t_max: highest order needed (defaults to n)

    Returns:
        array of shape (..., t_max + 1)
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    t_max = n if t_max is None else min(int(t_max), n)
    out = np.zeros(x.shape[:-1] + (t_max + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        xi = x[..., i:i + 1]
        # right-hand side is built from the previous row: each x_i enters a monomial once
        out[..., 1:] = out[..., 1:] + xi * out[..., :-1]
    return out


def elementary_symmetric(x, t: int) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if t < 0 or t > x.size:
        raise PreconditionError(f"order t={t} outside [0, {x.size}]", subject="t")
    return float(elementary_symmetric_all(x, t)[t])
