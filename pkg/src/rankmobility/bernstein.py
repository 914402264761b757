"""Nonparametric copula-based estimators of the upward mobility curve.

The curve u(tau, s) = P(child rank > s + tau | parent rank = s) equals
``1 - dC/du0 (s, s + tau)`` for the joint rank copula C.  Estimation
therefore reduces to smoothing the empirical copula and reading off the
partial derivative in the parent argument.

Two smoothers are provided.  The Bernstein estimator of order m forms

    m * sum_{k<m} sum_{l<=m} [C_n((k+1)/m, l/m) - C_n(k/m, l/m)]
        * P_{m-1,k}(u0) * P_{m,l}(u1)

with binomial weights P_{m,k}(u) = C(m,k) u^k (1-u)^(m-k).  The beta
estimator is the m = n special case rewritten as an average of beta
densities/CDFs evaluated at the observation ranks, which costs O(n)
per point instead of O(m^2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .curves import CurveEstimate, default_grid, validate_grid
from .errors import DomainError, EstimationError
from .ranks import Sample, compute_ranks

__all__ = [
    "default_order",
    "empirical_copula",
    "copula_grid",
    "bernstein_deriv",
    "beta_deriv",
    "bernstein_curve",
    "beta_curve",
    "interval_mobility",
]


def default_order(n: int) -> int:
    """Default Bernstein order ceil(sqrt(n))."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    return math.isqrt(n - 1) + 1


def _check_ranks(ranks0, ranks1):
    r0 = np.asarray(ranks0, dtype=np.int64)
    r1 = np.asarray(ranks1, dtype=np.int64)
    if r0.shape != r1.shape or r0.ndim != 1 or r0.size == 0:
        raise DomainError("rank vectors must be nonempty 1-d arrays of equal length")
    n = r0.size
    for r in (r0, r1):
        if r.min() < 1 or r.max() > n:
            raise DomainError("ranks must lie in {1, ..., n}")
    return r0, r1, n


def empirical_copula(ranks0, ranks1, u0, u1):
    """Empirical copula C_n(u0, u1) from rank vectors.

    Counts observations with R0/n <= u0 and R1/n <= u1.  Accepts scalar
    or broadcastable array arguments for the evaluation point.
    """
    r0, r1, n = _check_ranks(ranks0, ranks1)
    u0a = np.asarray(u0, dtype=np.float64)
    u1a = np.asarray(u1, dtype=np.float64)
    if np.any((u0a < 0) | (u0a > 1)) or np.any((u1a < 0) | (u1a > 1)):
        raise DomainError("copula arguments must lie in [0, 1]")
    s0 = r0 / n
    s1 = r1 / n
    hits = (s0 <= u0a[..., None]) & (s1 <= u1a[..., None])
    out = hits.sum(axis=-1) / n
    if np.isscalar(u0) and np.isscalar(u1):
        return float(out)
    return out


def copula_grid(ranks0, ranks1, order: int) -> np.ndarray:
    """Empirical copula on the (order+1) x (order+1) lattice {k/order}.

    Binning uses searchsorted against the exact float lattice, so a
    rank ratio R/n that is bitwise equal to a lattice point lands in
    the cell closed on the right, matching the <= in C_n.  With
    order == n this makes the grid value at (k/n, l/n) count ranks
    exactly, which is what the m = n Bernstein/beta identity needs.
    """
    r0, r1, n = _check_ranks(ranks0, ranks1)
    m = int(order)
    if m < 1 or m > n:
        raise DomainError(f"order must lie in [1, n={n}], got {order}")
    edges = np.arange(m + 1, dtype=np.float64) / m
    b0 = np.searchsorted(edges, r0 / n, side="left")
    b1 = np.searchsorted(edges, r1 / n, side="left")
    counts = np.zeros((m + 1, m + 1), dtype=np.float64)
    np.add.at(counts, (b0, b1), 1.0)
    return counts.cumsum(axis=0).cumsum(axis=1) / n


def _bernstein_weights(m_row: int, u: np.ndarray) -> np.ndarray:
    # rows: evaluation points; cols: k = 0..m_row
    k = np.arange(m_row + 1)
    return stats.binom.pmf(k[None, :], m_row, u[:, None])


def _bernstein_deriv_points(cgrid: np.ndarray, m: int, u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    d = np.diff(cgrid, axis=0)  # (m, m+1) forward differences in the parent argument
    w0 = _bernstein_weights(m - 1, u0)
    w1 = _bernstein_weights(m, u1)
    return m * np.einsum("pk,kl,pl->p", w0, d, w1, optimize=True)


def bernstein_deriv(ranks0, ranks1, order: int, u0: float, u1: float) -> float:
    """Bernstein-smoothed partial derivative dC/du0 at one point.

    Not clipped: the raw estimate can leave [0, 1] slightly near the
    boundary of the square.  Curve assembly clips; equivalence tests
    need the raw value.
    """
    cg = copula_grid(ranks0, ranks1, order)
    m = int(order)
    if not (0.0 <= u0 <= 1.0 and 0.0 <= u1 <= 1.0):
        raise DomainError("evaluation point must lie in the unit square")
    out = _bernstein_deriv_points(cg, m, np.array([u0]), np.array([u1]))
    return float(out[0])


def beta_deriv(ranks0, ranks1, u0, u1):
    """Beta-copula partial derivative dC/du0, clipped to [0, 1].

    Average over observations of beta(r0, n+1-r0) density at u0 times
    beta(r1, n+1-r1) CDF at u1.  Algebraically equal to the order-n
    Bernstein derivative when the data are tie-free.
    """
    r0, r1, n = _check_ranks(ranks0, ranks1)
    u0a = np.atleast_1d(np.asarray(u0, dtype=np.float64))
    u1a = np.atleast_1d(np.asarray(u1, dtype=np.float64))
    if u0a.shape != u1a.shape:
        u0a, u1a = np.broadcast_arrays(u0a, u1a)
    if np.any((u0a <= 0) | (u0a >= 1)):
        raise DomainError("u0 must lie strictly inside (0, 1) for the beta derivative")
    if np.any((u1a < 0) | (u1a > 1)):
        raise DomainError("u1 must lie in [0, 1]")
    dens = stats.beta.pdf(u0a[..., None], r0, n + 1.0 - r0)
    cum = stats.beta.cdf(u1a[..., None], r1, n + 1.0 - r1)
    vals = np.clip((dens * cum).mean(axis=-1), 0.0, 1.0)
    if np.isscalar(u0) and np.isscalar(u1):
        return float(vals[0])
    return vals


def _resolve_orders(order, n: int, n_points: int) -> np.ndarray:
    if order is None:
        order = default_order(n)
    arr = np.asarray(order)
    if arr.ndim == 0:
        arr = np.full(n_points, int(arr), dtype=np.int64)
    else:
        arr = arr.astype(np.int64)
        if arr.shape != (n_points,):
            raise DomainError("per-point order array must match the grid length")
    if arr.min() < 1 or arr.max() > n:
        raise DomainError(f"Bernstein order must lie in [1, n={n}]")
    return arr


def bernstein_curve(sample: Sample, tau: float, grid=None, order=None) -> CurveEstimate:
    """Upward mobility curve from the Bernstein copula derivative.

    Parameters
    ----------
    sample : Sample
    tau : float
        Upward threshold in [0, 1).
    grid : array_like, optional
        Parent-rank evaluation points; defaults to percentiles.
    order : int or array_like, optional
        Smoothing order m, a single value or one per grid point.
        Defaults to ceil(sqrt(n)).

    Values are ``1 - dC/du0(s, s+tau)`` clipped to [0, 1].
    """
    if grid is None:
        grid = default_grid(tau)
    g = validate_grid(grid, tau)
    r0 = compute_ranks(sample, "parent")
    r1 = compute_ranks(sample, "child")
    n = sample.n
    orders = _resolve_orders(order, n, g.size)
    values = np.empty(g.size, dtype=np.float64)
    for m in np.unique(orders):
        mask = orders == m
        cg = copula_grid(r0, r1, int(m))
        values[mask] = _bernstein_deriv_points(cg, int(m), g[mask], g[mask] + tau)
    values = np.clip(1.0 - values, 0.0, 1.0)
    if np.unique(orders).size == 1:
        tag = f"ebc(m={int(orders[0])})"
    else:
        tag = "ebc(m=pointwise)"
    return CurveEstimate(g, values, tau, tag, n)


def beta_curve(sample: Sample, tau: float, grid=None) -> CurveEstimate:
    """Upward mobility curve from the beta copula derivative."""
    if grid is None:
        grid = default_grid(tau)
    g = validate_grid(grid, tau)
    r0 = compute_ranks(sample, "parent")
    r1 = compute_ranks(sample, "child")
    values = 1.0 - beta_deriv(r0, r1, g, g + tau)
    return CurveEstimate(g, values, tau, "beta", sample.n)


def interval_mobility(sample: Sample, tau: float, s1: float, s2: float) -> float:
    """Fraction of children out-ranking their parents by more than tau,
    among parents whose rank falls in [s1, s2].

    A direct sample proportion, no smoothing.  Raises if no parent rank
    lands in the interval.
    """
    if not (0.0 < s1 < s2 < 1.0):
        raise DomainError(f"need 0 < s1 < s2 < 1, got ({s1}, {s2})")
    if not (0.0 <= tau <= 1.0 - s2):
        raise DomainError(f"tau must lie in [0, {1.0 - s2:g}], got {tau}")
    n = sample.n
    r0 = compute_ranks(sample, "parent") / n
    r1 = compute_ranks(sample, "child") / n
    sel = (r0 >= s1) & (r0 <= s2)
    if not sel.any():
        raise EstimationError(
            f"no parent ranks in [{s1:g}, {s2:g}] (n={n}); widen the interval"
        )
    return float(np.mean(r1[sel] > r0[sel] + tau))
