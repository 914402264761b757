"""Curve containers and evaluation grids.

A mobility curve maps a parent rank ``s`` to the probability that the
child's rank exceeds ``s + tau``.  Every estimator in this package
returns a :class:`CurveEstimate`; the container validates the grid once
so downstream code can assume a clean, strictly increasing interior
grid with ``s + tau < 1`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["CurveEstimate", "make_grid", "default_grid", "band_grid", "validate_grid"]


def make_grid(start: float, stop: float, step: float = 0.01) -> np.ndarray:
    """Evenly spaced grid built on integer multiples of ``step``.

    Avoids accumulating float error from repeated addition: grid points
    are computed as ``k * step`` for integer ``k``, so ``make_grid(0.01,
    0.99)`` reproduces the canonical percentile grid exactly.
    """
    if step <= 0:
        raise DomainError(f"grid step must be positive, got {step}")
    k0 = round(start / step)
    k1 = round(stop / step)
    if not (np.isclose(k0 * step, start) and np.isclose(k1 * step, stop)):
        raise DomainError(
            f"start/stop ({start}, {stop}) are not integer multiples of step {step}"
        )
    if k1 < k0:
        raise DomainError(f"empty grid: start {start} > stop {stop}")
    ks = np.arange(k0, k1 + 1, dtype=np.float64)
    # k * 0.01 and k / 100 are different floats for some k; divide by
    # the reciprocal when the step is a unit fraction so the canonical
    # percentile grid comes out bit-exact.
    inv = 1.0 / step
    if round(inv) >= 1 and abs(inv - round(inv)) < 1e-9 * inv:
        grid = ks / round(inv)
    else:
        grid = ks * step
    if grid[0] <= 0.0 or grid[-1] >= 1.0:
        raise DomainError("grid points must lie strictly inside (0, 1)")
    return grid


def default_grid(tau: float = 0.0) -> np.ndarray:
    """Percentile grid {0.01, 0.02, ..., 0.99} used for curve estimates.

    Intersected with {s : s + tau < 1}, so the default stays valid for
    any upward offset.  Explicit user grids are not trimmed; they fail
    validation instead.
    """
    g = np.arange(1, 100, dtype=np.float64) / 100.0
    return g[g + tau < 1.0]


def band_grid(tau: float = 0.0) -> np.ndarray:
    """Trimmed grid {0.05, ..., 0.95} used for uniform confidence bands.

    Like :func:`default_grid`, intersected with {s : s + tau < 1}.
    """
    g = np.arange(5, 96, dtype=np.float64) / 100.0
    return g[g + tau < 1.0]


def validate_grid(grid: np.ndarray, tau: float) -> np.ndarray:
    """Check a grid/tau pair and return the grid as a float array.

    Requirements: strictly increasing, every point in (0, 1), ``tau`` in
    [0, 1), and ``s + tau < 1`` at every point so the shifted rank
    ``s + tau`` stays a valid probability.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("grid must be a nonempty 1-d array")
    if not np.all(np.isfinite(g)):
        raise DomainError("grid contains non-finite values")
    if np.any(np.diff(g) <= 0):
        raise DomainError("grid must be strictly increasing")
    if g[0] <= 0.0 or g[-1] >= 1.0:
        raise DomainError("grid points must lie strictly inside (0, 1)")
    if not (0.0 <= tau < 1.0):
        raise DomainError(f"tau must lie in [0, 1), got {tau}")
    top = g[-1] + tau
    if top >= 1.0:
        raise DomainError(
            f"s + tau must stay below 1: offending point s={g[-1]:g} with tau={tau:g}"
        )
    return g


@dataclass(frozen=True)
class CurveEstimate:
    """An estimated (or true) upward mobility curve on a rank grid.

    Parameters
    ----------
    grid : ndarray
        Parent-rank evaluation points, strictly increasing in (0, 1).
    values : ndarray
        Curve values, same length as ``grid``.
    tau : float
        Upward threshold; the curve is P(child rank > s + tau | parent
        rank = s).
    estimator : str
        Short tag describing how the curve was produced, e.g.
        ``"ebc(m=15)"``, ``"beta"``, ``"dr(logit,linear)"``,
        ``"true(gaussian)"``.
    n : int
        Sample size behind the estimate (0 for model-implied curves).
    flags : tuple of str
        Per-point diagnostic flags, empty string when clean.  Same
        length as ``grid`` when present.
    warnings : tuple of str
        Curve-level warnings (e.g. a small conditioning group).
    """

    grid: np.ndarray
    values: np.ndarray
    tau: float
    estimator: str
    n: int
    flags: tuple = ()
    warnings: tuple = ()

    def __post_init__(self):
        g = validate_grid(self.grid, self.tau)
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != g.shape:
            raise DomainError(
                f"values shape {v.shape} does not match grid shape {g.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("curve values contain non-finite entries")
        if self.flags and len(self.flags) != g.size:
            raise DomainError("flags must be empty or match the grid length")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flags", tuple(self.flags))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n_points(self) -> int:
        return int(self.grid.size)

    def flagged_count(self) -> int:
        """Number of grid points carrying a non-empty flag."""
        return sum(1 for f in self.flags if f)
