"""Bootstrap confidence bands for mobility curves and group contrasts.

Resampling is by observation rows (nonparametric iid bootstrap) and the
full estimation pipeline runs on every resample, so the bands carry the
estimation effect of ranks/quantiles, not just sampling noise in the
final probabilities.  Uniform bands use the sup-t critical value; it is
floored at the pointwise normal quantile so the uniform band always
contains the pointwise one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .curves import band_grid, validate_grid
from .errors import DomainError, EstimationError, InputError
from .distreg import DRSpec, _conditional_curves_shared_fit
from .ranks import Sample

__all__ = [
    "BandResult",
    "DominanceReport",
    "bootstrap_band",
    "difference_band",
    "dominance_report",
]

_SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class BandResult:
    """Curve estimate with pointwise and uniform bootstrap bands.

    ``sigma`` holds the bootstrap pointwise standard deviations;
    ``retained`` marks grid points with non-degenerate sigma (points
    below the floor get zero-width bands and are excluded from the
    sup-t statistic).
    """

    grid: np.ndarray
    center: np.ndarray
    sigma: np.ndarray
    pointwise_lo: np.ndarray
    pointwise_hi: np.ndarray
    uniform_lo: np.ndarray
    uniform_hi: np.ndarray
    retained: np.ndarray
    alpha: float
    n_boot: int
    critical_value: float
    tau: float
    estimator: str
    redraws: int = 0

    def __post_init__(self):
        for name in (
            "center",
            "sigma",
            "pointwise_lo",
            "pointwise_hi",
            "uniform_lo",
            "uniform_hi",
        ):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != np.shape(self.grid):
                raise DomainError(f"{name} does not match the grid shape")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _check_band_args(n_boot: int, alpha: float):
    if n_boot < 50:
        raise DomainError(f"need at least 50 bootstrap replications, got {n_boot}")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _bands_from_draws(g, center, boot, alpha, n_boot, tau, tag, redraws=0):
    sigma = boot.std(axis=0, ddof=1)
    retained = sigma > _SIGMA_FLOOR
    z = float(special.ndtri(1.0 - alpha / 2.0))
    if retained.any():
        t_stats = (
            np.abs(boot[:, retained] - center[retained]) / sigma[retained]
        ).max(axis=1)
        crit = max(float(np.quantile(t_stats, 1.0 - alpha)), z)
    else:
        crit = z
    half_u = np.where(retained, crit * sigma, 0.0)
    half_p = np.where(retained, z * sigma, 0.0)
    return BandResult(
        grid=g,
        center=center,
        sigma=sigma,
        pointwise_lo=center - half_p,
        pointwise_hi=center + half_p,
        uniform_lo=center - half_u,
        uniform_hi=center + half_u,
        retained=retained,
        alpha=alpha,
        n_boot=n_boot,
        critical_value=crit,
        tau=tau,
        estimator=tag,
        redraws=redraws,
    )


def bootstrap_band(
    sample: Sample,
    estimator,
    tau: float,
    grid=None,
    n_boot: int = 500,
    alpha: float = 0.05,
    rng=None,
) -> BandResult:
    """Pointwise and uniform bands for one curve estimator.

    ``estimator`` is any callable ``(sample, tau, grid) -> CurveEstimate``;
    it is re-run from scratch on every resample.
    """
    _check_band_args(n_boot, alpha)
    if grid is None:
        grid = band_grid(tau)
    g = validate_grid(grid, tau)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    center_curve = estimator(sample, tau, g)
    center = np.asarray(center_curve.values)
    n = sample.n
    boot = np.empty((n_boot, g.size))
    for b in range(n_boot):
        idx = gen.integers(0, n, size=n)
        boot[b] = estimator(sample.take(idx), tau, g).values
    return _bands_from_draws(
        g, center, boot, alpha, n_boot, tau, center_curve.estimator
    )


def difference_band(
    sample: Sample,
    spec: DRSpec,
    group_a: str,
    group_b: str,
    tau: float,
    grid=None,
    n_boot: int = 500,
    alpha: float = 0.05,
    rng=None,
) -> BandResult:
    """Bands for the curve contrast group_a minus group_b.

    Uses the grouped distribution regression with pooled rank anchors.
    Resamples that lose one of the two groups entirely are redrawn (the
    contrast is undefined there); the redraw count is reported, and
    more than 10 * n_boot redraws aborts.
    """
    _check_band_args(n_boot, alpha)
    if sample.group is None:
        raise InputError("sample has no group column")
    labels = sample.group_labels()
    for lab in (group_a, group_b):
        if lab not in labels:
            raise InputError(f"unknown group {lab!r}; sample has {labels}")
    if group_a == group_b:
        raise DomainError("the two groups must differ")
    if grid is None:
        grid = band_grid(tau)
    g = validate_grid(grid, tau)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    # Both group curves come from the same interacted fit, so each
    # resample is fitted once and evaluated twice.  The previous fit
    # seeds the next one; resamples that lose a third label fall back
    # to a cold start automatically.
    last_fit = None

    def contrast(s: Sample) -> np.ndarray:
        nonlocal last_fit
        fit, (ca, cb) = _conditional_curves_shared_fit(
            s, spec, (group_a, group_b), tau, g, init=last_fit
        )
        last_fit = fit
        return ca.values - cb.values

    center = contrast(sample)
    n = sample.n
    boot = np.empty((n_boot, g.size))
    redraws = 0
    for b in range(n_boot):
        while True:
            idx = gen.integers(0, n, size=n)
            drawn = sample.group[idx]
            if (drawn == group_a).any() and (drawn == group_b).any():
                break
            redraws += 1
            if redraws > 10 * n_boot:
                raise EstimationError(
                    "too many resamples missing a group; groups too small "
                    "for a bootstrap contrast"
                )
        boot[b] = contrast(sample.take(idx))
    tag = f"dr({spec.link},{spec.design}|{group_a}-{group_b})"
    return _bands_from_draws(g, center, boot, alpha, n_boot, tau, tag, redraws)


@dataclass(frozen=True)
class DominanceReport:
    """Where the uniform band for a contrast sits strictly above zero.

    ``intervals`` lists (lo, hi) grid sub-ranges of significant
    positive difference; ``violation`` is True when the band sits
    strictly below zero somewhere (the reverse ordering is
    significant).
    """

    grid: np.ndarray
    positive: np.ndarray
    intervals: tuple
    violation: bool
    alpha: float

    @property
    def any_dominance(self) -> bool:
        return bool(self.positive.any())


def dominance_report(band: BandResult) -> DominanceReport:
    """Summarize a difference band into dominance evidence."""
    pos = band.uniform_lo > 0.0
    neg = band.uniform_hi < 0.0
    intervals = []
    start = None
    for i, flag in enumerate(pos):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append((float(band.grid[start]), float(band.grid[i - 1])))
            start = None
    if start is not None:
        intervals.append((float(band.grid[start]), float(band.grid[-1])))
    return DominanceReport(
        grid=band.grid,
        positive=pos,
        intervals=tuple(intervals),
        violation=bool(neg.any()),
        alpha=band.alpha,
    )
