"""Samples, ranks, and empirical marginal transforms.

Ranks use the max convention: the rank of observation ``i`` is the
number of sample values less than or equal to it, so tied values share
the highest position and ranks live in {1, ..., n} with R/n in (0, 1].
The quantile is the left-continuous generalized inverse of the
empirical CDF, ``Q(p) = inf{y : F_n(y) >= p}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "Sample",
    "compute_ranks",
    "empirical_cdf",
    "empirical_quantile",
]

_MARGINS = ("parent", "child")


def _clean_values(values, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InputError(f"{what} must be one-dimensional, got shape {v.shape}")
    if v.size == 0:
        raise InputError(f"{what} is empty")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{what} contains non-finite values")
    return v


@dataclass(frozen=True)
class Sample:
    """Paired parent/child incomes, optionally tagged with a group label.

    Arrays are validated (finite, equal length, nonempty) and frozen.
    ``group`` entries, when present, must be non-empty strings for every
    observation; partial labeling is rejected.
    """

    parent: np.ndarray
    child: np.ndarray
    group: np.ndarray | None = None

    def __post_init__(self):
        parent = _clean_values(self.parent, "parent income")
        child = _clean_values(self.child, "child income")
        if parent.size != child.size:
            raise InputError(
                f"parent/child lengths differ: {parent.size} vs {child.size}"
            )
        group = self.group
        if group is not None:
            group = np.asarray(group)
            if group.shape != parent.shape:
                raise InputError("group labels must match the sample length")
            labels = group.astype(str)
            if any(lab == "" or lab.lower() == "nan" for lab in labels):
                raise InputError("group labels must be non-empty for every row")
            group = labels
            group.setflags(write=False)
        parent.setflags(write=False)
        child.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "child", child)
        object.__setattr__(self, "group", group)

    @property
    def n(self) -> int:
        return int(self.parent.size)

    def take(self, indices) -> "Sample":
        """Row subset / resample by integer indices (bootstrap helper)."""
        idx = np.asarray(indices, dtype=np.intp)
        group = None if self.group is None else self.group[idx]
        return Sample(self.parent[idx], self.child[idx], group)

    def group_labels(self) -> tuple:
        """Sorted distinct group labels; empty tuple when untagged."""
        if self.group is None:
            return ()
        return tuple(sorted(set(self.group.tolist())))


def compute_ranks(sample: Sample, margin: str) -> np.ndarray:
    """Max-convention ranks of one margin of a sample.

    Parameters
    ----------
    sample : Sample
    margin : {"parent", "child"}

    Returns
    -------
    ndarray of int
        ``ranks[i]`` is the number of observations on that margin with
        value <= the i-th one.  Without ties this is a permutation of
        {1, ..., n}; ties share the maximal rank.
    """
    if margin not in _MARGINS:
        raise DomainError(f"margin must be 'parent' or 'child', got {margin!r}")
    values = sample.parent if margin == "parent" else sample.child
    order = np.sort(values)
    return np.searchsorted(order, values, side="right").astype(np.int64)


def empirical_cdf(values, y) -> np.ndarray | float:
    """Fraction of sample values <= y (scalar or elementwise on arrays)."""
    v = _clean_values(values, "sample values")
    order = np.sort(v)
    y_arr = np.asarray(y, dtype=np.float64)
    out = np.searchsorted(order, y_arr, side="right") / v.size
    return float(out) if np.isscalar(y) or y_arr.ndim == 0 else out


def empirical_quantile(values, p) -> np.ndarray | float:
    """Left-continuous empirical quantile, inf{y : F_n(y) >= p}.

    Implemented by indexing the order statistics with a searchsorted on
    the exact grid {1/n, ..., n/n}, which guarantees the round-trip
    ``empirical_cdf(values, empirical_quantile(values, p)) >= p`` in
    floating point, not just in exact arithmetic.
    """
    v = _clean_values(values, "sample values")
    order = np.sort(v)
    n = v.size
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr <= 0.0) or np.any(p_arr > 1.0):
        bad = p_arr[(p_arr <= 0.0) | (p_arr > 1.0)]
        raise DomainError(f"quantile level must lie in (0, 1], got {np.ravel(bad)[0]}")
    steps = np.arange(1, n + 1, dtype=np.float64) / n
    idx = np.searchsorted(steps, p_arr, side="left")
    out = order[idx]
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out
