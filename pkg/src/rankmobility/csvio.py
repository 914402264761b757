"""CSV input/output for the command-line surface.

Income files: header ``parent_income,child_income[,group]``, UTF-8,
comma-separated, decimal points.  Outputs are long-format tables;
floats are written with ``repr`` so identical results are byte-
identical files.  All writes go through a temp file and an atomic
rename.
"""

from __future__ import annotations

import csv
import os
import tempfile

import numpy as np

from .errors import InputError
from .ranks import Sample

__all__ = [
    "read_income_csv",
    "write_curve_csv",
    "write_band_csv",
    "write_metrics_csv",
    "write_overlay_csv",
]

_REQUIRED = ("parent_income", "child_income")


def read_income_csv(path: str) -> Sample:
    """Parse an income CSV into a Sample, naming the offending line on error."""
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        for col in _REQUIRED:
            if col not in header:
                raise InputError(
                    f"{path}: missing required column {col!r} (header {header})"
                )
        has_group = "group" in header
        ip = header.index("parent_income")
        ic = header.index("child_income")
        ig = header.index("group") if has_group else None

        parents, children, groups = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            for col, j, dest in (
                ("parent_income", ip, parents),
                ("child_income", ic, children),
            ):
                text = row[j].strip()
                try:
                    value = float(text)
                except ValueError:
                    raise InputError(
                        f"{path}: line {lineno}, column {col}: "
                        f"could not parse {text!r} as a number"
                    ) from None
                if not np.isfinite(value):
                    raise InputError(
                        f"{path}: line {lineno}, column {col}: non-finite value {text!r}"
                    )
                dest.append(value)
            if has_group:
                label = row[ig].strip()
                if not label:
                    raise InputError(
                        f"{path}: line {lineno}: empty group label "
                        "(group column must be fully populated)"
                    )
                groups.append(label)
    if not parents:
        raise InputError(f"{path}: no data rows")
    return Sample(parents, children, np.array(groups) if has_group else None)


def _atomic_writer(path: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    return fd, tmp


def _write_rows(path: str, rows) -> None:
    fd, tmp = _atomic_writer(path)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for row in rows:
                writer.writerow(row)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x))


def write_curve_csv(path: str, curve) -> None:
    """Long-format curve table: s, tau, estimate, estimator, n."""
    rows = [("s", "tau", "estimate", "estimator", "n")]
    for s, v in zip(curve.grid, curve.values):
        rows.append((_fmt(s), _fmt(curve.tau), _fmt(v), curve.estimator, curve.n))
    _write_rows(path, rows)


def write_band_csv(path: str, band, dominance=None) -> None:
    """Band table plus a commented summary block.

    Data columns: s, center, pointwise_lo/hi, uniform_lo/hi, sigma.
    The trailing ``#``-prefixed lines carry run metadata and, for
    difference bands, the dominance summary.
    """
    rows = [
        (
            "s",
            "center",
            "pointwise_lo",
            "pointwise_hi",
            "uniform_lo",
            "uniform_hi",
            "sigma",
        )
    ]
    for i, s in enumerate(band.grid):
        rows.append(
            (
                _fmt(s),
                _fmt(band.center[i]),
                _fmt(band.pointwise_lo[i]),
                _fmt(band.pointwise_hi[i]),
                _fmt(band.uniform_lo[i]),
                _fmt(band.uniform_hi[i]),
                _fmt(band.sigma[i]),
            )
        )
    fd, tmp = _atomic_writer(path)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for row in rows:
                writer.writerow(row)
            handle.write(f"# estimator,{band.estimator}\n")
            handle.write(f"# tau,{_fmt(band.tau)}\n")
            handle.write(f"# alpha,{_fmt(band.alpha)}\n")
            handle.write(f"# n_boot,{band.n_boot}\n")
            handle.write(f"# critical_value,{_fmt(band.critical_value)}\n")
            if band.redraws:
                handle.write(f"# redraws,{band.redraws}\n")
            if dominance is not None:
                spans = ";".join(f"{lo:g}-{hi:g}" for lo, hi in dominance.intervals)
                handle.write(f"# dominance_intervals,{spans}\n")
                handle.write(
                    f"# dominance_nonempty,{str(dominance.any_dominance).lower()}\n"
                )
                handle.write(f"# violation,{str(dominance.violation).lower()}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metrics_csv(path: str, result) -> None:
    """One row per estimator with the x100 integrated metrics."""
    rows = [
        (
            "family",
            "n",
            "reps",
            "tau",
            "seed",
            "estimator",
            "risb_x100",
            "rimse_x100",
            "failures",
        )
    ]
    for m in result.metrics:
        rows.append(
            (
                result.family,
                result.n,
                result.reps,
                _fmt(result.tau),
                result.seed_used,
                m.estimator,
                _fmt(m.risb_x100),
                _fmt(m.rimse_x100),
                m.failures,
            )
        )
    _write_rows(path, rows)


def write_overlay_csv(path: str, rows) -> None:
    """Overlay rows (s, value, series) for plotting."""
    out = [("s", "value", "series")]
    for row in rows:
        out.append((_fmt(row["s"]), _fmt(row["value"]), row["series"]))
    _write_rows(path, out)
