import os

import numpy as np
import pytest

from rankmobility.bernstein import bernstein_curve
from rankmobility.copulas import make_copula
from rankmobility.csvio import (
    read_income_csv,
    write_band_csv,
    write_curve_csv,
    write_metrics_csv,
    write_overlay_csv,
)
from rankmobility.errors import InputError
from rankmobility.inference import bootstrap_band, dominance_report
from rankmobility.ranks import Sample
from rankmobility.simulation import ExperimentConfig, overlay_rows, run_experiment


def _write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_read_income_csv_roundtrip(tmp_path):
    path = _write(
        tmp_path,
        "parent_income,child_income,group\n"
        "100.5,200.25,a\n"
        "\n"
        "300,12.5e1,b\n",
    )
    s = read_income_csv(path)
    assert s.n == 2
    assert list(s.parent) == [100.5, 300.0]
    assert list(s.child) == [200.25, 125.0]
    assert list(s.group) == ["a", "b"]


def test_read_income_csv_without_group_and_column_order(tmp_path):
    path = _write(
        tmp_path, "child_income,parent_income\n2,1\n4,3\n"
    )
    s = read_income_csv(path)
    assert s.group is None
    assert list(s.parent) == [1.0, 3.0]
    assert list(s.child) == [2.0, 4.0]


def test_read_income_csv_error_messages(tmp_path):
    with pytest.raises(InputError, match="cannot open"):
        read_income_csv(str(tmp_path / "absent.csv"))

    empty = _write(tmp_path, "", "empty.csv")
    with pytest.raises(InputError, match="empty file"):
        read_income_csv(empty)

    noheader = _write(tmp_path, "a,b\n1,2\n", "nohdr.csv")
    with pytest.raises(InputError, match="missing required column 'parent_income'"):
        read_income_csv(noheader)

    rows_only_header = _write(
        tmp_path, "parent_income,child_income\n", "hdr.csv"
    )
    with pytest.raises(InputError, match="no data rows"):
        read_income_csv(rows_only_header)

    badnum = _write(
        tmp_path, "parent_income,child_income\n1,2\n3,abc\n", "bad.csv"
    )
    with pytest.raises(
        InputError, match="line 3, column child_income: could not parse 'abc'"
    ):
        read_income_csv(badnum)

    nonfinite = _write(
        tmp_path, "parent_income,child_income\nnan,2\n", "nan.csv"
    )
    with pytest.raises(InputError, match="line 2, column parent_income: non-finite"):
        read_income_csv(nonfinite)

    ragged = _write(
        tmp_path, "parent_income,child_income\n1,2,3\n", "ragged.csv"
    )
    with pytest.raises(InputError, match="line 2: expected 2 fields, got 3"):
        read_income_csv(ragged)

    emptygroup = _write(
        tmp_path,
        "parent_income,child_income,group\n1,2,a\n3,4,\n",
        "gap.csv",
    )
    with pytest.raises(InputError, match="line 3: empty group label"):
        read_income_csv(emptygroup)


def test_write_curve_csv(tmp_path):
    rng = np.random.default_rng(0)
    s = Sample(parent=rng.standard_normal(40), child=rng.standard_normal(40))
    curve = bernstein_curve(s, 0.1, grid=np.array([0.3, 0.5]), order=4)
    out = tmp_path / "curve.csv"
    write_curve_csv(str(out), curve)
    lines = out.read_text().splitlines()
    assert lines[0] == "s,tau,estimate,estimator,n"
    assert len(lines) == 3
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.3
    assert float(cells[1]) == 0.1
    assert float(cells[2]) == curve.values[0]
    assert cells[3] == "ebc(m=4)"
    assert cells[4] == "40"

    # repr formatting: parsing the text back reproduces the float bit
    # for bit
    assert float(cells[2]) == curve.values[0]


def test_write_band_csv_with_dominance_footer(tmp_path):
    rng = np.random.default_rng(1)
    s = Sample(parent=rng.standard_normal(50), child=rng.standard_normal(50))
    band = bootstrap_band(
        s,
        lambda smp, tau, grid: bernstein_curve(smp, tau, grid=grid),
        0.0,
        np.array([0.4, 0.6]),
        n_boot=50,
        rng=2,
    )
    out = tmp_path / "band.csv"
    write_band_csv(str(out), band, dominance=dominance_report(band))
    lines = out.read_text().splitlines()
    assert lines[0] == (
        "s,center,pointwise_lo,pointwise_hi,uniform_lo,uniform_hi,sigma"
    )
    data = lines[1].split(",")
    assert float(data[1]) == band.center[0]
    assert float(data[6]) == band.sigma[0]
    footer = [l for l in lines if l.startswith("#")]
    keys = {l.split(",")[0] for l in footer}
    assert keys == {
        "# estimator",
        "# tau",
        "# alpha",
        "# n_boot",
        "# critical_value",
        "# dominance_intervals",
        "# dominance_nonempty",
        "# violation",
    }
    assert "# n_boot,50" in footer
    assert f"# critical_value,{band.critical_value!r}" in footer


def test_write_metrics_and_overlay_csv(tmp_path):
    cfg = ExperimentConfig(
        model=make_copula("independence"),
        n=30,
        reps=3,
        tau=0.1,
        grid=np.array([0.4, 0.6]),
        estimators=("beta", "ebc-sqrt-n"),
        seed=9,
    )
    res = run_experiment(cfg, keep_rep_curves=1)

    mpath = tmp_path / "metrics.csv"
    write_metrics_csv(str(mpath), res)
    lines = mpath.read_text().splitlines()
    assert lines[0] == (
        "family,n,reps,tau,seed,estimator,risb_x100,rimse_x100,failures"
    )
    assert len(lines) == 3
    row = lines[1].split(",")
    assert row[0] == "independence"
    assert row[:6] == ["independence", "30", "3", "0.1", "9", "beta"]
    assert float(row[7]) == res.metric("beta").rimse_x100

    opath = tmp_path / "overlay.csv"
    write_overlay_csv(str(opath), overlay_rows(res))
    olines = opath.read_text().splitlines()
    assert olines[0] == "s,value,series"
    # 2 grid points x (true + 2 means + 2 kept reps)
    assert len(olines) == 1 + 2 * 5
    assert olines[1].split(",")[2] == "true"


def test_writes_are_atomic_and_leave_no_temp_files(tmp_path):
    rng = np.random.default_rng(3)
    s = Sample(parent=rng.standard_normal(30), child=rng.standard_normal(30))
    curve = bernstein_curve(s, 0.0, grid=np.array([0.5]), order=3)
    out = tmp_path / "curve.csv"
    write_curve_csv(str(out), curve)
    first = out.read_text()

    # same content rewritten over the existing file, no .tmp remnants
    write_curve_csv(str(out), curve)
    assert out.read_text() == first
    assert [p.name for p in tmp_path.iterdir()] == ["curve.csv"]


def test_failed_write_cleans_up_temp_file(tmp_path):
    from rankmobility.csvio import _write_rows

    out = tmp_path / "x.csv"

    def rows():
        yield ("h1", "h2")
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError, match="boom"):
        _write_rows(str(out), rows())
    assert list(tmp_path.iterdir()) == []
