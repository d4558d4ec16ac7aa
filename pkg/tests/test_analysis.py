import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fracomp.analysis import bin_average, correlation_table, pearson_with_ci, write_correlation_csv
from fracomp.errors import DegenerateVariance, EmptyInput, LengthMismatch
from fracomp.fitting import FitResult
from fracomp.population import BatchEntry, BatchResult, SubjectMeta, SubjectRecord
from fracomp.spectral import Waveform


def test_two_bins_over_ten():
    x = np.linspace(0, 10, 100, endpoint=False)
    centers, means = bin_average(x, x, 5.0)
    np.testing.assert_allclose(centers, [2.5, 7.5])
    assert means.size == 2


def test_constant_y():
    x = np.random.default_rng(0).uniform(0, 30, 50)
    _, means = bin_average(x, np.full(50, 4.2), 5.0)
    np.testing.assert_allclose(means, 4.2)


def test_bin_errors():
    with pytest.raises(LengthMismatch):
        bin_average([1, 2], [1], 1.0)
    with pytest.raises(EmptyInput):
        bin_average([], [], 1.0)


def test_exact_linearity_collapses_ci():
    x = np.arange(10.0)
    assert pearson_with_ci(x, 2 * x + 1) == (1.0, 1.0, 1.0)
    r, lo, hi = pearson_with_ci(x, -x)
    assert r == -1.0 and lo == hi == -1.0


def test_pearson_matches_scipy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    y = 0.5 * x + rng.normal(size=40)
    r, lo, hi = pearson_with_ci(x, y, 0.9)
    ref = stats.pearsonr(x, y)
    ci = ref.confidence_interval(0.9)
    assert r == pytest.approx(ref.statistic, rel=1e-12)
    assert lo == pytest.approx(ci.low, rel=1e-9)
    assert hi == pytest.approx(ci.high, rel=1e-9)


def test_pearson_errors():
    with pytest.raises(EmptyInput):
        pearson_with_ci([1, 2], [3, 4])
    with pytest.raises(DegenerateVariance):
        pearson_with_ci([1, 1, 1], [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=5, max_size=30), st.floats(0.5, 0.99))
def test_ci_contains_r(xs, conf):
    x = np.asarray(xs)
    y = np.sin(x) + 0.1 * x
    if np.ptp(x) < 1e-6 or np.ptp(y) < 1e-6:
        return
    r, lo, hi = pearson_with_ci(x, y, conf)
    assert -1 <= lo <= r <= hi <= 1


def _record(sid, sbp):
    w = Waveform(np.ones(8), 0.1)
    return SubjectRecord(sid, w, w, SubjectMeta(sbp=sbp))


def _batch(alphas):
    entries = []
    for i, a in enumerate(alphas):
        res = FitResult("A", (1.0, float(a)), ("C_alpha", "alpha"), 0.1, 1.0, 0.0, 0.0,
                        True, 5, 12)
        entries.append(BatchEntry(f"s{i:03d}", "A", res))
    return BatchResult(tuple(entries), ("A",))


def test_positive_correlation_reported():
    sbp = np.linspace(100, 160, 40)
    subjects = [_record(f"s{i:03d}", v) for i, v in enumerate(sbp)]
    with pytest.warns(UserWarning):
        reports = correlation_table(_batch(0.3 + 0.004 * (sbp - 100)), subjects)
    row = [r for r in reports if (r.model, r.parameter, r.determinant) == ("A", "alpha", "SBP")]
    assert row and row[0].r > 0.99 and row[0].n_bins == 13  # 160 opens the 13th bin


def test_too_few_bins_row_omitted():
    sbp = np.array([100.0, 101.0, 102.0, 107.0])
    subjects = [_record(f"s{i:03d}", v) for i, v in enumerate(sbp)]
    with pytest.warns(UserWarning, match="only 2 bins"):
        reports = correlation_table(_batch([0.5, 0.51, 0.52, 0.6]), subjects,
                                    determinants=("SBP",))
    assert reports == []


def test_correlation_csv_layout(tmp_path):
    sbp = np.linspace(100, 160, 40)
    subjects = [_record(f"s{i:03d}", v) for i, v in enumerate(sbp)]
    with pytest.warns(UserWarning):
        reports = correlation_table(_batch(0.3 + 0.004 * (sbp - 100)), subjects)
    path = tmp_path / "c.csv"
    write_correlation_csv(reports, path, "# test\n")
    lines = path.read_text().splitlines()
    assert lines[0] == "# test"
    rows = list(csv.DictReader(lines[1:]))
    assert [(r["model"], r["parameter"]) for r in rows] == [("A", "alpha"), ("A", "eta_r")]
    assert float(rows[0]["SBP"]) > 0.99
