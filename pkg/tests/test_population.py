import csv

import numpy as np
import pytest
from scipy.stats import spearmanr

from fracomp.errors import FracompError, InconsistentWaveLengths, ParseError
from fracomp.fitting import FitConfig
from fracomp.models import evaluate
from fracomp.population import (
    CSV_HEADER,
    SyntheticSpec,
    aggregate,
    batch_fit,
    cohort_from_config,
    ground_truth_compliance,
    half_sine_flow,
    load_subjects_csv,
    model_summary,
    save_subjects_csv,
    synthesize_subject,
)
from fracomp.spectral import Waveform, compute_spectrum

from conftest import make_spec


def _cohort(model, n, theta_low, theta_high, seed=1, **extra):
    cfg = {"model": model, "n_subjects": n, "theta_low": theta_low, "theta_high": theta_high,
           "seed": seed, **extra}
    return [synthesize_subject(s) for s in cohort_from_config(cfg)]


def test_half_sine_matches_sampled_pulse():
    hr, peak = 72.0, 350.0
    period = 60 / hr
    n = 4096
    t = np.arange(n) * period / n
    d = period / 3
    x = np.where(t < d, peak * np.sin(np.pi * t / d), 0.0)
    dft = compute_spectrum(Waveform(x, period / n), 12.0).coefficients
    exact = half_sine_flow(hr, peak)
    np.testing.assert_allclose(dft, exact, atol=2e-3 * peak / n * 10)


def test_half_sine_has_no_zero_harmonic():
    for hr in (50, 60, 66, 75, 84.11, 90, 100):
        q = half_sine_flow(hr)
        assert np.min(np.abs(q[1:])) > 1e-3 * np.abs(q[1])


def test_voigt_subject_pipeline_inversion():
    spec = make_spec("G", (0.1, 1.3))
    omega, truth = ground_truth_compliance(spec)
    got = synthesize_subject(spec).compliance()
    np.testing.assert_allclose(got.values, truth, rtol=1e-10)
    assert got.r_app == pytest.approx(spec.r_app, rel=1e-14)


def test_dc_only_subject():
    spec = SyntheticSpec("A", (1.0, 0.5), r_app=1.2, heart_rate=60, flow_harmonics=[80.0])
    subj = synthesize_subject(spec)
    np.testing.assert_allclose(subj.pressure.samples, 96.0, rtol=1e-15)
    m = subj.meta
    assert m.sbp == pytest.approx(m.dbp) and m.mbp == pytest.approx(96.0)


def test_spec_validation():
    with pytest.raises(FracompError):
        SyntheticSpec("A", (1.0, 0.5), r_app=1.0, heart_rate=60, flow_harmonics=[0.0, 1.0])
    with pytest.raises(FracompError):
        SyntheticSpec("A", (1.0, 0.5), r_app=-1.0, heart_rate=60, flow_harmonics=[80.0])


def test_csv_round_trip_is_bit_exact(tmp_path):
    subjects = _cohort("A", 3, [0.5, 0.3], [2.0, 0.9], pwv_a=[4.0, 10.0], age_group=[25, 35])
    path = tmp_path / "s.csv"
    save_subjects_csv(subjects, path)
    back = load_subjects_csv(path)
    assert len(back) == 3
    for a, b in zip(subjects, back):
        assert a.id == b.id
        np.testing.assert_array_equal(a.pressure.samples, b.pressure.samples)
        np.testing.assert_array_equal(a.flow.samples, b.flow.samples)
        assert a.pressure.sample_period == b.pressure.sample_period
        assert a.meta == b.meta


def test_two_subjects_500_samples(tmp_path):
    path = tmp_path / "two.csv"
    t = np.arange(500) / 500
    p = ";".join(repr(float(v)) for v in 90 + 20 * np.sin(2 * np.pi * t))
    q = ";".join(repr(float(v)) for v in 80 + 60 * np.sin(2 * np.pi * t + 0.4))
    cols = [c for c in CSV_HEADER if c != "pwv_cf"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for sid in ("x1", "x2"):
            row = {c: "" for c in cols}
            row.update(id=sid, sample_period=repr(1 / 500), pressure=p, flow=q, sbp="110")
            w.writerow([row[c] for c in cols])
    recs = load_subjects_csv(path)
    assert [r.id for r in recs] == ["x1", "x2"]
    assert recs[0].pressure.samples.size == 500
    assert recs[0].meta.pwv_cf is None and recs[0].meta.sbp == 110.0


def test_loader_reports_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,sample_period,pressure,flow\n"
                    "a,0.01,1;2;3,4;5;6\n"
                    "b,0.01,1;oops;3,4;5;6\n")
    with pytest.raises(ParseError) as ei:
        load_subjects_csv(path)
    assert ei.value.row == 3 and ei.value.column == "pressure"


def test_loader_rejects_unequal_lengths(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,sample_period,pressure,flow\na,0.01,1;2;3,4;5\n")
    with pytest.raises(InconsistentWaveLengths):
        load_subjects_csv(path)


def test_batch_single_subject_single_model():
    subj = synthesize_subject(make_spec("A", (1.0, 0.6)))
    out = batch_fit([subj], ["A"])
    assert len(out.entries) == 1 and out.entries[0].ok


def test_batch_mean_alpha_matches_generator():
    specs = cohort_from_config({"model": "A", "n_subjects": 10, "theta_low": [0.5, 0.3],
                                "theta_high": [2.0, 0.9], "seed": 4})
    out = batch_fit([synthesize_subject(s) for s in specs], ["A"])
    mean_hat = np.mean([r.alpha for r in out.results("A")])
    mean_true = np.mean([s.theta[1] for s in specs])
    assert mean_hat == pytest.approx(mean_true, abs=1e-3)


def test_alpha_rank_correlated_with_age():
    rng = np.random.default_rng(9)
    ages = np.repeat([25, 35, 45, 55, 65], 10)
    specs = []
    for i, age in enumerate(ages):
        alpha = 0.3 + 0.01 * (age - 25) + 0.001 * i / 50
        specs.append(make_spec("A", (rng.uniform(0.8, 1.5), alpha), id=f"s{i:02d}", age_group=age))
    subjects = [synthesize_subject(s) for s in specs]
    out = batch_fit(subjects, ["A"], workers=2)
    alphas = [out.get(s.id, "A").result.alpha for s in subjects]
    assert np.all(np.diff(alphas) > 0)
    assert spearmanr(ages, alphas).statistic > 0.97


def test_failures_are_recorded_not_raised():
    # HR 75 leaves 9 harmonics: too few for the 9-parameter model
    subj = synthesize_subject(make_spec("G", (0.1, 1.3), heart_rate=75))
    out = batch_fit([subj], ["G", "F"])
    assert out.get(subj.id, "G").ok
    f = out.get(subj.id, "F")
    assert not f.ok and "TooFewHarmonics" in f.error
    summary = {r["model"]: r for r in model_summary(out)}
    assert summary["F"]["n_failed"] == 1 and summary["G"]["n"] == 1


def test_aggregate_groups_by_age_and_heart_rate():
    subjects = _cohort("A", 6, [0.5, 0.3], [2.0, 0.9], age_group=[25, 35],
                       heart_rate=[60, 60, 60, 60, 60, 60])
    out = batch_fit(subjects, ["A", "G"])
    stats = aggregate(out, subjects)
    keys = {(s.age_group, s.heart_rate, s.model) for s in stats}
    assert keys == {(25, 60.0, "A"), (35, 60.0, "A"), (25, 60.0, "G"), (35, 60.0, "G")}
    alpha = [s for s in stats if s.age_group == 25 and s.model == "A" and s.quantity == "param:alpha"]
    assert alpha[0].n == 3


def test_cohort_config_rejects_unknown_keys():
    with pytest.raises(FracompError):
        cohort_from_config({"model": "A", "theta": [1, 0.5], "colour": "red"})


def test_generator_compliance_equals_model():
    spec = make_spec("D", (0.05, 2.0, 1.4))
    omega, truth = ground_truth_compliance(spec)
    np.testing.assert_array_equal(truth, evaluate("D", spec.theta, omega))
