"""Subject records, a ground-truth synthetic generator, and cohort batch fitting.

Subject CSV layout (UTF-8, '.' decimal separator)::

    id,age_group,heart_rate,sbp,dbp,mbp,app,pwv_a,pwv_cf,sample_period,pressure,flow

``pressure`` and ``flow`` each hold one cardiac cycle as a semicolon-separated
list of numbers. Metadata columns may be missing or empty.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DivergentCompliance,
    FracompError,
    InconsistentWaveLengths,
    ParseError,
)
from .fitting import FitConfig, FitFailure, FitResult, fit_models
from .models import MODEL_TAGS, check_theta, evaluate, get_model
from .spectral import DEFAULT_FMAX, HarmonicSpectrum, Waveform, measure_compliance, synthesize

META_FIELDS = ("age_group", "heart_rate", "sbp", "dbp", "mbp", "app", "pwv_a", "pwv_cf")
CSV_HEADER = ("id",) + META_FIELDS + ("sample_period", "pressure", "flow")


@dataclass(frozen=True)
class SubjectMeta:
    age_group: float | None = None
    heart_rate: float | None = None
    sbp: float | None = None
    dbp: float | None = None
    mbp: float | None = None
    app: float | None = None
    pwv_a: float | None = None
    pwv_cf: float | None = None

    def get(self, name: str):
        return getattr(self, name.lower())


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    pressure: Waveform
    flow: Waveform
    meta: SubjectMeta = field(default_factory=SubjectMeta)

    def __post_init__(self):
        if self.pressure.samples.size != self.flow.samples.size:
            raise InconsistentWaveLengths(
                f"subject {self.id}: pressure has {self.pressure.samples.size} samples, "
                f"flow has {self.flow.samples.size}")
        if not math.isclose(self.pressure.sample_period, self.flow.sample_period, rel_tol=1e-12):
            raise InconsistentWaveLengths(
                f"subject {self.id}: pressure and flow sample periods differ")

    def compliance(self, f_max: float = DEFAULT_FMAX):
        return measure_compliance(self.pressure, self.flow, f_max)


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground truth for one synthetic subject.

    ``flow_harmonics`` holds the one-sided flow spectrum c_0..c_K (ml/s) at
    the fundamental ``heart_rate / 60`` Hz.
    """

    model: str
    theta: tuple[float, ...]
    r_app: float
    heart_rate: float
    flow_harmonics: np.ndarray
    samples_per_cycle: int = 256
    id: str = "synthetic"
    age_group: float | None = None
    pwv_a: float | None = None
    pwv_cf: float | None = None

    def __post_init__(self):
        q = np.asarray(self.flow_harmonics, dtype=complex).ravel()
        if q.size == 0 or not q[0].real > 0:
            raise FracompError("flow DC component must be > 0")
        if self.samples_per_cycle < 64:
            raise FracompError("samples_per_cycle must be >= 64")
        if self.samples_per_cycle < 2 * q.size - 1:
            raise FracompError(
                f"{self.samples_per_cycle} samples per cycle cannot carry {q.size - 1} harmonics")
        if not self.r_app > 0:
            raise FracompError("r_app must be > 0")
        if not self.heart_rate > 0:
            raise FracompError("heart_rate must be > 0")
        object.__setattr__(self, "model", get_model(self.model).tag)
        object.__setattr__(self, "theta", tuple(float(v) for v in check_theta(self.model, self.theta)))
        object.__setattr__(self, "flow_harmonics", q)

    @property
    def fundamental_hz(self) -> float:
        return self.heart_rate / 60.0


def half_sine_flow(heart_rate: float = 75.0, peak: float = 400.0, ejection_fraction: float = 1.0 / 3.0,
                   f_max: float = DEFAULT_FMAX) -> np.ndarray:
    """Exact Fourier coefficients of a half-sine ejection pulse, up to ``f_max``.

    The pulse is ``peak * sin(pi t / d)`` for ``0 <= t < d = ejection_fraction * T``
    and zero for the rest of the cycle.
    """
    period = 60.0 / heart_rate
    d = ejection_fraction * period
    k_max = int(math.floor(f_max * period * (1 + 1e-12)))
    k = np.arange(k_max + 1)
    beta = 2 * np.pi * k / period
    a = np.pi / d
    denom = a * a - beta * beta
    near = np.isclose(denom, 0.0, atol=1e-12 * a * a)
    with np.errstate(divide="ignore", invalid="ignore"):
        integral = a * (1 + np.exp(-1j * beta * d)) / denom
    # removable singularity at beta == pi/d
    integral = np.where(near, -0.5j * d, integral)
    c = peak * integral / period
    c[0] = c[0].real
    return c


def synthesize_subject(spec: SyntheticSpec) -> SubjectRecord:
    """Forward-generate pressure and flow for a known compliance model.

    The flow is prescribed; the pressure follows from the inverse of the
    apparent-compliance relation, ``Z = R/(1 + j w R C_app)``.
    """
    q = spec.flow_harmonics
    f0 = spec.fundamental_hz
    omega = 2 * np.pi * f0 * np.arange(1, q.size)
    p = np.empty_like(q)
    p[0] = spec.r_app * q[0]
    if omega.size:
        c_app = evaluate(spec.model, spec.theta, omega)
        if not np.all(np.isfinite(c_app)):
            raise DivergentCompliance(f"model {spec.model} compliance is not finite at some harmonic")
        z = spec.r_app / (1 + 1j * omega * spec.r_app * c_app)
        p[1:] = z * q[1:]
    n = spec.samples_per_cycle
    dt = 1.0 / (f0 * n)
    pressure = synthesize(HarmonicSpectrum(f0, p, "pressure"), n)
    flow = synthesize(HarmonicSpectrum(f0, q, "flow"), n)
    sbp, dbp = float(pressure.max()), float(pressure.min())
    meta = SubjectMeta(
        age_group=spec.age_group,
        heart_rate=spec.heart_rate,
        sbp=sbp,
        dbp=dbp,
        mbp=float(pressure.mean()),
        app=sbp - dbp,
        pwv_a=spec.pwv_a,
        pwv_cf=spec.pwv_cf,
    )
    return SubjectRecord(spec.id, Waveform(pressure, dt, "pressure"), Waveform(flow, dt, "flow"), meta)


def ground_truth_compliance(spec: SyntheticSpec, f_max: float = DEFAULT_FMAX):
    """(omega, C_app) the generator used, restricted to harmonics <= f_max."""
    f0 = spec.fundamental_hz
    k = np.arange(1, spec.flow_harmonics.size)
    k = k[k * f0 <= f_max * (1 + 1e-12)]
    k = k[k <= (spec.samples_per_cycle - 1) // 2]
    omega = 2 * np.pi * f0 * k
    return omega, evaluate(spec.model, spec.theta, omega)


# --- CSV I/O ---------------------------------------------------------------

def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _fmt_list(arr) -> str:
    return ";".join(repr(float(v)) for v in arr)


def save_subjects_csv(subjects, path) -> None:
    """Write subjects in the documented CSV layout (lossless float repr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s in subjects:
            w.writerow([s.id] + [_fmt(s.meta.get(m)) for m in META_FIELDS]
                       + [repr(s.pressure.sample_period),
                          _fmt_list(s.pressure.samples), _fmt_list(s.flow.samples)])


def _parse_float(text, row, column, optional=True):
    text = (text or "").strip()
    if text == "" or text.lower() in ("nan", "na", "null", "none"):
        if optional:
            return None
        raise ParseError("missing value", row, column)
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", row, column) from None


def _parse_list(text, row, column):
    parts = [p for p in (text or "").replace(",", ";").split(";") if p.strip()]
    if not parts:
        raise ParseError("empty waveform", row, column)
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ParseError(f"bad waveform value ({exc})", row, column) from None


def _data_lines(fh):
    for line in fh:
        if not line.startswith("#"):
            yield line


def load_subjects_csv(path) -> list[SubjectRecord]:
    """Read subjects from the documented CSV layout."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_data_lines(fh))
        if reader.fieldnames is None:
            raise ParseError("file has no header", row=1)
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        for col in ("id", "sample_period", "pressure", "flow"):
            if col not in header:
                raise ParseError("required column missing", row=1, column=col)
        out = []
        for i, row in enumerate(reader, start=2):
            meta = SubjectMeta(**{m: _parse_float(row.get(m), i, m) for m in META_FIELDS})
            dt = _parse_float(row.get("sample_period"), i, "sample_period", optional=False)
            p = _parse_list(row.get("pressure"), i, "pressure")
            q = _parse_list(row.get("flow"), i, "flow")
            if p.size != q.size:
                raise InconsistentWaveLengths(
                    f"row {i}: pressure has {p.size} samples, flow has {q.size}")
            try:
                rec = SubjectRecord(str(row["id"]).strip(), Waveform(p, dt, "pressure"),
                                    Waveform(q, dt, "flow"), meta)
            except FracompError as exc:
                raise ParseError(str(exc), row=i) from exc
            out.append(rec)
    return out


# --- batch -----------------------------------------------------------------

@dataclass(frozen=True)
class BatchEntry:
    subject_id: str
    model: str
    result: FitResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class BatchResult:
    entries: tuple[BatchEntry, ...]
    models: tuple[str, ...]

    def get(self, subject_id: str, model: str) -> BatchEntry:
        for e in self.entries:
            if e.subject_id == subject_id and e.model == model:
                return e
        raise KeyError((subject_id, model))

    def as_dict(self) -> dict[tuple[str, str], BatchEntry]:
        return {(e.subject_id, e.model): e for e in self.entries}

    def results(self, model: str | None = None) -> list[FitResult]:
        return [e.result for e in self.entries if e.ok and (model is None or e.model == model)]


def _fit_subject(args):
    subject, models, cfg, f_max = args
    try:
        data = subject.compliance(f_max)
    except FracompError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [BatchEntry(subject.id, m, None, msg) for m in models]
    res = fit_models(data, models, cfg)
    out = []
    for m in models:
        r = res[m]
        if isinstance(r, FitFailure):
            out.append(BatchEntry(subject.id, m, None, r.error))
        else:
            out.append(BatchEntry(subject.id, m, r, None))
    return out


def default_workers() -> int:
    return os.cpu_count() or 1


def batch_fit(subjects, models=MODEL_TAGS, cfg: FitConfig | None = None,
              f_max: float = DEFAULT_FMAX, workers: int = 1) -> BatchResult:
    """Fit every requested model to every subject.

    Work is spread over ``workers`` processes one subject at a time.
    Every fit uses ``cfg.seed``, so results do not depend on ordering or
    on the number of workers. Entries are ordered by subject id, then model.
    """
    subjects = list(subjects)
    if not subjects:
        raise FracompError("no subjects to fit")
    models = tuple(get_model(m).tag for m in models)
    if not models:
        raise FracompError("no models to fit")
    cfg = cfg or FitConfig()
    tasks = [(s, models, cfg, f_max) for s in subjects]
    if workers <= 1 or len(tasks) == 1:
        chunks = [_fit_subject(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
            chunks = list(ex.map(_fit_subject, tasks))
    entries = [e for chunk in chunks for e in chunk]
    entries.sort(key=lambda e: (e.subject_id, MODEL_TAGS.index(e.model)))
    return BatchResult(tuple(entries), models)


@dataclass(frozen=True)
class GroupStat:
    age_group: float | None
    heart_rate: float | None
    model: str
    quantity: str
    n: int
    mean: float
    std: float


def _group_key(meta: SubjectMeta):
    if meta.age_group is None or meta.heart_rate is None:
        return None
    return (meta.age_group, round(meta.heart_rate, 2))


def aggregate(batch: BatchResult, subjects) -> list[GroupStat]:
    """Mean and std of fit metrics and parameters per (age group, heart rate, model).

    Subjects lacking either key fall into a single pooled group whose keys are None.
    """
    meta = {s.id: s.meta for s in subjects}
    buckets: dict = {}
    for e in batch.entries:
        if not e.ok:
            continue
        key = _group_key(meta[e.subject_id]) if e.subject_id in meta else None
        r = e.result
        values = {"rmse": r.rmse, "deviation_pct": r.deviation_pct,
                  "abs_deviation_pct": r.abs_deviation_pct, "aicc": r.aicc}
        values.update({f"param:{k}": v for k, v in r.params.items()})
        for q, v in values.items():
            buckets.setdefault((key, e.model, q), []).append(v)

    def sort_key(item):
        (key, model, q), _ = item
        return (key is None, key or (0, 0), MODEL_TAGS.index(model), q)

    out = []
    for (key, model, q), vals in sorted(buckets.items(), key=sort_key):
        arr = np.asarray(vals, dtype=float)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        age, hr = key if key is not None else (None, None)
        out.append(GroupStat(age, hr, model, q, int(arr.size), float(arr.mean()), std))
    return out


def model_summary(batch: BatchResult) -> list[dict]:
    """Per-model means of RMSE, Deviation and AICc over all subjects."""
    rows = []
    for m in batch.models:
        res = batch.results(m)
        n_fail = sum(1 for e in batch.entries if e.model == m and not e.ok)
        if res:
            row = {
                "model": m,
                "n": len(res),
                "n_failed": n_fail,
                "rmse_mean": float(np.mean([r.rmse for r in res])),
                "deviation_pct_mean": float(np.mean([r.deviation_pct for r in res])),
                "abs_deviation_pct_mean": float(np.mean([r.abs_deviation_pct for r in res])),
                "aicc_mean": float(np.mean([r.aicc for r in res])),
                "param_count": get_model(m).n_params,
            }
        else:
            row = {"model": m, "n": 0, "n_failed": n_fail, "rmse_mean": math.nan,
                   "deviation_pct_mean": math.nan, "abs_deviation_pct_mean": math.nan,
                   "aicc_mean": math.nan, "param_count": get_model(m).n_params}
        rows.append(row)
    return rows


def with_meta(record: SubjectRecord, **changes) -> SubjectRecord:
    return replace(record, meta=replace(record.meta, **changes))


def _draw(rng, value, size):
    """Scalar -> constant; ``[lo, hi]`` -> uniform draws."""
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return rng.uniform(float(value[0]), float(value[1]), size)
    return np.full(size, float(value))


def cohort_from_config(config: dict, f_max: float = DEFAULT_FMAX) -> list[SyntheticSpec]:
    """Build synthetic subject specs from a JSON-style cohort description.

    Keys: ``model`` (required), ``n_subjects``, ``theta`` (fixed vector) or
    ``theta_low``/``theta_high`` (uniform box), ``r_app``, ``flow_peak``
    (scalar or ``[lo, hi]``), ``heart_rate`` and ``age_group`` (scalar or
    list cycled over subjects), ``ejection_fraction``, ``samples_per_cycle``,
    ``seed``, ``id_prefix``, ``pwv_a``, ``pwv_cf``.
    """
    known = {"model", "n_subjects", "theta", "theta_low", "theta_high", "r_app", "flow_peak",
             "heart_rate", "age_group", "ejection_fraction", "samples_per_cycle", "seed",
             "id_prefix", "pwv_a", "pwv_cf"}
    unknown = set(config) - known
    if unknown:
        raise FracompError(f"unknown cohort keys: {sorted(unknown)}")
    if "model" not in config:
        raise FracompError("cohort config needs a 'model'")
    spec = get_model(config["model"])
    n = int(config.get("n_subjects", 1))
    if n < 1:
        raise FracompError("n_subjects must be >= 1")
    rng = np.random.default_rng(int(config.get("seed", 0)))
    if "theta" in config:
        thetas = np.tile(np.asarray(config["theta"], dtype=float), (n, 1))
    elif "theta_low" in config and "theta_high" in config:
        lo = np.asarray(config["theta_low"], dtype=float)
        hi = np.asarray(config["theta_high"], dtype=float)
        if lo.shape != hi.shape or lo.size != spec.n_params:
            raise FracompError(f"theta_low/theta_high must have {spec.n_params} entries")
        thetas = rng.uniform(lo, hi, (n, lo.size))
    else:
        raise FracompError("cohort config needs 'theta' or 'theta_low'/'theta_high'")
    r_app = _draw(rng, config.get("r_app", 1.05), n)
    peak = _draw(rng, config.get("flow_peak", 400.0), n)
    pwv_a = _draw(rng, config["pwv_a"], n) if "pwv_a" in config else [None] * n
    pwv_cf = _draw(rng, config["pwv_cf"], n) if "pwv_cf" in config else [None] * n

    def cycle(key, default):
        v = config.get(key, default)
        if v is None:
            return [None] * n
        seq = v if isinstance(v, (list, tuple)) else [v]
        return [seq[i % len(seq)] for i in range(n)]

    hrs = cycle("heart_rate", 60.0)
    ages = cycle("age_group", None)
    prefix = str(config.get("id_prefix", "s"))
    width = len(str(n - 1))
    out = []
    for i in range(n):
        q = half_sine_flow(float(hrs[i]), float(peak[i]),
                           float(config.get("ejection_fraction", 1.0 / 3.0)), f_max)
        out.append(SyntheticSpec(
            model=spec.tag,
            theta=tuple(thetas[i]),
            r_app=float(r_app[i]),
            heart_rate=float(hrs[i]),
            flow_harmonics=q,
            samples_per_cycle=int(config.get("samples_per_cycle", 256)),
            id=f"{prefix}{i:0{width}d}",
            age_group=None if ages[i] is None else float(ages[i]),
            pwv_a=None if pwv_a[i] is None else float(pwv_a[i]),
            pwv_cf=None if pwv_cf[i] is None else float(pwv_cf[i]),
        ))
    return out
