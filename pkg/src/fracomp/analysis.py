"""Binned correlation of fractional-order estimates with hemodynamic indices."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import DegenerateVariance, EmptyInput, LengthMismatch, UndefinedHysteresivity
from .foc import hysteresivity
from .models import FRACTIONAL_TAGS, MODEL_TAGS

DETERMINANTS = ("SBP", "DBP", "APP", "MBP", "PWV_a", "PWV_cf")
PARAMETERS = ("alpha", "eta_r")
BIN_MMHG = 5.0
BIN_PWV = 0.5


@dataclass(frozen=True)
class CorrelationReport:
    determinant: str
    parameter: str
    model: str
    bin_width: float
    r: float
    ci_low: float
    ci_high: float
    n_bins: int


def bin_average(x, y, bin_width: float):
    """Mean of ``y`` over contiguous bins of ``x`` anchored at ``min(x)``.

    Returns ``(centers, means)`` for the non-empty bins in increasing order.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"{x.size} x values vs {y.size} y values")
    if x.size == 0:
        raise EmptyInput("nothing to bin")
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    lo = x.min()
    idx = np.floor((x - lo) / bin_width).astype(np.int64)
    bins = np.unique(idx)
    centers = lo + (bins + 0.5) * bin_width
    means = np.array([y[idx == b].mean() for b in bins])
    return centers, means


def pearson_with_ci(x, y, confidence: float = 0.95):
    """Sample Pearson r with a Fisher-z confidence interval."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"{x.size} x values vs {y.size} y values")
    n = x.size
    if n < 3:
        raise EmptyInput(f"need at least 3 points, got {n}")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx <= 0 or syy <= 0:
        raise DegenerateVariance("zero variance in x or y")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = min(1.0, max(-1.0, r))
    if abs(r) >= 1.0 - 1e-15:
        return r, r, r
    if n == 3:
        return r, -1.0, 1.0
    z = math.atanh(r)
    q = NormalDist().inv_cdf(0.5 + confidence / 2)
    half = q / math.sqrt(n - 3)
    lo, hi = math.tanh(z - half), math.tanh(z + half)
    return r, min(lo, r), max(hi, r)


def default_bin_width(determinant: str, bin_mmhg: float = BIN_MMHG, bin_pwv: float = BIN_PWV) -> float:
    return bin_pwv if determinant.upper().startswith("PWV") else bin_mmhg


def _parameter_values(result, parameter: str):
    alpha = result.alpha
    if alpha is None:
        return None
    if parameter == "alpha":
        return alpha
    try:
        return hysteresivity(alpha)
    except UndefinedHysteresivity:
        return None


def correlation_table(batch, subjects, *, bin_mmhg: float = BIN_MMHG, bin_pwv: float = BIN_PWV,
                      confidence: float = 0.95, binned: bool = True,
                      determinants=DETERMINANTS, parameters=PARAMETERS) -> list[CorrelationReport]:
    """Correlate each model's alpha / eta_r estimates against each determinant.

    With ``binned`` (default) the estimates are first averaged over fixed-width
    bins of the determinant and the bin means are correlated; otherwise raw
    per-subject values are used. Rows with fewer than three points are
    skipped with a warning.
    """
    meta = {s.id: s.meta for s in subjects}
    models = [m for m in MODEL_TAGS if m in batch.models and m in FRACTIONAL_TAGS]
    out = []
    for model in models:
        entries = [e for e in batch.entries if e.model == model and e.ok]
        for param in parameters:
            for det in determinants:
                xs, ys = [], []
                missing = 0
                for e in entries:
                    m = meta.get(e.subject_id)
                    xv = m.get(det) if m is not None else None
                    yv = _parameter_values(e.result, param)
                    if xv is None or yv is None or not np.isfinite(yv):
                        missing += 1
                        continue
                    xs.append(xv)
                    ys.append(yv)
                if missing:
                    warnings.warn(f"{model}/{param}/{det}: {missing} subjects skipped "
                                  "(missing metadata or undefined parameter)", stacklevel=2)
                width = default_bin_width(det, bin_mmhg, bin_pwv)
                if not xs:
                    continue
                if binned:
                    cx, cy = bin_average(xs, ys, width)
                else:
                    cx, cy = np.asarray(xs), np.asarray(ys)
                if cx.size < 3:
                    warnings.warn(f"{model}/{param}/{det}: only {cx.size} bins, row omitted",
                                  stacklevel=2)
                    continue
                try:
                    r, lo, hi = pearson_with_ci(cx, cy, confidence)
                except DegenerateVariance:
                    warnings.warn(f"{model}/{param}/{det}: zero variance, row omitted", stacklevel=2)
                    continue
                out.append(CorrelationReport(det, param, model, width if binned else 0.0,
                                             r, lo, hi, int(cx.size)))
    return out


def write_correlation_csv(reports, path, header_comment: str | None = None) -> None:
    """Table-style layout: one row per model x parameter, r and CI per determinant."""
    rows: dict = {}
    dets = [d for d in DETERMINANTS if any(r.determinant == d for r in reports)]
    for r in reports:
        rows.setdefault((r.model, r.parameter), {})[r.determinant] = r
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(header_comment)
        w = csv.writer(fh)
        cols = ["model", "parameter"]
        for d in dets:
            cols += [d, f"{d}_ci_low", f"{d}_ci_high", f"{d}_n_bins"]
        w.writerow(cols)
        for (model, param) in sorted(rows, key=lambda k: (MODEL_TAGS.index(k[0]), PARAMETERS.index(k[1]))):
            row = [model, param]
            for d in dets:
                rep = rows[(model, param)].get(d)
                if rep is None:
                    row += ["", "", "", ""]
                else:
                    row += [repr(rep.r), repr(rep.ci_low), repr(rep.ci_high), rep.n_bins]
            w.writerow(row)
