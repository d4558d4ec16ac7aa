"""Goodness-of-fit metrics used to rank models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSampleSize,
    LengthMismatch,
    NonPositiveRmse,
    ZeroDataModulus,
)


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    rmse: float
    aicc: float
    deviation_pct: float
    abs_deviation_pct: float
    param_count: int


def aicc(rmse: float, p: int, n_s: int) -> float:
    """Corrected Akaike criterion ``-2 ln(rmse) + 2 p n_s / (n_s - p - 1)``.

    The RMSE enters the log term directly (not a likelihood), so a smaller
    error *raises* the first term.
    """
    if not rmse > 0:
        raise NonPositiveRmse(f"rmse must be > 0, got {rmse}")
    if n_s <= p + 1:
        raise DegenerateSampleSize(f"need n_s > p + 1, got n_s={n_s}, p={p}")
    return -2.0 * math.log(rmse) + 2.0 * p * n_s / (n_s - p - 1)


def _moduli(model_vals, data_vals):
    m = np.asarray(model_vals).ravel()
    d = np.asarray(data_vals).ravel()
    if m.size != d.size:
        raise LengthMismatch(f"{m.size} model values vs {d.size} data values")
    if m.size == 0:
        raise LengthMismatch("no values")
    dm = np.abs(d)
    if np.any(dm == 0):
        raise ZeroDataModulus("data modulus is zero at some harmonic")
    return np.abs(m), dm


def deviation_per_harmonic(model_vals, data_vals) -> np.ndarray:
    """Signed relative modulus error in percent at every harmonic."""
    mm, dm = _moduli(model_vals, data_vals)
    return (mm - dm) / dm * 100.0


def deviation(model_vals, data_vals) -> float:
    """Mean signed modulus deviation in percent."""
    return float(np.mean(deviation_per_harmonic(model_vals, data_vals)))


def abs_deviation(model_vals, data_vals) -> float:
    """Mean absolute modulus deviation in percent."""
    return float(np.mean(np.abs(deviation_per_harmonic(model_vals, data_vals))))
