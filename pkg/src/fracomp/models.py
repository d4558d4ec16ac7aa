"""Closed-form complex compliance of the candidate models A-G.

All formulas are written in the Laplace variable ``s`` and evaluated at
``s = j*omega``. Fractional powers use the principal branch, so
``(j w)^a = w^a exp(j a pi/2)``.

Parameter vectors per model::

    A  [C_alpha, alpha]                 single FOC
    B  [R, C_alpha, alpha]              R in series with a FOC
    C  [C, alpha]                       static capacitor + FOC, C_stat = C_alpha
    D  [R, C, alpha]                    R + static capacitor + FOC, C_stat = C_alpha
    E  [R1, R2, C_alpha, alpha]         R1 parallel to (FOC + R2)
    F  [C_stat, a1..a4, b1..b4]         viscoelastic rational model, N = 4
    G  [R, C]                           Voigt cell
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    NonPositiveFrequency,
    NonPositiveParameter,
    UnknownModel,
    WrongParameterCount,
)

MAG_LOWER = 1e-8
MAG_UPPER = 1e4
ORDER_LOWER = 0.0
ORDER_UPPER = math.inf

N_VISCO = 4
# models whose series resistance may be exactly zero
NESTING_RESISTANCE = ("B", "D")


class Limit(str, Enum):
    """Behaviour of |C_c(j w)| as w -> 0."""

    FINITE = "finite"
    DIVERGENT = "divergent"
    VANISHING = "vanishing"


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "resistance" | "capacitance" | "order" | "rate"
    unit: str


_R = ("resistance", "mmHg s/ml")
_C = ("capacitance", "ml/mmHg")
_CA = ("capacitance", "ml/mmHg s^(1-alpha)")
_ALPHA = ("order", "1")
_RATE = ("rate", "rad/s")


@dataclass(frozen=True)
class ModelSpec:
    tag: str
    description: str
    params: tuple[Param, ...]

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def alpha_index(self) -> int | None:
        for i, p in enumerate(self.params):
            if p.kind == "order":
                return i
        return None

    @property
    def fractional(self) -> bool:
        return self.alpha_index is not None


def _p(name, kind_unit):
    return Param(name, *kind_unit)


MODELS: dict[str, ModelSpec] = {
    "A": ModelSpec("A", "single fractional-order capacitor",
                   (_p("C_alpha", _CA), _p("alpha", _ALPHA))),
    "B": ModelSpec("B", "resistor in series with a fractional-order capacitor",
                   (_p("R", _R), _p("C_alpha", _CA), _p("alpha", _ALPHA))),
    "C": ModelSpec("C", "static capacitor in series with a fractional-order capacitor "
                        "(C_stat tied to C_alpha)",
                   (_p("C_alpha", _CA), _p("alpha", _ALPHA))),
    "D": ModelSpec("D", "resistor, static capacitor and fractional-order capacitor in series "
                        "(C_stat tied to C_alpha)",
                   (_p("R", _R), _p("C_alpha", _CA), _p("alpha", _ALPHA))),
    "E": ModelSpec("E", "resistor R1 in parallel with a fractional-order capacitor "
                        "and resistor R2 in series",
                   (_p("R1", _R), _p("R2", _R), _p("C_alpha", _CA), _p("alpha", _ALPHA))),
    "F": ModelSpec("F", "viscoelastic rational compliance with N=4 pole/zero pairs",
                   (_p("C_stat", _C),)
                   + tuple(_p(f"a{n}", _RATE) for n in range(1, N_VISCO + 1))
                   + tuple(_p(f"b{n}", _RATE) for n in range(1, N_VISCO + 1))),
    "G": ModelSpec("G", "Voigt cell: resistor in series with an ideal capacitor",
                   (_p("R", _R), _p("C", _C))),
}

MODEL_TAGS = tuple(MODELS)
FRACTIONAL_TAGS = tuple(t for t, m in MODELS.items() if m.fractional)


def get_model(tag) -> ModelSpec:
    if isinstance(tag, ModelSpec):
        return tag
    try:
        return MODELS[str(tag).strip().upper()]
    except KeyError:
        raise UnknownModel(f"unknown model {tag!r}; expected one of {', '.join(MODEL_TAGS)}") from None


def parse_models(text: str) -> tuple[str, ...]:
    """Parse a comma-separated tag list such as ``"A,B,E"``."""
    tags = [t.strip() for t in str(text).split(",") if t.strip()]
    if not tags:
        raise UnknownModel("empty model list")
    out = []
    for t in tags:
        tag = get_model(t).tag
        if tag not in out:
            out.append(tag)
    return tuple(out)


def _spow(s, a):
    # principal branch; numpy complex power already uses it
    return np.power(s, a)


def _raw(tag: str, theta, s):
    """Compliance in the complex variable ``s`` without validation."""
    if tag == "A":
        c, a = theta
        return c * _spow(s, a - 1.0)
    if tag == "B":
        r, c, a = theta
        return c * _spow(s, a - 1.0) / (1.0 + r * c * s)
    if tag == "C":
        c, a = theta
        sa = _spow(s, a)
        return c * c * sa / (c * sa + c * s)
    if tag == "D":
        r, c, a = theta
        sa = _spow(s, a)
        return c * c * sa / (c * s + c * sa + r * c * c * sa * s)
    if tag == "E":
        r1, r2, c, a = theta
        return (1.0 + (r1 + r2) * c * _spow(s, a - 1.0)) / (r1 * (1.0 + r2 * c * _spow(s, a)))
    if tag == "F":
        c_stat = theta[0]
        a = theta[1:1 + N_VISCO]
        b = theta[1 + N_VISCO:]
        out = np.full(np.shape(s), c_stat, dtype=complex)
        for an, bn in zip(a, b):
            out = out * (an * (s + bn)) / (bn * (s + an))
        return out
    if tag == "G":
        r, c = theta
        return c / (1.0 + r * c * s)
    raise UnknownModel(tag)


def check_theta(model, theta) -> np.ndarray:
    """Validate a parameter vector; returns it as a float array."""
    spec = get_model(model)
    th = np.asarray(theta, dtype=float).ravel()
    if th.size != spec.n_params:
        raise WrongParameterCount(
            f"model {spec.tag} takes {spec.n_params} parameters "
            f"({', '.join(spec.param_names)}), got {th.size}")
    for p, v in zip(spec.params, th):
        if not np.isfinite(v):
            raise NonPositiveParameter(f"{p.name} is not finite: {v}")
        if p.kind == "order":
            if v < 0:
                raise NonPositiveParameter(f"{p.name} must be >= 0, got {v}")
        elif spec.tag in NESTING_RESISTANCE and p.kind == "resistance":
            # R = 0 collapses B onto A and D onto C
            if v < 0:
                raise NonPositiveParameter(f"{p.name} must be >= 0, got {v}")
        elif v <= 0:
            raise NonPositiveParameter(f"{p.name} must be > 0, got {v}")
    return th


def evaluate(model, theta, omega) -> np.ndarray:
    """Complex compliance C_c(j w) of ``model`` at angular frequencies ``omega``."""
    spec = get_model(model)
    th = check_theta(spec, theta)
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise NonPositiveFrequency("angular frequencies must be > 0")
    return _raw(spec.tag, th, 1j * w)


def evaluate_s(model, theta, s) -> np.ndarray:
    """Compliance at arbitrary complex ``s`` (principal branch)."""
    spec = get_model(model)
    return _raw(spec.tag, check_theta(spec, theta), np.asarray(s, dtype=complex))


def low_frequency_limit(model, theta) -> tuple[Limit, float | None]:
    """Analytic behaviour of C_c(j w) as w -> 0 and the finite limit if any."""
    spec = get_model(model)
    th = check_theta(spec, theta)
    tag = spec.tag
    if tag == "G":
        return Limit.FINITE, float(th[1])
    if tag == "F":
        return Limit.FINITE, float(th[0])
    a = float(th[spec.alpha_index])
    if tag in ("A", "B"):
        c = th[1] if tag == "B" else th[0]
        if a < 1:
            return Limit.DIVERGENT, None
        if a > 1:
            return Limit.VANISHING, 0.0
        return Limit.FINITE, float(c)
    if tag in ("C", "D"):
        # C s^a / (s^a + s [+ R C s^(a+1)]) -> C, C/2 or 0
        c = th[1] if tag == "D" else th[0]
        if a < 1:
            return Limit.FINITE, float(c)
        if a > 1:
            return Limit.VANISHING, 0.0
        return Limit.FINITE, float(c) / 2.0
    if tag == "E":
        r1, r2, c, _ = th
        if a < 1:
            return Limit.DIVERGENT, None
        if a > 1:
            return Limit.FINITE, float(1.0 / r1)
        return Limit.FINITE, float((1.0 + (r1 + r2) * c) / r1)
    raise UnknownModel(tag)


@dataclass(frozen=True)
class ComplianceEstimate:
    """|C_c| at a reference frequency plus the nature of the w -> 0 limit."""

    value: float
    omega_ref: float
    limit: Limit
    limit_value: float | None

    @property
    def divergent(self) -> bool:
        return self.limit is not Limit.FINITE


def total_compliance_estimate(model, theta, omega_ref: float) -> ComplianceEstimate:
    """Low-frequency estimate of total compliance.

    Fractional models whose compliance blows up or vanishes as w -> 0 are
    flagged via ``divergent``; ``value`` is always |C_c(j omega_ref)|.
    """
    c = evaluate(model, theta, np.array([omega_ref]))[0]
    kind, lim = low_frequency_limit(model, theta)
    return ComplianceEstimate(float(abs(c)), float(omega_ref), kind, lim)


def default_bounds_and_init(model) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Box bounds and a starting point for fitting ``model``."""
    spec = get_model(model)
    lower, upper, init = [], [], []
    for p in spec.params:
        if p.kind == "order":
            lower.append(ORDER_LOWER)
            upper.append(ORDER_UPPER)
            init.append(0.8)
        else:
            # B and D collapse onto A and C at R = 0 exactly
            series_r = spec.tag in NESTING_RESISTANCE and p.kind == "resistance"
            lower.append(0.0 if series_r else MAG_LOWER)
            upper.append(MAG_UPPER)
            init.append(0.1 if p.kind == "resistance" else 1.0)
    if spec.tag == "F":
        # interleave so that no zero starts on top of its pole
        grid = np.logspace(-1, 2, 2 * N_VISCO)
        init[1:1 + N_VISCO] = grid[0::2]
        init[1 + N_VISCO:] = grid[1::2]
    return np.array(lower), np.array(upper), np.array(init, dtype=float)


def canonical_theta(model, theta) -> np.ndarray:
    """Order-invariant form of ``theta``: Model F pairs sorted by a_n."""
    spec = get_model(model)
    th = np.array(theta, dtype=float)
    if spec.tag == "F":
        a = th[1:1 + N_VISCO]
        b = th[1 + N_VISCO:]
        a_sorted = np.sort(a)
        b_sorted = np.sort(b)
        th = np.concatenate([[th[0]], a_sorted, b_sorted])
    return th


def catalogue() -> list[dict]:
    """Machine-readable listing of every model."""
    out = []
    for tag, spec in MODELS.items():
        lo, hi, init = default_bounds_and_init(tag)
        out.append({
            "model": tag,
            "description": spec.description,
            "n_params": spec.n_params,
            "params": [
                {"name": p.name, "unit": p.unit, "kind": p.kind,
                 "lower": float(l), "upper": None if math.isinf(h) else float(h),
                 "init": float(i)}
                for p, l, h, i in zip(spec.params, lo, hi, init)
            ],
        })
    return out
