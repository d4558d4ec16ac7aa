"""Fractional-order capacitor (constant phase element) relations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveFrequency, NonPositiveParameter, UndefinedHysteresivity


@dataclass(frozen=True)
class FocParams:
    """Pseudo-capacitance ``c_alpha`` and fractional order ``alpha``.

    ``alpha`` has no upper bound: orders above one are legal and give a
    negative real impedance part.
    """

    c_alpha: float
    alpha: float

    def __post_init__(self):
        if not self.c_alpha > 0:
            raise NonPositiveParameter(f"c_alpha must be > 0, got {self.c_alpha}")
        if not self.alpha >= 0:
            raise NonPositiveParameter(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class TissueMechanics:
    damping_g_r: float
    elastance_h_r: float
    hysteresivity_eta_r: float
    phase_phi: float


def _check_omega(omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise NonPositiveFrequency("angular frequency must be > 0")
    return w


def phase(alpha: float) -> float:
    """Constant phase angle alpha*pi/2 in radians."""
    return alpha * math.pi / 2


def foc_impedance(p: FocParams, omega):
    """Z = 1/(C_a w^a) (cos phi - j sin phi), phi = a pi/2."""
    w = _check_omega(omega)
    phi = phase(p.alpha)
    mag = 1.0 / (p.c_alpha * w ** p.alpha)
    z = mag * (math.cos(phi) - 1j * math.sin(phi))
    return complex(z) if np.ndim(z) == 0 else z


def capacitance_from_pseudo(p: FocParams, omega):
    """Ordinary capacitance C_a w^(a-1) seen at angular frequency ``omega``."""
    w = _check_omega(omega)
    c = p.c_alpha * w ** (p.alpha - 1.0)
    return float(c) if np.ndim(c) == 0 else c


def hysteresivity(alpha) -> float:
    """eta_r = -cot(alpha pi/2); independent of frequency and C_alpha.

    Raises :class:`UndefinedHysteresivity` when ``alpha`` is an even integer.
    """
    a = np.asarray(alpha, dtype=float)
    phi = a * np.pi / 2
    s = np.sin(phi)
    # sin(k*pi) is ~1e-16, not 0, in floating point
    even = np.isclose(np.mod(a, 2.0), 0.0, atol=1e-12) | np.isclose(np.mod(a, 2.0), 2.0, atol=1e-12)
    if np.any(even):
        raise UndefinedHysteresivity(
            f"hysteresivity undefined for even-integer alpha: {alpha}")
    eta = -np.cos(phi) / s
    return float(eta) if np.ndim(eta) == 0 else eta


def tissue_mechanics(p: FocParams, omega: float) -> TissueMechanics:
    """Split the FOC impedance into damping G_r and elastance H_r."""
    w = float(_check_omega(omega))
    phi = phase(p.alpha)
    mag = 1.0 / (p.c_alpha * w ** p.alpha)
    g_r = mag * math.cos(phi)
    h_r = -mag * math.sin(phi)
    return TissueMechanics(g_r, h_r, hysteresivity(p.alpha), phi)
