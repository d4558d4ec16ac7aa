"""Harmonic analysis of single-cycle aortic pressure/flow waveforms.

Turns sampled waveforms into one-sided harmonic spectra and derives the
measured input impedance, apparent resistance and apparent compliance
from them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyWaveform,
    FmaxBelowFundamental,
    NonPositiveFrequency,
    NonPositiveSamplePeriod,
    SpectraMismatch,
    ZeroFlowHarmonicWarning,
    ZeroImpedanceHarmonic,
    ZeroMeanFlow,
)

DEFAULT_FMAX = 12.0
# harmonics with |Q_k| below this fraction of max|Q| are dropped
ZERO_FLOW_RTOL = 1e-12


@dataclass(frozen=True)
class Waveform:
    """One cardiac cycle of pressure (mmHg) or flow (ml/s), periodic extension assumed."""

    samples: np.ndarray
    sample_period: float
    kind: str = "pressure"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size == 0:
            raise EmptyWaveform("waveform has no samples")
        if not self.sample_period > 0:
            raise NonPositiveSamplePeriod(
                f"sample_period must be > 0, got {self.sample_period}")
        if self.kind not in ("pressure", "flow"):
            raise ValueError(f"kind must be 'pressure' or 'flow', got {self.kind!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_period", float(self.sample_period))

    @property
    def duration(self) -> float:
        return self.samples.size * self.sample_period

    @property
    def fundamental_hz(self) -> float:
        return 1.0 / self.duration


@dataclass(frozen=True)
class HarmonicSpectrum:
    """One-sided Fourier coefficients c_0..c_K of a periodic waveform.

    The signal is reconstructed as ``c_0 + sum_k 2 Re(c_k exp(j k w0 t))``.
    """

    fundamental_hz: float
    coefficients: np.ndarray
    kind: str = "pressure"

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size == 0:
            raise EmptyWaveform("spectrum has no coefficients")
        c[0] = c[0].real
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def n_harmonics(self) -> int:
        """Number of non-DC harmonics."""
        return self.coefficients.size - 1

    @property
    def angular_frequencies(self) -> np.ndarray:
        """Angular frequency (rad/s) of harmonics 1..K."""
        k = np.arange(1, self.coefficients.size)
        return 2.0 * np.pi * self.fundamental_hz * k

    @property
    def mean(self) -> float:
        return float(self.coefficients[0].real)


@dataclass(frozen=True)
class InputImpedance:
    """Input impedance at the retained harmonics (DC excluded)."""

    fundamental_hz: float
    harmonics: np.ndarray
    values: np.ndarray
    dc: complex | None = None
    dropped: tuple[int, ...] = ()

    @property
    def angular_frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * self.fundamental_hz * self.harmonics


@dataclass(frozen=True)
class MeasuredCompliance:
    """Apparent compliance at harmonics 1..N_s, DC excluded."""

    angular_frequencies: np.ndarray
    values: np.ndarray
    r_app: float
    dropped: tuple[int, ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.angular_frequencies, dtype=float).ravel()
        v = np.asarray(self.values, dtype=complex).ravel()
        if w.shape != v.shape:
            raise SpectraMismatch(
                f"{w.size} frequencies but {v.size} compliance values")
        if np.any(w <= 0):
            raise NonPositiveFrequency("angular frequencies must be > 0")
        if np.any(np.diff(w) <= 0):
            raise ValueError("angular frequencies must be strictly increasing")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "angular_frequencies", w)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "r_app", float(self.r_app))

    @property
    def n_s(self) -> int:
        return self.values.size


def compute_spectrum(w: Waveform, f_max: float = DEFAULT_FMAX) -> HarmonicSpectrum:
    """One-sided harmonic spectrum of ``w`` truncated at ``f_max`` Hz.

    Coefficient ``k`` is ``fft(x)[k] / N`` so that the waveform equals
    ``c_0 + sum 2 Re(c_k e^{j k w0 t})``. Harmonics are also capped below
    the Nyquist index.
    """
    f0 = w.fundamental_hz
    if not f_max > f0 * (1 - 1e-12):
        raise FmaxBelowFundamental(
            f"f_max={f_max} Hz is below the fundamental {f0:.6g} Hz")
    n = w.samples.size
    # tolerance so that an f_max landing exactly on a harmonic keeps it
    k_max = int(math.floor(f_max / f0 * (1 + 1e-12)))
    k_max = min(k_max, (n - 1) // 2)
    coeffs = np.fft.fft(w.samples)[: k_max + 1] / n
    return HarmonicSpectrum(f0, coeffs, w.kind)


def synthesize(spectrum: HarmonicSpectrum, n_samples: int) -> np.ndarray:
    """Inverse of :func:`compute_spectrum`: samples of one cycle."""
    c = spectrum.coefficients
    if n_samples < 2 * c.size - 1:
        raise ValueError(
            f"{n_samples} samples cannot represent {c.size - 1} harmonics")
    full = np.zeros(n_samples // 2 + 1, dtype=complex)
    full[: c.size] = c * n_samples
    return np.fft.irfft(full, n=n_samples)


def _check_pair(p: HarmonicSpectrum, q: HarmonicSpectrum) -> None:
    if not math.isclose(p.fundamental_hz, q.fundamental_hz, rel_tol=1e-12):
        raise SpectraMismatch(
            f"fundamentals differ: {p.fundamental_hz} vs {q.fundamental_hz}")
    if p.coefficients.size != q.coefficients.size:
        raise SpectraMismatch(
            f"harmonic counts differ: {p.n_harmonics} vs {q.n_harmonics}")


def input_impedance(p: HarmonicSpectrum, q: HarmonicSpectrum) -> InputImpedance:
    """Z_in = P/Q at harmonics 1..K.

    Harmonics whose flow coefficient is negligible are dropped with a
    :class:`ZeroFlowHarmonicWarning`; their indices are kept in ``dropped``.
    """
    _check_pair(p, q)
    qc, pc = q.coefficients, p.coefficients
    scale = np.max(np.abs(qc))
    keep = np.abs(qc) >= ZERO_FLOW_RTOL * scale if scale > 0 else np.zeros(qc.size, bool)
    harmonics = np.arange(1, qc.size)
    mask = keep[1:]
    dropped = tuple(int(k) for k in harmonics[~mask])
    if dropped:
        warnings.warn(
            f"flow is zero at harmonics {list(dropped)}; dropped from impedance",
            ZeroFlowHarmonicWarning, stacklevel=2)
    dc = complex(pc[0] / qc[0]) if keep[0] else None
    return InputImpedance(
        fundamental_hz=p.fundamental_hz,
        harmonics=harmonics[mask],
        values=pc[1:][mask] / qc[1:][mask],
        dc=dc,
        dropped=dropped,
    )


def apparent_resistance(p: HarmonicSpectrum, q: HarmonicSpectrum) -> float:
    """Mean pressure over mean flow (mmHg s/ml)."""
    if q.mean == 0:
        raise ZeroMeanFlow("mean flow is zero; apparent resistance undefined")
    return p.mean / q.mean


def apparent_compliance(z_in, r_app: float, omega, dropped=()) -> MeasuredCompliance:
    """Evaluate C_app = (R_app - Z_in) / (j w R_app Z_in) per harmonic."""
    z = np.asarray(z_in, dtype=complex).ravel()
    w = np.asarray(omega, dtype=float).ravel()
    if z.shape != w.shape:
        raise SpectraMismatch(f"{z.size} impedances but {w.size} frequencies")
    if np.any(w <= 0):
        raise NonPositiveFrequency("angular frequencies must be > 0")
    if np.any(z == 0):
        raise ZeroImpedanceHarmonic("input impedance vanishes at some harmonic")
    c = (r_app - z) / (1j * w * r_app * z)
    return MeasuredCompliance(w, c, r_app, tuple(dropped))


def measure_compliance(pressure: Waveform, flow: Waveform,
                       f_max: float = DEFAULT_FMAX) -> MeasuredCompliance:
    """Run the full waveform -> apparent compliance chain for one subject."""
    p = compute_spectrum(pressure, f_max)
    q = compute_spectrum(flow, f_max)
    z = input_impedance(p, q)
    r_app = apparent_resistance(p, q)
    return apparent_compliance(z.values, r_app, z.angular_frequencies, z.dropped)
