"""Photon numbers, predicted blue shifts, and the inverse bound on lambda."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .constants import PLANCK, SPEED_OF_LIGHT
from .qalgebra import QDeformation, blue_shift_approx


class BoundUndefinedError(ValueError):
    """A lambda bound needs a strictly positive photon number."""


class PhotonMethod(str, enum.Enum):
    INVERSE_LINEWIDTH = "inverse_linewidth"
    INVERSE_TWO_PI_LINEWIDTH = "inverse_two_pi_linewidth"
    EXPLICIT_TIME = "explicit_time"


DEFAULT_METHOD = PhotonMethod.INVERSE_TWO_PI_LINEWIDTH


@dataclass(frozen=True)
class LaserSource:
    wavelength: float  # m
    power: float  # W
    linewidth: float  # Hz, FWHM

    def __post_init__(self):
        if not 100e-9 < self.wavelength < 10e-6:
            raise ValueError(f"wavelength {self.wavelength!r} m outside (100 nm, 10 um)")
        if not self.power >= 0:
            raise ValueError(f"power must be >= 0, got {self.power!r}")
        if not self.linewidth > 0:
            raise ValueError(f"linewidth must be > 0, got {self.linewidth!r}")


@dataclass(frozen=True)
class PhotonNumberEstimate:
    n: float
    coherence_time: float  # s
    method: PhotonMethod


@dataclass(frozen=True)
class SensitivityBudget:
    """Fractional sensitivity, optionally tied to an absolute beat sensitivity."""

    fractional_sensitivity: float
    absolute_beat_sensitivity: Optional[float] = None  # Hz
    optical_frequency: Optional[float] = None  # Hz

    def __post_init__(self):
        if self.absolute_beat_sensitivity is not None and self.optical_frequency is not None:
            expected = self.absolute_beat_sensitivity / self.optical_frequency
            if not math.isclose(self.fractional_sensitivity, expected, rel_tol=1e-9):
                raise ValueError("fractional sensitivity disagrees with absolute/optical frequency")

    @classmethod
    def from_beat(cls, beat_sensitivity_hz: float, wavelength: float) -> "SensitivityBudget":
        nu = optical_frequency(wavelength)
        return cls(beat_sensitivity_hz / nu, beat_sensitivity_hz, nu)


def optical_frequency(wavelength: float) -> float:
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    return SPEED_OF_LIGHT / wavelength


def coherence_time(linewidth: float, method, explicit_time: Optional[float] = None) -> float:
    method = PhotonMethod(method)
    if method is PhotonMethod.EXPLICIT_TIME:
        if explicit_time is None or not explicit_time > 0:
            raise ValueError("explicit_time method needs a positive explicit_time")
        return float(explicit_time)
    if explicit_time is not None:
        raise ValueError(f"explicit_time given but method is {method.value}")
    if method is PhotonMethod.INVERSE_LINEWIDTH:
        return 1.0 / linewidth
    return 1.0 / (2.0 * math.pi * linewidth)


def mode_photon_number(source: LaserSource, method=DEFAULT_METHOD,
                       explicit_time: Optional[float] = None) -> PhotonNumberEstimate:
    """Photons in one coherence time, ``n = P tau / (h nu)``.

    ``tau`` is ``1/linewidth``, ``1/(2 pi linewidth)`` or ``explicit_time``
    depending on ``method``; the method is recorded on the result.
    """
    method = PhotonMethod(method)
    tau = coherence_time(source.linewidth, method, explicit_time)
    photon_energy = PLANCK * optical_frequency(source.wavelength)
    return PhotonNumberEstimate(source.power * tau / photon_energy, tau, method)


def lambda_upper_bound(sensitivity: float, n: float) -> float:
    """Largest lambda whose blue shift ``lam^2 n^2 / 2`` stays below ``sensitivity``."""
    if sensitivity < 0:
        raise ValueError("sensitivity must be >= 0")
    if not n > 0:
        raise BoundUndefinedError(f"photon number must be > 0 for a bound, got {n!r}")
    return math.sqrt(2.0 * sensitivity) / n


def beam_shift(source: LaserSource, deform: QDeformation, method=DEFAULT_METHOD,
               explicit_time: Optional[float] = None) -> float:
    """Absolute optical frequency shift (Hz) of one beam from its own photon number."""
    n = mode_photon_number(source, method, explicit_time).n
    return optical_frequency(source.wavelength) * blue_shift_approx(n, deform)


def predicted_beat_shift(hi: LaserSource, lo: LaserSource, deform: QDeformation,
                         method=DEFAULT_METHOD, explicit_time: Optional[float] = None) -> float:
    """Beat-frequency change (Hz) between a beam at ``hi`` and one at ``lo``.

    Positive when ``hi`` carries more power.
    """
    if hi.wavelength != lo.wavelength:
        raise ValueError("predicted_beat_shift needs equal wavelengths")
    n_hi = mode_photon_number(hi, method, explicit_time).n
    n_lo = mode_photon_number(lo, method, explicit_time).n
    nu = optical_frequency(hi.wavelength)
    return nu * 0.5 * deform.lam ** 2 * (n_hi * n_hi - n_lo * n_lo)


def lambda_for_beat_shift(target_hz: float, hi: LaserSource, lo: LaserSource,
                          method=DEFAULT_METHOD, explicit_time: Optional[float] = None) -> float:
    """Non-negative lambda giving ``predicted_beat_shift(hi, lo) == target_hz``."""
    unit = predicted_beat_shift(hi, lo, QDeformation(1.0), method, explicit_time)
    if unit <= 0:
        raise ValueError("hi must carry more photons than lo")
    return math.sqrt(target_hz / unit)
