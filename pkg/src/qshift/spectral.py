"""FFT spectrum analysis of beat records with sub-bin peak estimation.

The resolution bandwidth is set by the record length (``enbw / duration``),
as in an FFT analyzer.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import signal

WINDOWS = {"rectangular": "boxcar", "hann": "hann"}
ANALYTIC_ENBW = {"rectangular": 1.0, "hann": 1.5}  # bins
DC_LOBE = {"rectangular": 1, "hann": 2}  # bins next to DC that carry its leakage
DEFAULT_HALF_BAND = 2.0e3  # Hz

SNR_THRESHOLD_DB = 10.0
MAX_SNR_DB = 300.0
GUARD_BINS = 4
# std(frequency error) <= UNCERTAINTY_SCALE * bin_width / sqrt(snr); calibrated on
# Hann-windowed tones with pure phase noise (worst case, bin-centred), where the
# ratio is ~0.95; tones in additive white noise come out near 0.55
UNCERTAINTY_SCALE = 1.0


class NoPeakError(RuntimeError):
    """No spectral peak above the SNR threshold: the measurement failed."""


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Windowed power spectrum.

    ``magnitudes`` is power per bin, scaled so that a bin-centred tone reads
    its mean power (``A^2/2`` for a real cosine). Real input gives the
    one-sided spectrum (``N/2 + 1`` bins); complex input gives all ``N`` bins
    in ascending frequency.
    """

    magnitudes: np.ndarray
    bin_width: float
    window: str
    fs: float
    bin_indices: np.ndarray  # signed FFT bin number of each entry
    enbw: float  # bins

    @property
    def freqs(self) -> np.ndarray:
        return self.bin_indices * self.bin_width

    @property
    def psd(self) -> np.ndarray:
        """Power spectral density (units^2 / Hz)."""
        return self.magnitudes / (self.enbw * self.bin_width)

    @property
    def rbw(self) -> float:
        return self.enbw * self.bin_width


@dataclass(frozen=True)
class PeakEstimate:
    frequency: float  # Hz
    uncertainty: float  # Hz
    snr_db: float
    bin_index: int

    def to_dict(self) -> dict:
        return asdict(self)


def periodogram(record, window: str = "hann", fs: Optional[float] = None) -> Periodogram:
    """Windowed periodogram of a beat record, a field series or a bare array.

    Objects need ``samples`` and ``sample_rate``; bare arrays need ``fs``.
    """
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}; choose from {sorted(WINDOWS)}")
    if hasattr(record, "samples"):
        x, fs = np.asarray(record.samples), record.sample_rate
    else:
        x = np.asarray(record)
        if fs is None:
            raise ValueError("fs is required for bare arrays")
    n = len(x)
    if n < 16:
        raise ValueError(f"need at least 16 samples, got {n}")
    w = signal.get_window(WINDOWS[window], n)
    coherent = w.sum()
    enbw = n * np.sum(w * w) / coherent ** 2
    bw = fs / n
    if np.iscomplexobj(x):
        p = np.abs(np.fft.fft(x * w)) ** 2 / coherent ** 2
        k = np.fft.fftfreq(n, 1.0 / n).round().astype(np.int64)
        order = np.argsort(k)
        return Periodogram(p[order], bw, window, fs, k[order], enbw)
    p = np.abs(np.fft.rfft(x * w)) ** 2 / coherent ** 2
    p[1:n // 2 + (n % 2)] *= 2.0  # fold negative frequencies; DC and even-N Nyquist stay single
    return Periodogram(p, bw, window, fs, np.arange(len(p)), enbw)


def window_kernel(window: str, offset):
    """Continuous-frequency magnitude response of a window, normalised to 1 at 0."""
    d = np.asarray(offset, dtype=float)
    if window == "rectangular":
        return np.abs(np.sinc(d))
    if window == "hann":
        out = np.empty_like(d)
        edge = np.isclose(np.abs(d), 1.0)
        out[edge] = 0.5
        out[~edge] = np.abs(np.sinc(d[~edge]) / (1.0 - d[~edge] ** 2))
        return out
    raise ValueError(f"no kernel for window {window!r}")


def _log_parabola_vertex(lm, l0, lp):
    denom = lm - 2.0 * l0 + lp
    return np.where(denom != 0, 0.5 * (lm - lp) / np.where(denom != 0, denom, 1.0), 0.0)


def _build_correction(window: str, points: int = 4001):
    true = np.linspace(-0.5, 0.5, points)
    logs = [np.log(window_kernel(window, true + s)) for s in (1.0, 0.0, -1.0)]
    return _log_parabola_vertex(*logs), true


# only Hann: the rectangular kernel has zeros at the neighbouring bins
_CORRECTION = {"hann": _build_correction("hann")}


def interpolate_offset(lm: float, l0: float, lp: float, window: str) -> float:
    """Sub-bin offset from the log powers of three bins around a maximum.

    Fits a parabola through the log values, then maps the vertex through the
    inverse of the window's own vertex-versus-offset curve, which removes
    the systematic bias of the plain parabola for a clean tone.
    """
    raw = float(_log_parabola_vertex(lm, l0, lp))
    table = _CORRECTION.get(window)
    if table is not None:
        raw = float(np.interp(raw, table[0], table[1]))
    return min(0.5, max(-0.5, raw))


def peak_frequency(p: Periodogram, search_band: Optional[Tuple[float, float]] = None,
                   snr_threshold_db: float = SNR_THRESHOLD_DB) -> PeakEstimate:
    """Sub-bin frequency of the strongest peak in ``search_band``.

    The noise floor is the median bin power in the band (outside the peak's
    main lobe) divided by ln 2, the mean of exponentially distributed bins.

    Raises
    ------
    NoPeakError
        If the peak SNR falls below ``snr_threshold_db``.
    """
    freqs = p.freqs
    if search_band is None:
        in_band = np.ones(len(freqs), dtype=bool)
    else:
        lo, hi = search_band
        in_band = (freqs >= lo) & (freqs <= hi)
    if p.bin_indices[0] == 0:
        in_band[:DC_LOBE[p.window]] = False  # never report DC or its window leakage
    candidates = np.flatnonzero(in_band)
    if len(candidates) == 0:
        raise NoPeakError("search band contains no bins")
    k = int(candidates[np.argmax(p.magnitudes[candidates])])
    if k == 0 or k == len(freqs) - 1:
        raise NoPeakError("peak sits on the spectrum edge")

    peak = p.magnitudes[k]
    far = in_band & (np.abs(np.arange(len(freqs)) - k) > GUARD_BINS)
    if np.count_nonzero(far) < 8:
        far = np.abs(np.arange(len(freqs)) - k) > GUARD_BINS
    floor = np.median(p.magnitudes[far]) / math.log(2.0)
    tiny = peak * 10 ** (-MAX_SNR_DB / 10)
    # float64 cannot resolve power below eps^2 of the record's total (DC included)
    rounding = np.finfo(float).eps ** 2 * float(np.sum(p.magnitudes))
    snr = peak / max(floor, tiny, rounding) if peak > 0 else 0.0
    snr_db = 10 * math.log10(snr) if snr > 0 else -math.inf
    if snr_db < snr_threshold_db:
        raise NoPeakError(f"peak SNR {snr_db:.1f} dB below {snr_threshold_db} dB")

    logs = np.log(np.maximum(p.magnitudes[k - 1:k + 2], tiny))
    delta = interpolate_offset(*logs, p.window)
    index = int(p.bin_indices[k])
    return PeakEstimate(
        frequency=(index + delta) * p.bin_width,
        uncertainty=UNCERTAINTY_SCALE * p.bin_width / math.sqrt(snr),
        snr_db=snr_db,
        bin_index=index,
    )


def band_around(center: float, fs: float, half_width: float = DEFAULT_HALF_BAND) -> Tuple[float, float]:
    """Search band of ``+/- half_width`` around ``center``, kept clear of DC and Nyquist."""
    half = min(half_width, 0.5 * center, 0.5 * (fs / 2 - center))
    return center - half, center + half


def auto_peak(p: Periodogram, half_width: float = DEFAULT_HALF_BAND,
              snr_threshold_db: float = SNR_THRESHOLD_DB) -> PeakEstimate:
    """Peak of a record whose beat frequency is not known in advance.

    The band is centred on the strongest non-DC bin. Choosing that bin from
    the whole spectrum is a search over ``m`` bins, so the linear threshold is
    raised by ``ln m``; noise then passes no more often than a single bin
    tested at ``snr_threshold_db`` would.
    """
    mags = p.magnitudes.copy()
    if p.bin_indices[0] == 0:
        mags[:DC_LOBE[p.window]] = -np.inf
    m = np.count_nonzero(np.isfinite(mags))
    band = band_around(abs(float(p.freqs[int(np.argmax(mags))])), p.fs, half_width)
    threshold = 10 * math.log10(10 ** (snr_threshold_db / 10) + math.log(m))
    return peak_frequency(p, band, threshold)


def frequency_shift(a: PeakEstimate, b: PeakEstimate) -> Tuple[float, float]:
    """``(a - b, |a - b| / combined uncertainty)``."""
    shift = a.frequency - b.frequency
    return shift, abs(shift) / math.hypot(a.uncertainty, b.uncertainty)


def write_periodogram_csv(p: Periodogram, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "psd"])
        for f, v in zip(p.freqs, p.psd):
            writer.writerow([repr(float(f)), repr(float(v))])


def write_peaks_json(peaks: Sequence[PeakEstimate], path) -> None:
    with open(path, "w") as fh:
        json.dump([pk.to_dict() for pk in peaks], fh, indent=2)
