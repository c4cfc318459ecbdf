"""Seeded simulation of the phase-locked two-laser heterodyne bench.

The real 9 GHz lock offset is replaced by a sampleable intermediate
frequency (``SimConfig.beat_if``); Hz-level shifts carry over unchanged.
"""
from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from . import shiftmodel, spectral
from .qalgebra import QDeformation

MAX_SAMPLES = 2 ** 28
RECORD_MAGIC = b"QSBT"
RECORD_VERSION = 1
_HEADER = struct.Struct("<4sHHddddQdd")  # 64 bytes
FLAG_DC_BLOCKED = 1

_MASTER_STREAM = 0
_RESIDUAL_STREAM = 1


class NyquistError(ValueError):
    pass


class FormatError(ValueError):
    """Beat record file is malformed, truncated or of an unknown version."""


@dataclass(frozen=True)
class SimConfig:
    sample_rate: float = 1.0e6  # Hz
    duration: float = 0.1  # s
    beat_if: float = 1.0e5  # Hz
    seed: int = 0

    def __post_init__(self):
        if not self.sample_rate > 0 or not self.duration > 0:
            raise ValueError("sample_rate and duration must be positive")
        if not 0 < self.beat_if < self.sample_rate / 2:
            raise NyquistError(f"beat_if {self.beat_if} Hz not inside (0, fs/2 = {self.sample_rate / 2})")
        if self.n_samples > MAX_SAMPLES:
            raise ValueError(f"{self.n_samples} samples exceeds the 2^28 limit")
        if self.n_samples < 16:
            raise ValueError("fewer than 16 samples")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def rng(self, *stream: int) -> np.random.Generator:
        """Independent generator for a named stream; same (seed, stream) -> same draws."""
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=tuple(stream)))


class NoiseKind(str, enum.Enum):
    WIENER = "wiener_free_running"
    OU = "ou_locked_residual"


@dataclass(frozen=True)
class PhaseNoiseProcess:
    """Laser phase noise.

    ``WIENER`` is a free-running laser with Lorentzian FWHM ``linewidth``.
    ``OU`` is the residual error of a phase lock: an Ornstein-Uhlenbeck
    process with stationary variance ``residual_variance`` and correlation
    time ``1 / (2 pi loop_bandwidth)``.
    """

    kind: NoiseKind
    linewidth: float = 0.0  # Hz
    residual_variance: float = 0.0  # rad^2
    loop_bandwidth: float = 10.0e3  # Hz

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.linewidth < 0 or self.residual_variance < 0:
            raise ValueError("noise strengths must be >= 0")
        if not self.loop_bandwidth > 0:
            raise ValueError("loop_bandwidth must be > 0")

    @classmethod
    def wiener(cls, linewidth: float) -> "PhaseNoiseProcess":
        return cls(NoiseKind.WIENER, linewidth=linewidth)

    @classmethod
    def locked_residual(cls, variance: float, loop_bandwidth: float = 10.0e3) -> "PhaseNoiseProcess":
        return cls(NoiseKind.OU, residual_variance=variance, loop_bandwidth=loop_bandwidth)

    def sample(self, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
        if self.kind is NoiseKind.WIENER:
            steps = rng.normal(0.0, math.sqrt(2 * math.pi * self.linewidth * dt), n - 1)
            return np.concatenate(([0.0], np.cumsum(steps)))
        # exact OU discretization, started from the stationary distribution
        sigma = math.sqrt(self.residual_variance)
        rho = math.exp(-2 * math.pi * self.loop_bandwidth * dt)
        drive = rng.normal(0.0, 1.0, n)
        drive[0] *= sigma
        drive[1:] *= sigma * math.sqrt(1.0 - rho * rho)
        return signal.lfilter([1.0], [1.0, -rho], drive)


@dataclass(frozen=True, eq=False)
class OpticalFieldSeries:
    samples: np.ndarray  # complex envelope, sqrt(W)
    carrier_offset: float  # Hz, including any injected shift
    power: float  # W
    seed_used: int
    sample_rate: float

    @property
    def phase_noise(self) -> np.ndarray:
        """Unwrapped phase with the carrier ramp removed."""
        k = np.arange(len(self.samples))
        ramp = 2 * np.pi * self.carrier_offset * k / self.sample_rate
        return np.unwrap(np.angle(self.samples)) - ramp


@dataclass(frozen=True, eq=False)
class BeatRecord:
    samples: np.ndarray  # V
    sample_rate: float
    gain: float  # V/W
    matching_efficiency: float
    seed: int = 0
    power: float = 0.0  # W of the swept beam
    photon_number: float = 0.0
    dc_blocked: bool = False

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _phase_ramp(cfg: SimConfig, frequency: float) -> np.ndarray:
    return 2 * np.pi * frequency * np.arange(cfg.n_samples) / cfg.sample_rate


def _check_nyquist(cfg: SimConfig, frequency: float) -> None:
    if abs(frequency) >= cfg.sample_rate / 2:
        raise NyquistError(f"carrier {frequency} Hz outside +/- fs/2 = {cfg.sample_rate / 2} Hz")


def _field(cfg: SimConfig, power: float, frequency: float, phase: np.ndarray) -> OpticalFieldSeries:
    if power < 0:
        raise ValueError("power must be >= 0")
    _check_nyquist(cfg, frequency)
    samples = math.sqrt(power) * np.exp(1j * (_phase_ramp(cfg, frequency) + phase))
    return OpticalFieldSeries(samples, frequency, power, int(cfg.seed), cfg.sample_rate)


def synth_field(cfg: SimConfig, power: float, carrier_offset: float, noise: PhaseNoiseProcess,
                shift: Optional[float] = None, stream: Sequence[int] = ()) -> OpticalFieldSeries:
    """One laser beam as a complex envelope ``sqrt(P) exp(i(2 pi f t + phi))``.

    ``f = carrier_offset + shift``; ``phi`` is drawn from ``noise`` using the
    RNG stream ``stream`` of ``cfg.seed``.
    """
    frequency = carrier_offset + (shift or 0.0)
    _check_nyquist(cfg, frequency)
    phase = noise.sample(cfg.n_samples, cfg.dt, cfg.rng(*stream))
    return _field(cfg, power, frequency, phase)


@dataclass(frozen=True)
class QShiftModel:
    """Maps a beam's power to its absolute q-induced frequency shift."""

    wavelength: float = 850e-9
    linewidth: float = 50e3
    method: shiftmodel.PhotonMethod = shiftmodel.DEFAULT_METHOD
    explicit_time: Optional[float] = None

    def source(self, power: float) -> shiftmodel.LaserSource:
        return shiftmodel.LaserSource(self.wavelength, power, self.linewidth)

    def photon_number(self, power: float) -> float:
        return shiftmodel.mode_photon_number(self.source(power), self.method, self.explicit_time).n

    def shift_hz(self, power: float, deform: QDeformation) -> float:
        if deform.lam == 0.0:
            return 0.0
        return shiftmodel.beam_shift(self.source(power), deform, self.method, self.explicit_time)


def lock_pair(cfg: SimConfig, master_power: float, slave_power: float,
              noise_master: PhaseNoiseProcess, residual: PhaseNoiseProcess,
              deform: QDeformation = QDeformation(0.0), shift_model: Optional[QShiftModel] = None,
              stream: Sequence[int] = ()) -> Tuple[OpticalFieldSeries, OpticalFieldSeries]:
    """Master laser plus a slave locked ``beat_if`` above it.

    The slave copies the master's phase noise plus the lock residual, so the
    free-running noise cancels in the beat. With ``lam != 0`` each beam is
    further shifted by the blue shift for its own power.
    """
    if residual.kind is not NoiseKind.OU:
        raise ValueError("residual must be an ou_locked_residual process")
    if deform.lam != 0.0 and shift_model is None:
        shift_model = QShiftModel()
    shift_m = shift_model.shift_hz(master_power, deform) if shift_model else 0.0
    shift_s = shift_model.shift_hz(slave_power, deform) if shift_model else 0.0
    _check_nyquist(cfg, shift_m)
    _check_nyquist(cfg, cfg.beat_if + shift_s)

    n, dt = cfg.n_samples, cfg.dt
    phi_m = noise_master.sample(n, dt, cfg.rng(*stream, _MASTER_STREAM))
    phi_r = residual.sample(n, dt, cfg.rng(*stream, _RESIDUAL_STREAM))
    master = _field(cfg, master_power, shift_m, phi_m)
    slave = _field(cfg, slave_power, cfg.beat_if + shift_s, phi_m + phi_r)
    return master, slave


def beat_phase(a: OpticalFieldSeries, b: OpticalFieldSeries, detrend: bool = True) -> np.ndarray:
    """Unwrapped phase of ``conj(a) b``, optionally with a best-fit line removed."""
    phase = np.unwrap(np.angle(np.conj(a.samples) * b.samples))
    return signal.detrend(phase, type="linear") if detrend else phase


def photodetect(a: OpticalFieldSeries, b: OpticalFieldSeries, gain: float = 5.0,
                matching_efficiency: float = 1.0, dc_block: bool = False) -> BeatRecord:
    """Square-law detection ``v = gain (|a|^2 + |b|^2 + 2 sqrt(eta) Re(a* b))``."""
    if len(a.samples) != len(b.samples):
        raise ValueError(f"sample count mismatch: {len(a.samples)} vs {len(b.samples)}")
    if a.sample_rate != b.sample_rate:
        raise ValueError("sample rate mismatch")
    if not 0.0 <= matching_efficiency <= 1.0:
        raise ValueError("matching_efficiency must lie in [0, 1]")
    cross = np.real(np.conj(a.samples) * b.samples)
    v = gain * (np.abs(a.samples) ** 2 + np.abs(b.samples) ** 2 + 2.0 * math.sqrt(matching_efficiency) * cross)
    if dc_block:
        v = v - v.mean()
    return BeatRecord(v, a.sample_rate, gain, matching_efficiency, seed=a.seed_used, dc_blocked=dc_block)


@dataclass(frozen=True)
class Detector:
    gain: float = 5.0  # V/W
    matching_efficiency: float = 1.0
    dc_block: bool = False


class Attenuation(str, enum.Enum):
    INDEPENDENT = "independent"  # only the slave beam follows the sweep
    TOGETHER = "together"  # both beams follow the sweep


@dataclass(frozen=True)
class BenchSetup:
    """Everything about the bench except the sweep, the seed and lambda."""

    master_noise: PhaseNoiseProcess = field(default_factory=lambda: PhaseNoiseProcess.wiener(50e3))
    residual: PhaseNoiseProcess = field(default_factory=lambda: PhaseNoiseProcess.locked_residual(4e-3))
    shift_model: QShiftModel = field(default_factory=QShiftModel)
    detector: Detector = field(default_factory=Detector)
    attenuation: Attenuation = Attenuation.INDEPENDENT
    reference_power: Optional[float] = None  # W; None -> lowest swept power

    def __post_init__(self):
        object.__setattr__(self, "attenuation", Attenuation(self.attenuation))


def power_stream(power: float) -> int:
    """RNG stream id for a sweep point, keyed on the power in picowatts."""
    return int(round(power * 1e12))


def simulate_beat(cfg: SimConfig, power: float, deform: QDeformation, setup: BenchSetup,
                  reference_power: float) -> BeatRecord:
    """Beat record for one sweep point; the master beam is the reference."""
    master_power = power if setup.attenuation is Attenuation.TOGETHER else reference_power
    master, slave = lock_pair(cfg, master_power, power, setup.master_noise, setup.residual,
                              deform, setup.shift_model, stream=(power_stream(power),))
    det = setup.detector
    rec = photodetect(master, slave, det.gain, det.matching_efficiency, det.dc_block)
    return BeatRecord(rec.samples, rec.sample_rate, rec.gain, rec.matching_efficiency, rec.seed,
                      power, setup.shift_model.photon_number(power), rec.dc_blocked)


def default_search_band(cfg: SimConfig) -> Tuple[float, float]:
    return spectral.band_around(cfg.beat_if, cfg.sample_rate)


def sweep_records(cfg: SimConfig, powers: Sequence[float], deform: QDeformation,
                  setup: Optional[BenchSetup] = None, workers: int = 1) -> List[BeatRecord]:
    """Beat records for each power, sorted by power; parallel runs give identical output."""
    setup = setup or BenchSetup()
    powers = sorted(float(p) for p in powers)
    for p in powers:
        if not 1e-5 <= p <= 1e-2:
            raise ValueError(f"power {p} W outside the supported 10 uW .. 10 mW range")
    ref = setup.reference_power if setup.reference_power is not None else powers[0]

    def one(p):
        return simulate_beat(cfg, p, deform, setup, ref)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, powers))
    return [one(p) for p in powers]


def run_experiment(cfg: SimConfig, powers: Sequence[float], deform: QDeformation,
                   setup: Optional[BenchSetup] = None, window: str = "hann",
                   search_band: Optional[Tuple[float, float]] = None,
                   workers: int = 1) -> List[Tuple[float, spectral.PeakEstimate]]:
    """Sweep the beam power and measure the beat peak at each point."""
    band = search_band or default_search_band(cfg)
    out = []
    for rec in sweep_records(cfg, powers, deform, setup, workers):
        try:
            est = spectral.peak_frequency(spectral.periodogram(rec, window), band)
        except spectral.NoPeakError as exc:
            raise spectral.NoPeakError(f"at {rec.power * 1e3:g} mW: {exc}") from exc
        out.append((rec.power, est))
    return out


def write_beat_record(rec: BeatRecord, path) -> None:
    """Binary export: 64-byte little-endian header then float64 samples."""
    flags = FLAG_DC_BLOCKED if rec.dc_blocked else 0
    header = _HEADER.pack(RECORD_MAGIC, RECORD_VERSION, flags, rec.sample_rate, rec.duration,
                          rec.gain, rec.matching_efficiency, int(rec.seed), rec.power, rec.photon_number)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(rec.samples, dtype="<f8").tobytes())


def read_beat_record(path) -> BeatRecord:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, flags, fs, duration, gain, eta, seed, power, n_photons = _HEADER.unpack_from(data)
    if magic != RECORD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != RECORD_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = data[_HEADER.size:]
    expected = int(round(duration * fs))
    if len(payload) != 8 * expected:
        raise FormatError(f"{path}: expected {expected} samples, found {len(payload) / 8:g}")
    samples = np.frombuffer(payload, dtype="<f8").astype(float)
    return BeatRecord(samples, fs, gain, eta, seed, power, n_photons, bool(flags & FLAG_DC_BLOCKED))


_CSV_KEYS = ("sample_rate", "gain", "matching_efficiency", "seed", "power", "photon_number", "dc_blocked")


def write_beat_csv(rec: BeatRecord, path) -> None:
    with open(path, "w") as fh:
        for key in _CSV_KEYS:
            fh.write(f"# {key}={getattr(rec, key)!r}\n")
        fh.write("t_s,v\n")
        for k, v in enumerate(rec.samples):
            fh.write(f"{k / rec.sample_rate!r},{float(v)!r}\n")


def read_beat_csv(path) -> BeatRecord:
    meta = {}
    values = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.startswith("t_s"):
                continue
            elif line.strip():
                values.append(float(line.split(",")[1]))
    missing = [k for k in _CSV_KEYS if k not in meta]
    if missing:
        raise FormatError(f"{path}: missing header keys {missing}")
    return BeatRecord(np.array(values), float(meta["sample_rate"]), float(meta["gain"]),
                      float(meta["matching_efficiency"]), int(meta["seed"]), float(meta["power"]),
                      float(meta["photon_number"]), meta["dc_blocked"] == "True")
