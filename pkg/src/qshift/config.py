"""Experiment configuration: flat TOML with the unit in every key name."""
from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import hetsim, shiftmodel, spectral
from .qalgebra import QDeformation


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    deformation_lambda: float = 0.0
    # laser
    wavelength_nm: float = 850.0
    linewidth_khz: float = 50.0
    power_mw: List[float] = field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    reference_power_mw: Optional[float] = None
    photon_method: str = shiftmodel.DEFAULT_METHOD.value
    coherence_time_us: Optional[float] = None
    # simulation
    seed: Optional[int] = None
    sample_rate_hz: float = 1.0e6
    duration_s: float = 0.1
    beat_if_hz: float = 1.0e5
    gain_v_per_w: float = 5.0
    matching_efficiency: float = 1.0
    dc_block: bool = False
    residual_variance_rad2: float = 4.0e-3
    loop_bandwidth_khz: float = 10.0
    attenuation: str = hetsim.Attenuation.INDEPENDENT.value
    workers: int = 1
    # analysis
    window: str = "hann"
    search_band_hz: Optional[List[float]] = None
    # bound
    sensitivity: float = 1.0e-14
    photon_number: Optional[float] = None
    # algebra check
    verify_dims: List[int] = field(default_factory=lambda: [8, 32, 64])
    verify_lambdas: List[float] = field(default_factory=lambda: [0.0, 1e-8, 1e-3, 0.1, 1.0])
    # output
    output_dir: str = "qshift-out"
    write_records: bool = False
    write_spectra: bool = False

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            object.__setattr__(self, f.name, _coerce(f.name, f.type, value))
        self.validate()

    def validate(self) -> None:
        """Build every owning-module object once so bad values fail early."""
        try:
            self.deformation
            if not self.power_mw:
                raise ValueError("power_mw must not be empty")
            for p in self.power_mw:
                self.laser(p * 1e-3)
            shiftmodel.coherence_time(self.linewidth_khz * 1e3, self.photon_method, self.coherence_time_s)
            hetsim.Attenuation(self.attenuation)
            if self.window not in spectral.WINDOWS:
                raise ValueError(f"window must be one of {sorted(spectral.WINDOWS)}")
            if self.search_band_hz is not None and (len(self.search_band_hz) != 2
                                                   or self.search_band_hz[0] >= self.search_band_hz[1]):
                raise ValueError("search_band_hz must be [low, high] with low < high")
            if self.sensitivity < 0:
                raise ValueError("sensitivity must be >= 0")
            if self.workers < 1:
                raise ValueError("workers must be >= 1")
            if self.seed is not None:
                self.sim_config()
            self.bench_setup()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def deformation(self) -> QDeformation:
        return QDeformation(self.deformation_lambda)

    @property
    def coherence_time_s(self) -> Optional[float]:
        return None if self.coherence_time_us is None else self.coherence_time_us * 1e-6

    @property
    def powers_w(self) -> List[float]:
        return sorted(p * 1e-3 for p in self.power_mw)

    def laser(self, power_w: float) -> shiftmodel.LaserSource:
        return shiftmodel.LaserSource(self.wavelength_nm * 1e-9, power_w, self.linewidth_khz * 1e3)

    def shift_model(self) -> hetsim.QShiftModel:
        return hetsim.QShiftModel(self.wavelength_nm * 1e-9, self.linewidth_khz * 1e3,
                                  shiftmodel.PhotonMethod(self.photon_method), self.coherence_time_s)

    def sim_config(self) -> hetsim.SimConfig:
        if self.seed is None:
            raise ConfigError("a seed is required for simulation (set seed or pass --seed)")
        return hetsim.SimConfig(self.sample_rate_hz, self.duration_s, self.beat_if_hz, self.seed)

    def bench_setup(self) -> hetsim.BenchSetup:
        ref = None if self.reference_power_mw is None else self.reference_power_mw * 1e-3
        return hetsim.BenchSetup(
            master_noise=hetsim.PhaseNoiseProcess.wiener(self.linewidth_khz * 1e3),
            residual=hetsim.PhaseNoiseProcess.locked_residual(self.residual_variance_rad2,
                                                              self.loop_bandwidth_khz * 1e3),
            shift_model=self.shift_model(),
            detector=hetsim.Detector(self.gain_v_per_w, self.matching_efficiency, self.dc_block),
            attenuation=hetsim.Attenuation(self.attenuation),
            reference_power=ref,
        )

    def reference_power_w(self) -> float:
        if self.reference_power_mw is not None:
            return self.reference_power_mw * 1e-3
        return self.powers_w[0]

    def search_band(self):
        """Configured band, or None to centre one on each record's strongest tone."""
        return None if self.search_band_hz is None else tuple(self.search_band_hz)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return from_mapping({**self.to_dict(), **changes})


_KNOWN = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, annotation, value):
    ann = str(annotation)
    if value is None:
        if ann.startswith("Optional"):
            return None
        raise ConfigError(f"{name} may not be null")
    base = ann[len("Optional["):-1] if ann.startswith("Optional") else ann
    if base.startswith("List["):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list")
        return [_coerce(name, base[5:-1], v) for v in value]
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, not a boolean")
    if base == "int":
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if base == "float":
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    raise ConfigError(f"unsupported type {annotation} for {name}")


def from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_KNOWN))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**data)


def load(path) -> ExperimentConfig:
    """Read a TOML config, or the ``config`` block echoed in a JSON run report."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text())
            if "config" not in data:
                raise ConfigError(f"{path}: JSON file has no 'config' block")
            data = data["config"]
        else:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_mapping(data)


def parse_override(text: str) -> tuple:
    """``key=value`` with the value read as a TOML literal (bare words become strings)."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not key=value")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value
