"""Workflows behind the command line: verify, predict, bound, simulate, analyze.

Each ``cmd_*`` returns plain data (rows or a report dict); printing and exit
codes live in :mod:`qshift.cli`.
"""
from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, hetsim, qalgebra, shiftmodel, spectral
from .config import ExperimentConfig
from .constants import LOCK_OFFSET_HZ

RESIDUAL_LIMIT = 1e-10
SIGNIFICANCE_LIMIT = 3.0
OUTPUT_DIR_ENV = "QSHIFT_OUTPUT_DIR"
PEAK_COLUMNS = ("power_mw", "n", "peak_hz", "unc_hz")


@dataclass
class AlgebraCell:
    dim: int
    lam: float
    residual: Optional[float] = None
    error: Optional[str] = None


def cmd_verify_algebra(dims: Sequence[int], lambdas: Sequence[float]) -> List[AlgebraCell]:
    cells = []
    for lam in lambdas:
        for dim in dims:
            cell = AlgebraCell(int(dim), float(lam))
            try:
                cell.residual = qalgebra.verify_q_commutator(qalgebra.FockSpace(dim), qalgebra.QDeformation(lam))
            except ValueError as exc:
                cell.error = str(exc)
            cells.append(cell)
    return cells


def cmd_predict(cfg: ExperimentConfig) -> List[dict]:
    """Photon number, fractional blue shift and beat shift against the reference beam."""
    deform = cfg.deformation
    model = cfg.shift_model()
    ref = cfg.laser(cfg.reference_power_w())
    rows = []
    for p in cfg.powers_w:
        est = shiftmodel.mode_photon_number(cfg.laser(p), model.method, model.explicit_time)
        rows.append({
            "power_mw": p * 1e3,
            "n": est.n,
            "frac_shift": qalgebra.blue_shift_approx(est.n, deform),
            "beat_shift_hz": shiftmodel.predicted_beat_shift(cfg.laser(p), ref, deform,
                                                              model.method, model.explicit_time),
        })
    return rows


def order_of_magnitude(x: float) -> str:
    if x <= 0:
        return "0"
    return f"1e{math.floor(math.log10(x)):d}"


def cmd_bound(cfg: ExperimentConfig, photon_number: Optional[float] = None) -> dict:
    """Lambda bound for ``cfg.sensitivity`` at the strongest configured power.

    An explicit ``photon_number`` (argument or config) bypasses the laser model.
    """
    n_explicit = photon_number if photon_number is not None else cfg.photon_number
    if n_explicit is not None:
        n, method, tau, power = float(n_explicit), "explicit_photon_number", None, None
    else:
        power = max(cfg.powers_w)
        model = cfg.shift_model()
        est = shiftmodel.mode_photon_number(cfg.laser(power), model.method, model.explicit_time)
        n, method, tau = est.n, est.method.value, est.coherence_time
    lam = shiftmodel.lambda_upper_bound(cfg.sensitivity, n)
    return {
        "sensitivity": cfg.sensitivity,
        "photon_number": n,
        "photon_method": method,
        "coherence_time_s": tau,
        "power_w": power,
        "wavelength_m": cfg.wavelength_nm * 1e-9,
        "lambda_max": lam,
        "order_of_magnitude": order_of_magnitude(lam),
    }


def _peak_row(rec: hetsim.BeatRecord, est: spectral.PeakEstimate) -> dict:
    return {"power_mw": rec.power * 1e3, "n": rec.photon_number,
            "peak_hz": est.frequency, "unc_hz": est.uncertainty}


def peak_table_csv(rows: Sequence[dict]) -> str:
    out = io.StringIO()
    out.write(",".join(PEAK_COLUMNS) + "\n")
    for row in rows:
        out.write(",".join(repr(float(row[c])) for c in PEAK_COLUMNS) + "\n")
    return out.getvalue()


def analyze_records(records: Sequence[hetsim.BeatRecord], window: str, band) -> List[tuple]:
    out = []
    for rec in records:
        try:
            p = spectral.periodogram(rec, window)
            est = spectral.peak_frequency(p, band) if band else spectral.auto_peak(p)
        except spectral.NoPeakError as exc:
            raise spectral.NoPeakError(f"at {rec.power * 1e3:g} mW: {exc}") from exc
        out.append((rec, est))
    return out


def resolve_output_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    return Path(override or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def _bound_from_pair(cfg: ExperimentConfig, lo: dict, hi: dict, shift: dict) -> dict:
    nu = shiftmodel.optical_frequency(cfg.wavelength_nm * 1e-9)
    combined = math.hypot(lo["uncertainty_hz"], hi["uncertainty_hz"])
    detectable = abs(shift["shift_hz"]) + SIGNIFICANCE_LIMIT * combined
    bound = {"pair_mw": [hi["power_mw"], lo["power_mw"]], "detectable_shift_hz": detectable,
             "fractional_sensitivity": detectable / nu, "effective_photon_number": None,
             "lambda_max": None, "note": None}
    if cfg.attenuation == hetsim.Attenuation.TOGETHER.value:
        bound["note"] = "both beams attenuated together: beat is insensitive to lambda"
        return bound
    n_eff = math.sqrt(max(hi["photon_number"] ** 2 - lo["photon_number"] ** 2, 0.0))
    bound["effective_photon_number"] = n_eff
    if n_eff > 0:
        bound["lambda_max"] = shiftmodel.lambda_upper_bound(bound["fractional_sensitivity"], n_eff)
    return bound


def build_report(cfg: ExperimentConfig, analyzed: Sequence[tuple]) -> dict:
    deform = cfg.deformation
    model = cfg.shift_model()
    ref_power = cfg.reference_power_w()
    nu = shiftmodel.optical_frequency(cfg.wavelength_nm * 1e-9)
    peaks = []
    for rec, est in analyzed:
        if cfg.attenuation == hetsim.Attenuation.TOGETHER.value:
            predicted = 0.0
        else:
            predicted = model.shift_hz(rec.power, deform) - model.shift_hz(ref_power, deform)
        peaks.append({"power_mw": rec.power * 1e3, "photon_number": rec.photon_number,
                      "frequency_hz": est.frequency, "uncertainty_hz": est.uncertainty,
                      "snr_db": est.snr_db, "bin_index": est.bin_index,
                      "predicted_offset_hz": predicted})
    shifts = []
    for i in range(len(peaks)):
        for j in range(i + 1, len(peaks)):
            shift, sig = spectral.frequency_shift(analyzed[j][1], analyzed[i][1])
            shifts.append({"hi_mw": peaks[j]["power_mw"], "lo_mw": peaks[i]["power_mw"],
                           "shift_hz": shift, "significance": sig,
                           "predicted_hz": peaks[j]["predicted_offset_hz"] - peaks[i]["predicted_offset_hz"]})
    # widest pair (lowest vs highest power) is shifts[len(peaks) - 2]
    bound = _bound_from_pair(cfg, peaks[0], peaks[-1], shifts[len(peaks) - 2]) if len(peaks) > 1 else None
    sim = cfg.sim_config()
    return {
        "tool": "qshift",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "photon_method": model.method.value,
        "coherence_time_s": shiftmodel.coherence_time(model.linewidth, model.method, model.explicit_time),
        "scaling": {"beat_if_hz": sim.beat_if, "lock_offset_hz": LOCK_OFFSET_HZ,
                    "if_scale_factor": LOCK_OFFSET_HZ / sim.beat_if, "optical_frequency_hz": nu,
                    "hz_per_hz": 1.0},
        "rbw_hz": spectral.ANALYTIC_ENBW[cfg.window] / sim.duration,
        "peaks": peaks,
        "shifts": shifts,
        "max_significance": max((s["significance"] for s in shifts), default=0.0),
        "null_result": all(s["significance"] < SIGNIFICANCE_LIMIT for s in shifts),
        "bound": bound,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def record_name(index: int, rec: hetsim.BeatRecord) -> str:
    return f"beat_{index:02d}_{rec.power * 1e3:g}mW.qsbt"


def cmd_simulate(cfg: ExperimentConfig, output_dir: Optional[Path] = None) -> dict:
    """Full sweep; writes ``report.json`` and ``peaks.csv`` (plus optional records/spectra)."""
    sim = cfg.sim_config()
    records = hetsim.sweep_records(sim, cfg.powers_w, cfg.deformation, cfg.bench_setup(), cfg.workers)
    analyzed = analyze_records(records, cfg.window, cfg.search_band())
    report = build_report(cfg, analyzed)
    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        (output_dir / "report.json").write_text(report_json(report))
        (output_dir / "peaks.csv").write_text(peak_table_csv([_peak_row(r, e) for r, e in analyzed]))
        if cfg.write_records:
            (output_dir / "records").mkdir(exist_ok=True)
            for i, rec in enumerate(records):
                hetsim.write_beat_record(rec, output_dir / "records" / record_name(i, rec))
        if cfg.write_spectra:
            (output_dir / "spectra").mkdir(exist_ok=True)
            for i, rec in enumerate(records):
                name = record_name(i, rec).replace(".qsbt", ".csv")
                spectral.write_periodogram_csv(spectral.periodogram(rec, cfg.window), output_dir / "spectra" / name)
            spectral.write_peaks_json([e for _, e in analyzed], output_dir / "spectra" / "peaks.json")
    return report


def read_record(path) -> hetsim.BeatRecord:
    if str(path).endswith(".csv"):
        return hetsim.read_beat_csv(path)
    return hetsim.read_beat_record(path)


def cmd_analyze(paths: Sequence, window: str = "hann", band=None) -> str:
    """Peak table (CSV text) for exported beat records, sorted by power."""
    if not paths:
        raise ValueError("no record files given")
    records = sorted((read_record(p) for p in paths), key=lambda r: r.power)
    return peak_table_csv([_peak_row(r, e) for r, e in analyze_records(records, window, band)])
