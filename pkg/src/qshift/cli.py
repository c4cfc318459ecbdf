"""``qshift`` command line.

Exit codes: 0 success, 1 scientific threshold not met, 2 usage or format error.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from . import __version__, config, hetsim, runner, spectral
from .qalgebra import OutOfRangeError

EXIT_OK, EXIT_SCIENCE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _load_config(args) -> config.ExperimentConfig:
    cfg = config.load(args.config) if args.config else config.ExperimentConfig()
    changes = dict(config.parse_override(s) for s in args.set or [])
    for flag, key in (("seed", "seed"), ("lam", "deformation_lambda"), ("power_mw", "power_mw"),
                      ("sensitivity", "sensitivity"), ("photon_number", "photon_number"),
                      ("window", "window")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    return cfg.replace(**changes) if changes else cfg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file, or a report.json to re-run")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qshift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qshift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-algebra", help="check the deformed commutator on a (dim, lambda) grid")
    _common(p)
    p.add_argument("--dims", type=_ints)
    p.add_argument("--lambdas", type=_floats)

    p = sub.add_parser("predict", help="tabulate photon numbers and predicted blue shifts")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--power-mw", type=_floats)
    p.add_argument("--output", help="write the CSV table here instead of stdout")

    p = sub.add_parser("bound", help="upper bound on lambda from a null measurement")
    _common(p)
    p.add_argument("--sensitivity", type=float, help="fractional frequency sensitivity")
    p.add_argument("--photon-number", type=float, help="use this photon number directly")
    p.add_argument("--power-mw", type=_floats)
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("simulate", help="simulate the heterodyne power sweep")
    _common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--power-mw", type=_floats)
    p.add_argument("--output-dir", help=f"overrides ${runner.OUTPUT_DIR_ENV} and output_dir")

    p = sub.add_parser("analyze", help="peak table for exported beat records")
    _common(p)
    p.add_argument("records", nargs="*")
    p.add_argument("--window", choices=sorted(spectral.WINDOWS))
    p.add_argument("--output", help="write the CSV table here instead of stdout")
    return parser


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verify(args) -> int:
    cfg = _load_config(args)
    cells = runner.cmd_verify_algebra(args.dims or cfg.verify_dims, args.lambdas or cfg.verify_lambdas)
    print("dim,lambda,residual")
    status = EXIT_OK
    for c in cells:
        if c.error is not None:
            print(f"{c.dim},{c.lam!r},error: {c.error}")
            status = EXIT_USAGE
        else:
            print(f"{c.dim},{c.lam!r},{c.residual:.3e}")
            if c.residual > runner.RESIDUAL_LIMIT and status == EXIT_OK:
                status = EXIT_SCIENCE
    return status


def _predict(args) -> int:
    rows = runner.cmd_predict(_load_config(args))
    cols = ("power_mw", "n", "frac_shift", "beat_shift_hz")
    text = ",".join(cols) + "\n" + "".join(",".join(repr(r[c]) for c in cols) + "\n" for r in rows)
    _emit(text, args.output)
    return EXIT_OK


def _bound(args) -> int:
    result = runner.cmd_bound(_load_config(args))
    if args.json:
        print(json.dumps(result, indent=2))
        return EXIT_OK
    print(f"photon number      {result['photon_number']:.6g}  ({result['photon_method']})")
    if result["coherence_time_s"] is not None:
        print(f"coherence time     {result['coherence_time_s']:.6g} s")
    print(f"sensitivity        {result['sensitivity']:.6g}")
    print(f"lambda_max         {result['lambda_max']!r}")
    print(f"order of magnitude lambda <= {result['order_of_magnitude']}")
    return EXIT_OK


def _simulate(args) -> int:
    cfg = _load_config(args)
    out = runner.resolve_output_dir(cfg, args.output_dir)
    report = runner.cmd_simulate(cfg, out)
    sys.stdout.write(runner.peak_table_csv([
        {"power_mw": p["power_mw"], "n": p["photon_number"], "peak_hz": p["frequency_hz"],
         "unc_hz": p["uncertainty_hz"]} for p in report["peaks"]]))
    bound = report["bound"] or {}
    print(f"# max significance {report['max_significance']:.3g}; lambda_max {bound.get('lambda_max')!r}; "
          f"report in {out}", file=sys.stderr)
    return EXIT_OK


def _analyze(args) -> int:
    if not args.records:
        raise UsageError("analyze needs at least one record file")
    window, band = "hann", None
    if args.config or args.set:
        cfg = _load_config(args)
        window, band = cfg.window, cfg.search_band()
    if args.window:
        window = args.window
    _emit(runner.cmd_analyze(args.records, window, band), args.output)
    return EXIT_OK


_COMMANDS = {"verify-algebra": _verify, "predict": _predict, "bound": _bound,
             "simulate": _simulate, "analyze": _analyze}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, config.ConfigError, hetsim.FormatError, OutOfRangeError, OSError) as exc:
        print(f"qshift {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except spectral.NoPeakError as exc:
        print(f"qshift {args.command}: measurement failed: {exc}", file=sys.stderr)
        return EXIT_SCIENCE
    except ValueError as exc:
        print(f"qshift {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
