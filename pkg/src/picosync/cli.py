"""Command-line entry point: ``picosync run`` and ``picosync list-presets``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, apply_overrides, format_config, load_config
from .consensus import log_magnitude_dbps
from .presets import get_preset, list_presets
from .simulator import ExperimentResult, SweepPoint, run_experiment, run_sweep

log = logging.getLogger("picosync")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


@dataclasses.dataclass
class RunManifest:
    config: dict
    config_text: str
    seed: int
    version: str
    outputs: list[str]
    duration_s: float
    argv: list[str]

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")


def _parse_override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picosync", description=__doc__)
    parser.add_argument("--version", action="version", version=f"picosync {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment or sweep")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named configuration (see list-presets)")
    src.add_argument("--config", type=Path, help="key = value configuration file")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--out", type=Path, default=Path("picosync-out"), help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    run.add_argument("--override", action="append", default=[], type=_parse_override,
                     metavar="KEY=VALUE", help="override one configuration key (repeatable)")
    run.add_argument("--lut-cache", type=Path, help="directory for cached bias tables")

    sub.add_parser("list-presets", help="show the available presets")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.preset:
        try:
            cfg = get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError("preset", exc.args[0]) from None
    elif args.config:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
    else:
        cfg = ExperimentConfig()
    if args.override:
        cfg = apply_overrides(cfg, dict(args.override))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.jobs < 1:
        raise ConfigError("jobs", "must be at least 1")
    return cfg.validate()


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and not np.isfinite(x)) else repr(float(x))


def write_experiment(result: ExperimentResult, out: Path) -> list[Path]:
    """Per-iteration offsets, precision, bounds and summary for one experiment."""
    paths = []
    rows = []
    for rec in result.records:
        for k in range(rec.iterations):
            for e, (i, j) in enumerate(rec.edges):
                m = rec.measured[k, e] if rec.valid[k, e] else float("nan")
                rows.append([rec.trial, k, i, j, _fmt(m), _fmt(rec.truth[k, e]),
                             _fmt(log_magnitude_dbps(m)), _fmt(log_magnitude_dbps(rec.truth[k, e]))])
    paths.append(_write_csv(out / "offsets.csv",
                            ["trial", "iteration", "i", "j", "measured_s", "truth_s",
                             "measured_dbps", "truth_dbps"], rows))

    if len(result.records) >= 2:
        p = result.precision()
        t = result.precision("truth")
        rows = [[k, _fmt(p.precision[k]), _fmt(p.accuracy[k]), _fmt(t.precision[k]), _fmt(t.accuracy[k])]
                for k in range(len(p.precision))]
        paths.append(_write_csv(out / "precision.csv",
                                ["iteration", "precision_s", "accuracy_s",
                                 "truth_precision_s", "truth_accuracy_s"], rows))

    var = result.link_crlb_variances()
    rows = [[rec.trial, i, j, _fmt(rec.link_snr_db[e]), _fmt(np.sqrt(var[t, e]))]
            for t, rec in enumerate(result.records) for e, (i, j) in enumerate(rec.edges)]
    rows.append(["network", "", "", "", _fmt(result.network_crlb_std())])
    paths.append(_write_csv(out / "crlb.csv", ["trial", "i", "j", "snr_db", "crlb_std_s"], rows))

    summary = out / "summary.json"
    summary.write_text(json.dumps(result.summary(), indent=2) + "\n")
    paths.append(summary)
    return paths


def write_sweep(cfg: ExperimentConfig, points: list[SweepPoint], out: Path) -> list[Path]:
    rows = [[_fmt(p.value), _fmt(p.mean_precision_s), _fmt(p.worst_precision_s), _fmt(p.network_std_s),
             _fmt(p.crlb_std_s), _fmt(p.crlb_std_estimated_s), _fmt(p.mean_estimated_snr_db)]
            for p in points]
    paths = [_write_csv(out / "sweep.csv",
                        [cfg.sweep_axis, "mean_precision_s", "worst_precision_s", "network_std_s",
                         "crlb_std_s", "crlb_std_estimated_s", "mean_estimated_snr_db"], rows)]
    summary = out / "summary.json"
    summary.write_text(json.dumps({
        "name": cfg.name,
        "sweep_axis": cfg.sweep_axis,
        "points": [dict(value=p.value, **p.result.summary()) for p in points],
    }, indent=2) + "\n")
    paths.append(summary)
    return paths


def cmd_run(args: argparse.Namespace, argv: list[str]) -> int:
    cfg = resolve_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    log.info("running %s (%d trials x %d iterations)", cfg.name, cfg.trials, cfg.iterations)
    if cfg.sweep_axis:
        paths = write_sweep(cfg, run_sweep(cfg, args.jobs, args.lut_cache), args.out)
    else:
        paths = write_experiment(run_experiment(cfg, args.jobs, args.lut_cache), args.out)
    manifest = RunManifest(
        config=json.loads(json.dumps(dataclasses.asdict(cfg))),
        config_text=format_config(cfg),
        seed=cfg.seed,
        version=__version__,
        outputs=[p.name for p in paths],
        duration_s=time.perf_counter() - start,
        argv=argv,
    )
    manifest.write(args.out / "manifest.json")
    print(f"wrote {len(paths) + 1} files to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list-presets":
        for name, desc in list_presets():
            print(f"{name:24s} {desc}")
        return EXIT_OK
    try:
        return cmd_run(args, argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any simulation failure as a runtime error
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
