"""Command-line entry point: ``holosim <experiment> [--config FILE] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys

from . import __version__
from .config import ScenarioConfig
from .experiments import RUNNERS, Report

log = logging.getLogger("holosim")

COMMANDS = {
    "calibrate": "calibrate",
    "bell": "bell",
    "theta-sweep": "theta_sweep",
    "phase-sweep": "phase_sweep",
    "table1": "table1",
    "timeseries": "timeseries",
}


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _sha(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_outputs(report: Report, config: ScenarioConfig, out: str) -> list[str]:
    """CSV per table, a summary CSV and a manifest; returns the written paths."""
    os.makedirs(out, exist_ok=True)
    files = []
    for name, (header, rows) in report.tables.items():
        path = os.path.join(out, f"{name}.csv")
        write_csv(path, header, rows)
        files.append(path)
    path = os.path.join(out, f"{report.name}_summary.csv")
    write_csv(path, ["key", "value"], [[k, f"{v:.10g}" if isinstance(v, float) else v]
                                       for k, v in report.summary.items()])
    files.append(path)
    if report.name == "calibrate":
        path = os.path.join(out, "calibration.ini")
        report.data.table.save(path)
        files.append(path)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(config.canonical_text())
    manifest = os.path.join(out, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write(f"tool = holosim {__version__}\n")
        fh.write(f"experiment = {report.name}\n")
        fh.write(f"config_sha256 = {config.digest()}\n")
        fh.write(f"seed = {config.seed}\n")
        fh.write(f"frame = {config.frame}\n")
        for p in files:
            fh.write(f"output = {os.path.basename(p)} sha256:{_sha(p)}\n")
    return files + [manifest]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holosim", description="Two-transmon holonomic operation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="scenario file (INI)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--frame", choices=("lab", "rwa"))
        p.add_argument("--shots", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> ScenarioConfig:
    overrides = dict(experiment=COMMANDS[args.command], seed=args.seed, workers=args.workers, frame=args.frame,
                     shots=args.shots)
    if args.config:
        return ScenarioConfig.load(args.config, **overrides)
    return ScenarioConfig.from_text("", **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    config = load_config(args)
    log.info("running %s (config %s)", config.experiment, config.digest()[:12])
    report = RUNNERS[config.experiment](config)
    for path in write_outputs(report, config, args.out):
        log.info("wrote %s", path)
    for k, v in report.summary.items():
        print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    if report.name == "table1":
        header, rows = report.tables["table1"]
        print(" ".join(f"{h:>24}" if i == 0 else f"{h:>8}" for i, h in enumerate(header)))
        for r in rows:
            print(" ".join(f"{x:>24}" if i == 0 else f"{x:>8}" for i, x in enumerate(r)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
