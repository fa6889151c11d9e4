"""Command-line front end.

    omur sweep <config> -o <dir>
    omur analyze <config> -o <dir>
    omur validate <config>
    omur bench <config>

Exit status: 0 success, 2 configuration error, 3 runtime or I/O error.
The worker thread count for ``sweep`` comes from ``--threads`` or the
``OMUR_THREADS`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .channel import lin2db
from .config import SystemConfig, load_config
from .errors import ConfigError
from .simkit import analytical_overlays, run_sweep, timing_bench

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SWEEP_HEADER = ["power_gain_db", "op_estimate", "ci_halfwidth", "op_analytical"]

log = logging.getLogger("omur")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


class _Manifest:
    def __init__(self, config: SystemConfig, out_dir: Path, command: str):
        self.out_dir = out_dir
        self.data = {
            "command": command,
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "tool_version": __version__,
            "started": _now(),
            "finished": None,
            "status": "running",
            "output_files": [],
        }
        self.config = config

    def add(self, path: Path):
        self.data["output_files"].append(str(path))

    def write(self, status: str):
        self.data["status"] = status
        self.data["finished"] = _now()
        cfg_path = self.out_dir / "config.resolved.json"
        cfg_path.write_text(json.dumps(self.config.to_dict(), indent=2, sort_keys=True) + "\n")
        self.data["config_copy"] = str(cfg_path)
        (self.out_dir / "manifest.json").write_text(json.dumps(self.data, indent=2) + "\n")


def write_sweep_csv(path: Path, curve) -> None:
    analytic = dict(curve.analytical or [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p in curve.points:
            w.writerow([_num(p.power_gain_db), _num(p.op_estimate), _num(p.ci_halfwidth),
                        _num(analytic.get(p.power_gain_db))])


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (float(v) if v != "" else None) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def _prepare_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sweep(config_path, out_dir, threads=None) -> int:
    config = load_config(config_path)
    out = _prepare_out(out_dir)
    manifest = _Manifest(config, out, "sweep")
    status = "failed"
    try:
        curves = run_sweep(config, threads=threads)
        for curve in curves:
            path = out / f"{curve.scheme}.csv"
            write_sweep_csv(path, curve)
            manifest.add(path)
            log.info("wrote %s", path)
        status = "ok"
    finally:
        manifest.write(status)
    return EXIT_OK


def cmd_analyze(config_path, out_dir) -> int:
    config = load_config(config_path)
    out = _prepare_out(out_dir)
    manifest = _Manifest(config, out, "analyze")
    status = "failed"
    try:
        if config.correlation != "independent":
            raise ConfigError(["correlation: analytical curves assume independent element fading"])
        if config.fixed_fading() is None:
            log.warning("users are redrawn per trial; analyzing the seed's fixed placement instead")
            config = SystemConfig.from_dict({**config.to_dict(), "user_placement": "fixed-per-sweep"})
        fading = config.fixed_fading()
        inputs = analysis.LinkMomentInputs(fading, config.topology.elements_per_surface)
        moments = []
        for k in range(inputs.num_users):
            mu1, mu2 = analysis.moments_ak(inputs, k)
            fit = analysis.GammaFit.from_moments(mu1, mu2)
            moments.append({"user": k, "mu1": mu1, "mu2": mu2, "alpha": fit.alpha, "beta": fit.beta})
        manifest.data["moments"] = moments

        overlays = analytical_overlays(config)
        for scheme, name in (("SU", "SU_analytical"), ("OR", "OR_analytical"), ("IR", "IR_bound")):
            vals, se = overlays[next(s for s in overlays if s.value == scheme)]
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                header = ["power_gain_db", "op_analytical"] + (["oracle_std_error"] if se is not None else [])
                w.writerow(header)
                for i, g in enumerate(config.gain_sweep):
                    row = [_num(g), _num(vals[i])]
                    if se is not None:
                        row.append(_num(se[i]))
                    w.writerow(row)
            manifest.add(path)
        status = "ok"
    finally:
        manifest.write(status)
    return EXIT_OK


def describe(config: SystemConfig) -> list[str]:
    topo = config.topology
    noise = config.noise_power
    lines = [
        f"users K = {topo.num_users}",
        f"surfaces S = {topo.num_surfaces}",
        f"elements M = {topo.num_elements}",
        f"noise power = {10 * math.log10(noise) + 30:.2f} dBm ({noise:.6g} W)",
        f"r0 = {config.r0} bit/s/Hz, trials = {config.trials}, seed = {config.seed}",
        f"correlation = {config.correlation}, user placement = {config.user_placement}",
    ]
    fading = config.fixed_fading()
    if fading is None:
        fading = config.fading_for(config.fixed_positions())
        lines.append("per-link spreads below are for the seed's sample placement (users move per trial)")
    lines.append(f"ris->bs omega [dB]: {np.round(lin2db(fading.omega_f), 2).tolist()}")
    lines.append(f"direct omega [dB]: {np.round(lin2db(fading.omega_d), 2).tolist()}")
    for s in range(topo.num_surfaces):
        lines.append(f"user->ris{s} omega [dB]: {np.round(lin2db(fading.omega_g[s]), 2).tolist()}")
    return lines


def cmd_validate(config_path) -> int:
    config = load_config(config_path)
    for line in describe(config):
        print(line)
    return EXIT_OK


def cmd_bench(config_path, realizations=100) -> int:
    config = load_config(config_path)
    table = timing_bench(config, config.schemes, realizations)
    print(f"{'scheme':<10}{'ms/realization':>16}")
    for name, ms in table:
        print(f"{name:<10}{ms:>16.4f}")
    print("absolute times are hardware dependent; compare ratios only")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omur", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="Monte-Carlo outage curves")
    p.add_argument("config")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("analyze", help="analytical outage curves only")
    p.add_argument("config")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("validate", help="check a config and print derived quantities")
    p.add_argument("config")

    p = sub.add_parser("bench", help="relative per-realization timing")
    p.add_argument("config")
    p.add_argument("-n", "--realizations", type=int, default=100)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            return cmd_sweep(args.config, args.out, args.threads)
        if args.command == "analyze":
            return cmd_analyze(args.config, args.out)
        if args.command == "validate":
            return cmd_validate(args.config)
        return cmd_bench(args.config, args.realizations)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
