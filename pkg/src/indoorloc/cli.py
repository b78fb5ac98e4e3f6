"""Command line interface.

Subcommands:
  replay  run one variant over a map + trace, write trajectory/report CSVs
  synth   generate a trace + ground truth from a walk script
  batch   grid of (script, noise, seed, variant) runs, write summary.csv
  stats   per-router RSSI mean/variance over a trace's scans

Exit codes: 0 on success, 1 on domain errors (bad map, bad trace, bad
config), 2 on argument errors (argparse).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import replay, synth, traceio, wifi
from .errors import LocalizationError


def _add_common(parser: argparse.ArgumentParser, *, map_required: bool = True) -> None:
    parser.add_argument("--map", required=map_required, help="indoor map (OSM XML)")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--out-dir", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indoorloc",
        description="Map-constrained indoor localization from smartphone traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_replay = sub.add_parser("replay", help="replay a trace under one variant")
    _add_common(p_replay)
    p_replay.add_argument("--trace", required=True, help="sensor trace (JSONL)")
    p_replay.add_argument(
        "--variant",
        default="full",
        choices=sorted(replay.VARIANTS),
        help="subsystems to fuse",
    )
    p_replay.add_argument("--truth", default=None, help="ground-truth CSV for error reports")

    p_synth = sub.add_parser("synth", help="synthesize a trace from a walk script")
    _add_common(p_synth)

    p_batch = sub.add_parser("batch", help="run a seed grid and summarize errors")
    _add_common(p_batch)

    p_stats = sub.add_parser("stats", help="per-router RSSI statistics of a trace")
    p_stats.add_argument("--trace", required=True, help="sensor trace (JSONL)")
    p_stats.add_argument("--out-dir", default="out", help="output directory")

    return parser


def _cmd_replay(args: argparse.Namespace) -> int:
    config = replay.load_config(args.config)
    report = replay.run_replay(
        args.map, args.trace, args.variant, config, args.out_dir, truth_path=args.truth
    )
    print(f"trajectory written to {Path(args.out_dir) / f'trajectory_{args.variant}.csv'}")
    if report is not None:
        print(f"{args.variant}: mean error {report.mean:.3f} m over {len(report.errors)} reference points")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    config = replay.load_config(args.config)
    if "script" not in config:
        raise LocalizationError("synth config needs a 'script' entry")
    indoor_map = replay._parse_map_file(args.map)
    script = replay.script_from(config["script"])
    noise = replay.noise_profile_from(config.get("noise", {}))
    trace, scans, truth = synth.synth_walk(
        indoor_map,
        script,
        noise,
        args.seed,
        filter_cfg=replay.filter_config_from(config.get("filter", {})),
        rssi_params=replay.rssi_params_from(config.get("rssi_model", {})),
        scan_hz=float(config.get("scan_hz", 1.0)),
        gait_amplitude=float(config.get("gait_amplitude", 0.08)),
        still_s=float(config.get("still_s", 2.0)),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traceio.write_trace(out_dir / "trace.jsonl", trace, scans)
    synth.write_truth(out_dir / "truth.csv", truth)
    print(f"wrote {out_dir / 'trace.jsonl'} ({len(trace.t)} samples, {len(scans)} scans)")
    print(f"wrote {out_dir / 'truth.csv'} ({len(truth.step)} rows)")
    return 0


def _cmd_batch(args: argparse.Namespace) -> int:
    config = replay.load_config(args.config)
    summary = replay.run_batch(args.map, config, args.out_dir, base_seed=args.seed)
    print(f"wrote {summary}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    _, scans = traceio.read_trace(args.trace)
    by_router: dict[str, list[float]] = {}
    for scan in scans:
        for router, dbm in scan.readings.items():
            by_router.setdefault(router, []).append(dbm)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "rssi_stats.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("router", "mean_dbm", "variance_db2", "count"))
        for router in sorted(by_router):
            stats = wifi.rssi_stats(by_router[router])
            writer.writerow([router, repr(stats.mean), repr(stats.variance), stats.count])
            print(f"{router}: mean {stats.mean:.2f} dBm, variance {stats.variance:.2f}, n={stats.count}")
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "replay": _cmd_replay,
    "synth": _cmd_synth,
    "batch": _cmd_batch,
    "stats": _cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (LocalizationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
