"""Command-line front end.

Subcommands: ``scan``, ``sweep``, ``attack inject``, ``corrupt``, ``metrics``.
Every run writes ``manifest.json`` next to its outputs.

Exit codes:
    0  success
    1  unexpected runtime error
    2  usage error (bad flags or band spec)
    3  invalid configuration or parameters
    4  file could not be read or written
    5  partial success (some targets rejected or missed)
    6  malformed input file (point cloud or target JSON)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (DEFAULT_SYNC_JITTER, DEFAULT_SYSTEM_LATENCY, attack_source, band_frequencies,
                     injected_mask, plan_attack, read_targets, sync_error, write_plan)
from .config_io import ConfigBundle, data_path, load_many
from .corruptor import CorruptionSpec, corrupt_tree, read_cloud_bin, write_cloud_bin
from .emi import CouplingChannel, EmiSource
from .errors import ConfigurationError, ConflictError, DomainError, FormatError, InfeasibleError
from .fdd import FddMachine, LidarState
from .lidar import LidarConfig
from .metrics import classify_effect, hausdorff, ray_error_stats, sweep_report, write_stats_csv, write_sweep_csv
from .scan import scan_frame
from .scene import Scene

log = logging.getLogger("iemi_lidar")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_PARTIAL, EXIT_FORMAT = range(7)
SYNC_STREAM = 4


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    config_paths: list
    seed: int | None
    outputs: list = field(default_factory=list)
    tool_version: str = __version__
    started: str = ""
    finished: str = ""

    def write(self, out_dir: Path):
        self.finished = _now()
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=1)


def _now():
    return datetime.now(timezone.utc).isoformat()


def parse_band(spec: str) -> tuple[float, float, float]:
    """``"lo:hi:step"`` in hertz, e.g. ``500e6:3500e6:1e6``."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"band spec {spec!r} must be lo:hi:step")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"band spec {spec!r}: {exc}") from exc
    if not (0 < lo <= hi and step > 0):
        raise UsageError(f"band spec {spec!r} needs 0 < lo <= hi and step > 0")
    return lo, hi, step


def _bundle(args) -> ConfigBundle:
    paths = [getattr(args, name, None) for name in ("config", "scene", "channel", "emi")]
    return load_many(paths)


def _lidar(bundle):
    return bundle.lidar if bundle.lidar is not None else LidarConfig()


def _machine(bundle, config):
    kwargs = {}
    if bundle.fault_thresholds is not None:
        kwargs["thresholds"] = bundle.fault_thresholds
    if bundle.debounce is not None:
        kwargs["debounce"] = bundle.debounce
    return FddMachine.for_config(config, **kwargs)


def _scan_kwargs(bundle, args):
    kwargs = {"duration": args.duration}
    if bundle.thresholds is not None:
        kwargs["thresholds"] = bundle.thresholds
    return kwargs


def _write_monitoring(readouts, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        n_rails = len(readouts[0].voltage_rails) if readouts else 0
        writer.writerow(["cycle", "timestamp_s", "temperature_c", *[f"rail{i}_v" for i in range(n_rails)], "rpm"])
        for k, r in enumerate(readouts):
            writer.writerow([k, repr(r.timestamp), repr(r.temperature), *[repr(v) for v in r.voltage_rails],
                             repr(r.rpm)])


def _write_states(result, path):
    """One row per cycle and active fault; fault columns are empty for fault-free cycles."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle", "timestamp_s", "state", "fault_code", "level"])
        for k, (state, faults) in enumerate(zip(result.states, result.faults)):
            stamp = repr(result.readouts[k].timestamp) if k < len(result.readouts) else ""
            if not faults:
                writer.writerow([k, stamp, state.value, "", ""])
            for f in faults:
                writer.writerow([k, stamp, state.value, f.code.value, f.level.value])


def cmd_scan(args, manifest):
    bundle = _bundle(args)
    config = _lidar(bundle)
    scene = bundle.scene or Scene()
    channel = bundle.channel or CouplingChannel()
    emi = bundle.emi if args.emi else None
    result = scan_frame(scene, config, emi, channel, _machine(bundle, config), args.seed,
                        **_scan_kwargs(bundle, args))
    out = args.out
    write_cloud_bin(result.cloud, out / "cloud.bin")
    _write_monitoring(result.readouts, out / "monitoring.csv")
    _write_states(result, out / "states.csv")
    manifest.outputs += ["cloud.bin", "monitoring.csv", "states.csv"]
    if not args.no_plot:
        from .plotting import plot_cloud
        plot_cloud(result.cloud, out / "cloud.png", title=f"final state {result.states[-1].value}")
        manifest.outputs.append("cloud.png")
    log.info("%d valid points, final state %s", int(result.cloud.valid.sum()), result.states[-1].value)
    return EXIT_OK


def _sweep_point(job):
    scene, config, source, channel, machine, seed, kwargs = job
    result = scan_frame(scene, config, source, channel, machine, seed, **kwargs)
    return source.carrier_freq, result.cloud, result.states[-1]


def cmd_sweep(args, manifest):
    lo, hi, step = parse_band(args.band)
    bundle = _bundle(args)
    config = _lidar(bundle)
    scene = bundle.scene or Scene()
    channel = bundle.channel or CouplingChannel()
    template = bundle.emi or EmiSource(lo, initial_phase=None)
    machine = _machine(bundle, config)
    kwargs = _scan_kwargs(bundle, args)
    benign = scan_frame(scene, config, None, channel, machine, args.seed, **kwargs).cloud
    jobs = [(scene, config, replace(template, carrier_freq=f), channel, machine, args.seed, kwargs)
            for f in band_frequencies(lo, hi, step)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    rows = sweep_report(results, benign)
    write_sweep_csv(rows, args.out / "sweep.csv")
    manifest.outputs.append("sweep.csv")
    if not args.no_plot:
        from .plotting import plot_sweep
        plot_sweep(rows, args.out / "sweep.png")
        manifest.outputs.append("sweep.png")
    return EXIT_OK


def cmd_attack_inject(args, manifest):
    try:
        targets = read_targets(args.targets)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.targets}: {exc.msg}", exc.pos) from exc
    bundle = load_many([args.config, args.scene, args.channel, args.emi or data_path("profile_injection.ini")])
    config = _lidar(bundle)
    scene = bundle.scene or Scene()
    channel = bundle.channel or CouplingChannel()
    template = bundle.emi
    plan = plan_attack(targets, config, template.carrier_freq, args.depth, args.latency)
    error = sync_error(config, np.random.default_rng([args.seed, SYNC_STREAM]), args.jitter)
    source = attack_source(plan, 0.0, template, error)
    result = scan_frame(scene, config, source, channel, _machine(bundle, config), args.seed,
                        **_scan_kwargs(bundle, args))

    rejected = set(plan.rejected)
    accepted = [i for i in range(len(targets)) if i not in rejected]
    hits = injected_mask(result.cloud, plan.rays, [targets[i].range for i in accepted], config.range_accuracy)
    lookup = {(int(c), int(ch)): float(r) for c, ch, r, v in
              zip(result.cloud.cycle, result.cloud.channel, result.cloud.r, result.cloud.valid) if v}
    achieved = [lookup.get(tuple(ray), float("nan")) for ray in plan.rays]

    out = args.out
    write_plan(plan, targets, out / "plan.json", out / "baseband.csv")
    write_cloud_bin(result.cloud, out / "attacked.bin")
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "channel", "azimuth_deg", "range_m", "cycle", "status", "achieved_range_m"])
        by_target = dict(zip(accepted, zip(plan.rays, hits, achieved)))
        for i, t in enumerate(targets):
            if i in rejected:
                writer.writerow([i, t.channel, repr(t.azimuth), repr(t.range), "", "rejected", ""])
            else:
                ray, hit, got = by_target[i]
                writer.writerow([i, t.channel, repr(t.azimuth), repr(t.range), ray[0], "hit" if hit else "miss",
                                 repr(got)])
    manifest.outputs += ["plan.json", "baseband.csv", "attacked.bin", "report.csv"]
    if not args.no_plot and targets:
        from .plotting import plot_injection
        plot_injection([targets[i] for i in accepted], achieved, hits, out / "injection.png")
        manifest.outputs.append("injection.png")
    n_hit = int(np.count_nonzero(hits))
    log.info("%d/%d targets hit, %d rejected, final state %s", n_hit, len(targets), len(rejected),
             result.states[-1].value)
    return EXIT_OK if n_hit == len(targets) else EXIT_PARTIAL


def cmd_corrupt(args, manifest):
    spec = CorruptionSpec(args.epsilon, args.seed)
    if not args.input.is_dir():
        raise FileNotFoundError(f"input directory {args.input} not found")
    written = corrupt_tree(args.input, args.out, spec, workers=args.workers)
    manifest.outputs += written
    return EXIT_OK


def cmd_metrics(args, manifest):
    benign = read_cloud_bin(args.benign)
    attacked = read_cloud_bin(args.attacked)
    stats = ray_error_stats(benign, attacked)
    label = classify_effect(stats, LidarState(args.final_state))
    try:
        dist = hausdorff(benign, attacked)
    except ValueError:
        dist = None
    write_stats_csv(stats, label, args.out / "stats.csv", dist)
    manifest.outputs.append("stats.csv")
    return EXIT_OK


def _common(p, seed=True):
    p.add_argument("--out", type=Path, required=True, help="output directory (created if missing)")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def _sim_inputs(p, channel_required=False):
    p.add_argument("--config", type=Path, help="sensor configuration (.ini); defaults to the built-in sensor")
    p.add_argument("--scene", type=Path, help="scene description (.ini)")
    p.add_argument("--channel", type=Path, required=channel_required, help="coupling channel (.ini)")
    p.add_argument("--emi", type=Path, help="attacker profile (.ini)")
    p.add_argument("--duration", type=float, default=None, help="simulated seconds (default one revolution)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iemi-lidar", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="simulate one frame")
    _sim_inputs(p)
    _common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("sweep", help="carrier frequency sweep against a benign frame")
    _sim_inputs(p, channel_required=True)
    p.add_argument("--band", required=True, help="lo:hi:step in Hz, endpoints inclusive")
    p.add_argument("--workers", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("attack", help="attack planning")
    attack_sub = p.add_subparsers(dest="attack_command", required=True)
    p = attack_sub.add_parser("inject", help="spoof the points of a target file")
    p.add_argument("--targets", type=Path, required=True, help="JSON array of spoof targets")
    _sim_inputs(p, channel_required=True)
    p.add_argument("--depth", type=float, default=1.0, help="AM depth in (0, 1]")
    p.add_argument("--latency", type=float, default=DEFAULT_SYSTEM_LATENCY, help="attacker latency [s]")
    p.add_argument("--jitter", type=float, default=DEFAULT_SYNC_JITTER, help="per-detection sync jitter [s]")
    _common(p)
    p.set_defaults(func=cmd_attack_inject)

    p = sub.add_parser("corrupt", help="add uniform range noise to every .bin file of a tree")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--epsilon", type=float, required=True, help="noise half-width [m]")
    p.add_argument("--workers", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("metrics", help="compare two .bin clouds ray by ray")
    p.add_argument("--benign", type=Path, required=True)
    p.add_argument("--attacked", type=Path, required=True)
    p.add_argument("--final-state", default=LidarState.NORMAL.value, choices=[s.value for s in LidarState])
    _common(p, seed=False)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    command = args.command if args.command != "attack" else f"attack {args.attack_command}"
    configs = [str(getattr(args, n)) for n in ("config", "scene", "channel", "emi", "targets", "input")
               if getattr(args, n, None) is not None]
    manifest = RunManifest(command, configs, getattr(args, "seed", None), started=_now())
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        code = args.func(args, manifest)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigurationError, DomainError, ConflictError, InfeasibleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        manifest.write(args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
