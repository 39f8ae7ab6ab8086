"""Command-line driver: run scenarios, check metrics against requirement
profiles, and list the built-in profiles and traffic catalog.

Exit codes: 0 success (and, for `check`, no assessed Fail verdict);
1 a checked dimension failed; 2 bad input (config, unknown profile, I/O).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .artifacts import metrics_from_dict, write_artifacts
from .compliance import (
    ComplianceReport,
    UnknownProfile,
    builtin_profiles,
    profile_by_name,
)
from .scenario import (
    ConfigInvalid,
    Scenario,
    default_scenario,
    dump_scenario,
    load_scenario,
)
from .simulation import Simulation
from .traffic import StreamClass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fablink",
        description=(
            "Deterministic discrete-event simulator of a 5G-connected "
            "flexible production line with requirement-profile compliance "
            "checks."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and export artifacts")
    run.add_argument("--config", help="scenario YAML; defaults when omitted")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument(
        "--horizon", type=float, help="override the horizon in seconds"
    )
    run.add_argument("--out", default="fablink-out", help="artifact directory")

    check = sub.add_parser(
        "check", help="score a metrics.json file against a requirement profile"
    )
    check.add_argument("metrics", help="metrics.json from a previous run")
    check.add_argument(
        "--profile", default="aspect1", help="profile name (aspect1, aspect2)"
    )
    check.add_argument(
        "--streams",
        choices=["safety", "aggregate", "all"],
        default=None,
        help="streams to assess (default: safety for aspect1, aggregate otherwise)",
    )

    sub.add_parser("profiles", help="list the built-in requirement profiles")

    catalog = sub.add_parser("catalog", help="list the built-in traffic catalog")
    catalog.add_argument(
        "--class",
        dest="stream_class",
        choices=[c.value for c in StreamClass],
        help="only streams of this class",
    )

    config = sub.add_parser("config", help="configuration utilities")
    config_sub = config.add_subparsers(dest="config_command", required=True)
    dump = config_sub.add_parser(
        "dump", help="print the canonical YAML for a scenario"
    )
    dump.add_argument("--config", help="scenario YAML; defaults when omitted")

    return parser


def _load(config_path: str | None) -> Scenario:
    if config_path is None:
        return default_scenario()
    return load_scenario(config_path)


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
    except (ConfigInvalid, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario.seed = args.seed
    if args.horizon is not None:
        scenario.horizon_s = args.horizon
    result = Simulation(scenario).run()
    try:
        artifacts = write_artifacts(result, args.out)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2

    agg = result.aggregate
    print(f"horizon: {scenario.horizon_s:g} s, seed {scenario.seed}")
    print(f"aggregate rate: {agg.observed_rate_bps / 1e6:.3f} Mbit/s "
          f"({agg.sample_count} packets, {agg.lost_count} lost)")
    stats = result.factory_stats
    if "released" in stats:
        print(
            f"products: {stats['released']} released, "
            f"{stats['completed']} completed, "
            f"{stats['manual_visits']} manual visits, "
            f"{stats['inspections']} inspections"
        )
    print(f"safety trips: {stats.get('safety_trips', 0)}")
    report = result.compliance
    print(
        f"compliance: {report.pass_count} pass, {report.fail_count} fail, "
        f"{report.not_assessed_count} not assessed"
    )
    print(f"artifacts: {artifacts.out_dir}")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    try:
        profile = profile_by_name(args.profile)
    except UnknownProfile:
        print(f"unknown profile: {args.profile}", file=sys.stderr)
        return 2
    try:
        with open(args.metrics, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read metrics: {exc}", file=sys.stderr)
        return 2

    selection = args.streams
    if selection is None:
        selection = "safety" if profile.name == "aspect1" else "aggregate"

    area = tuple(doc["service_area_m"]) if doc.get("service_area_m") else None
    report = ComplianceReport(
        jitter_definition=doc.get("jitter_definition", "p99_minus_min"),
        service_area_m=area,
    )
    metrics_list = []
    if selection in ("safety", "all"):
        for name in sorted(doc.get("streams", {})):
            m = metrics_from_dict(doc["streams"][name])
            if selection == "all" or m.stream_class is StreamClass.SAFETY_RELEVANT:
                metrics_list.append(m)
    if selection in ("aggregate", "all"):
        metrics_list.append(metrics_from_dict(doc["aggregate"]))
    for m in metrics_list:
        report.add(m, profile)

    print(report.render_table())
    print(
        f"{report.pass_count} pass, {report.fail_count} fail, "
        f"{report.not_assessed_count} not assessed"
    )
    return 0 if report.passed else 1


def _cmd_profiles() -> int:
    for p in builtin_profiles():
        fields = [
            f"availability {p.availability_min:.4%}..{p.availability_max:.6%}",
        ]
        if p.latency_target_ns is not None:
            fields.append(f"latency < {p.latency_target_ns / 1e6:g} ms")
        if p.jitter_max_ns is not None:
            fields.append(f"jitter < {p.jitter_max_ns / 1e6:g} ms")
        if p.service_data_rate_min_bps is not None:
            fields.append(f"rate > {p.service_data_rate_min_bps / 1e6:g} Mbit/s")
        if p.message_size_range is not None:
            fields.append(
                f"size {p.message_size_range[0]}..{p.message_size_range[1]} B"
            )
        if p.transfer_interval_max_ns is not None:
            fields.append(f"interval <= {p.transfer_interval_max_ns / 1e6:g} ms")
        if p.survival_time_ns is not None:
            fields.append(f"survival {p.survival_time_ns / 1e6:g} ms")
        if p.service_area_m is not None:
            fields.append(
                f"area <= {p.service_area_m[0]:g} m x {p.service_area_m[1]:g} m"
            )
        print(f"{p.name}: " + "; ".join(fields))
    return 0


def _cmd_catalog(stream_class: str | None) -> int:
    scenario = default_scenario()
    for p in scenario.traffic.profiles():
        if stream_class and p.stream_class.value != stream_class:
            continue
        print(
            f"{p.name:24} {p.source:>10} -> {p.destination:<10} "
            f"{p.protocol_label:8} {p.payload_bytes:5d} B {p.rate_hz:10.2f} Hz "
            f"{p.stream_class.value:12} {p.bitrate_bps / 1e6:.4f} Mbit/s"
        )
    return 0


def _cmd_config_dump(config_path: str | None) -> int:
    try:
        scenario = _load(config_path)
    except (ConfigInvalid, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(dump_scenario(scenario))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "check":
        return _cmd_check(args)
    if args.command == "profiles":
        return _cmd_profiles()
    if args.command == "catalog":
        return _cmd_catalog(args.stream_class)
    if args.command == "config":
        return _cmd_config_dump(args.config)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
