"""Scenario configuration: schema, defaults, YAML load/dump and validation.

One human-editable YAML format. Unknown keys are rejected so typos cannot
silently fall back to defaults, and a dumped config re-parses to an
equivalent scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml

from .nr_frame import (
    BandwidthPart,
    CyclicPrefix,
    TtiConfig,
    slot_format_table,
    validate_bwp_partition,
)
from .radio_link import (
    BlerCurve,
    LinkConfig,
    LinkModel,
    ThroughputCurve,
    Waveform,
    default_link_model,
)
from .sim_core import NS_PER_MS, NS_PER_S, NS_PER_US
from .traffic import (
    DEFAULT_CAMERA_PACKET_BYTES,
    MEASURED_TOTAL_RATE_BPS,
    Pattern,
    StreamClass,
    TrafficProfile,
    measured_catalog,
)


class ConfigInvalid(ValueError):
    """Scenario config failed validation; the message names the field."""


def _require_mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigInvalid(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigInvalid(f"{path}: unknown key(s) {sorted(unknown)}")


def _get_number(mapping: dict, key: str, default, path: str, minimum=None):
    value = mapping.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigInvalid(f"{path}.{key}: expected a number")
    if minimum is not None and value < minimum:
        raise ConfigInvalid(f"{path}.{key}: must be >= {minimum}")
    return value


def _get_str(mapping: dict, key: str, default, path: str) -> str:
    value = mapping.get(key, default)
    if not isinstance(value, str):
        raise ConfigInvalid(f"{path}.{key}: expected a string")
    return value


def _get_bool(mapping: dict, key: str, default, path: str) -> bool:
    value = mapping.get(key, default)
    if not isinstance(value, bool):
        raise ConfigInvalid(f"{path}.{key}: expected a boolean")
    return value


# -- sections -------------------------------------------------------------------


@dataclass
class RadioSection:
    waveform: str = "P-OFDM"
    channel: str = "EVA70"
    snr_db: float = 15.0
    carrier_freq_mhz: int = 3500
    bandwidth_mhz: int = 10
    tti_us: int = 125  # active scheduling granularity; set explicitly, never inferred
    processing_delay_us: float = 100.0
    wired_latency_us: float = 200.0
    jitter_us: float = 0.0
    bler_anchors: dict | None = None  # {waveform: {channel: {anchors, floor, tail_slope}}}
    throughput_anchors: dict | None = None  # {waveform: [[snr, mbps], ...]}

    def link_config(self) -> LinkConfig:
        return LinkConfig(
            waveform=Waveform(self.waveform),
            channel=self.channel,
            snr_db=float(self.snr_db),
            carrier_freq_mhz=int(self.carrier_freq_mhz),
            bandwidth_mhz=int(self.bandwidth_mhz),
            tti=TtiConfig(int(self.tti_us)),
            processing_delay_ns=round(self.processing_delay_us * NS_PER_US),
        )

    def link_model(self) -> LinkModel:
        model = default_link_model()
        if self.bler_anchors:
            curves = dict(model.bler_curves)
            for wf_name, channels in self.bler_anchors.items():
                for channel, spec in channels.items():
                    anchors = tuple(
                        (float(s), float(b)) for s, b in spec["anchors"]
                    )
                    if len(anchors) < 2:
                        raise ConfigInvalid(
                            f"radio.bler_anchors.{wf_name}.{channel}: "
                            "a channel needs at least 2 anchors"
                        )
                    curves[(Waveform(wf_name), channel)] = BlerCurve(
                        anchors,
                        floor_bler=float(spec.get("floor", 0.0)),
                        tail_slope_decades_per_db=spec.get("tail_slope"),
                    )
            model = LinkModel(curves, model.throughput_curves)
        if self.throughput_anchors:
            tcurves = dict(model.throughput_curves)
            for wf_name, anchors in self.throughput_anchors.items():
                tcurves[Waveform(wf_name)] = ThroughputCurve(
                    tuple((float(s), float(m) * 1e6) for s, m in anchors)
                )
            model = LinkModel(model.bler_curves, tcurves)
        return model


@dataclass
class NrSection:
    numerology_mu: int = 0
    slot_format_extensions: dict[int, str] = field(default_factory=dict)
    bwp_carrier_prb: int | None = None
    bwp_parts: list[dict] = field(default_factory=list)


@dataclass
class TrafficSection:
    catalog: str | list[dict] = "measured"
    total_rate_mbps: float = MEASURED_TOTAL_RATE_BPS / 1e6
    camera_shares: dict[str, float] = field(
        default_factory=lambda: {"forward": 0.25, "threesixty": 0.60, "product": 0.15}
    )
    camera_packet_bytes: int = DEFAULT_CAMERA_PACKET_BYTES

    def profiles(self) -> list[TrafficProfile]:
        if self.catalog == "measured":
            return measured_catalog(
                total_rate_bps=self.total_rate_mbps * 1e6,
                camera_shares=self.camera_shares,
                camera_packet_bytes=self.camera_packet_bytes,
            )
        profiles = []
        for i, row in enumerate(self.catalog):
            path = f"traffic.catalog[{i}]"
            row = _require_mapping(row, path)
            _check_keys(
                row,
                {
                    "name", "source", "destination", "protocol", "class",
                    "payload_bytes", "rate_hz", "pattern", "phase_us", "wireless",
                },
                path,
            )
            try:
                profiles.append(
                    TrafficProfile(
                        name=_get_str(row, "name", f"stream{i}", path),
                        source=_get_str(row, "source", "src", path),
                        destination=_get_str(row, "destination", "dst", path),
                        protocol_label=_get_str(row, "protocol", "UDP", path),
                        stream_class=StreamClass(
                            _get_str(row, "class", "non-safety", path)
                        ),
                        payload_bytes=int(
                            _get_number(row, "payload_bytes", 100, path, 1)
                        ),
                        rate_hz=float(_get_number(row, "rate_hz", 1.0, path)),
                        pattern=Pattern(
                            _get_str(row, "pattern", "periodic", path)
                        ),
                        phase_ns=round(
                            _get_number(row, "phase_us", 0.0, path, 0) * NS_PER_US
                        ),
                        wireless=_get_bool(row, "wireless", True, path),
                    )
                )
            except ValueError as exc:
                raise ConfigInvalid(f"{path}: {exc}") from None
        return profiles


@dataclass
class IslandSpec:
    id: str
    capabilities: list[str]


@dataclass
class ReleaseSpec:
    count: int = 3
    interval_s: float = 20.0
    island: str = "island1"
    start_s: float = 0.0


@dataclass
class FactorySection:
    enabled: bool = True
    recipe: list[str] = field(
        default_factory=lambda: [
            "engrave", "insert_spring", "mount_cover", "weigh", "optical_inspect",
        ]
    )
    islands: list[IslandSpec] = field(
        default_factory=lambda: [
            IslandSpec("island1", ["engrave", "insert_spring"]),
            IslandSpec("island2", ["mount_cover", "weigh"]),
            IslandSpec("island3", ["optical_inspect"]),
        ]
    )
    transit_s: dict[str, dict[str, float]] = field(default_factory=dict)
    service_s: float = 2.0
    service_overrides: dict[str, float] = field(default_factory=dict)
    conveyor_s: float = 0.5
    dock_s: float = 0.5
    load_s: float = 0.5
    tick_ms: float = 100.0
    registry_staleness_ticks: int = 3
    defect_probability: float = 0.0
    image_bytes: int = 2_000_000
    inference_ms: float = 200.0
    manual_service_s: float = 4.0
    manual_rework_s: float = 4.0
    manual_station: bool = True
    robot_home: str = "island1"
    robot_return_home: bool = True
    releases: ReleaseSpec = field(default_factory=ReleaseSpec)

    def __post_init__(self):
        if not self.transit_s:
            self.transit_s = _default_transit(
                [i.id for i in self.islands], manual=self.manual_station
            )

    def service_time_s(self, capability: str) -> float:
        return self.service_overrides.get(capability, self.service_s)


def _default_transit(island_ids: list[str], manual: bool) -> dict[str, dict[str, float]]:
    """Symmetric seconds-scale defaults for a hall of a few tens of meters:
    adjacent islands 6 s apart, 3 s extra per island skipped, manual 8 s."""
    nodes = list(island_ids)
    if manual:
        nodes.append("manual")
    matrix: dict[str, dict[str, float]] = {n: {} for n in nodes}
    for i, a in enumerate(island_ids):
        for j, b in enumerate(island_ids):
            if a == b:
                matrix[a][b] = 0.0
            else:
                matrix[a][b] = 6.0 + 3.0 * (abs(i - j) - 1)
    if manual:
        for a in island_ids:
            matrix[a]["manual"] = 8.0
            matrix["manual"][a] = 8.0
        matrix["manual"]["manual"] = 0.0
    return matrix


@dataclass
class SafetySection:
    enabled: bool = True
    cycle_hz: float = 246.19
    watchdog_ms: float = 12.0
    retry_at_tti: bool = True
    pdu_bytes_up: int = 60
    pdu_bytes_down: int = 64


@dataclass
class ComplianceSection:
    service_area_m: tuple[float, float] = (20.0, 20.0)
    jitter_definition: str = "p99_minus_min"
    survival_time_ms: float = 12.0
    availability_sample_floor: int | None = None


@dataclass
class ScriptAction:
    at_s: float
    action: str
    endpoint: str | None = None
    loop: str | None = None
    sensor: str | None = None


_SCRIPT_ACTIONS = {
    "estop", "reset", "obstacle", "clear", "reset_local",
    "link_down", "link_up", "module_fault", "module_clear",
}


@dataclass
class Scenario:
    seed: int = 42
    horizon_s: float = 60.0
    radio: RadioSection = field(default_factory=RadioSection)
    nr: NrSection = field(default_factory=NrSection)
    traffic: TrafficSection = field(default_factory=TrafficSection)
    factory: FactorySection = field(default_factory=FactorySection)
    safety: SafetySection = field(default_factory=SafetySection)
    compliance: ComplianceSection = field(default_factory=ComplianceSection)
    script: list[ScriptAction] = field(default_factory=list)

    @property
    def horizon_ns(self) -> int:
        return round(self.horizon_s * NS_PER_S)


def default_scenario() -> Scenario:
    return Scenario()


# -- parsing ---------------------------------------------------------------------


def scenario_from_dict(data: dict) -> Scenario:
    data = _require_mapping(data, "scenario")
    _check_keys(
        data,
        {"seed", "horizon_s", "radio", "nr", "traffic", "factory", "safety",
         "compliance", "script"},
        "scenario",
    )
    scn = Scenario()
    scn.seed = int(_get_number(data, "seed", scn.seed, "scenario", 0))
    scn.horizon_s = float(_get_number(data, "horizon_s", scn.horizon_s, "scenario", 0))

    radio = _require_mapping(data.get("radio"), "radio")
    _check_keys(
        radio,
        {"waveform", "channel", "snr_db", "carrier_freq_mhz", "bandwidth_mhz",
         "tti_us", "processing_delay_us", "wired_latency_us", "jitter_us",
         "bler_anchors", "throughput_anchors"},
        "radio",
    )
    r = scn.radio
    r.waveform = _get_str(radio, "waveform", r.waveform, "radio")
    r.channel = _get_str(radio, "channel", r.channel, "radio")
    r.snr_db = float(_get_number(radio, "snr_db", r.snr_db, "radio"))
    r.carrier_freq_mhz = int(
        _get_number(radio, "carrier_freq_mhz", r.carrier_freq_mhz, "radio")
    )
    r.bandwidth_mhz = int(
        _get_number(radio, "bandwidth_mhz", r.bandwidth_mhz, "radio")
    )
    r.tti_us = int(_get_number(radio, "tti_us", r.tti_us, "radio"))
    r.processing_delay_us = float(
        _get_number(radio, "processing_delay_us", r.processing_delay_us, "radio", 0)
    )
    r.wired_latency_us = float(
        _get_number(radio, "wired_latency_us", r.wired_latency_us, "radio", 0)
    )
    r.jitter_us = float(_get_number(radio, "jitter_us", r.jitter_us, "radio", 0))
    r.bler_anchors = radio.get("bler_anchors")
    r.throughput_anchors = radio.get("throughput_anchors")
    try:
        r.link_config()
        r.link_model()
    except ConfigInvalid:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigInvalid(f"radio: {exc}") from None

    nr = _require_mapping(data.get("nr"), "nr")
    _check_keys(
        nr,
        {"numerology_mu", "slot_format_extensions", "bwp_carrier_prb", "bwp_parts"},
        "nr",
    )
    scn.nr.numerology_mu = int(_get_number(nr, "numerology_mu", 0, "nr", 0))
    extensions = _require_mapping(nr.get("slot_format_extensions"), "nr.slot_format_extensions")
    try:
        scn.nr.slot_format_extensions = {int(k): str(v) for k, v in extensions.items()}
        slot_format_table(scn.nr.slot_format_extensions)
    except ValueError as exc:
        raise ConfigInvalid(f"nr.slot_format_extensions: {exc}") from None
    if nr.get("bwp_carrier_prb") is not None:
        scn.nr.bwp_carrier_prb = int(
            _get_number(nr, "bwp_carrier_prb", 0, "nr", 1)
        )
    scn.nr.bwp_parts = list(nr.get("bwp_parts") or [])
    _validate_bwp_section(scn.nr)

    traffic = data.get("traffic")
    if traffic is not None:
        traffic = _require_mapping(traffic, "traffic")
        _check_keys(
            traffic,
            {"catalog", "total_rate_mbps", "camera_shares", "camera_packet_bytes"},
            "traffic",
        )
        t = scn.traffic
        catalog = traffic.get("catalog", t.catalog)
        if not (catalog == "measured" or isinstance(catalog, list)):
            raise ConfigInvalid(
                "traffic.catalog: expected 'measured' or a list of streams"
            )
        t.catalog = catalog
        t.total_rate_mbps = float(
            _get_number(traffic, "total_rate_mbps", t.total_rate_mbps, "traffic", 0)
        )
        shares = traffic.get("camera_shares")
        if shares is not None:
            t.camera_shares = {
                str(k): float(v)
                for k, v in _require_mapping(shares, "traffic.camera_shares").items()
            }
        t.camera_packet_bytes = int(
            _get_number(
                traffic, "camera_packet_bytes", t.camera_packet_bytes, "traffic", 1
            )
        )
        try:
            t.profiles()
        except ConfigInvalid:
            raise
        except ValueError as exc:
            raise ConfigInvalid(f"traffic: {exc}") from None

    factory = data.get("factory")
    if factory is not None:
        factory = _require_mapping(factory, "factory")
        _check_keys(
            factory,
            {"enabled", "recipe", "islands", "transit_s", "service_s",
             "service_overrides", "conveyor_s", "dock_s", "load_s", "tick_ms",
             "registry_staleness_ticks", "defect_probability", "image_bytes",
             "inference_ms", "manual_service_s", "manual_rework_s",
             "manual_station", "robot_home", "robot_return_home", "releases"},
            "factory",
        )
        f = FactorySection(
            enabled=_get_bool(factory, "enabled", True, "factory"),
            recipe=[str(s) for s in factory.get("recipe", scn.factory.recipe)],
            islands=[
                IslandSpec(
                    id=_get_str(spec, "id", f"island{i + 1}", f"factory.islands[{i}]"),
                    capabilities=[
                        str(c) for c in spec.get("capabilities", [])
                    ],
                )
                for i, spec in enumerate(
                    factory.get("islands")
                    or [
                        {"id": s.id, "capabilities": s.capabilities}
                        for s in scn.factory.islands
                    ]
                )
            ],
            transit_s={
                str(a): {str(b): float(v) for b, v in row.items()}
                for a, row in _require_mapping(
                    factory.get("transit_s"), "factory.transit_s"
                ).items()
            },
            service_s=float(_get_number(factory, "service_s", 2.0, "factory", 0)),
            service_overrides={
                str(k): float(v)
                for k, v in _require_mapping(
                    factory.get("service_overrides"), "factory.service_overrides"
                ).items()
            },
            conveyor_s=float(_get_number(factory, "conveyor_s", 0.5, "factory", 0)),
            dock_s=float(_get_number(factory, "dock_s", 0.5, "factory", 0)),
            load_s=float(_get_number(factory, "load_s", 0.5, "factory", 0)),
            tick_ms=float(_get_number(factory, "tick_ms", 100.0, "factory", 1e-3)),
            registry_staleness_ticks=int(
                _get_number(factory, "registry_staleness_ticks", 3, "factory", 1)
            ),
            defect_probability=float(
                _get_number(factory, "defect_probability", 0.0, "factory", 0)
            ),
            image_bytes=int(
                _get_number(factory, "image_bytes", 2_000_000, "factory", 1)
            ),
            inference_ms=float(
                _get_number(factory, "inference_ms", 200.0, "factory", 0)
            ),
            manual_service_s=float(
                _get_number(factory, "manual_service_s", 4.0, "factory", 0)
            ),
            manual_rework_s=float(
                _get_number(factory, "manual_rework_s", 4.0, "factory", 0)
            ),
            manual_station=_get_bool(factory, "manual_station", True, "factory"),
            robot_home=_get_str(factory, "robot_home", "island1", "factory"),
            robot_return_home=_get_bool(factory, "robot_return_home", True, "factory"),
        )
        releases = factory.get("releases")
        if releases is not None:
            releases = _require_mapping(releases, "factory.releases")
            _check_keys(releases, {"count", "interval_s", "island", "start_s"},
                        "factory.releases")
            f.releases = ReleaseSpec(
                count=int(_get_number(releases, "count", 3, "factory.releases", 0)),
                interval_s=float(
                    _get_number(releases, "interval_s", 20.0, "factory.releases", 0)
                ),
                island=_get_str(releases, "island", "island1", "factory.releases"),
                start_s=float(
                    _get_number(releases, "start_s", 0.0, "factory.releases", 0)
                ),
            )
        if f.defect_probability > 1:
            raise ConfigInvalid("factory.defect_probability: must be within [0, 1]")
        _validate_factory(f)
        scn.factory = f

    safety = data.get("safety")
    if safety is not None:
        safety = _require_mapping(safety, "safety")
        _check_keys(
            safety,
            {"enabled", "cycle_hz", "watchdog_ms", "retry_at_tti",
             "pdu_bytes_up", "pdu_bytes_down"},
            "safety",
        )
        s = scn.safety
        s.enabled = _get_bool(safety, "enabled", s.enabled, "safety")
        s.cycle_hz = float(_get_number(safety, "cycle_hz", s.cycle_hz, "safety", 1e-6))
        s.watchdog_ms = float(
            _get_number(safety, "watchdog_ms", s.watchdog_ms, "safety", 0)
        )
        s.retry_at_tti = _get_bool(safety, "retry_at_tti", s.retry_at_tti, "safety")
        s.pdu_bytes_up = int(
            _get_number(safety, "pdu_bytes_up", s.pdu_bytes_up, "safety", 1)
        )
        s.pdu_bytes_down = int(
            _get_number(safety, "pdu_bytes_down", s.pdu_bytes_down, "safety", 1)
        )
        if s.watchdog_ms * NS_PER_MS < NS_PER_S / s.cycle_hz:
            raise ConfigInvalid("safety.watchdog_ms: must cover at least one cycle")

    comp = data.get("compliance")
    if comp is not None:
        comp = _require_mapping(comp, "compliance")
        _check_keys(
            comp,
            {"service_area_m", "jitter_definition", "survival_time_ms",
             "availability_sample_floor"},
            "compliance",
        )
        c = scn.compliance
        area = comp.get("service_area_m")
        if area is not None:
            if not (isinstance(area, list) and len(area) == 2):
                raise ConfigInvalid(
                    "compliance.service_area_m: expected [width, depth]"
                )
            c.service_area_m = (float(area[0]), float(area[1]))
        c.jitter_definition = _get_str(
            comp, "jitter_definition", c.jitter_definition, "compliance"
        )
        if c.jitter_definition not in ("p99_minus_min", "max_minus_min"):
            raise ConfigInvalid(
                "compliance.jitter_definition: expected "
                "'p99_minus_min' or 'max_minus_min'"
            )
        c.survival_time_ms = float(
            _get_number(comp, "survival_time_ms", c.survival_time_ms,
                        "compliance", 1e-6)
        )
        if comp.get("availability_sample_floor") is not None:
            c.availability_sample_floor = int(
                _get_number(comp, "availability_sample_floor", 0, "compliance", 1)
            )

    script = data.get("script") or []
    if not isinstance(script, list):
        raise ConfigInvalid("script: expected a list of actions")
    for i, raw in enumerate(script):
        path = f"script[{i}]"
        raw = _require_mapping(raw, path)
        _check_keys(raw, {"at_s", "action", "endpoint", "loop", "sensor"}, path)
        action = _get_str(raw, "action", "", path)
        if action not in _SCRIPT_ACTIONS:
            raise ConfigInvalid(
                f"{path}.action: {action!r} not one of {sorted(_SCRIPT_ACTIONS)}"
            )
        scn.script.append(
            ScriptAction(
                at_s=float(_get_number(raw, "at_s", 0.0, path, 0)),
                action=action,
                endpoint=raw.get("endpoint"),
                loop=raw.get("loop"),
                sensor=raw.get("sensor"),
            )
        )
    return scn


def _validate_factory(f: FactorySection) -> None:
    island_ids = [i.id for i in f.islands]
    if len(set(island_ids)) != len(island_ids):
        raise ConfigInvalid("factory.islands: duplicate island ids")
    caps = {c for island in f.islands for c in island.capabilities}
    if not f.manual_station:
        missing = [s for s in f.recipe if s not in caps]
        if missing:
            raise ConfigInvalid(
                f"factory.recipe: steps {missing} have no capable module and "
                "no manual station is configured"
            )
    nodes = island_ids + (["manual"] if f.manual_station else [])
    for a in nodes:
        for b in nodes:
            if a == b:
                continue
            if f.transit_s.get(a, {}).get(b) is None:
                raise ConfigInvalid(f"factory.transit_s: missing entry {a} -> {b}")
    if f.robot_home not in island_ids:
        raise ConfigInvalid(f"factory.robot_home: unknown island {f.robot_home!r}")
    if f.releases.island not in island_ids:
        raise ConfigInvalid(
            f"factory.releases.island: unknown island {f.releases.island!r}"
        )


def _validate_bwp_section(nr: NrSection) -> None:
    if not nr.bwp_parts:
        return
    if nr.bwp_carrier_prb is None:
        raise ConfigInvalid("nr.bwp_carrier_prb: required when bwp_parts are given")
    parts = []
    for i, raw in enumerate(nr.bwp_parts):
        path = f"nr.bwp_parts[{i}]"
        raw = _require_mapping(raw, path)
        _check_keys(
            raw,
            {"scs_khz", "cp", "start_prb", "size_prb", "coreset_id",
             "frequency_location_khz"},
            path,
        )
        try:
            parts.append(
                BandwidthPart(
                    scs_khz=int(_get_number(raw, "scs_khz", 15, path, 15)),
                    cp=CyclicPrefix(_get_str(raw, "cp", "normal", path)),
                    start_prb=int(_get_number(raw, "start_prb", 0, path, 0)),
                    size_prb=int(_get_number(raw, "size_prb", 1, path, 1)),
                    coreset_id=int(_get_number(raw, "coreset_id", 0, path, 0)),
                    frequency_location_khz=int(
                        _get_number(raw, "frequency_location_khz", 0, path)
                    ),
                )
            )
        except ValueError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
    report = validate_bwp_partition(nr.bwp_carrier_prb, parts)
    if not report.valid:
        raise ConfigInvalid(f"nr.bwp_parts: {report.describe()}")


# -- dumping ---------------------------------------------------------------------


def scenario_to_dict(scn: Scenario) -> dict:
    """Canonical mapping form; round-trips through scenario_from_dict."""
    return {
        "seed": scn.seed,
        "horizon_s": scn.horizon_s,
        "radio": {
            "waveform": scn.radio.waveform,
            "channel": scn.radio.channel,
            "snr_db": scn.radio.snr_db,
            "carrier_freq_mhz": scn.radio.carrier_freq_mhz,
            "bandwidth_mhz": scn.radio.bandwidth_mhz,
            "tti_us": scn.radio.tti_us,
            "processing_delay_us": scn.radio.processing_delay_us,
            "wired_latency_us": scn.radio.wired_latency_us,
            "jitter_us": scn.radio.jitter_us,
            **(
                {"bler_anchors": scn.radio.bler_anchors}
                if scn.radio.bler_anchors
                else {}
            ),
            **(
                {"throughput_anchors": scn.radio.throughput_anchors}
                if scn.radio.throughput_anchors
                else {}
            ),
        },
        "nr": {
            "numerology_mu": scn.nr.numerology_mu,
            **(
                {"slot_format_extensions": scn.nr.slot_format_extensions}
                if scn.nr.slot_format_extensions
                else {}
            ),
            **(
                {"bwp_carrier_prb": scn.nr.bwp_carrier_prb,
                 "bwp_parts": scn.nr.bwp_parts}
                if scn.nr.bwp_parts
                else {}
            ),
        },
        "traffic": {
            "catalog": scn.traffic.catalog,
            "total_rate_mbps": scn.traffic.total_rate_mbps,
            "camera_shares": scn.traffic.camera_shares,
            "camera_packet_bytes": scn.traffic.camera_packet_bytes,
        },
        "factory": {
            "enabled": scn.factory.enabled,
            "recipe": scn.factory.recipe,
            "islands": [
                {"id": i.id, "capabilities": i.capabilities}
                for i in scn.factory.islands
            ],
            "transit_s": scn.factory.transit_s,
            "service_s": scn.factory.service_s,
            "service_overrides": scn.factory.service_overrides,
            "conveyor_s": scn.factory.conveyor_s,
            "dock_s": scn.factory.dock_s,
            "load_s": scn.factory.load_s,
            "tick_ms": scn.factory.tick_ms,
            "registry_staleness_ticks": scn.factory.registry_staleness_ticks,
            "defect_probability": scn.factory.defect_probability,
            "image_bytes": scn.factory.image_bytes,
            "inference_ms": scn.factory.inference_ms,
            "manual_service_s": scn.factory.manual_service_s,
            "manual_rework_s": scn.factory.manual_rework_s,
            "manual_station": scn.factory.manual_station,
            "robot_home": scn.factory.robot_home,
            "robot_return_home": scn.factory.robot_return_home,
            "releases": {
                "count": scn.factory.releases.count,
                "interval_s": scn.factory.releases.interval_s,
                "island": scn.factory.releases.island,
                "start_s": scn.factory.releases.start_s,
            },
        },
        "safety": {
            "enabled": scn.safety.enabled,
            "cycle_hz": scn.safety.cycle_hz,
            "watchdog_ms": scn.safety.watchdog_ms,
            "retry_at_tti": scn.safety.retry_at_tti,
            "pdu_bytes_up": scn.safety.pdu_bytes_up,
            "pdu_bytes_down": scn.safety.pdu_bytes_down,
        },
        "compliance": {
            "service_area_m": list(scn.compliance.service_area_m),
            "jitter_definition": scn.compliance.jitter_definition,
            "survival_time_ms": scn.compliance.survival_time_ms,
            **(
                {"availability_sample_floor": scn.compliance.availability_sample_floor}
                if scn.compliance.availability_sample_floor is not None
                else {}
            ),
        },
        "script": [
            {
                "at_s": a.at_s,
                "action": a.action,
                **({"endpoint": a.endpoint} if a.endpoint else {}),
                **({"loop": a.loop} if a.loop else {}),
                **({"sensor": a.sensor} if a.sensor else {}),
            }
            for a in scn.script
        ],
    }


def dump_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scn), sort_keys=False)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
    if data is None:
        return default_scenario()
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    return scenario_from_dict(data)
