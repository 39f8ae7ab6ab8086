"""Compliance scoring of per-stream metrics against Rel-16 factory use-case
requirement profiles (aspects 1 and 2 of the mobile-control-panel use case).

Jitter is scored as (p99 - min) latency by default, switchable to
(max - min); latency uses p99.9 so one outlier cannot dominate the verdict.
Availability is the fraction of survival-time windows containing at least
one delivery, and is reported NotAssessed unless the sample count can
statistically support the claimed scale (at least 10 / (1 - availability_min)
packets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .sim_core import NS_PER_MS, SimTime
from .traffic import PacketRecord, StreamClass


@dataclass(frozen=True)
class RequirementProfile:
    """One use-case aspect; absent fields are skipped during evaluation."""

    name: str
    availability_min: float
    availability_max: float
    latency_target_ns: SimTime | None = None
    jitter_max_ns: SimTime | None = None
    service_data_rate_min_bps: float | None = None
    message_size_range: tuple[int, int] | None = None
    transfer_interval_max_ns: SimTime | None = None
    survival_time_ns: SimTime | None = None
    service_area_m: tuple[float, float] | None = None

    def __post_init__(self):
        if self.availability_min > self.availability_max:
            raise ValueError("availability_min must be <= availability_max")


ASPECT1 = RequirementProfile(
    name="aspect1",
    availability_min=0.999999,
    availability_max=0.99999999,
    latency_target_ns=12 * NS_PER_MS,
    jitter_max_ns=6 * NS_PER_MS,
    message_size_range=(40, 250),
    transfer_interval_max_ns=12 * NS_PER_MS,
    survival_time_ns=12 * NS_PER_MS,
    service_area_m=(200.0, 300.0),
)

ASPECT2 = RequirementProfile(
    name="aspect2",
    availability_min=0.999999,
    availability_max=0.99999999,
    latency_target_ns=30 * NS_PER_MS,
    jitter_max_ns=15 * NS_PER_MS,
    service_data_rate_min_bps=5e6,
)


def builtin_profiles() -> list[RequirementProfile]:
    return [ASPECT1, ASPECT2]


class UnknownProfile(KeyError):
    pass


def profile_by_name(name: str) -> RequirementProfile:
    for profile in builtin_profiles():
        if profile.name == name:
            return profile
    raise UnknownProfile(name)


# -- stream metrics -----------------------------------------------------------


@dataclass
class LatencyStats:
    min_ns: SimTime
    p50_ns: SimTime
    p99_ns: SimTime
    p999_ns: SimTime
    max_ns: SimTime


@dataclass
class StreamMetrics:
    stream: str
    stream_class: StreamClass
    sample_count: int
    delivered_count: int
    lost_count: int
    in_flight_count: int
    observed_rate_bps: float
    size_min: int | None = None
    size_max: int | None = None
    latency: LatencyStats | None = None
    jitter_ns: SimTime | None = None
    max_transfer_interval_ns: SimTime | None = None
    availability: float | None = None
    availability_windows: int = 0
    survival_time_ns: SimTime | None = None


def percentile(sorted_values: list[int], pct: float) -> int:
    """Nearest-rank percentile over a pre-sorted list."""
    if not sorted_values:
        raise ValueError("no samples")
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


def collect_stream_metrics(
    stream: str,
    records: list[PacketRecord],
    horizon_ns: SimTime,
    survival_time_ns: SimTime,
    jitter_definition: str = "p99_minus_min",
) -> StreamMetrics:
    """Fold one stream's packet records into scoring metrics.

    A packet whose delivery falls beyond the horizon counts as in flight:
    neither delivered nor lost at the deadline. The transfer interval is the
    sender-side gap between consecutive creations.
    """
    records = [r for r in records if r.created_at <= horizon_ns]
    delivered = [
        r for r in records
        if r.delivered_at is not None and r.delivered_at <= horizon_ns
    ]
    lost = [r for r in records if r.delivered_at is None]
    in_flight = len(records) - len(delivered) - len(lost)
    cls = records[0].stream_class if records else StreamClass.NON_SAFETY_RELEVANT

    bits = sum(r.size_bytes * 8 for r in records)
    rate = bits * 1e9 / horizon_ns if horizon_ns > 0 else 0.0

    metrics = StreamMetrics(
        stream=stream,
        stream_class=cls,
        sample_count=len(records),
        delivered_count=len(delivered),
        lost_count=len(lost),
        in_flight_count=in_flight,
        observed_rate_bps=rate,
        survival_time_ns=survival_time_ns,
    )
    if records:
        metrics.size_min = min(r.size_bytes for r in records)
        metrics.size_max = max(r.size_bytes for r in records)
        creations = [r.created_at for r in records]
        if len(creations) >= 2:
            metrics.max_transfer_interval_ns = max(
                b - a for a, b in zip(creations, creations[1:])
            )
    if delivered:
        latencies = sorted(r.delivered_at - r.created_at for r in delivered)
        stats = LatencyStats(
            min_ns=latencies[0],
            p50_ns=percentile(latencies, 50.0),
            p99_ns=percentile(latencies, 99.0),
            p999_ns=percentile(latencies, 99.9),
            max_ns=latencies[-1],
        )
        metrics.latency = stats
        if jitter_definition == "max_minus_min":
            metrics.jitter_ns = stats.max_ns - stats.min_ns
        else:
            metrics.jitter_ns = stats.p99_ns - stats.min_ns
    if survival_time_ns > 0 and horizon_ns >= survival_time_ns:
        windows = horizon_ns // survival_time_ns
        hit = set()
        for r in delivered:
            w = r.delivered_at // survival_time_ns
            if w < windows:
                hit.add(w)
        metrics.availability = len(hit) / windows
        metrics.availability_windows = int(windows)
    return metrics


def aggregate_metrics(
    records: list[PacketRecord],
    horizon_ns: SimTime,
    survival_time_ns: SimTime,
    jitter_definition: str = "p99_minus_min",
) -> StreamMetrics:
    """All streams folded into one pseudo-stream for aggregate assessments."""
    m = collect_stream_metrics(
        "aggregate", records, horizon_ns, survival_time_ns, jitter_definition
    )
    m.stream_class = StreamClass.NON_SAFETY_RELEVANT
    return m


# -- evaluation ----------------------------------------------------------------


class ComplianceVerdict(Enum):
    PASS = "Pass"
    FAIL = "Fail"
    NOT_ASSESSED = "NotAssessed"


@dataclass
class VerdictRow:
    dimension: str
    required: str
    observed: str
    verdict: ComplianceVerdict
    note: str = ""


def availability_sample_floor(profile: RequirementProfile) -> int:
    """Minimum sample count able to support the profile's availability claim."""
    return math.ceil(10.0 / (1.0 - profile.availability_min))


def _ms(ns: SimTime | None) -> str:
    return "n/a" if ns is None else f"{ns / NS_PER_MS:.3f} ms"


def evaluate(
    metrics: StreamMetrics,
    profile: RequirementProfile,
    service_area_m: tuple[float, float] | None = None,
    sample_floor: int | None = None,
) -> list[VerdictRow]:
    """Score one stream against one profile, one row per present dimension."""
    rows: list[VerdictRow] = []
    floor = sample_floor if sample_floor is not None else availability_sample_floor(
        profile
    )

    req_avail = f">= {profile.availability_min:.6%}"
    if metrics.availability is None or metrics.sample_count < floor:
        rows.append(
            VerdictRow(
                "availability",
                req_avail,
                "n/a" if metrics.availability is None
                else f"{metrics.availability:.6%}",
                ComplianceVerdict.NOT_ASSESSED,
                note=(
                    f"sample count {metrics.sample_count} below the "
                    f"{floor} needed to support a claim at this scale"
                ),
            )
        )
    else:
        ok = metrics.availability >= profile.availability_min
        rows.append(
            VerdictRow(
                "availability",
                req_avail,
                f"{metrics.availability:.6%}",
                ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
            )
        )

    if profile.latency_target_ns is not None:
        if metrics.latency is None:
            rows.append(
                VerdictRow(
                    "latency", f"p99.9 < {_ms(profile.latency_target_ns)}", "n/a",
                    ComplianceVerdict.NOT_ASSESSED, note="no delivered samples",
                )
            )
        else:
            ok = metrics.latency.p999_ns < profile.latency_target_ns
            rows.append(
                VerdictRow(
                    "latency",
                    f"p99.9 < {_ms(profile.latency_target_ns)}",
                    _ms(metrics.latency.p999_ns),
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    if profile.jitter_max_ns is not None:
        if metrics.jitter_ns is None:
            rows.append(
                VerdictRow(
                    "jitter", f"< {_ms(profile.jitter_max_ns)}", "n/a",
                    ComplianceVerdict.NOT_ASSESSED, note="no delivered samples",
                )
            )
        else:
            ok = metrics.jitter_ns < profile.jitter_max_ns
            rows.append(
                VerdictRow(
                    "jitter",
                    f"< {_ms(profile.jitter_max_ns)}",
                    _ms(metrics.jitter_ns),
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    if profile.service_data_rate_min_bps is not None:
        if metrics.sample_count == 0:
            rows.append(
                VerdictRow(
                    "service_data_rate",
                    f"> {profile.service_data_rate_min_bps / 1e6:.2f} Mbit/s",
                    "n/a", ComplianceVerdict.NOT_ASSESSED, note="no samples",
                )
            )
        else:
            ok = metrics.observed_rate_bps > profile.service_data_rate_min_bps
            rows.append(
                VerdictRow(
                    "service_data_rate",
                    f"> {profile.service_data_rate_min_bps / 1e6:.2f} Mbit/s",
                    f"{metrics.observed_rate_bps / 1e6:.3f} Mbit/s",
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    if profile.message_size_range is not None:
        lo, hi = profile.message_size_range
        if metrics.size_min is None:
            rows.append(
                VerdictRow(
                    "message_size", f"[{lo}, {hi}] B", "n/a",
                    ComplianceVerdict.NOT_ASSESSED, note="no samples",
                )
            )
        else:
            ok = metrics.size_min >= lo and metrics.size_max <= hi
            rows.append(
                VerdictRow(
                    "message_size",
                    f"[{lo}, {hi}] B",
                    f"[{metrics.size_min}, {metrics.size_max}] B",
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    if profile.transfer_interval_max_ns is not None:
        if metrics.max_transfer_interval_ns is None:
            rows.append(
                VerdictRow(
                    "transfer_interval",
                    f"<= {_ms(profile.transfer_interval_max_ns)}", "n/a",
                    ComplianceVerdict.NOT_ASSESSED, note="fewer than two samples",
                )
            )
        else:
            ok = (
                metrics.max_transfer_interval_ns
                <= profile.transfer_interval_max_ns
            )
            rows.append(
                VerdictRow(
                    "transfer_interval",
                    f"<= {_ms(profile.transfer_interval_max_ns)}",
                    _ms(metrics.max_transfer_interval_ns),
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    if profile.service_area_m is not None:
        w_max, d_max = profile.service_area_m
        if service_area_m is None:
            rows.append(
                VerdictRow(
                    "service_area", f"max {w_max:.0f} m x {d_max:.0f} m", "n/a",
                    ComplianceVerdict.NOT_ASSESSED, note="no area configured",
                )
            )
        else:
            w, d = service_area_m
            ok = w <= w_max and d <= d_max
            rows.append(
                VerdictRow(
                    "service_area",
                    f"max {w_max:.0f} m x {d_max:.0f} m",
                    f"{w:.0f} m x {d:.0f} m",
                    ComplianceVerdict.PASS if ok else ComplianceVerdict.FAIL,
                )
            )

    return rows


@dataclass
class ComplianceReport:
    """Verdict rows per (stream, profile), plus the scoring conventions used."""

    jitter_definition: str
    service_area_m: tuple[float, float] | None
    entries: list[tuple[str, str, list[VerdictRow]]] = field(default_factory=list)

    def add(
        self,
        metrics: StreamMetrics,
        profile: RequirementProfile,
        sample_floor: int | None = None,
    ) -> list[VerdictRow]:
        rows = evaluate(metrics, profile, self.service_area_m, sample_floor)
        self.entries.append((metrics.stream, profile.name, rows))
        return rows

    @property
    def fail_count(self) -> int:
        return sum(
            1
            for _, _, rows in self.entries
            for row in rows
            if row.verdict is ComplianceVerdict.FAIL
        )

    @property
    def pass_count(self) -> int:
        return sum(
            1
            for _, _, rows in self.entries
            for row in rows
            if row.verdict is ComplianceVerdict.PASS
        )

    @property
    def not_assessed_count(self) -> int:
        return sum(
            1
            for _, _, rows in self.entries
            for row in rows
            if row.verdict is ComplianceVerdict.NOT_ASSESSED
        )

    @property
    def passed(self) -> bool:
        return self.fail_count == 0

    def to_dict(self) -> dict:
        return {
            "jitter_definition": self.jitter_definition,
            "service_area_m": list(self.service_area_m)
            if self.service_area_m
            else None,
            "verdict_counts": {
                "pass": self.pass_count,
                "fail": self.fail_count,
                "not_assessed": self.not_assessed_count,
            },
            "entries": [
                {
                    "stream": stream,
                    "profile": profile,
                    "rows": [
                        {
                            "dimension": row.dimension,
                            "required": row.required,
                            "observed": row.observed,
                            "verdict": row.verdict.value,
                            "note": row.note,
                        }
                        for row in rows
                    ],
                }
                for stream, profile, rows in self.entries
            ],
        }

    def render_table(self) -> str:
        lines = [
            f"jitter definition: {self.jitter_definition}",
            f"service area: "
            + (
                f"{self.service_area_m[0]:.0f} m x {self.service_area_m[1]:.0f} m"
                if self.service_area_m
                else "n/a"
            ),
            "",
        ]
        header = f"{'stream':28} {'profile':8} {'dimension':18} {'required':26} {'observed':22} verdict"
        lines.append(header)
        lines.append("-" * len(header))
        for stream, profile, rows in self.entries:
            for row in rows:
                line = (
                    f"{stream:28} {profile:8} {row.dimension:18} "
                    f"{row.required:26} {row.observed:22} {row.verdict.value}"
                )
                if row.note:
                    line += f"  ({row.note})"
                lines.append(line)
        return "\n".join(lines) + "\n"
