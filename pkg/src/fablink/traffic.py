"""Traffic stream generators and rate accounting.

The built-in catalog reproduces the packet mix measured on the running
plant: two cyclic safety PDU streams (60/64 bytes at 246.19 Hz), four
network-organization streams, and camera/background streams sized so the
whole catalog sums to the measured 5.97 Mbit/s aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

from .sim_core import NS_PER_S, RngStream, SimTime


class StreamClass(Enum):
    SAFETY_RELEVANT = "safety"
    NON_SAFETY_RELEVANT = "non-safety"
    NETWORK_ORGANIZATION = "organization"


class Pattern(Enum):
    PERIODIC = "periodic"
    POISSON = "poisson"


@dataclass(frozen=True)
class TrafficProfile:
    """One packet stream: endpoints, class, size and emission pattern.

    Periodic streams emit at exact multiples of 1/rate_hz from `phase_ns`;
    Poisson streams draw exponential gaps with mean 1/rate_hz.
    """

    name: str
    source: str
    destination: str
    protocol_label: str
    stream_class: StreamClass
    payload_bytes: int
    rate_hz: float
    pattern: Pattern = Pattern.PERIODIC
    phase_ns: SimTime = 0
    wireless: bool = True

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be > 0")

    @property
    def bitrate_bps(self) -> float:
        return self.rate_hz * self.payload_bytes * 8


@dataclass
class PacketRecord:
    """Per-packet timeline entry; delivered_at stays None when lost."""

    stream: str
    seq: int
    created_at: SimTime
    size_bytes: int
    stream_class: StreamClass
    sent_at: SimTime | None = None
    delivered_at: SimTime | None = None

    @property
    def lost(self) -> bool:
        return self.delivered_at is None


MEASURED_TOTAL_RATE_BPS = 5.97e6

# Measured per-stream rows: (name, source, destination, protocol, bytes, Hz,
# class, wireless). The coupler-side endpoints ride the radio link.
_MEASURED_ROWS = (
    ("pnio_coupler_to_plc", "Hilscher", "PhoenixC", "PNIO", 60, 246.19,
     StreamClass.SAFETY_RELEVANT, True),
    ("pn_dcp_coupler", "Hilscher", "PN-MC", "PN-DCP", 60, 0.51,
     StreamClass.NETWORK_ORGANIZATION, True),
    ("pn_dcp_plc", "PhoenixC", "PN-MC", "PN-DCP", 60, 1.36,
     StreamClass.NETWORK_ORGANIZATION, False),
    ("pnio_plc_to_coupler", "PhoenixC", "Hilscher", "PNIO", 64, 246.19,
     StreamClass.SAFETY_RELEVANT, True),
    ("lldp_plc", "PhoenixC", "LLDP MC", "LLDP", 212, 0.17,
     StreamClass.NETWORK_ORGANIZATION, False),
    ("pn_ptcp_plc", "PhoenixC", "LLDP MC", "PN-PTCP", 60, 4.94,
     StreamClass.NETWORK_ORGANIZATION, False),
)

DEFAULT_CAMERA_SHARES = {"forward": 0.25, "threesixty": 0.60, "product": 0.15}
DEFAULT_CAMERA_PACKET_BYTES = 1400


def measured_catalog(
    total_rate_bps: float = MEASURED_TOTAL_RATE_BPS,
    camera_shares: dict[str, float] | None = None,
    camera_packet_bytes: int = DEFAULT_CAMERA_PACKET_BYTES,
) -> list[TrafficProfile]:
    """The measured stream rows plus camera/background streams sized so the
    catalog total equals `total_rate_bps`.

    Only the aggregate of the camera traffic was measured; its split across
    the three cameras is a configurable share map.
    """
    shares = camera_shares if camera_shares is not None else DEFAULT_CAMERA_SHARES
    if abs(sum(shares.values()) - 1.0) > 1e-9:
        raise ValueError("camera shares must sum to 1")
    profiles = [
        TrafficProfile(name, src, dst, proto, cls, size, rate, wireless=wl)
        for name, src, dst, proto, size, rate, cls, wl in _MEASURED_ROWS
    ]
    measured_bps = sum(p.bitrate_bps for p in profiles)
    residual = total_rate_bps - measured_bps
    if residual < 0:
        raise ValueError(
            f"measured rows ({measured_bps:.0f} bit/s) already exceed the "
            f"requested total {total_rate_bps:.0f} bit/s"
        )
    for camera, share in sorted(shares.items()):
        rate_hz = share * residual / (camera_packet_bytes * 8)
        if rate_hz <= 0:
            continue
        profiles.append(
            TrafficProfile(
                name=f"camera_{camera}",
                source="Robot",
                destination="Cloud",
                protocol_label="UDP",
                stream_class=StreamClass.NON_SAFETY_RELEVANT,
                payload_bytes=camera_packet_bytes,
                rate_hz=rate_hz,
                wireless=True,
            )
        )
    return profiles


def periodic_emission_time(profile: TrafficProfile, k: int) -> SimTime:
    """k-th emission instant of a periodic stream, computed directly from k
    so no floating-point drift accumulates across a run."""
    return profile.phase_ns + round(k * NS_PER_S / profile.rate_hz)


def emission_times(
    profile: TrafficProfile, horizon: SimTime, rng: RngStream | None = None
) -> Iterator[SimTime]:
    """Emission instants within [0, horizon] (inclusive)."""
    if profile.pattern is Pattern.PERIODIC:
        k = 0
        while True:
            t = periodic_emission_time(profile, k)
            if t > horizon:
                return
            yield t
            k += 1
    else:
        if rng is None:
            raise ValueError("Poisson streams need an RngStream")
        t = float(profile.phase_ns)
        while True:
            t += rng.expovariate(profile.rate_hz) * NS_PER_S
            ti = round(t)
            if ti > horizon:
                return
            yield ti


def generate(
    profile: TrafficProfile, horizon: SimTime, rng: RngStream | None = None
) -> list[PacketRecord]:
    """Materialize the packet creations of one stream over the horizon."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    return [
        PacketRecord(
            stream=profile.name,
            seq=seq,
            created_at=t,
            size_bytes=profile.payload_bytes,
            stream_class=profile.stream_class,
        )
        for seq, t in enumerate(emission_times(profile, horizon, rng))
    ]


def aggregate_rate(records: list[PacketRecord], window: SimTime) -> float:
    """Bit rate over [0, window]: total bits created in the window / window."""
    if window <= 0:
        raise ValueError("window must be > 0")
    bits = sum(
        r.size_bytes * 8 for r in records if 0 <= r.created_at <= window
    )
    return bits * NS_PER_S / window
