"""Link-level reliability and throughput model.

BLER-vs-SNR behaviour is anchored at measured points per (waveform, channel)
pair and interpolated log-linearly (linear in log10 BLER over dB). Throughput
uses monotone piecewise-linear interpolation over SNR anchors. Transmission
outcomes are Bernoulli draws against the interpolated BLER; one-way latency
composes TTI alignment, air time and processing delay.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .nr_frame import (
    SUPPORTED_BANDWIDTH_MHZ,
    SUPPORTED_CARRIER_FREQ_MHZ,
    TtiConfig,
    next_tx_opportunity,
)
from .sim_core import NS_PER_S, RngStream, SimTime


class Waveform(Enum):
    CP_OFDM = "CP-OFDM"
    P_OFDM = "P-OFDM"
    W_OFDM = "W-OFDM"


# Channel model identifiers; further channels may be configured via anchors.
EVA70 = "EVA70"
V2V_URBAN_NLOS = "V2V-Urban-NLOS"

# SNR advantage of the pulse-shaped waveform over conventional OFDM at equal
# BLER, applied to the shipped default anchors on both channels.
WAVEFORM_GAP_DB = 1.7

DEFAULT_TAIL_SLOPE_DECADES_PER_DB = 1.0


class UnknownCurve(KeyError):
    """No anchors configured for the requested (waveform, channel) pair."""


class RateUnavailable(ValueError):
    """Throughput at the configured SNR is zero; no transmission possible."""


@dataclass(frozen=True)
class BlerCurve:
    """Anchored SNR -> BLER mapping.

    Anchors are (snr_db, bler) with strictly increasing SNR and strictly
    decreasing BLER in (0, 1]. Between anchors the curve is log-linear in
    BLER; beyond the anchor range it continues at the edge segment's slope
    (or `tail_slope_decades_per_db` when set), clamped to [floor_bler, 1].
    An anchor-free curve is constant at `floor_bler` (see `constant`).
    """

    anchors: tuple[tuple[float, float], ...] = ()
    floor_bler: float = 0.0
    tail_slope_decades_per_db: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.floor_bler <= 1.0:
            raise ValueError("floor_bler must be within [0, 1]")
        snrs = [a[0] for a in self.anchors]
        blers = [a[1] for a in self.anchors]
        if snrs != sorted(snrs) or len(set(snrs)) != len(snrs):
            raise ValueError("anchor SNRs must be strictly increasing")
        for b in blers:
            if not 0.0 < b <= 1.0:
                raise ValueError(f"anchor BLER {b} outside (0, 1]")
        for b0, b1 in zip(blers, blers[1:]):
            if b1 >= b0:
                raise ValueError("anchor BLER must strictly decrease with SNR")

    @classmethod
    def constant(cls, bler: float) -> "BlerCurve":
        """Flat curve, mainly for forcing loss behaviour in tests/scripts."""
        return cls(anchors=(), floor_bler=bler)

    def _clamp(self, value: float) -> float:
        return min(1.0, max(self.floor_bler, value))

    def _edge_slope(self, last: bool) -> float:
        """Waterfall steepness in decades per dB at the curve edge (positive)."""
        if self.tail_slope_decades_per_db is not None:
            return self.tail_slope_decades_per_db
        if len(self.anchors) < 2:
            return DEFAULT_TAIL_SLOPE_DECADES_PER_DB
        (s0, b0), (s1, b1) = (
            self.anchors[-2:] if last else self.anchors[:2]
        )
        return (math.log10(b0) - math.log10(b1)) / (s1 - s0)

    def bler(self, snr_db: float) -> float:
        if not self.anchors:
            return self._clamp(self.floor_bler)
        snrs = [a[0] for a in self.anchors]
        i = bisect.bisect_left(snrs, snr_db)
        if i < len(snrs) and snrs[i] == snr_db:
            return self._clamp(self.anchors[i][1])  # exact anchor pass-through
        if i == 0:
            s0, b0 = self.anchors[0]
            value = b0 * 10.0 ** (self._edge_slope(last=False) * (s0 - snr_db))
            return self._clamp(value)
        if i == len(snrs):
            s1, b1 = self.anchors[-1]
            value = b1 * 10.0 ** (-self._edge_slope(last=True) * (snr_db - s1))
            return self._clamp(value)
        s0, b0 = self.anchors[i - 1]
        s1, b1 = self.anchors[i]
        t = (snr_db - s0) / (s1 - s0)
        log_b = math.log10(b0) + t * (math.log10(b1) - math.log10(b0))
        return self._clamp(10.0**log_b)

    def snr_for_bler(self, target: float) -> float:
        """Inverse lookup: the SNR at which the curve crosses `target` BLER."""
        if not self.anchors:
            raise UnknownCurve("constant curve has no SNR dependence")
        if not self.floor_bler < target <= 1.0:
            raise ValueError(f"target {target} unreachable for this curve")
        for snr, b in self.anchors:
            if b == target:
                return snr
        s0, b0 = self.anchors[0]
        if target > b0:
            return s0 - (math.log10(target) - math.log10(b0)) / self._edge_slope(False)
        s1, b1 = self.anchors[-1]
        if target < b1:
            return s1 + (math.log10(b1) - math.log10(target)) / self._edge_slope(True)
        for (s0, b0), (s1, b1) in zip(self.anchors, self.anchors[1:]):
            if b0 > target > b1:
                t = (math.log10(b0) - math.log10(target)) / (
                    math.log10(b0) - math.log10(b1)
                )
                return s0 + t * (s1 - s0)
        raise AssertionError("unreachable: anchors are strictly decreasing")


@dataclass(frozen=True)
class ThroughputCurve:
    """Monotone non-decreasing piecewise-linear SNR -> bit/s mapping.

    Clamps to the first/last anchor's rate outside the anchor range.
    """

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.anchors:
            raise ValueError("throughput curve needs at least one anchor")
        snrs = [a[0] for a in self.anchors]
        rates = [a[1] for a in self.anchors]
        if snrs != sorted(snrs) or len(set(snrs)) != len(snrs):
            raise ValueError("anchor SNRs must be strictly increasing")
        if any(r < 0 for r in rates):
            raise ValueError("rates must be >= 0")
        if any(r1 < r0 for r0, r1 in zip(rates, rates[1:])):
            raise ValueError("rates must be non-decreasing with SNR")

    def rate_bps(self, snr_db: float) -> float:
        snrs = [a[0] for a in self.anchors]
        i = bisect.bisect_left(snrs, snr_db)
        if i < len(snrs) and snrs[i] == snr_db:
            return self.anchors[i][1]
        if i == 0:
            return self.anchors[0][1]
        if i == len(snrs):
            return self.anchors[-1][1]
        s0, r0 = self.anchors[i - 1]
        s1, r1 = self.anchors[i]
        t = (snr_db - s0) / (s1 - s0)
        return r0 + t * (r1 - r0)


class TransmissionOutcome(Enum):
    DELIVERED = "delivered"
    LOST = "lost"


@dataclass(frozen=True)
class LinkConfig:
    """Operating point of the radio link."""

    waveform: Waveform = Waveform.P_OFDM
    channel: str = EVA70
    snr_db: float = 15.0
    carrier_freq_mhz: int = 3500
    bandwidth_mhz: int = 10
    tti: TtiConfig = TtiConfig(125)
    processing_delay_ns: int = 100_000  # per direction

    def __post_init__(self):
        if self.carrier_freq_mhz not in SUPPORTED_CARRIER_FREQ_MHZ:
            raise ValueError(
                f"carrier must be one of {SUPPORTED_CARRIER_FREQ_MHZ} MHz"
            )
        if self.bandwidth_mhz not in SUPPORTED_BANDWIDTH_MHZ:
            raise ValueError(
                f"bandwidth must be one of {SUPPORTED_BANDWIDTH_MHZ} MHz"
            )
        if self.processing_delay_ns < 0:
            raise ValueError("processing delay must be >= 0")


def availability(bler: float, opportunities_in_survival_time: int) -> float:
    """Probability that at least one of k consecutive transmission
    opportunities inside the survival time succeeds: 1 - bler^k.

    The service is down only when all k opportunities fail; with k = 1 this
    equals plain reliability 1 - bler.
    """
    k = opportunities_in_survival_time
    if k < 1:
        raise ValueError("need at least one opportunity in the survival time")
    if not 0.0 <= bler <= 1.0:
        raise ValueError("bler must be within [0, 1]")
    return 1.0 - bler**k


class LinkModel:
    """Holds the configured BLER and throughput anchor tables and evaluates
    link operations against a LinkConfig."""

    def __init__(
        self,
        bler_curves: dict[tuple[Waveform, str], BlerCurve],
        throughput_curves: dict[Waveform, ThroughputCurve],
    ):
        self.bler_curves = dict(bler_curves)
        self.throughput_curves = dict(throughput_curves)

    def bler_curve(self, waveform: Waveform, channel: str) -> BlerCurve:
        try:
            return self.bler_curves[(waveform, channel)]
        except KeyError:
            raise UnknownCurve(
                f"no BLER anchors for ({waveform.value}, {channel})"
            ) from None

    def bler(self, config: LinkConfig) -> float:
        return self.bler_curve(config.waveform, config.channel).bler(config.snr_db)

    def sample_transmission(
        self, config: LinkConfig, rng: RngStream
    ) -> TransmissionOutcome:
        """One Bernoulli draw per call: Delivered with probability 1 - bler."""
        p_loss = self.bler(config)
        if rng.random() < p_loss:
            return TransmissionOutcome.LOST
        return TransmissionOutcome.DELIVERED

    def throughput(self, config: LinkConfig) -> float:
        """Sustained rate in bit/s at the configured SNR."""
        try:
            curve = self.throughput_curves[config.waveform]
        except KeyError:
            raise UnknownCurve(
                f"no throughput anchors for {config.waveform.value}"
            ) from None
        return curve.rate_bps(config.snr_db)

    def air_time_ns(self, config: LinkConfig, payload_bytes: int) -> int:
        """Transmission time: whole TTI-sized slots at the current rate."""
        if payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")
        rate = self.throughput(config)
        if rate <= 0.0:
            raise RateUnavailable(
                f"throughput is zero at {config.snr_db} dB SNR"
            )
        tti_ns = config.tti.duration_ns
        bits_per_slot = Fraction(rate) * Fraction(tti_ns, NS_PER_S)
        slots = math.ceil(Fraction(payload_bytes * 8) / bits_per_slot)
        return slots * tti_ns

    def one_way_latency(
        self, config: LinkConfig, now: SimTime, payload_bytes: int
    ) -> int:
        """Alignment wait to the next TTI boundary + air time + processing."""
        start = next_tx_opportunity(now, config.tti)
        return (start - now) + self.air_time_ns(config, payload_bytes) + (
            config.processing_delay_ns
        )


def _shift(anchors: tuple[tuple[float, float], ...], db: float):
    return tuple((snr + db, b) for snr, b in anchors)


# Shipped default anchors. The pulse-shaped waveform reaches 1e-5 BLER at
# 15 dB SNR on EVA70 and at 19 dB on the V2V urban NLOS channel, with a
# waterfall of one decade per dB; conventional CP-OFDM trails by 1.7 dB on
# both channels. Throughput reaches 10 Mbit/s at 11 dB and saturates above.
_P_OFDM_EVA70 = ((10.0, 1.0), (15.0, 1e-5))
_P_OFDM_V2V = ((14.0, 1.0), (19.0, 1e-5))
_P_OFDM_THROUGHPUT = ((5.0, 0.0), (8.0, 5e6), (11.0, 10e6), (14.0, 12e6))


def default_link_model() -> LinkModel:
    return LinkModel(
        bler_curves={
            (Waveform.P_OFDM, EVA70): BlerCurve(_P_OFDM_EVA70),
            (Waveform.P_OFDM, V2V_URBAN_NLOS): BlerCurve(_P_OFDM_V2V),
            (Waveform.CP_OFDM, EVA70): BlerCurve(
                _shift(_P_OFDM_EVA70, WAVEFORM_GAP_DB)
            ),
            (Waveform.CP_OFDM, V2V_URBAN_NLOS): BlerCurve(
                _shift(_P_OFDM_V2V, WAVEFORM_GAP_DB)
            ),
        },
        throughput_curves={
            Waveform.P_OFDM: ThroughputCurve(_P_OFDM_THROUGHPUT),
            Waveform.CP_OFDM: ThroughputCurve(
                _shift(_P_OFDM_THROUGHPUT, WAVEFORM_GAP_DB)
            ),
        },
    )
