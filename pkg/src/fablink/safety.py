"""Distributed safety model.

Per-island safety loops with island-confined safe stops, a cyclic safety PDU
channel between the robot's bus coupler and the central safety PLC riding
the radio link, watchdog supervision of PDU receipt, and robot-local guard
sensors that work regardless of network state.

The watchdog is a timer reset by every PDU delivery on the channel: it trips
exactly when a delivery-free window of the watchdog length completes. The
per-cycle miss counter is kept alongside for diagnostics and logging.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .nr_frame import next_tx_opportunity
from .radio_link import LinkConfig, LinkModel, TransmissionOutcome
from .sim_core import (
    LANE_NORMAL,
    LANE_SAFETY,
    NS_PER_S,
    Engine,
    RngStream,
    SimTime,
)
from .traffic import PacketRecord, StreamClass


class LoopState(Enum):
    RUNNING = "running"
    SAFE_STOP = "safe_stop"


class LocalSafetyState(Enum):
    CLEAR = "clear"
    OBSTRUCTED = "obstructed"
    EMERGENCY_STOP = "emergency_stop"


class SensorKind(Enum):
    LASER_RANGE = "laser"
    INFRARED_RING = "infrared"
    BUMPER = "bumper"


class UnknownEndpoint(KeyError):
    """An e-stop source that belongs to no loop and is not the robot."""


@dataclass
class SafetyLoop:
    id: str
    island_id: str
    members: set[str] = field(default_factory=set)
    state: LoopState = LoopState.RUNNING


@dataclass
class LoopTransition:
    """One safety log entry."""

    at: SimTime
    loop: str
    transition: str  # "safe_stop" | "running" | local safety state values
    cause: str
    consecutive_missed: int = 0


@dataclass
class LocalSafety:
    """Robot-local guard state; active in every pose, independent of the link."""

    robot_id: str
    state: LocalSafetyState = LocalSafetyState.CLEAR
    latched: bool = False


def local_guard(
    local: LocalSafety, sensor: SensorKind, detected: bool
) -> LocalSafetyState:
    """Apply one sensor reading.

    Laser/infrared detections pause motion (Obstructed) and clear again when
    the reading clears; a bumper contact latches EmergencyStop until an
    explicit reset. Link state never enters into these transitions.
    """
    if sensor is SensorKind.BUMPER:
        if detected:
            local.state = LocalSafetyState.EMERGENCY_STOP
            local.latched = True
        return local.state
    if local.latched:
        return local.state
    if detected:
        local.state = LocalSafetyState.OBSTRUCTED
    elif local.state is LocalSafetyState.OBSTRUCTED:
        local.state = LocalSafetyState.CLEAR
    return local.state


def reset_local(local: LocalSafety) -> LocalSafetyState:
    local.latched = False
    local.state = LocalSafetyState.CLEAR
    return local.state


class SafetyManager:
    """Owns the island loops, the robot's loop membership, and the safety
    event log. Halt/resume side effects are injected as callbacks so the
    plant runtime stays decoupled."""

    def __init__(
        self,
        loops: list[SafetyLoop],
        robot_id: str = "robot",
        on_safe_stop: Callable[[SafetyLoop], None] | None = None,
        on_resume: Callable[[SafetyLoop], None] | None = None,
        on_robot_stop: Callable[[], None] | None = None,
    ):
        self.loops = {loop.id: loop for loop in loops}
        self.robot_id = robot_id
        self.robot_membership: str | None = None
        self.log: list[LoopTransition] = []
        self._endpoint_loop: dict[str, str] = {}
        for loop in loops:
            for member in loop.members:
                self._endpoint_loop[member] = loop.id
        self._on_safe_stop = on_safe_stop or (lambda loop: None)
        self._on_resume = on_resume or (lambda loop: None)
        self._on_robot_stop = on_robot_stop or (lambda: None)

    def loop_of(self, endpoint: str) -> SafetyLoop | None:
        if endpoint == self.robot_id:
            if self.robot_membership is None:
                return None
            return self.loops[self.robot_membership]
        loop_id = self._endpoint_loop.get(endpoint)
        return self.loops[loop_id] if loop_id else None

    def join(self, island_loop_id: str, now: SimTime) -> SafetyLoop:
        """Insert the robot into an island's loop (on docking)."""
        loop = self.loops[island_loop_id]
        loop.members.add(self.robot_id)
        self.robot_membership = island_loop_id
        return loop

    def leave(self, now: SimTime) -> None:
        """Isolate the robot's safety behaviour again (on undocking)."""
        if self.robot_membership is None:
            return
        self.loops[self.robot_membership].members.discard(self.robot_id)
        self.robot_membership = None

    def safe_stop(
        self, loop: SafetyLoop, cause: str, now: SimTime, missed: int = 0
    ) -> LoopTransition | None:
        if loop.state is LoopState.SAFE_STOP:
            return None
        loop.state = LoopState.SAFE_STOP
        entry = LoopTransition(now, loop.id, "safe_stop", cause, missed)
        self.log.append(entry)
        self._on_safe_stop(loop)
        return entry

    def estop(self, source: str, now: SimTime) -> list[LoopTransition]:
        """Emergency stop from `source`: confined to the source's own loop.

        An undocked robot stops only locally; a docked robot stops the loop
        it is currently a member of (and itself).
        """
        transitions: list[LoopTransition] = []
        if source == self.robot_id:
            entry = LoopTransition(
                now, "robot_local", LocalSafetyState.EMERGENCY_STOP.value, source
            )
            self.log.append(entry)
            transitions.append(entry)
            self._on_robot_stop()
            if self.robot_membership is not None:
                t = self.safe_stop(self.loops[self.robot_membership], source, now)
                if t:
                    transitions.append(t)
            return transitions
        loop = self.loop_of(source)
        if loop is None:
            raise UnknownEndpoint(f"{source} belongs to no safety loop")
        t = self.safe_stop(loop, source, now)
        if t:
            transitions.append(t)
        return transitions

    def reset(self, loop_id: str, now: SimTime) -> LoopTransition:
        loop = self.loops[loop_id]
        loop.state = LoopState.RUNNING
        entry = LoopTransition(now, loop.id, "running", "manual_reset")
        self.log.append(entry)
        self._on_resume(loop)
        return entry


@dataclass
class SafetyChannelConfig:
    """Cyclic PDU exchange parameters for the coupler <-> PLC channel."""

    cycle_hz: float = 246.19
    watchdog_ns: SimTime = 12_000_000
    pdu_bytes_up: int = 60  # coupler -> PLC
    pdu_bytes_down: int = 64  # PLC -> coupler
    retry_at_tti: bool = True
    stream_up: str = "pnio_coupler_to_plc"
    stream_down: str = "pnio_plc_to_coupler"

    def __post_init__(self):
        cycle_ns = NS_PER_S / self.cycle_hz
        if self.watchdog_ns < cycle_ns:
            raise ValueError("watchdog must be at least one cycle")

    @property
    def cycle_ns(self) -> SimTime:
        return round(NS_PER_S / self.cycle_hz)


class SafetyChannel:
    """Runs the cyclic PDU exchange on the engine and supervises receipt.

    Both directions traverse the radio link (the coupler end is wireless).
    A lost transmission is retried at subsequent TTI boundaries until the
    next cycle's PDU supersedes it. The exchange itself keeps running after
    a watchdog trip; only supervision pauses until `rearm` is called.
    """

    def __init__(
        self,
        engine: Engine,
        link_model: LinkModel,
        link_config: LinkConfig,
        config: SafetyChannelConfig,
        rng: RngStream,
        records: list[PacketRecord],
        on_trip: Callable[[SimTime, int], None],
        transmit_ok: Callable[[RngStream], bool] | None = None,
    ):
        self.engine = engine
        self.link_model = link_model
        self.link_config = link_config
        self.config = config
        self.rng = rng
        self.records = records
        self.on_trip = on_trip
        # Test/script hook: overrides the Bernoulli draw (e.g. forced outage).
        self._transmit_ok = transmit_ok or (
            lambda rng: self.link_model.sample_transmission(
                self.link_config, rng
            )
            is TransmissionOutcome.DELIVERED
        )
        self.consecutive_missed = 0
        self.last_delivery: SimTime = 0
        self.supervising = True
        self._horizon: SimTime = 0
        self._seq = {config.stream_up: 0, config.stream_down: 0}
        self._cycle_index = 0

    def start(self, horizon: SimTime) -> None:
        self._horizon = horizon
        self.last_delivery = self.engine.now
        self._schedule_cycle()
        self._arm_watchdog()

    # -- cyclic exchange ---------------------------------------------------

    def _emission_time(self, k: int) -> SimTime:
        return round(k * NS_PER_S / self.config.cycle_hz)

    def _schedule_cycle(self) -> None:
        t = self._emission_time(self._cycle_index)
        if t > self._horizon:
            return
        self.engine.schedule_at(t, self._run_cycle, module="safety")

    def _run_cycle(self) -> None:
        cycle_end = self._emission_time(self._cycle_index + 1)
        cfg = self.config
        up_lost = self._exchange(cfg.stream_up, cfg.pdu_bytes_up, cycle_end)
        down_lost = self._exchange(cfg.stream_down, cfg.pdu_bytes_down, cycle_end)
        if up_lost and down_lost:
            # cycle currently unanswered in both directions; any delivery,
            # including one from a retry, resets the counter
            self.consecutive_missed += 1
        self._cycle_index += 1
        self._schedule_cycle()

    def _exchange(self, stream: str, size: int, cycle_end: SimTime) -> bool:
        """Run one direction's PDU; True when the initial attempt was lost."""
        now = self.engine.now
        record = PacketRecord(
            stream=stream,
            seq=self._seq[stream],
            created_at=now,
            size_bytes=size,
            stream_class=StreamClass.SAFETY_RELEVANT,
        )
        self._seq[stream] += 1
        self.records.append(record)
        return self._attempt(record, now, cycle_end)

    def _attempt(self, record: PacketRecord, at: SimTime, cycle_end: SimTime) -> bool:
        tx_start = next_tx_opportunity(at, self.link_config.tti)
        record.sent_at = tx_start
        if self._transmit_ok(self.rng):
            delivered = at + self.link_model.one_way_latency(
                self.link_config, at, record.size_bytes
            )
            record.delivered_at = delivered
            self.engine.schedule_at(
                delivered, self._on_delivered, module="safety", lane=LANE_NORMAL
            )
            return False
        if self.config.retry_at_tti:
            retry_at = tx_start + self.link_config.tti.duration_ns
            if retry_at < cycle_end and retry_at <= self._horizon:
                self.engine.schedule_at(
                    retry_at,
                    lambda: self._attempt(record, self.engine.now, cycle_end),
                    module="safety",
                )
        return True

    def _on_delivered(self) -> None:
        self.last_delivery = self.engine.now
        self.consecutive_missed = 0

    # -- watchdog supervision ----------------------------------------------

    def _arm_watchdog(self) -> None:
        check_at = self.last_delivery + self.config.watchdog_ns
        if check_at > self._horizon:
            return
        self.engine.schedule_at(
            check_at, self._check_watchdog, module="safety", lane=LANE_SAFETY
        )

    def _check_watchdog(self) -> None:
        if not self.supervising:
            return
        if self.engine.now - self.last_delivery >= self.config.watchdog_ns:
            self.supervising = False
            self.on_trip(self.engine.now, self.consecutive_missed)
            return
        self._arm_watchdog()

    def rearm(self, now: SimTime) -> None:
        """Resume supervision after a manual reset."""
        self.last_delivery = now
        self.consecutive_missed = 0
        if not self.supervising:
            self.supervising = True
            self._arm_watchdog()


def watchdog_trip(
    manager: SafetyManager,
    loop: SafetyLoop | None,
    cause: str,
    now: SimTime,
    missed: int,
) -> LoopTransition | None:
    """Apply the consequence of a watchdog expiry.

    Docked robot: the island loop it is a member of safe-stops. Undocked,
    the robot's safety behaviour is isolated: the expiry is logged but local
    safety never reacts to link state.
    """
    if loop is not None:
        return manager.safe_stop(loop, cause, now, missed)
    entry = LoopTransition(now, "robot_isolated", "watchdog_trip", cause, missed)
    manager.log.append(entry)
    return entry
