"""Production-flow domain model.

Islands of single-task modules with gated conveyors, docking stations, the
transport robot, the product digital twin carried on its RFID tag, the
central handshake controller reading an exported state registry, dynamic
routing with manual-workstation diversion, and in-transit quality
inspection with a cloud round trip over the radio link.

The event-driven plant runtime lives in `simulation`; this module holds the
state types and the decision functions they operate on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .radio_link import LinkConfig, LinkModel
from .sim_core import RngStream, SimTime

MANUAL_STATION = "manual"


class PrefixOrderViolation(RuntimeError):
    """A completion was recorded out of recipe order."""


class NoRouteAvailable(RuntimeError):
    """No capable module anywhere and no manual workstation configured."""


class DockRefused(RuntimeError):
    """Docking attempt at an occupied station or a safe-stopped island."""


# -- product digital twin ----------------------------------------------------


@dataclass
class CompletedStep:
    step_index: int
    step: str
    station: str
    at: SimTime


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass
class QualityFlag:
    step_index: int | None
    step: str | None
    verdict: Verdict
    at: SimTime
    timed_out: bool = False


@dataclass
class ProductMemory:
    """Append-only progress record carried on the product's tag."""

    completed_steps: list[CompletedStep] = field(default_factory=list)
    quality_flags: list[QualityFlag] = field(default_factory=list)

    def record_completion(
        self, step_index: int, step: str, station: str, at: SimTime
    ) -> CompletedStep:
        if step_index != len(self.completed_steps):
            raise PrefixOrderViolation(
                f"step {step_index} ({step}) recorded while "
                f"{len(self.completed_steps)} steps are complete"
            )
        entry = CompletedStep(step_index, step, station, at)
        self.completed_steps.append(entry)
        return entry

    def record_quality(self, flag: QualityFlag) -> None:
        self.quality_flags.append(flag)

    def latest_flag(self) -> QualityFlag | None:
        return self.quality_flags[-1] if self.quality_flags else None


@dataclass
class Product:
    """Product instance; `order_config` is its individual recipe."""

    id: str
    order_config: list[str]
    memory: ProductMemory = field(default_factory=ProductMemory)

    def next_step(self) -> tuple[int, str] | None:
        index = len(self.memory.completed_steps)
        if index >= len(self.order_config):
            return None
        return index, self.order_config[index]

    @property
    def needs_rework(self) -> bool:
        flag = self.memory.latest_flag()
        return flag is not None and flag.verdict is Verdict.FAIL


# -- plant layout -------------------------------------------------------------


class ModuleState(Enum):
    IDLE = "idle"
    BUSY = "busy"
    FAULT = "fault"
    OUT_OF_SERVICE = "out_of_service"


class GateState(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class StationModule:
    """Single-task assembly module on an island conveyor."""

    id: str
    island_id: str
    capability: str
    state: ModuleState = ModuleState.IDLE
    upstream_gate: GateState = GateState.CLOSED
    downstream_gate: GateState = GateState.CLOSED
    carrier: str | None = None  # product id physically on the module


class DockOccupancy(Enum):
    FREE = "free"
    ROBOT_DOCKED = "robot_docked"


@dataclass
class DockingStation:
    id: str
    island_id: str
    occupancy: DockOccupancy = DockOccupancy.FREE


@dataclass
class Island:
    id: str
    modules: list[StationModule]
    docking_station: DockingStation
    safety_loop_id: str
    color: str = ""


# -- robot --------------------------------------------------------------------


@dataclass(frozen=True)
class AtDock:
    island_id: str


@dataclass(frozen=True)
class InTransit:
    origin: str
    destination: str


@dataclass(frozen=True)
class AtManualStation:
    pass


RobotPose = AtDock | InTransit | AtManualStation


@dataclass
class Robot:
    id: str = "robot"
    pose: RobotPose = InTransit("depot", "depot")
    carrier: Product | None = None
    safety_membership: str | None = None
    affiliation_color: str = ""
    home_island: str = ""


@dataclass
class DockResult:
    island_id: str
    loop_id: str
    affiliation_color: str


def dock(robot: Robot, station: DockingStation, island: Island, safety_mgr,
         now: SimTime) -> DockResult:
    """Dock the robot: it joins the island's safety loop and signals its
    affiliation with the island's color."""
    from .safety import LoopState

    if station.occupancy is DockOccupancy.ROBOT_DOCKED:
        raise DockRefused(f"station {station.id} is occupied")
    loop = safety_mgr.loops[island.safety_loop_id]
    if loop.state is LoopState.SAFE_STOP:
        raise DockRefused(f"island {island.id} is in safe stop")
    station.occupancy = DockOccupancy.ROBOT_DOCKED
    robot.pose = AtDock(island.id)
    robot.safety_membership = island.safety_loop_id
    robot.affiliation_color = island.color or island.id
    safety_mgr.join(island.safety_loop_id, now)
    return DockResult(island.id, island.safety_loop_id, robot.affiliation_color)


def undock(robot: Robot, station: DockingStation, safety_mgr, now: SimTime) -> None:
    """Undock: membership is cleared, the robot's safety behaviour is
    isolated from the island again."""
    station.occupancy = DockOccupancy.FREE
    robot.safety_membership = None
    robot.affiliation_color = ""
    safety_mgr.leave(now)


# -- state registry and handshake ----------------------------------------------


@dataclass
class RegistryEntry:
    endpoint: str
    kind: str  # "module" | "dock" | "manual"
    data: dict
    updated_at: SimTime


class StateRegistry:
    """Exported state of all modules, docks and the manual station.

    Handshake decisions read only this registry; entries older than the
    staleness bound are rejected rather than trusted.
    """

    def __init__(self, staleness_bound_ns: SimTime):
        self.staleness_bound_ns = staleness_bound_ns
        self._entries: dict[str, RegistryEntry] = {}

    def publish(self, endpoint: str, kind: str, data: dict, now: SimTime) -> None:
        self._entries[endpoint] = RegistryEntry(endpoint, kind, dict(data), now)

    def get(self, endpoint: str) -> RegistryEntry:
        return self._entries[endpoint]

    def endpoints(self) -> list[str]:
        return list(self._entries)

    def is_stale(self, endpoint: str, now: SimTime) -> bool:
        return now - self._entries[endpoint].updated_at > self.staleness_bound_ns


class DenialReason(Enum):
    NOT_IDLE = "not_idle"
    NO_CAPABILITY = "no_capability"
    STALE = "stale"


@dataclass(frozen=True)
class Granted:
    to: str


@dataclass(frozen=True)
class Denied:
    reason: DenialReason


def handshake_grant(
    registry: StateRegistry,
    product: Product,
    frm: str,
    to: str,
    now: SimTime,
) -> Granted | Denied:
    """Central handshake decision for moving `product` from `frm` to `to`.

    Module targets must be idle, empty, and capable of the product's next
    step. A dock target is the robot leg of a route: it needs the robot
    docked there with a free carrier tray. The manual workstation can take
    any product while idle.
    """
    entry = registry.get(to)
    if registry.is_stale(to, now):
        return Denied(DenialReason.STALE)
    if entry.kind == "module":
        if entry.data["state"] != ModuleState.IDLE.value or entry.data.get("carrier"):
            return Denied(DenialReason.NOT_IDLE)
        nxt = product.next_step()
        if nxt is None or entry.data["capability"] != nxt[1]:
            return Denied(DenialReason.NO_CAPABILITY)
        return Granted(to)
    if entry.kind == "dock":
        if (
            entry.data["occupancy"] != DockOccupancy.ROBOT_DOCKED.value
            or entry.data.get("robot_carrier")
        ):
            return Denied(DenialReason.NOT_IDLE)
        return Granted(to)
    if entry.kind == "manual":
        if entry.data["state"] != "idle":
            return Denied(DenialReason.NOT_IDLE)
        return Granted(to)
    raise KeyError(f"unknown endpoint kind {entry.kind!r} for {to}")


# -- routing -------------------------------------------------------------------


@dataclass(frozen=True)
class RouteLeg:
    kind: str  # "conveyor" | "dock_pickup" | "transit" | "dock_drop"
    origin: str
    destination: str


@dataclass
class RoutePlan:
    target: str  # module id or MANUAL_STATION
    target_island: str  # island id or MANUAL_STATION
    legs: list[RouteLeg]

    @property
    def needs_robot(self) -> bool:
        return any(leg.kind == "transit" for leg in self.legs)


def plan_route(
    product: Product,
    islands: list[Island],
    robot: Robot,
    transit_s: dict[str, dict[str, float]],
    current_island: str,
    manual_available: bool = True,
) -> RoutePlan:
    """Choose the product's next destination.

    Targets the nearest island (per the transit-time matrix) holding an idle
    module capable of the next step. A pending Fail quality flag, or no idle
    capable module anywhere, diverts to the manual workstation.
    """
    nxt = product.next_step()
    if nxt is None and not product.needs_rework:
        raise ValueError(f"product {product.id} has no uncompleted step")

    def robot_legs(dest: str) -> list[RouteLeg]:
        return [
            RouteLeg("dock_pickup", current_island, current_island),
            RouteLeg("transit", current_island, dest),
            RouteLeg("dock_drop", dest, dest),
        ]

    if product.needs_rework:
        if not manual_available:
            raise NoRouteAvailable(
                f"product {product.id} needs rework but no manual station exists"
            )
        if current_island == MANUAL_STATION:
            return RoutePlan(MANUAL_STATION, MANUAL_STATION, [])
        return RoutePlan(MANUAL_STATION, MANUAL_STATION, robot_legs(MANUAL_STATION))

    assert nxt is not None
    _, step = nxt
    candidates: list[tuple[float, str, str]] = []
    for island in islands:
        module = next(
            (
                m
                for m in island.modules
                if m.capability == step
                and m.state is ModuleState.IDLE
                and m.carrier is None
            ),
            None,
        )
        if module is None:
            continue
        if island.id == current_island:
            cost = 0.0
        else:
            cost = transit_s[current_island][island.id]
        candidates.append((cost, island.id, module.id))

    if candidates:
        cost, island_id, module_id = min(candidates)
        if island_id == current_island:
            return RoutePlan(
                module_id,
                island_id,
                [RouteLeg("conveyor", current_island, module_id)],
            )
        legs = robot_legs(island_id)
        legs.append(RouteLeg("conveyor", island_id, module_id))
        return RoutePlan(module_id, island_id, legs)

    # No idle capable module anywhere: divert to the manual workstation,
    # which can substitute for any module.
    if manual_available:
        if current_island == MANUAL_STATION:
            return RoutePlan(MANUAL_STATION, MANUAL_STATION, [])
        return RoutePlan(MANUAL_STATION, MANUAL_STATION, robot_legs(MANUAL_STATION))
    raise NoRouteAvailable(
        f"no module can perform {step!r} and no manual station is configured"
    )


# -- in-transit inspection -------------------------------------------------------


@dataclass
class InspectionOutcome:
    verdict: Verdict
    cloud_rtt_ns: SimTime
    timed_out: bool


def inspect_in_transit(
    robot: Robot,
    product: Product,
    link_model: LinkModel,
    link_config: LinkConfig,
    rng: RngStream,
    now: SimTime,
    transit_duration_ns: SimTime,
    image_bytes: int,
    inference_ns: SimTime,
    defect_probability: float,
    verdict_bytes: int = 100,
) -> InspectionOutcome:
    """Photograph the carried product, upload, infer in the cloud, return a
    verdict.

    The round trip is image upload + inference + verdict return over the
    link. When it exceeds the transit duration the verdict cannot influence
    this leg: the product passes by default, flagged as timed out. The
    defect draw is consumed either way so draw sequences stay stable.
    """
    if not isinstance(robot.pose, InTransit) or robot.carrier is not product:
        raise ValueError("inspection runs only in transit with the product aboard")
    upload = link_model.one_way_latency(link_config, now, image_bytes)
    verdict_return = link_model.one_way_latency(
        link_config, now + upload + inference_ns, verdict_bytes
    )
    cloud_rtt = upload + inference_ns + verdict_return
    failed = rng.random() < defect_probability
    if cloud_rtt > transit_duration_ns:
        return InspectionOutcome(Verdict.PASS, cloud_rtt, timed_out=True)
    return InspectionOutcome(
        Verdict.FAIL if failed else Verdict.PASS, cloud_rtt, timed_out=False
    )
