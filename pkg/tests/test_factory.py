from __future__ import annotations

import pytest

from fablink.factory import (
    AtDock,
    Denied,
    DenialReason,
    DockOccupancy,
    DockRefused,
    DockingStation,
    Granted,
    InTransit,
    Island,
    MANUAL_STATION,
    ModuleState,
    NoRouteAvailable,
    PrefixOrderViolation,
    Product,
    ProductMemory,
    QualityFlag,
    Robot,
    StateRegistry,
    StationModule,
    Verdict,
    dock,
    handshake_grant,
    inspect_in_transit,
    plan_route,
    undock,
)
from fablink.nr_frame import TtiConfig
from fablink.radio_link import LinkConfig, default_link_model
from fablink.safety import LoopState, SafetyLoop, SafetyManager
from fablink.sim_core import RngStream

RECIPE = ["engrave", "insert_spring", "mount_cover", "weigh", "optical_inspect"]

TRANSIT = {
    "island1": {"island2": 6.0, "island3": 9.0, MANUAL_STATION: 8.0},
    "island2": {"island1": 6.0, "island3": 6.0, MANUAL_STATION: 8.0},
    "island3": {"island1": 9.0, "island2": 6.0, MANUAL_STATION: 8.0},
    MANUAL_STATION: {"island1": 8.0, "island2": 8.0, "island3": 8.0},
}


def make_islands() -> list[Island]:
    islands = []
    layout = {
        "island1": ["engrave", "insert_spring"],
        "island2": ["mount_cover", "weigh"],
        "island3": ["optical_inspect"],
    }
    for island_id, caps in layout.items():
        modules = [
            StationModule(f"{island_id}.{c}", island_id, c) for c in caps
        ]
        islands.append(
            Island(
                id=island_id,
                modules=modules,
                docking_station=DockingStation(f"{island_id}.dock", island_id),
                safety_loop_id=f"{island_id}.loop",
            )
        )
    return islands


def make_product(completed: int = 0) -> Product:
    product = Product(id="p1", order_config=list(RECIPE))
    for i in range(completed):
        product.memory.record_completion(i, RECIPE[i], f"m{i}", at=i)
    return product


# -- product memory -------------------------------------------------------------


def test_completions_must_follow_recipe_order():
    memory = ProductMemory()
    memory.record_completion(0, "engrave", "m1", 10)
    memory.record_completion(1, "insert_spring", "m2", 20)
    with pytest.raises(PrefixOrderViolation):
        memory.record_completion(3, "weigh", "m4", 30)
    with pytest.raises(PrefixOrderViolation):
        memory.record_completion(1, "insert_spring", "m2", 40)  # repeat


def test_next_step_walks_the_recipe():
    product = make_product(completed=2)
    assert product.next_step() == (2, "mount_cover")
    product = make_product(completed=5)
    assert product.next_step() is None


def test_fail_flag_sets_rework():
    product = make_product(completed=2)
    assert not product.needs_rework
    product.memory.record_quality(QualityFlag(1, "insert_spring", Verdict.FAIL, 5))
    assert product.needs_rework
    product.memory.record_quality(QualityFlag(1, "insert_spring", Verdict.PASS, 9))
    assert not product.needs_rework


# -- handshake ---------------------------------------------------------------------


def make_registry(now=0, staleness=300_000_000) -> StateRegistry:
    registry = StateRegistry(staleness_bound_ns=staleness)
    registry.publish(
        "island1.engrave",
        "module",
        {"state": "idle", "capability": "engrave", "carrier": None},
        now,
    )
    registry.publish(
        "island1.dock",
        "dock",
        {"occupancy": "robot_docked", "robot_carrier": None},
        now,
    )
    registry.publish(MANUAL_STATION, "manual", {"state": "idle"}, now)
    return registry


def test_handshake_grants_idle_capable_module():
    registry = make_registry()
    grant = handshake_grant(registry, make_product(), "staging", "island1.engrave", 0)
    assert isinstance(grant, Granted)


def test_handshake_denies_busy_module():
    registry = make_registry()
    registry.publish(
        "island1.engrave",
        "module",
        {"state": "busy", "capability": "engrave", "carrier": None},
        0,
    )
    grant = handshake_grant(registry, make_product(), "staging", "island1.engrave", 0)
    assert grant == Denied(DenialReason.NOT_IDLE)


def test_handshake_denies_occupied_module():
    registry = make_registry()
    registry.publish(
        "island1.engrave",
        "module",
        {"state": "idle", "capability": "engrave", "carrier": "p9"},
        0,
    )
    grant = handshake_grant(registry, make_product(), "staging", "island1.engrave", 0)
    assert grant == Denied(DenialReason.NOT_IDLE)


def test_handshake_denies_wrong_capability():
    registry = make_registry()
    product = make_product(completed=1)  # next step: insert_spring
    grant = handshake_grant(registry, product, "staging", "island1.engrave", 0)
    assert grant == Denied(DenialReason.NO_CAPABILITY)


def test_handshake_denies_stale_entry():
    registry = make_registry(now=0, staleness=100)
    grant = handshake_grant(registry, make_product(), "staging", "island1.engrave", 500)
    assert grant == Denied(DenialReason.STALE)


def test_handshake_dock_needs_docked_robot_with_free_tray():
    registry = make_registry()
    assert isinstance(
        handshake_grant(registry, make_product(), "m", "island1.dock", 0), Granted
    )
    registry.publish(
        "island1.dock", "dock", {"occupancy": "free", "robot_carrier": None}, 0
    )
    assert handshake_grant(
        registry, make_product(), "m", "island1.dock", 0
    ) == Denied(DenialReason.NOT_IDLE)
    registry.publish(
        "island1.dock",
        "dock",
        {"occupancy": "robot_docked", "robot_carrier": "p2"},
        0,
    )
    assert handshake_grant(
        registry, make_product(), "m", "island1.dock", 0
    ) == Denied(DenialReason.NOT_IDLE)


def test_handshake_manual_station():
    registry = make_registry()
    assert isinstance(
        handshake_grant(registry, make_product(), "m", MANUAL_STATION, 0), Granted
    )
    registry.publish(MANUAL_STATION, "manual", {"state": "busy"}, 0)
    assert handshake_grant(
        registry, make_product(), "m", MANUAL_STATION, 0
    ) == Denied(DenialReason.NOT_IDLE)


# -- routing -----------------------------------------------------------------------


def test_route_on_current_island_has_no_robot_legs():
    islands = make_islands()
    plan = plan_route(make_product(), islands, Robot(), TRANSIT, "island1")
    assert plan.target == "island1.engrave"
    assert not plan.needs_robot
    assert [leg.kind for leg in plan.legs] == ["conveyor"]


def test_route_to_other_island_uses_dock_transit_dock():
    islands = make_islands()
    product = make_product(completed=4)  # next: optical_inspect on island3
    plan = plan_route(product, islands, Robot(), TRANSIT, "island1")
    assert plan.target_island == "island3"
    assert [leg.kind for leg in plan.legs] == [
        "dock_pickup", "transit", "dock_drop", "conveyor",
    ]
    assert plan.legs[1].origin == "island1" and plan.legs[1].destination == "island3"


def test_route_picks_nearest_capable_island_exhaustively():
    # oracle: enumerate all islands holding an idle capable module and take
    # the transit-time minimum; compare against plan_route's choice
    islands = make_islands()
    extra = StationModule("island3.mount_cover", "island3", "mount_cover")
    islands[2].modules.append(extra)
    product = make_product(completed=2)  # next: mount_cover (islands 2 and 3)
    for start in ("island1", "island2", "island3"):
        plan = plan_route(product, islands, Robot(), TRANSIT, start)
        candidates = {
            island.id: (0.0 if island.id == start else TRANSIT[start][island.id])
            for island in islands
            if any(
                m.capability == "mount_cover" and m.state is ModuleState.IDLE
                for m in island.modules
            )
        }
        best = min(candidates.items(), key=lambda kv: (kv[1], kv[0]))[0]
        assert plan.target_island == best


def test_route_diverts_to_manual_on_fail_flag():
    islands = make_islands()
    product = make_product(completed=2)
    product.memory.record_quality(QualityFlag(1, "insert_spring", Verdict.FAIL, 5))
    plan = plan_route(product, islands, Robot(), TRANSIT, "island2")
    assert plan.target == MANUAL_STATION
    assert plan.needs_robot


def test_route_diverts_to_manual_when_everything_busy():
    islands = make_islands()
    for island in islands:
        for module in island.modules:
            module.state = ModuleState.BUSY
    plan = plan_route(make_product(), islands, Robot(), TRANSIT, "island1")
    assert plan.target == MANUAL_STATION


def test_route_raises_without_capability_or_manual():
    islands = make_islands()
    product = Product(id="p", order_config=["polish"])
    with pytest.raises(NoRouteAvailable):
        plan_route(product, islands, Robot(), TRANSIT, "island1",
                   manual_available=False)


def test_route_to_manual_requires_manual_station():
    islands = make_islands()
    product = make_product(completed=2)
    product.memory.record_quality(QualityFlag(1, "insert_spring", Verdict.FAIL, 5))
    with pytest.raises(NoRouteAvailable):
        plan_route(product, islands, Robot(), TRANSIT, "island2",
                   manual_available=False)


# -- docking -----------------------------------------------------------------------


def make_safety(islands) -> SafetyManager:
    loops = [
        SafetyLoop(island.safety_loop_id, island.id, {m.id for m in island.modules})
        for island in islands
    ]
    return SafetyManager(loops)


def test_dock_joins_loop_and_signals_affiliation():
    islands = make_islands()
    mgr = make_safety(islands)
    robot = Robot(pose=InTransit("island1", "island2"))
    result = dock(robot, islands[1].docking_station, islands[1], mgr, 100)
    assert robot.pose == AtDock("island2")
    assert robot.safety_membership == "island2.loop"
    assert result.affiliation_color == "island2"
    assert islands[1].docking_station.occupancy is DockOccupancy.ROBOT_DOCKED
    assert "robot" in mgr.loops["island2.loop"].members

    undock(robot, islands[1].docking_station, mgr, 200)
    assert robot.safety_membership is None
    assert islands[1].docking_station.occupancy is DockOccupancy.FREE
    assert "robot" not in mgr.loops["island2.loop"].members


def test_dock_refused_when_station_occupied():
    islands = make_islands()
    mgr = make_safety(islands)
    islands[0].docking_station.occupancy = DockOccupancy.ROBOT_DOCKED
    with pytest.raises(DockRefused):
        dock(Robot(pose=InTransit("x", "island1")), islands[0].docking_station,
             islands[0], mgr, 0)


def test_dock_refused_when_island_safe_stopped():
    islands = make_islands()
    mgr = make_safety(islands)
    mgr.estop("island1.engrave", 50)
    assert mgr.loops["island1.loop"].state is LoopState.SAFE_STOP
    with pytest.raises(DockRefused):
        dock(Robot(pose=InTransit("x", "island1")), islands[0].docking_station,
             islands[0], mgr, 60)


# -- in-transit inspection ------------------------------------------------------------


def _transit_robot(product) -> Robot:
    return Robot(pose=InTransit("island1", "island2"), carrier=product)


def test_inspection_defect_probability_extremes():
    model = default_link_model()
    config = LinkConfig(snr_db=11.0, tti=TtiConfig(125), processing_delay_ns=0)
    product = make_product(completed=2)
    transit = 6_000_000_000
    passes = inspect_in_transit(
        _transit_robot(product), product, model, config, RngStream(1, "i"),
        0, transit, 2_000_000, 200_000_000, defect_probability=0.0,
    )
    assert passes.verdict is Verdict.PASS and not passes.timed_out
    fails = inspect_in_transit(
        _transit_robot(product), product, model, config, RngStream(1, "i"),
        0, transit, 2_000_000, 200_000_000, defect_probability=1.0,
    )
    assert fails.verdict is Verdict.FAIL


def test_inspection_cloud_rtt_arithmetic():
    # oracle: 2 MB at 10 Mbit/s uploads in 1.6 s, plus 200 ms inference,
    # plus the one-slot verdict return
    model = default_link_model()
    config = LinkConfig(snr_db=11.0, tti=TtiConfig(125), processing_delay_ns=0)
    product = make_product(completed=2)
    outcome = inspect_in_transit(
        _transit_robot(product), product, model, config, RngStream(1, "i"),
        0, 6_000_000_000, 2_000_000, 200_000_000, defect_probability=0.0,
    )
    upload = model.one_way_latency(config, 0, 2_000_000)
    back = model.one_way_latency(config, upload + 200_000_000, 100)
    assert upload == 1_600_000_000
    assert outcome.cloud_rtt_ns == upload + 200_000_000 + back


def test_inspection_timeout_passes_by_default_with_flag():
    model = default_link_model()
    config = LinkConfig(snr_db=11.0, tti=TtiConfig(125), processing_delay_ns=0)
    product = make_product(completed=2)
    outcome = inspect_in_transit(
        _transit_robot(product), product, model, config, RngStream(1, "i"),
        0, 1_000_000_000, 2_000_000, 200_000_000, defect_probability=1.0,
    )
    assert outcome.timed_out
    assert outcome.verdict is Verdict.PASS  # a late verdict must not halt transport
    assert outcome.cloud_rtt_ns > 1_000_000_000


def test_inspection_requires_transit_with_carrier():
    model = default_link_model()
    config = LinkConfig(snr_db=11.0)
    product = make_product()
    with pytest.raises(ValueError):
        inspect_in_transit(
            Robot(pose=AtDock("island1"), carrier=product), product, model,
            config, RngStream(1, "i"), 0, 10**9, 100, 0, 0.0,
        )
