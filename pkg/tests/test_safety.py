from __future__ import annotations

import math
import random

import pytest

from fablink.nr_frame import TtiConfig
from fablink.radio_link import LinkConfig, default_link_model
from fablink.safety import (
    LocalSafety,
    LocalSafetyState,
    LoopState,
    SafetyChannel,
    SafetyChannelConfig,
    SafetyLoop,
    SafetyManager,
    SensorKind,
    UnknownEndpoint,
    local_guard,
    reset_local,
    watchdog_trip,
)
from fablink.sim_core import NS_PER_MS, NS_PER_S, Engine
from fablink.traffic import StreamClass

CYCLE_HZ = 246.19
CYCLE_NS = round(NS_PER_S / CYCLE_HZ)
WATCHDOG_NS = 12 * NS_PER_MS


def make_manager(robot_member: str | None = None) -> SafetyManager:
    loops = [
        SafetyLoop(f"island{i}.loop", f"island{i}",
                   {f"island{i}.m1", f"island{i}.m2", "safety_plc"})
        for i in (1, 2, 3)
    ]
    mgr = SafetyManager(loops)
    if robot_member:
        mgr.join(robot_member, 0)
    return mgr


# -- local guard -----------------------------------------------------------------


def test_laser_obstruction_pauses_and_clears():
    local = LocalSafety("robot")
    assert local_guard(local, SensorKind.LASER_RANGE, True) is LocalSafetyState.OBSTRUCTED
    assert local_guard(local, SensorKind.LASER_RANGE, False) is LocalSafetyState.CLEAR


def test_infrared_ring_behaves_like_laser():
    local = LocalSafety("robot")
    assert local_guard(local, SensorKind.INFRARED_RING, True) is LocalSafetyState.OBSTRUCTED
    assert local_guard(local, SensorKind.INFRARED_RING, False) is LocalSafetyState.CLEAR


def test_bumper_latches_until_reset():
    local = LocalSafety("robot")
    assert local_guard(local, SensorKind.BUMPER, True) is LocalSafetyState.EMERGENCY_STOP
    # neither a bumper release nor a clear laser reading unlatches
    assert local_guard(local, SensorKind.BUMPER, False) is LocalSafetyState.EMERGENCY_STOP
    assert local_guard(local, SensorKind.LASER_RANGE, False) is LocalSafetyState.EMERGENCY_STOP
    assert reset_local(local) is LocalSafetyState.CLEAR


# -- e-stop confinement -------------------------------------------------------------


def test_estop_confined_to_source_island():
    mgr = make_manager()
    mgr.estop("island2.m1", 100)
    assert mgr.loops["island2.loop"].state is LoopState.SAFE_STOP
    assert mgr.loops["island1.loop"].state is LoopState.RUNNING
    assert mgr.loops["island3.loop"].state is LoopState.RUNNING


def test_docked_robot_estop_stops_its_island():
    mgr = make_manager(robot_member="island1.loop")
    transitions = mgr.estop("robot", 100)
    assert mgr.loops["island1.loop"].state is LoopState.SAFE_STOP
    assert mgr.loops["island2.loop"].state is LoopState.RUNNING
    assert any(t.loop == "island1.loop" for t in transitions)


def test_undocked_robot_estop_is_local_only():
    mgr = make_manager()
    transitions = mgr.estop("robot", 100)
    assert all(loop.state is LoopState.RUNNING for loop in mgr.loops.values())
    assert transitions[0].loop == "robot_local"


def test_estop_unknown_endpoint():
    mgr = make_manager()
    with pytest.raises(UnknownEndpoint):
        mgr.estop("mystery.device", 0)


def test_reset_restores_running():
    mgr = make_manager()
    mgr.estop("island3.m2", 50)
    entry = mgr.reset("island3.loop", 90)
    assert mgr.loops["island3.loop"].state is LoopState.RUNNING
    assert entry.transition == "running"


def test_estop_confinement_randomized_schedules():
    # 1000 random schedules of e-stops, dock/undock moves and resets; the
    # log must never show a safe stop whose cause lies outside the loop
    rng = random.Random(2024)
    island_ids = ["island1", "island2", "island3"]
    for _ in range(1000):
        mgr = make_manager()
        docked_at: str | None = None
        for step in range(rng.randrange(1, 8)):
            now = step * 1000
            roll = rng.random()
            if roll < 0.4:
                island = rng.choice(island_ids)
                mgr.estop(f"{island}.m{rng.randrange(1, 3)}", now)
            elif roll < 0.55 and docked_at is None:
                docked_at = rng.choice(island_ids)
                mgr.join(f"{docked_at}.loop", now)
            elif roll < 0.65 and docked_at is not None:
                mgr.leave(now)
                docked_at = None
            elif roll < 0.8:
                mgr.estop("robot", now)
                if docked_at is not None:
                    pass  # island safe stop from the docked robot is allowed
            else:
                mgr.reset(rng.choice(island_ids) + ".loop", now)
        for entry in mgr.log:
            if entry.transition != "safe_stop":
                continue
            loop = mgr.loops[entry.loop]
            if entry.cause == "robot":
                # robot causes a loop stop only as a docked member
                assert entry.loop in {f"{i}.loop" for i in island_ids}
            else:
                assert entry.cause in loop.members


# -- PDU channel and watchdog ----------------------------------------------------------


def make_channel(
    engine: Engine,
    outages: list[tuple[int, int]] | None = None,
    watchdog_ns: int = WATCHDOG_NS,
    retry_at_tti: bool = True,
    processing_delay_ns: int = 100_000,
):
    """Channel over an ideal link except inside scripted outage windows."""
    model = default_link_model()
    config = LinkConfig(
        snr_db=15.0, tti=TtiConfig(125), processing_delay_ns=processing_delay_ns
    )
    records = []
    trips = []

    def transmit_ok(rng) -> bool:
        now = engine.now
        for start, end in outages or []:
            if start <= now < end:
                return False
        return True

    channel = SafetyChannel(
        engine=engine,
        link_model=model,
        link_config=config,
        config=SafetyChannelConfig(
            cycle_hz=CYCLE_HZ, watchdog_ns=watchdog_ns, retry_at_tti=retry_at_tti
        ),
        rng=engine.stream("link.safety"),
        records=records,
        on_trip=lambda now, missed: trips.append((now, missed)),
        transmit_ok=transmit_ok,
    )
    return channel, records, trips


def test_clean_link_delivers_every_cycle_and_never_trips():
    engine = Engine(seed=1)
    channel, records, trips = make_channel(engine)
    horizon = NS_PER_S
    channel.start(horizon)
    engine.run_until(horizon)
    assert trips == []
    assert channel.consecutive_missed == 0
    created = [r for r in records if r.stream == "pnio_coupler_to_plc"]
    assert len(created) == 247  # 246.19 Hz inclusive of t=0
    assert all(r.delivered_at is not None for r in records)
    sizes = {r.stream: r.size_bytes for r in records}
    assert sizes == {"pnio_coupler_to_plc": 60, "pnio_plc_to_coupler": 64}


def test_watchdog_trips_at_watchdog_after_last_delivery():
    engine = Engine(seed=1)
    outage_start = 100 * NS_PER_MS
    channel, records, trips = make_channel(
        engine, outages=[(outage_start, 10 * NS_PER_S)]
    )
    channel.start(NS_PER_S)
    engine.run_until(NS_PER_S)
    assert len(trips) == 1
    trip_at, missed = trips[0]
    last_delivery = max(
        r.delivered_at for r in records if r.delivered_at is not None
        and r.delivered_at <= trip_at
    )
    assert trip_at == last_delivery + WATCHDOG_NS
    # ceil(12 ms / 4.0619 ms) = 3 cycle attempts go unanswered before expiry
    assert missed == 3 == math.ceil(WATCHDOG_NS / CYCLE_NS)


def test_delivery_resets_the_miss_counter():
    engine = Engine(seed=1)
    # one cycle swallowed, then the link recovers: no trip
    start = round(1 * CYCLE_NS) - 100_000
    channel, records, trips = make_channel(
        engine, outages=[(start, start + CYCLE_NS)]
    )
    channel.start(200 * NS_PER_MS)
    engine.run_until(200 * NS_PER_MS)
    assert trips == []
    assert channel.consecutive_missed == 0
    assert any(r.delivered_at is None for r in records)  # the swallowed cycle


def test_retry_at_next_tti_recovers_within_the_cycle():
    engine = Engine(seed=1)
    # outage covers only the first transmission slot of cycle 5
    cycle_start = round(5 * NS_PER_S / CYCLE_HZ)
    channel, records, trips = make_channel(
        engine, outages=[(cycle_start, cycle_start + 125_000)]
    )
    channel.start(100 * NS_PER_MS)
    engine.run_until(100 * NS_PER_MS)
    assert trips == []
    hit = [r for r in records if r.created_at == cycle_start]
    assert hit and all(r.delivered_at is not None for r in hit)
    # the delivery used a later slot than the first-attempt slot
    assert all(r.sent_at > r.created_at for r in hit)


def test_no_retry_mode_loses_the_whole_cycle():
    engine = Engine(seed=1)
    cycle_start = round(5 * NS_PER_S / CYCLE_HZ)
    channel, records, trips = make_channel(
        engine,
        outages=[(cycle_start, cycle_start + 125_000)],
        retry_at_tti=False,
    )
    channel.start(100 * NS_PER_MS)
    engine.run_until(100 * NS_PER_MS)
    hit = [r for r in records if r.created_at == cycle_start]
    assert hit and all(r.delivered_at is None for r in hit)


def test_watchdog_rearms_after_reset():
    engine = Engine(seed=1)
    channel, records, trips = make_channel(
        engine, outages=[(50 * NS_PER_MS, 80 * NS_PER_MS)]
    )
    channel.start(NS_PER_S)

    def reset():
        channel.rearm(engine.now)

    engine.schedule_at(90 * NS_PER_MS, reset)
    engine.run_until(NS_PER_S)
    assert len(trips) == 1  # recovered link after the reset, no second trip
    assert channel.supervising


def brute_force_first_trip(
    deliveries: list[int], watchdog: int, horizon: int
) -> int | None:
    """Oracle: first instant a delivery-free window of the watchdog length
    completes, scanning the delivery timeline from t = 0."""
    edges = [0] + sorted(d for d in deliveries if d <= horizon)
    for prev, nxt in zip(edges, edges[1:]):
        if nxt - prev >= watchdog and prev + watchdog <= horizon:
            return prev + watchdog
    if horizon - edges[-1] >= watchdog:
        return edges[-1] + watchdog
    return None


def test_watchdog_trips_iff_delivery_free_window_exists():
    # 1000 randomized outage schedules, cross-checked against a brute-force
    # window scan over the delivered-PDU timeline
    rng = random.Random(7001)
    horizon = 300 * NS_PER_MS
    mismatches = []
    for i in range(1000):
        engine = Engine(seed=i)
        watchdog = rng.randrange(9, 25) * NS_PER_MS
        outages = []
        for _ in range(rng.randrange(0, 3)):
            start = rng.randrange(0, horizon)
            outages.append((start, start + rng.randrange(1, 40) * NS_PER_MS))
        channel, records, trips = make_channel(
            engine, outages=outages, watchdog_ns=watchdog
        )
        channel.start(horizon)
        engine.run_until(horizon)
        deliveries = [
            r.delivered_at for r in records if r.delivered_at is not None
        ]
        expected = brute_force_first_trip(deliveries, watchdog, horizon)
        actual = trips[0][0] if trips else None
        if expected != actual:
            mismatches.append((i, outages, expected, actual))
    assert not mismatches, mismatches[:3]


def test_watchdog_must_cover_a_cycle():
    with pytest.raises(ValueError):
        SafetyChannelConfig(cycle_hz=CYCLE_HZ, watchdog_ns=NS_PER_MS)


def test_watchdog_trip_consequence_by_membership():
    mgr = make_manager(robot_member="island2.loop")
    watchdog_trip(mgr, mgr.loops["island2.loop"], "watchdog", 500, 3)
    assert mgr.loops["island2.loop"].state is LoopState.SAFE_STOP
    assert mgr.loops["island1.loop"].state is LoopState.RUNNING

    isolated = make_manager()
    entry = watchdog_trip(isolated, None, "watchdog", 500, 3)
    # isolated robot: logged only, no loop stop and no local reaction
    assert entry.loop == "robot_isolated"
    assert all(loop.state is LoopState.RUNNING for loop in isolated.loops.values())


def test_channel_records_are_safety_class():
    engine = Engine(seed=1)
    channel, records, _ = make_channel(engine)
    channel.start(50 * NS_PER_MS)
    engine.run_until(50 * NS_PER_MS)
    assert records
    assert all(r.stream_class is StreamClass.SAFETY_RELEVANT for r in records)
