"""Run orchestration: wires the traffic generators, the production-flow
runtime (islands, robot, handshake controller, manual workstation), the
safety loops and PDU channel, and scenario script actions onto one
deterministic event loop, then folds the run into metrics and a compliance
report.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import compliance as compliance_mod
from . import factory as factory_mod
from . import safety as safety_mod
from .compliance import ComplianceReport, StreamMetrics
from .factory import (
    AtDock,
    AtManualStation,
    Denied,
    DockOccupancy,
    DockingStation,
    DockRefused,
    GateState,
    InTransit,
    Island,
    MANUAL_STATION,
    ModuleState,
    Product,
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
from .nr_frame import next_tx_opportunity
from .safety import (
    LocalSafety,
    LocalSafetyState,
    LoopState,
    SafetyChannel,
    SafetyChannelConfig,
    SafetyLoop,
    SafetyManager,
    SensorKind,
    local_guard,
    reset_local,
    watchdog_trip,
)
from .scenario import Scenario
from .sim_core import (
    LANE_SAFETY,
    NS_PER_MS,
    NS_PER_S,
    NS_PER_US,
    Engine,
    PausableTimer,
    SimSummary,
    SimTime,
)
from .traffic import (
    PacketRecord,
    Pattern,
    StreamClass,
    TrafficProfile,
    periodic_emission_time,
)


@dataclass
class ProductEvent:
    product: str
    event: str
    at: SimTime
    detail: str = ""


@dataclass
class RunResult:
    scenario: Scenario
    summary: SimSummary
    records: list[PacketRecord]
    stream_order: list[str]
    safety_log: list[safety_mod.LoopTransition]
    product_log: list[ProductEvent]
    stream_metrics: dict[str, StreamMetrics]
    aggregate: StreamMetrics
    compliance: ComplianceReport
    factory_stats: dict


# -- traffic stream runtime ---------------------------------------------------


class _StreamRuntime:
    """Schedules one stream's emissions and resolves each packet inline."""

    def __init__(self, sim: "Simulation", profile: TrafficProfile):
        self.sim = sim
        self.profile = profile
        self.rng = sim.engine.stream(f"traffic.{profile.name}")
        self.seq = 0
        if profile.wireless:
            self._air_proc_ns = sim.link_model.air_time_ns(
                sim.link_config, profile.payload_bytes
            ) + sim.link_config.processing_delay_ns

    def start(self) -> None:
        if self.profile.pattern is Pattern.PERIODIC:
            t = self.profile.phase_ns
            if t <= self.sim.horizon_ns:
                self.sim.engine.schedule_at(t, self._emit_periodic, module="traffic")
        else:
            self._schedule_poisson(float(self.profile.phase_ns))

    def _schedule_poisson(self, t_prev: float) -> None:
        t = t_prev + self.rng.expovariate(self.profile.rate_hz) * NS_PER_S
        ti = round(t)
        if ti <= self.sim.horizon_ns:
            self.sim.engine.schedule_at(
                ti, lambda: self._emit_once(t), module="traffic"
            )

    def _emit_once(self, t_float: float) -> None:
        self._resolve_packet()
        self._schedule_poisson(t_float)

    def _emit_periodic(self) -> None:
        self._resolve_packet()
        t = periodic_emission_time(self.profile, self.seq)
        if t <= self.sim.horizon_ns:
            self.sim.engine.schedule_at(t, self._emit_periodic, module="traffic")

    def _resolve_packet(self) -> None:
        sim = self.sim
        now = sim.engine.now
        record = PacketRecord(
            stream=self.profile.name,
            seq=self.seq,
            created_at=now,
            size_bytes=self.profile.payload_bytes,
            stream_class=self.profile.stream_class,
        )
        self.seq += 1
        sim.records.append(record)
        if self.profile.wireless:
            record.sent_at = next_tx_opportunity(now, sim.link_config.tti)
            if sim.transmit_ok(self.rng):
                delivered = record.sent_at + self._air_proc_ns
                if sim.jitter_ns > 0:
                    delivered += round(sim.jitter_rng.uniform(0, sim.jitter_ns))
                record.delivered_at = delivered
            # lost packets of non-safety streams are not retried
        else:
            record.sent_at = now
            record.delivered_at = now + sim.wired_latency_ns


# -- plant runtime -------------------------------------------------------------


class _ProductRun:
    def __init__(self, product: Product, island: str, released_at: SimTime):
        self.product = product
        self.island = island  # current island id or MANUAL_STATION
        self.location = f"{island}:staging"
        self.state = "waiting"  # waiting | moving | in_service | on_robot | manual | done
        self.pending_robot = False
        self.released_at = released_at
        self.completed_at: SimTime | None = None


class _RobotJob:
    def __init__(self, product_run: _ProductRun, destination: str):
        self.product_run = product_run
        self.destination = destination
        self.phase = "pickup"  # pickup | deliver


class PlantRuntime:
    """Event-driven production flow around a periodic controller tick.

    Each tick the controller republishes the state registry, routes waiting
    products through handshake grants, and dispatches the transport robot.
    Work in progress is held in pausable timers so safe stops and local
    safety events suspend it without losing progress.
    """

    def __init__(self, sim: "Simulation"):
        self.sim = sim
        self.engine = sim.engine
        self.cfg = sim.scenario.factory
        self.tick_ns = round(self.cfg.tick_ms * NS_PER_MS)
        self.registry = StateRegistry(
            staleness_bound_ns=self.cfg.registry_staleness_ticks * self.tick_ns
        )
        self.islands: dict[str, Island] = {}
        self.modules: dict[str, StationModule] = {}
        self.docks: dict[str, DockingStation] = {}
        loops = []
        for spec in self.cfg.islands:
            loop_id = f"{spec.id}.loop"
            modules = [
                StationModule(
                    id=f"{spec.id}.{cap}", island_id=spec.id, capability=cap
                )
                for cap in spec.capabilities
            ]
            dock_station = DockingStation(id=f"{spec.id}.dock", island_id=spec.id)
            island = Island(
                id=spec.id,
                modules=modules,
                docking_station=dock_station,
                safety_loop_id=loop_id,
                color=spec.id,
            )
            self.islands[spec.id] = island
            self.docks[dock_station.id] = dock_station
            for m in modules:
                self.modules[m.id] = m
            loops.append(
                SafetyLoop(
                    id=loop_id,
                    island_id=spec.id,
                    members={m.id for m in modules} | {"safety_plc"},
                )
            )
        self.loops = loops
        self.robot = Robot(home_island=self.cfg.robot_home)
        self.local_safety = LocalSafety(robot_id=self.robot.id)
        self.manual_queue: deque[_ProductRun] = deque()
        self.manual_busy = False
        self.products: list[_ProductRun] = []
        self.jobs: deque[_RobotJob] = deque()
        self.robot_busy = False
        self.hover_island: str | None = None
        self._island_timers: dict[str, set[PausableTimer]] = {
            i: set() for i in self.islands
        }
        self._robot_timers: set[PausableTimer] = set()
        self._manual_timers: set[PausableTimer] = set()
        self.stats = {
            "released": 0,
            "completed": 0,
            "manual_visits": 0,
            "inspections": 0,
            "inspection_failures": 0,
            "inspection_timeouts": 0,
        }
        self.rng_inspect = self.engine.stream("inspection")

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        home = self.islands[self.robot.home_island]
        home.docking_station.occupancy = DockOccupancy.ROBOT_DOCKED
        self.robot.pose = AtDock(home.id)
        self.robot.safety_membership = home.safety_loop_id
        self.sim.safety_mgr.join(home.safety_loop_id, 0)
        rel = self.cfg.releases
        for k in range(rel.count):
            at = round((rel.start_s + k * rel.interval_s) * NS_PER_S)
            if at > self.sim.horizon_ns:
                break
            self.engine.schedule_at(
                at, lambda k=k: self._release(f"product{k + 1}", rel.island),
                module="factory",
            )
        self._refresh_registry()
        self.engine.schedule_at(self.tick_ns, self._tick, module="factory")

    def _release(self, product_id: str, island: str) -> None:
        product = Product(id=product_id, order_config=list(self.cfg.recipe))
        run = _ProductRun(product, island, self.engine.now)
        self.products.append(run)
        self.stats["released"] += 1
        self._log(run, "released", island)
        self._advance(run)

    def _log(self, run: _ProductRun, event: str, detail: str = "") -> None:
        self.sim.product_log.append(
            ProductEvent(run.product.id, event, self.engine.now, detail)
        )

    # -- controller tick -----------------------------------------------------

    def _tick(self) -> None:
        self._refresh_registry()
        for run in self.products:
            if run.state == "waiting":
                self._advance(run)
        self._dispatch_robot()
        self._serve_manual()
        nxt = self.engine.now + self.tick_ns
        if nxt <= self.sim.horizon_ns:
            self.engine.schedule_at(nxt, self._tick, module="factory")

    def _refresh_registry(self) -> None:
        now = self.engine.now
        for m in self.modules.values():
            self.registry.publish(
                m.id,
                "module",
                {
                    "state": m.state.value,
                    "capability": m.capability,
                    "carrier": m.carrier,
                    "island": m.island_id,
                    "upstream_gate": m.upstream_gate.value,
                    "downstream_gate": m.downstream_gate.value,
                },
                now,
            )
        for d in self.docks.values():
            self.registry.publish(
                d.id,
                "dock",
                {
                    "occupancy": d.occupancy.value,
                    "island": d.island_id,
                    "robot_carrier": (
                        self.robot.carrier.id
                        if self.robot.carrier
                        and isinstance(self.robot.pose, AtDock)
                        and self.robot.pose.island_id == d.island_id
                        else None
                    ),
                },
                now,
            )
        if self.cfg.manual_station:
            self.registry.publish(
                MANUAL_STATION,
                "manual",
                {"state": "busy" if self.manual_busy else "idle"},
                now,
            )

    # -- product advancement ---------------------------------------------------

    def _advance(self, run: _ProductRun) -> None:
        if run.state != "waiting":
            return
        product = run.product
        if product.next_step() is None and not product.needs_rework:
            run.state = "done"
            run.completed_at = self.engine.now
            self.stats["completed"] += 1
            self._log(run, "completed", run.island)
            return
        island = self.islands.get(run.island)
        if island is not None:
            loop = self.sim.safety_mgr.loops[island.safety_loop_id]
            if loop.state is LoopState.SAFE_STOP:
                return  # island halted; wait for reset
        try:
            plan = plan_route(
                product,
                list(self.islands.values()),
                self.robot,
                self.cfg.transit_s,
                run.island,
                manual_available=self.cfg.manual_station,
            )
        except factory_mod.NoRouteAvailable:
            self._log(run, "no_route", "")
            return
        if plan.needs_robot:
            if not run.pending_robot:
                run.pending_robot = True
                self.jobs.append(_RobotJob(run, plan.target_island))
            return
        if plan.target == MANUAL_STATION:
            # already at the station and nothing else can take the next
            # step: the operator substitutes for the missing module
            if run not in self.manual_queue:
                run.state = "manual"
                self.manual_queue.append(run)
                self._serve_manual()
            return
        module = self.modules[plan.target]
        grant = handshake_grant(
            self.registry, product, run.location, module.id, self.engine.now
        )
        if isinstance(grant, Denied):
            return  # retry next tick
        self._begin_conveyor(run, module)

    def _begin_conveyor(self, run: _ProductRun, module: StationModule) -> None:
        assert module.carrier is None, "single-occupancy violated"
        origin = run.location
        if origin in self.modules:
            self.modules[origin].carrier = None
            self.modules[origin].downstream_gate = GateState.OPEN
        module.upstream_gate = GateState.OPEN
        module.carrier = run.product.id
        run.state = "moving"
        self._log(run, "transfer_start", f"{origin}->{module.id}")

        def arrive() -> None:
            if origin in self.modules:
                self.modules[origin].downstream_gate = GateState.CLOSED
            module.upstream_gate = GateState.CLOSED
            run.location = module.id
            self._begin_service(run, module)

        self._island_timer(
            module.island_id, round(self.cfg.conveyor_s * NS_PER_S), arrive
        )

    def _begin_service(self, run: _ProductRun, module: StationModule) -> None:
        module.state = ModuleState.BUSY
        run.state = "in_service"
        nxt = run.product.next_step()
        assert nxt is not None
        step_index, step = nxt

        def done() -> None:
            run.product.memory.record_completion(
                step_index, step, module.id, self.engine.now
            )
            module.state = ModuleState.IDLE
            run.state = "waiting"
            self._log(run, "step_done", f"{step}@{module.id}")
            self._advance(run)

        self._island_timer(
            module.island_id,
            round(self.cfg.service_time_s(module.capability) * NS_PER_S),
            done,
        )

    # -- manual workstation ------------------------------------------------------

    def _serve_manual(self) -> None:
        if self.manual_busy or not self.manual_queue:
            return
        run = self.manual_queue.popleft()
        self.manual_busy = True
        product = run.product
        if product.needs_rework:
            flag = product.memory.latest_flag()

            def reworked() -> None:
                product.memory.record_quality(
                    QualityFlag(
                        flag.step_index, flag.step, Verdict.PASS, self.engine.now
                    )
                )
                self._log(run, "rework_done", flag.step or "")
                self.manual_busy = False
                run.state = "waiting"
                self._advance(run)

            self._manual_timer(
                round(self.cfg.manual_rework_s * NS_PER_S), reworked
            )
            return
        nxt = product.next_step()
        if nxt is None:
            self.manual_busy = False
            run.state = "waiting"
            self._advance(run)
            return
        step_index, step = nxt

        def served() -> None:
            product.memory.record_completion(
                step_index, step, MANUAL_STATION, self.engine.now
            )
            self._log(run, "step_done", f"{step}@{MANUAL_STATION}")
            self.manual_busy = False
            run.state = "waiting"
            self._advance(run)

        self._manual_timer(round(self.cfg.manual_service_s * NS_PER_S), served)

    # -- robot -------------------------------------------------------------------

    def _dispatch_robot(self) -> None:
        if self.robot_busy or self.local_safety.state is not LocalSafetyState.CLEAR:
            return
        if self._docked_island_stopped():
            return
        if not self.jobs:
            # Reposition to the home dock only once the line has drained, so
            # the robot stays with an in-progress product's island otherwise.
            if (
                self.cfg.robot_return_home
                and self.robot.carrier is None
                and self.products
                and all(r.state == "done" for r in self.products)
            ):
                pose = self.robot.pose
                at_home = (
                    isinstance(pose, AtDock)
                    and pose.island_id == self.robot.home_island
                )
                if not at_home:
                    if self.hover_island == self.robot.home_island:
                        self._try_dock(self.robot.home_island)
                    else:
                        self._start_goto(self.robot.home_island)
            return
        job = self.jobs[0]
        if job.phase == "deliver":
            # carrier aboard; docking at the destination was refused earlier
            if self.hover_island == job.destination:
                self._try_dock(job.destination, then=lambda: self._unload(job))
            return
        src = job.product_run.island
        if src == MANUAL_STATION:
            if isinstance(self.robot.pose, AtManualStation):
                self._load_at_manual(job)
            else:
                self._start_goto(MANUAL_STATION)
            return
        if isinstance(self.robot.pose, AtDock) and self.robot.pose.island_id == src:
            if job.product_run.state == "waiting":
                self._start_load(job)
            return
        if self.hover_island == src:
            self._try_dock(src)
            return
        self._start_goto(src)

    def _docked_island_stopped(self) -> bool:
        if not isinstance(self.robot.pose, AtDock):
            return False
        island = self.islands[self.robot.pose.island_id]
        return (
            self.sim.safety_mgr.loops[island.safety_loop_id].state
            is LoopState.SAFE_STOP
        )

    def _current_node(self) -> str:
        pose = self.robot.pose
        if isinstance(pose, AtDock):
            return pose.island_id
        if isinstance(pose, AtManualStation):
            return MANUAL_STATION
        if self.hover_island is not None:
            return self.hover_island
        return self.robot.home_island

    def _start_goto(self, dest: str) -> None:
        self.robot_busy = True
        origin = self._current_node()

        def depart() -> None:
            self.robot.pose = InTransit(origin, dest)
            self.hover_island = None
            duration = round(self.cfg.transit_s[origin][dest] * NS_PER_S)

            def arrive() -> None:
                if dest == MANUAL_STATION:
                    self.robot.pose = AtManualStation()
                    self.robot_busy = False
                else:
                    self.hover_island = dest
                    self._try_dock(dest)

            self._robot_timer(duration, arrive)

        if isinstance(self.robot.pose, AtDock):
            station = self.islands[self.robot.pose.island_id].docking_station
            self._robot_timer(
                round(self.cfg.dock_s * NS_PER_S),
                lambda: (
                    undock(self.robot, station, self.sim.safety_mgr, self.engine.now),
                    depart(),
                ),
            )
        else:
            depart()

    def _try_dock(self, island_id: str, then=None) -> None:
        self.robot_busy = True

        def attempt() -> None:
            island = self.islands[island_id]
            try:
                dock(
                    self.robot,
                    island.docking_station,
                    island,
                    self.sim.safety_mgr,
                    self.engine.now,
                )
            except DockRefused:
                self.robot_busy = False  # retry on a later tick
                return
            self.hover_island = None
            if then is not None:
                then()
            else:
                self.robot_busy = False

        self._robot_timer(round(self.cfg.dock_s * NS_PER_S), attempt)

    def _start_load(self, job: _RobotJob) -> None:
        run = job.product_run
        island = self.islands[run.island]
        dock_id = island.docking_station.id
        grant = handshake_grant(
            self.registry, run.product, run.location, dock_id, self.engine.now
        )
        if isinstance(grant, Denied):
            return  # retry next tick
        self.robot_busy = True
        origin = run.location
        if origin in self.modules:
            self.modules[origin].carrier = None
            self.modules[origin].downstream_gate = GateState.OPEN
        run.state = "moving"
        self._log(run, "transfer_start", f"{origin}->{dock_id}")

        def at_dock() -> None:
            if origin in self.modules:
                self.modules[origin].downstream_gate = GateState.CLOSED
            run.location = dock_id

            def loaded() -> None:
                self.robot.carrier = run.product
                run.location = "robot"
                run.state = "on_robot"
                self._depart_with_carrier(job)

            self._robot_timer(round(self.cfg.load_s * NS_PER_S), loaded)

        self._island_timer(
            island.id, round(self.cfg.conveyor_s * NS_PER_S), at_dock
        )

    def _load_at_manual(self, job: _RobotJob) -> None:
        run = job.product_run
        if run.state != "waiting":
            return
        self.robot_busy = True
        run.state = "moving"

        def loaded() -> None:
            self.robot.carrier = run.product
            run.location = "robot"
            run.state = "on_robot"
            self._depart_with_carrier(job)

        self._robot_timer(round(self.cfg.load_s * NS_PER_S), loaded)

    def _depart_with_carrier(self, job: _RobotJob) -> None:
        origin = self._current_node()

        def depart() -> None:
            self._begin_transit(job, origin, job.destination, inspect=True)

        if isinstance(self.robot.pose, AtDock):
            station = self.islands[self.robot.pose.island_id].docking_station
            self._robot_timer(
                round(self.cfg.dock_s * NS_PER_S),
                lambda: (
                    undock(self.robot, station, self.sim.safety_mgr, self.engine.now),
                    depart(),
                ),
            )
        else:
            depart()

    def _begin_transit(
        self, job: _RobotJob, origin: str, dest: str, inspect: bool
    ) -> None:
        run = job.product_run
        self.robot.pose = InTransit(origin, dest)
        self.hover_island = None
        duration = round(self.cfg.transit_s[origin][dest] * NS_PER_S)
        self._log(run, "leg_start", f"{origin}->{dest}")

        # The carried product is photographed at departure; legs that already
        # divert to the manual station are not re-inspected.
        verdict_on_arrival = None
        if inspect and dest != MANUAL_STATION and self.cfg.image_bytes > 0:
            outcome = inspect_in_transit(
                self.robot,
                run.product,
                self.sim.link_model,
                self.sim.link_config,
                self.rng_inspect,
                self.engine.now,
                duration,
                self.cfg.image_bytes,
                round(self.cfg.inference_ms * NS_PER_MS),
                self.cfg.defect_probability,
            )
            self.stats["inspections"] += 1
            nxt = run.product.next_step()
            inspected_index = (nxt[0] - 1) if nxt else len(run.product.order_config) - 1
            inspected_step = (
                run.product.order_config[inspected_index]
                if inspected_index >= 0
                else None
            )
            if outcome.timed_out:
                self.stats["inspection_timeouts"] += 1

                def record_timeout() -> None:
                    run.product.memory.record_quality(
                        QualityFlag(
                            inspected_index if inspected_index >= 0 else None,
                            inspected_step,
                            Verdict.PASS,
                            self.engine.now,
                            timed_out=True,
                        )
                    )
                    self._log(run, "verdict", "pass(timeout)")

                verdict_on_arrival = record_timeout
            else:
                if outcome.verdict is Verdict.FAIL:
                    self.stats["inspection_failures"] += 1

                def record_verdict(v=outcome.verdict) -> None:
                    run.product.memory.record_quality(
                        QualityFlag(
                            inspected_index if inspected_index >= 0 else None,
                            inspected_step,
                            v,
                            self.engine.now,
                        )
                    )
                    self._log(run, "verdict", v.value)

                self.engine.schedule_after(
                    outcome.cloud_rtt_ns, record_verdict, module="factory"
                )

        def arrive() -> None:
            if verdict_on_arrival is not None:
                verdict_on_arrival()
            self._log(run, "leg_end", dest)
            if dest != MANUAL_STATION and run.product.needs_rework:
                # late-breaking Fail verdict: divert instead of unloading
                self._begin_transit(job, dest, MANUAL_STATION, inspect=False)
                job.destination = MANUAL_STATION
                return
            if dest == MANUAL_STATION:
                self.robot.pose = AtManualStation()
                self._unload_at_manual(job)
            else:
                self.hover_island = dest
                job.phase = "deliver"
                self._try_dock(dest, then=lambda: self._unload(job))

        self._robot_timer(duration, arrive)

    def _unload(self, job: _RobotJob) -> None:
        run = job.product_run
        dest = job.destination
        dock_id = self.islands[dest].docking_station.id

        def unloaded() -> None:
            self.robot.carrier = None
            run.location = dock_id
            run.island = dest
            run.state = "waiting"
            run.pending_robot = False
            self.jobs.popleft()
            self.robot_busy = False
            self._advance(run)

        self._robot_timer(round(self.cfg.load_s * NS_PER_S), unloaded)

    def _unload_at_manual(self, job: _RobotJob) -> None:
        run = job.product_run

        def unloaded() -> None:
            self.robot.carrier = None
            run.location = MANUAL_STATION
            run.island = MANUAL_STATION
            run.state = "manual"
            run.pending_robot = False
            self.manual_queue.append(run)
            self.stats["manual_visits"] += 1
            self._log(run, "manual_arrival", "")
            self.jobs.popleft()
            self.robot_busy = False
            self._serve_manual()

        self._robot_timer(round(self.cfg.load_s * NS_PER_S), unloaded)

    # -- timers and safety coupling ------------------------------------------------

    def _island_timer(self, island_id: str, delay: SimTime, action) -> PausableTimer:
        timers = self._island_timers[island_id]
        timer_ref: list[PausableTimer] = []

        def fire() -> None:
            timers.discard(timer_ref[0])
            action()

        timer = PausableTimer(self.engine, delay, fire, module="factory")
        timer_ref.append(timer)
        timers.add(timer)
        if (
            self.sim.safety_mgr.loops[self.islands[island_id].safety_loop_id].state
            is LoopState.SAFE_STOP
        ):
            timer.pause()
        return timer

    def _robot_timer(self, delay: SimTime, action) -> PausableTimer:
        timer_ref: list[PausableTimer] = []

        def fire() -> None:
            self._robot_timers.discard(timer_ref[0])
            action()

        timer = PausableTimer(self.engine, delay, fire, module="factory")
        timer_ref.append(timer)
        self._robot_timers.add(timer)
        if self._robot_should_pause():
            timer.pause()
        return timer

    def _manual_timer(self, delay: SimTime, action) -> PausableTimer:
        timer_ref: list[PausableTimer] = []

        def fire() -> None:
            self._manual_timers.discard(timer_ref[0])
            action()

        timer = PausableTimer(self.engine, delay, fire, module="factory")
        timer_ref.append(timer)
        self._manual_timers.add(timer)
        return timer

    def _robot_should_pause(self) -> bool:
        if self.local_safety.state is not LocalSafetyState.CLEAR:
            return True
        return self._docked_island_stopped()

    def update_robot_pause(self) -> None:
        if self._robot_should_pause():
            for t in self._robot_timers:
                t.pause()
        else:
            for t in self._robot_timers:
                t.resume()

    def halt_island(self, loop: SafetyLoop) -> None:
        for t in self._island_timers[loop.island_id]:
            t.pause()
        self.update_robot_pause()

    def resume_island(self, loop: SafetyLoop) -> None:
        for t in self._island_timers[loop.island_id]:
            t.resume()
        self.update_robot_pause()

    def apply_sensor(self, sensor: SensorKind, detected: bool) -> None:
        before = self.local_safety.state
        after = local_guard(self.local_safety, sensor, detected)
        if after is not before:
            self.sim.safety_mgr.log.append(
                safety_mod.LoopTransition(
                    self.engine.now, "robot_local", after.value, sensor.value
                )
            )
        self.update_robot_pause()

    def reset_local_safety(self) -> None:
        before = self.local_safety.state
        after = reset_local(self.local_safety)
        if after is not before:
            self.sim.safety_mgr.log.append(
                safety_mod.LoopTransition(
                    self.engine.now, "robot_local", after.value, "manual_reset"
                )
            )
        self.update_robot_pause()

    def force_robot_stop(self) -> None:
        self.local_safety.state = LocalSafetyState.EMERGENCY_STOP
        self.local_safety.latched = True
        self.update_robot_pause()


# -- simulation assembly ---------------------------------------------------------


class Simulation:
    """Builds every runtime from a scenario and runs it to the horizon."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.engine = Engine(seed=scenario.seed)
        self.horizon_ns = scenario.horizon_ns
        self.link_model = scenario.radio.link_model()
        self.link_config = scenario.radio.link_config()
        self.wired_latency_ns = round(scenario.radio.wired_latency_us * NS_PER_US)
        self.jitter_ns = round(scenario.radio.jitter_us * NS_PER_US)
        self.jitter_rng = self.engine.stream("jitter")
        self.link_up = True
        self._bler = None
        self.records: list[PacketRecord] = []
        self.product_log: list[ProductEvent] = []
        self.profiles = scenario.traffic.profiles()
        self.stream_order = [p.name for p in self.profiles]

        self.plant: PlantRuntime | None = None
        if scenario.factory.enabled:
            self.plant = PlantRuntime(self)

        self.safety_mgr = SafetyManager(
            loops=self.plant.loops if self.plant else [],
            on_safe_stop=(
                (lambda loop: self.plant.halt_island(loop)) if self.plant else None
            ),
            on_resume=(
                (lambda loop: self.plant.resume_island(loop)) if self.plant else None
            ),
            on_robot_stop=(
                (lambda: self.plant.force_robot_stop()) if self.plant else None
            ),
        )

        self.channel: SafetyChannel | None = None
        channel_streams: set[str] = set()
        if scenario.safety.enabled:
            cfg = self._channel_config()
            channel_streams = {cfg.stream_up, cfg.stream_down}
            self.channel = SafetyChannel(
                engine=self.engine,
                link_model=self.link_model,
                link_config=self.link_config,
                config=cfg,
                rng=self.engine.stream("link.safety"),
                records=self.records,
                on_trip=self._on_watchdog_trip,
                transmit_ok=self.transmit_ok,
            )
        self.streams = [
            _StreamRuntime(self, p)
            for p in self.profiles
            if p.name not in channel_streams
        ]

    def _channel_config(self) -> SafetyChannelConfig:
        s = self.scenario.safety
        cfg = SafetyChannelConfig(
            cycle_hz=s.cycle_hz,
            watchdog_ns=round(s.watchdog_ms * NS_PER_MS),
            pdu_bytes_up=s.pdu_bytes_up,
            pdu_bytes_down=s.pdu_bytes_down,
            retry_at_tti=s.retry_at_tti,
        )
        # Bind to the catalog's cyclic safety streams when they exist so PDU
        # sizes, rate and stream names stay single-sourced.
        by_name = {p.name: p for p in self.profiles}
        up = by_name.get(cfg.stream_up)
        down = by_name.get(cfg.stream_down)
        if up and down:
            cfg = SafetyChannelConfig(
                cycle_hz=up.rate_hz,
                watchdog_ns=cfg.watchdog_ns,
                pdu_bytes_up=up.payload_bytes,
                pdu_bytes_down=down.payload_bytes,
                retry_at_tti=cfg.retry_at_tti,
                stream_up=up.name,
                stream_down=down.name,
            )
        return cfg

    def transmit_ok(self, rng) -> bool:
        """Bernoulli delivery draw against the configured BLER, overridden by
        a scripted full outage."""
        if not self.link_up:
            return False
        if self._bler is None:
            self._bler = self.link_model.bler(self.link_config)
        if self._bler <= 0.0:
            return True
        return rng.random() >= self._bler

    def _on_watchdog_trip(self, now: SimTime, missed: int) -> None:
        loop = None
        if self.safety_mgr.robot_membership is not None:
            loop = self.safety_mgr.loops[self.safety_mgr.robot_membership]
        watchdog_trip(self.safety_mgr, loop, "watchdog", now, missed)

    # -- scenario script -----------------------------------------------------------

    def _schedule_script(self) -> None:
        for action in self.scenario.script:
            at = round(action.at_s * NS_PER_S)
            self.engine.schedule_at(
                at,
                lambda a=action: self._run_action(a),
                module="script",
                lane=LANE_SAFETY,
            )

    def _run_action(self, action) -> None:
        now = self.engine.now
        if action.action == "estop":
            self.safety_mgr.estop(action.endpoint, now)
        elif action.action == "reset":
            loop_id = action.loop
            if loop_id in self.safety_mgr.loops:
                self.safety_mgr.reset(loop_id, now)
            if self.channel:
                self.channel.rearm(now)
        elif action.action == "obstacle":
            if self.plant:
                self.plant.apply_sensor(SensorKind(action.sensor), True)
        elif action.action == "clear":
            if self.plant:
                self.plant.apply_sensor(SensorKind(action.sensor), False)
        elif action.action == "reset_local":
            if self.plant:
                self.plant.reset_local_safety()
        elif action.action == "link_down":
            self.link_up = False
        elif action.action == "link_up":
            self.link_up = True
        elif action.action == "module_fault":
            if self.plant and action.endpoint in self.plant.modules:
                self.plant.modules[action.endpoint].state = ModuleState.FAULT
        elif action.action == "module_clear":
            if self.plant and action.endpoint in self.plant.modules:
                self.plant.modules[action.endpoint].state = ModuleState.IDLE

    # -- run --------------------------------------------------------------------------

    def run(self) -> RunResult:
        if self.plant:
            self.plant.start()
        if self.channel:
            self.channel.start(self.horizon_ns)
        for stream in self.streams:
            stream.start()
        self._schedule_script()
        summary = self.engine.run_until(self.horizon_ns)
        return self._collect(summary)

    def _collect(self, summary: SimSummary) -> RunResult:
        comp = self.scenario.compliance
        survival_ns = round(comp.survival_time_ms * NS_PER_MS)
        by_stream: dict[str, list[PacketRecord]] = {
            name: [] for name in self.stream_order
        }
        for record in self.records:
            by_stream.setdefault(record.stream, []).append(record)
        # channel-driven streams outside the catalog appear here too, in
        # order of first record
        self.stream_order = list(by_stream)
        stream_metrics = {
            name: compliance_mod.collect_stream_metrics(
                name, recs, self.horizon_ns, survival_ns, comp.jitter_definition
            )
            for name, recs in by_stream.items()
        }
        aggregate = compliance_mod.aggregate_metrics(
            self.records, self.horizon_ns, survival_ns, comp.jitter_definition
        )
        report = ComplianceReport(
            jitter_definition=comp.jitter_definition,
            service_area_m=comp.service_area_m,
        )
        floor = comp.availability_sample_floor
        for name in self.stream_order:
            metrics = stream_metrics[name]
            if metrics.stream_class is StreamClass.SAFETY_RELEVANT:
                report.add(metrics, compliance_mod.ASPECT1, sample_floor=floor)
        report.add(aggregate, compliance_mod.ASPECT2, sample_floor=floor)

        factory_stats = dict(self.plant.stats) if self.plant else {}
        factory_stats["safety_trips"] = sum(
            1
            for t in self.safety_mgr.log
            if t.transition in ("safe_stop", "watchdog_trip")
        )
        return RunResult(
            scenario=self.scenario,
            summary=summary,
            records=self.records,
            stream_order=self.stream_order,
            safety_log=self.safety_mgr.log,
            product_log=self.product_log,
            stream_metrics=stream_metrics,
            aggregate=aggregate,
            compliance=report,
            factory_stats=factory_stats,
        )
