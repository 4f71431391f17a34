"""Two-clock co-simulation kernel.

Physics advances in fixed steps. Network events live in a priority queue and
only execute once physics time has caught up with their timestamp, so the
network side never runs ahead of the vehicles. Time is kept as integer
microseconds to make runs bit-reproducible.

Per step, in order:

1. snapshot every vehicle (true state, plus the reported state seen by
   sensors and the radio)
2. advance each plant one step using the command computed in the previous step
3. run CAM generation checks on the new states (or forward states directly
   on the ideal channel)
4. execute due network events, passing CAMs through the platoon filter
5. run the controllers on their freshest accepted predecessor data
6. append trace rows
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import comms
from .comms import CaServiceState, CamMessage, ChannelModel
from .controller import (
    ControllerConfig,
    ControllerState,
    LeaderSnapshot,
    body_frame,
    controller_step,
    tracking_error,
)
from .dynamics import (
    AckermannCommand,
    VehicleParams,
    VehicleState,
    bicycle_step,
    unicycle_step,
    yaw_rate_to_steering,
)
from .errors import ArgumentError, CausalityError, DomainError, PlatoonSimError, SimulationError

US_PER_S = 1_000_000

PLANTS = ("unicycle", "bicycle")
CHANNELS = ("ideal", "itsg5")


def to_us(t: float) -> int:
    return int(round(t * US_PER_S))


def to_s(t_us: int) -> float:
    return t_us / US_PER_S


class EventKind(enum.Enum):
    CAM_DELIVERY = "CamDelivery"
    CAM_GENERATION_CHECK = "CamGenerationCheck"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SimEvent:
    time_us: int
    seq: int
    target: int
    kind: EventKind
    payload: Any = None

    @property
    def time(self) -> float:
        return to_s(self.time_us)


class EventQueue:
    """Min-heap of events ordered by ``(time, seq)``.

    ``seq`` is assigned on insertion, so events sharing a timestamp come out
    in insertion order.
    """

    def __init__(self):
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)

    def push(self, time_us: int, target: int, kind: EventKind, payload=None) -> SimEvent:
        ev = SimEvent(time_us, self._next_seq, target, kind, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (ev.time_us, ev.seq, ev))
        return ev

    def peek(self) -> Optional[SimEvent]:
        return self._heap[0][2] if self._heap else None

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]


@dataclass
class SimClock:
    dt: float
    step_count: int = 0
    dt_us: int = field(init=False)

    def __post_init__(self):
        if not math.isfinite(self.dt) or self.dt <= 0:
            raise ArgumentError(f"dt must be > 0, got {self.dt}")
        self.dt_us = to_us(self.dt)
        if self.dt_us == 0 or abs(self.dt_us - self.dt * US_PER_S) > 1e-6:
            raise ArgumentError(f"dt must be a whole number of microseconds, got {self.dt}")

    @property
    def now_us(self) -> int:
        return self.step_count * self.dt_us

    @property
    def physics_time(self) -> float:
        return to_s(self.now_us)


def schedule(queue: EventQueue, now_us: int, time_us: int, target: int,
             kind: EventKind = EventKind.CUSTOM, payload=None) -> SimEvent:
    """Enqueue an event, refusing anything earlier than ``now_us``."""
    if time_us < now_us:
        raise CausalityError(f"event at {to_s(time_us)} s is before current time {to_s(now_us)} s")
    return queue.push(time_us, target, kind, payload)


def drain_due(queue: EventQueue, now_us: int) -> list[SimEvent]:
    """Pop every event with time <= ``now_us``, in queue order."""
    out = []
    while queue and queue.peek().time_us <= now_us:
        out.append(queue.pop())
    return out


@dataclass
class CommModule:
    """Per-vehicle CA service plus its private channel random stream."""

    vid: int
    service: CaServiceState
    rng: np.random.Generator


@dataclass(frozen=True)
class ModuleDefaults:
    ca_service: CaServiceState = field(default_factory=CaServiceState)
    channel: ChannelModel = field(default_factory=ChannelModel)


class ModuleRegistry(dict):
    """Vehicle id -> :class:`CommModule`; at most one module per id."""


def ensure_module(registry: ModuleRegistry, vehicle_id: int, defaults: ModuleDefaults) -> CommModule:
    """Return the module for ``vehicle_id``, spawning it on first use."""
    if vehicle_id < 1:
        raise ArgumentError(f"vehicle id must be >= 1, got {vehicle_id}")
    mod = registry.get(vehicle_id)
    if mod is None:
        tmpl = defaults.ca_service
        svc = CaServiceState(
            t_gen_min=tmpl.t_gen_min,
            t_gen_max=tmpl.t_gen_max,
            d_pos_thresh=tmpl.d_pos_thresh,
            d_speed_thresh=tmpl.d_speed_thresh,
            d_heading_thresh=tmpl.d_heading_thresh,
        )
        rng = np.random.default_rng([defaults.channel.rng_seed or 0, vehicle_id])
        mod = CommModule(vehicle_id, svc, rng)
        registry[vehicle_id] = mod
    return mod


@dataclass
class Agent:
    """One vehicle in the world. Vehicle 1 is the platoon leader."""

    vid: int
    state: VehicleState
    params: VehicleParams = field(default_factory=VehicleParams)
    command: AckermannCommand = field(default_factory=lambda: AckermannCommand(0.0, 0.0))
    # acceleration / yaw rate handed to the unicycle plant
    accel_cmd: float = 0.0
    yaw_rate_cmd: float = 0.0
    ctrl_cfg: Optional[ControllerConfig] = None
    ctrl: Optional[ControllerState] = None
    inbox: Optional[LeaderSnapshot] = None
    latest_gen_time: Optional[float] = None

    @property
    def is_leader(self) -> bool:
        return self.vid == 1


@dataclass
class CamRecord:
    msg: CamMessage
    source_v: float
    rx_time_us: Optional[int]

    @property
    def dropped(self) -> bool:
        return self.rx_time_us is None


@dataclass
class Counters:
    generated: int = 0
    dropped: int = 0
    receptions: int = 0
    accepted: int = 0
    rejected: int = 0


LeaderInput = Callable[[float], "tuple[float, float]"]
Observer = Callable[[VehicleState, int], VehicleState]


def _standstill(t: float) -> tuple[float, float]:
    return 0.0, 0.0


def _exact(state: VehicleState, vid: int) -> VehicleState:
    return state


class World:
    """All state of one co-simulation run.

    ``leader_input(t)`` gives the leader's (speed, yaw rate) target at time
    ``t``. ``observe(state, vid)`` maps a true state to the one reported by
    that vehicle's localization; identity by default.
    """

    def __init__(
        self,
        agents: list[Agent],
        dt: float,
        plant: str = "unicycle",
        channel: str = "ideal",
        leader_input: Optional[LeaderInput] = None,
        observe: Optional[Observer] = None,
        module_defaults: Optional[ModuleDefaults] = None,
        record_trace: bool = True,
    ):
        if plant not in PLANTS:
            raise ArgumentError(f"plant must be one of {PLANTS}, got {plant!r}")
        if channel not in CHANNELS:
            raise ArgumentError(f"channel must be one of {CHANNELS}, got {channel!r}")
        ids = [a.vid for a in agents]
        if ids != list(range(1, len(agents) + 1)):
            raise ArgumentError(f"agents must be numbered 1..n in order, got {ids}")
        for a in agents[1:]:
            if a.ctrl_cfg is None:
                raise ArgumentError(f"follower {a.vid} has no controller config")
            if a.ctrl is None:
                a.ctrl = ControllerState()
        self.agents = agents
        self.clock = SimClock(dt)
        self.plant = plant
        self.channel = channel
        self.leader_input = leader_input or _standstill
        self.observe = observe or _exact
        self.defaults = module_defaults or ModuleDefaults()
        self.queue = EventQueue()
        self.registry = ModuleRegistry()
        self.counters = Counters()
        self.record_trace = record_trace

        self.trace: list[tuple] = []
        self.cam_records: list[CamRecord] = []
        self.event_trace: list[tuple] = []
        # (t, true leader v, v last received by vehicle 2 or None, fresh this step)
        self.received: list[tuple] = []
        self.arrivals: dict[int, list[int]] = {a.vid: [] for a in agents[1:]}
        self.snapshot: list[VehicleState] = [a.state for a in agents]
        self.reported: list[VehicleState] = list(self.snapshot)

        self._command_leader(0)

    @property
    def physics_time(self) -> float:
        return self.clock.physics_time

    @property
    def dt(self) -> float:
        return self.clock.dt

    # -- step phases -------------------------------------------------------

    def _command_leader(self, now_us: int) -> None:
        leader = self.agents[0]
        dt = self.clock.dt
        v_next, _ = self.leader_input(to_s(now_us + self.clock.dt_us))
        _, omega = self.leader_input(to_s(now_us))
        if not (math.isfinite(v_next) and math.isfinite(omega)):
            raise DomainError(f"leader input not finite at t={to_s(now_us)}: v={v_next}, omega={omega}")
        v_next = max(0.0, v_next)
        leader.accel_cmd = (v_next - leader.state.v) / dt
        leader.yaw_rate_cmd = omega
        leader.command = AckermannCommand(
            v_next, yaw_rate_to_steering(omega, v_next, leader.params.wheelbase_d)
        )

    def _advance_plant(self, agent: Agent) -> None:
        dt = self.clock.dt
        if self.plant == "bicycle":
            agent.state = bicycle_step(agent.state, agent.command, agent.params, dt)
        else:
            agent.state = unicycle_step(
                agent.state, agent.accel_cmd, agent.yaw_rate_cmd, dt, agent.params
            )

    def _generate(self, now_us: int) -> None:
        now = to_s(now_us)
        if self.channel == "ideal":
            for agent in self.agents[1:]:
                pred = self.reported[agent.vid - 2]
                agent.inbox = LeaderSnapshot.from_state(pred, now)
                agent.latest_gen_time = now
                self.arrivals[agent.vid].append(now_us)
                self.counters.generated += 1
                self.counters.receptions += 1
                self.counters.accepted += 1
            return

        n = len(self.agents)
        for agent in self.agents:
            mod = ensure_module(self.registry, agent.vid, self.defaults)
            rep = self.reported[agent.vid - 1]
            if not comms.should_generate_cam(mod.service, rep, now):
                continue
            seq = mod.service.record_tx(rep, now)
            msg = comms.encode_cam(rep, agent.vid, seq, now)
            self.counters.generated += 1
            t_rx = comms.transmit(self.defaults.channel, msg, now, mod.rng)
            if t_rx is None:
                self.counters.dropped += 1
                self.cam_records.append(CamRecord(msg, rep.v, None))
                continue
            rx_us = max(to_us(t_rx), now_us)
            self.cam_records.append(CamRecord(msg, rep.v, rx_us))
            for target in range(1, n + 1):
                if target != agent.vid:
                    schedule(self.queue, now_us, rx_us, target, EventKind.CAM_DELIVERY, msg)

    def _deliver(self, now_us: int) -> None:
        for ev in drain_due(self.queue, now_us):
            self.event_trace.append(
                (ev.time_us, ev.seq, ev.target, ev.kind.value,
                 getattr(ev.payload, "station_id", None), getattr(ev.payload, "seq", None))
            )
            if ev.kind is not EventKind.CAM_DELIVERY:
                continue
            self.counters.receptions += 1
            agent = self.agents[ev.target - 1]
            msg: CamMessage = ev.payload
            if agent.is_leader or not comms.platoon_filter(msg, agent.vid, agent.latest_gen_time):
                self.counters.rejected += 1
                continue
            self.counters.accepted += 1
            agent.latest_gen_time = msg.gen_time
            agent.inbox = comms.decode_cam(msg)
            self.arrivals[agent.vid].append(now_us)

    def _control(self, now_us: int) -> None:
        self._command_leader(now_us)
        dt = self.clock.dt
        for agent in self.agents[1:]:
            own = self.reported[agent.vid - 1]
            cmd = controller_step(agent.ctrl, agent.inbox, own, agent.ctrl_cfg, dt)
            agent.command = cmd
            # unicycle plant: reach the integrated speed in one step, steer with the law's yaw rate
            agent.accel_cmd = (cmd.v - agent.state.v) / dt
            agent.yaw_rate_cmd = agent.ctrl.last_output.omega if cmd.v > 0 else 0.0

    def _log(self, now_us: int) -> None:
        t = to_s(now_us)
        leader_v = self.agents[0].state.v
        if len(self.agents) > 1:
            inbox = self.agents[1].inbox
            fresh = bool(self.arrivals[2]) and self.arrivals[2][-1] == now_us
            self.received.append((t, leader_v, inbox.v if inbox is not None else None, fresh))
        if not self.record_trace:
            return
        prev = None
        for agent in self.agents:
            s = agent.state
            e_long = e_lat = None
            if prev is not None:
                truth = LeaderSnapshot.from_state(prev, t)
                cfg = agent.ctrl_cfg
                e = tracking_error(truth, s, cfg.policy, extended=cfg.extended_lookahead)
                e_long, e_lat = body_frame(e, s.theta)
            self.trace.append(
                (t, agent.vid, s.x, s.y, s.theta, s.v, s.a, s.omega, s.delta, e_long, e_lat)
            )
            prev = s

    def step(self) -> None:
        """Advance the world by exactly one physics step."""
        k = self.clock.step_count
        try:
            self.snapshot = [a.state for a in self.agents]
            for agent in self.agents:
                self._advance_plant(agent)
            self.clock.step_count += 1
            now_us = self.clock.now_us
            self.reported = [self.observe(a.state, a.vid) for a in self.agents]
            self._generate(now_us)
            self._deliver(now_us)
            self._control(now_us)
            self._log(now_us)
        except PlatoonSimError as exc:
            raise SimulationError(k, exc) from exc
        except (ValueError, ArithmeticError) as exc:
            raise SimulationError(k, exc) from exc


def step(world: World) -> None:
    world.step()


def steps_for(t_end: float, dt: float) -> int:
    """Number of steps needed to reach ``t_end``: ceil(t_end / dt) on the microsecond grid."""
    if not math.isfinite(t_end) or t_end < 0:
        raise ArgumentError(f"t_end must be >= 0, got {t_end}")
    dt_us = to_us(dt)
    return -(-to_us(t_end) // dt_us)


def run_until(world: World, t_end: float) -> int:
    """Step until physics time reaches ``t_end``; returns the number of steps taken."""
    target = steps_for(t_end, world.dt)
    taken = 0
    while world.clock.step_count < target:
        world.step()
        taken += 1
    return taken
