"""Scenario assembly and the platoon experiments.

A :class:`ScenarioConfig` describes one run: the platoon, the plant model,
the channel, the leader's input profile and the localization noise. Two
presets mirror the evaluated setups: ``theoretical`` (unicycle vehicles,
ideal forwarding, stiff gains) and ``realistic`` (Ackermann vehicles,
ITS-G5 channel, softer gains, noisy localization).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .comms import CaServiceState, ChannelModel
from .controller import ControllerConfig, ControllerGains, SpacingPolicy
from .dynamics import DEFAULT_WHEELBASE, Pose, VehicleParams, VehicleState
from .errors import ArgumentError, ConfigError
from .kernel import CHANNELS, PLANTS, Agent, ModuleDefaults, World, run_until
from .metrics import MetricsReport, compute_metrics
from .trace import Trace


@dataclass(frozen=True)
class ProfileSegment:
    duration: float
    target_v: float
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class LeaderProfile:
    """Piecewise leader input.

    Speed ramps linearly from the previous segment's target over
    ``ramp_time`` seconds starting at each boundary; yaw rate switches
    immediately.
    """

    segments: tuple[ProfileSegment, ...]
    ramp_time: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise ArgumentError("leader profile needs at least one segment")
        for i, seg in enumerate(self.segments):
            if not (seg.duration > 0 and math.isfinite(seg.duration)):
                raise ArgumentError(f"segment {i}: duration must be > 0")
            if not (seg.target_v >= 0 and math.isfinite(seg.target_v)):
                raise ArgumentError(f"segment {i}: target_v must be >= 0")
            if not math.isfinite(seg.yaw_rate):
                raise ArgumentError(f"segment {i}: yaw_rate must be finite")
        if not (self.ramp_time >= 0 and math.isfinite(self.ramp_time)):
            raise ArgumentError("ramp_time must be >= 0")
        starts = np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])
        object.__setattr__(self, "_starts", starts)

    @property
    def total_duration(self) -> float:
        return float(self._starts[-1])

    def _index(self, t: float) -> int:
        i = int(np.searchsorted(self._starts, t, side="right")) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def __call__(self, t: float) -> tuple[float, float]:
        return leader_profile_eval(self, t)

    def steady_mask(self, t: np.ndarray, settle: float) -> np.ndarray:
        """True where the leader has held speed and yaw rate for ``settle`` s past the ramp."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, len(self.segments) - 1)
        seg_start = self._starts[idx]
        v = np.array([s.target_v for s in self.segments])[idx]
        return (t >= seg_start + self.ramp_time + settle) & (v > 0)


def leader_profile_eval(profile: LeaderProfile, t: float) -> tuple[float, float]:
    """Leader (speed, yaw rate) at time ``t``."""
    if t < 0:
        raise ArgumentError(f"t must be >= 0, got {t}")
    i = profile._index(t)
    seg = profile.segments[i]
    v = seg.target_v
    if i > 0 and profile.ramp_time > 0:
        since = t - profile._starts[i]
        if since < profile.ramp_time:
            v0 = profile.segments[i - 1].target_v
            v = v0 + (seg.target_v - v0) * since / profile.ramp_time
    return v, seg.yaw_rate


def mixed_profile(cruise_v: float, duration: float, yaw_rate: float = 0.2,
                  ramp_time: float = 2.0) -> LeaderProfile:
    """Start, cruise, left and right curve, cruise, stop; scaled to ``duration``."""
    if not (math.isfinite(duration) and duration > 0):
        raise ArgumentError(f"duration must be > 0, got {duration}")
    idle = min(2.0, 0.1 * duration)
    body = duration - idle
    segs = [
        ProfileSegment(idle, 0.0, 0.0),
        ProfileSegment(0.25 * body, cruise_v, 0.0),
        ProfileSegment(0.1 * body, cruise_v, yaw_rate),
        ProfileSegment(0.1 * body, cruise_v, -yaw_rate),
        ProfileSegment(0.25 * body, cruise_v, 0.0),
        ProfileSegment(0.3 * body, 0.0, 0.0),
    ]
    return LeaderProfile(tuple(segs), ramp_time)


def step_profile(v_before: float, v_after: float, t_step: float, duration: float) -> LeaderProfile:
    """Hold ``v_before`` from t = 1 s, then jump to ``v_after`` at ``t_step``."""
    return LeaderProfile((
        ProfileSegment(1.0, 0.0),
        ProfileSegment(t_step - 1.0, v_before),
        ProfileSegment(max(duration - t_step, 1.0), v_after),
    ))


@dataclass(frozen=True)
class NoiseModel:
    sigma_pos: float = 0.02
    sigma_v: float = 0.02
    sigma_heading: float = math.radians(0.5)
    enabled: bool = False

    def __post_init__(self):
        for name in ("sigma_pos", "sigma_v", "sigma_heading"):
            s = getattr(self, name)
            if not (math.isfinite(s) and s >= 0):
                raise ArgumentError(f"{name} must be >= 0, got {s}")


def apply_noise(state: VehicleState, noise: NoiseModel, rng: np.random.Generator) -> VehicleState:
    """Reported state: true state plus independent zero-mean Gaussian errors.

    The input state is not modified. Speed stays non-negative.
    """
    if not noise.enabled:
        return state
    if noise.sigma_pos == 0 and noise.sigma_v == 0 and noise.sigma_heading == 0:
        return state
    nx, ny, nv, nh = rng.standard_normal(4)
    pose = Pose(
        state.x + noise.sigma_pos * nx,
        state.y + noise.sigma_pos * ny,
        state.theta + noise.sigma_heading * nh,
    )
    return replace(state, pose=pose, v=max(0.0, state.v + noise.sigma_v * nv))


@dataclass(frozen=True)
class ScenarioConfig:
    n_vehicles: int = 4
    dt: float = 0.01
    duration: float = 60.0
    plant: str = "unicycle"
    channel: str = "ideal"
    channel_model: ChannelModel = field(default_factory=ChannelModel)
    ca_service: CaServiceState = field(default_factory=CaServiceState)
    # one entry per follower (vehicles 2..n)
    controller: tuple[ControllerConfig, ...] = ()
    leader_profile: Optional[LeaderProfile] = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    initial_spacing: Optional[float] = None
    wheelbase: float = DEFAULT_WHEELBASE
    steady_settle: float = 5.0

    def __post_init__(self):
        if not isinstance(self.n_vehicles, int) or self.n_vehicles < 2:
            raise ConfigError("n_vehicles must be >= 2", ("n_vehicles",))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be > 0", ("dt",))
        if abs(round(self.dt * 1e6) - self.dt * 1e6) > 1e-6:
            raise ConfigError("dt must be a whole number of microseconds", ("dt",))
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ConfigError("duration must be > 0", ("duration",))
        if self.plant not in PLANTS:
            raise ConfigError(f"plant must be one of {PLANTS}", ("plant",))
        if self.channel not in CHANNELS:
            raise ConfigError(f"channel must be one of {CHANNELS}", ("channel",))
        if self.initial_spacing is not None and not self.initial_spacing > 0:
            raise ConfigError("initial_spacing must be > 0", ("initial_spacing",))
        if self.wheelbase <= 0:
            raise ConfigError("wheelbase must be > 0", ("wheelbase",))
        ctrl = self.controller
        if not ctrl:
            ctrl = (ControllerConfig(params=VehicleParams(self.wheelbase)),)
        if len(ctrl) == 1:
            ctrl = tuple(ctrl) * (self.n_vehicles - 1)
        if len(ctrl) != self.n_vehicles - 1:
            raise ConfigError(
                f"need 1 or n_vehicles - 1 = {self.n_vehicles - 1} controller entries, got {len(ctrl)}",
                ("controller",),
            )
        object.__setattr__(self, "controller", tuple(ctrl))
        if self.leader_profile is None:
            object.__setattr__(self, "leader_profile", mixed_profile(3.0, self.duration))


def theoretical_config(**overrides) -> ScenarioConfig:
    """Unicycle vehicles, ideal forwarding, gains (3.5, 3.5), r = 1 m, h = 0.2 s."""
    duration = overrides.get("duration", 60.0)
    ctrl = ControllerConfig(ControllerGains(3.5, 3.5), SpacingPolicy(1.0, 0.2))
    base = dict(
        plant="unicycle",
        channel="ideal",
        controller=(ctrl,),
        leader_profile=mixed_profile(3.0, duration),
        noise=NoiseModel(enabled=False),
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def realistic_config(**overrides) -> ScenarioConfig:
    """Ackermann vehicles, ITS-G5 channel, gains (1.0, 1.0), h = 1.0 s, noisy localization."""
    duration = overrides.get("duration", 60.0)
    ctrl = ControllerConfig(ControllerGains(1.0, 1.0), SpacingPolicy(1.0, 1.0))
    base = dict(
        plant="bicycle",
        channel="itsg5",
        controller=(ctrl,),
        leader_profile=mixed_profile(1.0, duration),
        noise=NoiseModel(enabled=True),
    )
    base.update(overrides)
    return ScenarioConfig(**base)


PRESETS = {"theoretical": theoretical_config, "realistic": realistic_config}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trace: Trace
    world: World
    metrics: MetricsReport

    @property
    def cam_records(self):
        return self.world.cam_records

    @property
    def received(self):
        return self.world.received


class NoisyObserver:
    """Reported state per vehicle, each with its own Gaussian noise stream."""

    def __init__(self, noise: NoiseModel, seed: int, n_vehicles: int):
        self.noise = noise
        self.streams = {
            vid: np.random.default_rng([seed, 7919, vid]) for vid in range(1, n_vehicles + 1)
        }

    def __call__(self, state: VehicleState, vid: int) -> VehicleState:
        return apply_noise(state, self.noise, self.streams[vid])


def build_world(cfg: ScenarioConfig) -> World:
    """Place the platoon on the x axis, at rest, each follower ``initial_spacing`` behind."""
    agents = [Agent(1, VehicleState(), VehicleParams(cfg.wheelbase))]
    x = 0.0
    for vid, ctrl in enumerate(cfg.controller, start=2):
        x -= cfg.initial_spacing if cfg.initial_spacing is not None else ctrl.policy.r
        agents.append(
            Agent(vid, VehicleState(Pose(x, 0.0, 0.0)), ctrl.params, ctrl_cfg=ctrl)
        )
    channel = cfg.channel_model
    if channel.rng_seed is None:
        channel = replace(channel, rng_seed=cfg.seed)
    defaults = ModuleDefaults(ca_service=cfg.ca_service, channel=channel)
    return World(
        agents,
        cfg.dt,
        plant=cfg.plant,
        channel=cfg.channel,
        leader_input=cfg.leader_profile,
        observe=NoisyObserver(cfg.noise, cfg.seed, cfg.n_vehicles) if cfg.noise.enabled else None,
        module_defaults=defaults,
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Build the world, run it for ``cfg.duration`` and compute metrics."""
    world = build_world(cfg)
    run_until(world, cfg.duration)
    trace = Trace.from_rows(world.trace, cfg.n_vehicles)
    metrics = compute_metrics(trace, world, cfg)
    return ScenarioResult(cfg, trace, world, metrics)


def max_workers(default: Optional[int] = None) -> int:
    """Parallelism cap from ``PLATOON_SIM_THREADS`` (falls back to CPU count)."""
    raw = os.environ.get("PLATOON_SIM_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"PLATOON_SIM_THREADS must be an integer, got {raw!r}")
        return max(1, n)
    return default or os.cpu_count() or 1


def sweep(configs: Sequence[ScenarioConfig], workers: Optional[int] = None) -> list[ScenarioResult]:
    """Run independent scenarios, in parallel processes when allowed."""
    workers = min(max_workers() if workers is None else workers, len(configs))
    if workers <= 1:
        return [run_scenario(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, configs))


@dataclass
class ChannelComparison:
    ideal: ScenarioResult
    itsg5: ScenarioResult

    def received_rows(self) -> list[tuple]:
        """``(t, true_v, received_v, channel)`` rows for both runs."""
        rows = []
        for label, res in (("ideal", self.ideal), ("itsg5", self.itsg5)):
            for t, true_v, recv_v, _ in res.received:
                rows.append((t, true_v, recv_v, label))
        return rows


def compare_channels(cfg: ScenarioConfig, workers: Optional[int] = None) -> ChannelComparison:
    """Run ``cfg`` once per channel with everything else (seed included) identical."""
    ideal, itsg5 = sweep([replace(cfg, channel="ideal"), replace(cfg, channel="itsg5")], workers)
    return ChannelComparison(ideal, itsg5)
