"""Cooperative adaptive cruise control with extended look-ahead.

The follower steers a look-ahead point, placed ``r + h*v`` ahead of it along
its heading, onto a target derived from the predecessor's communicated state.
On a straight road the target is the predecessor position itself. While the
predecessor turns, the target is shifted by an extension vector so that a
follower riding the predecessor's arc at the right distance sees zero error
instead of being pulled inside the curve.

The error is rotated into the follower's body frame and mapped to an
acceleration and a yaw rate by two proportional gains, on top of the
predecessor's acceleration and path curvature fed forward. The acceleration is
integrated to a speed command that never goes negative and is forced to zero
while the predecessor is (nearly) standing still.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .dynamics import (
    AckermannCommand,
    VehicleParams,
    VehicleState,
    yaw_rate_to_steering,
)
from .errors import ArgumentError, DomainError

#: Turn angles ``L * curvature`` smaller than this use the straight-line limit.
PHI_EPS = 1e-6
#: Largest turn angle used to build the look-ahead arc.
PHI_MAX = math.pi / 2
#: Predecessor speeds below this give no usable curvature.
V_CURVATURE_EPS = 1e-3

DEFAULT_STANDSTILL_V = 0.05


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, k: float) -> "Vec2":
        return Vec2(k * self.x, k * self.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def rotated(self, angle: float) -> "Vec2":
        c, s = math.cos(angle), math.sin(angle)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)


@dataclass(frozen=True)
class SpacingPolicy:
    r: float = 1.0
    h: float = 0.2

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.h)):
            raise DomainError("spacing policy values must be finite")
        if self.r <= 0:
            raise ArgumentError(f"standstill distance r must be > 0, got {self.r}")
        if self.h < 0:
            raise ArgumentError(f"time gap h must be >= 0, got {self.h}")

    def distance(self, v: float) -> float:
        return self.r + self.h * v


@dataclass(frozen=True)
class ControllerGains:
    k_long: float = 3.5
    k_lat: float = 3.5

    def __post_init__(self):
        for name in ("k_long", "k_lat"):
            k = getattr(self, name)
            if not math.isfinite(k) or k <= 0:
                raise ArgumentError(f"{name} must be finite and > 0, got {k}")


@dataclass(frozen=True)
class LeaderSnapshot:
    """Predecessor state as received over the air (or forwarded ideally)."""

    p: Vec2
    v: float
    a: float
    theta: float
    omega: float
    stamp: float

    def __post_init__(self):
        vals = (self.p[0], self.p[1], self.v, self.a, self.theta, self.omega, self.stamp)
        if not all(math.isfinite(x) for x in vals):
            raise DomainError("leader snapshot fields must be finite")
        if self.stamp < 0:
            raise ArgumentError(f"stamp must be >= 0, got {self.stamp}")

    @classmethod
    def from_state(cls, state: VehicleState, stamp: float) -> "LeaderSnapshot":
        return cls(Vec2(state.x, state.y), state.v, state.a, state.theta, state.omega, stamp)


@dataclass
class ControlOutput:
    a: float
    omega: float


@dataclass
class ControllerState:
    v_cmd: float = 0.0
    last_leader: Optional[LeaderSnapshot] = None
    last_update: float = 0.0
    last_output: ControlOutput = field(default_factory=lambda: ControlOutput(0.0, 0.0))


@dataclass(frozen=True)
class ControllerConfig:
    gains: ControllerGains = field(default_factory=ControllerGains)
    policy: SpacingPolicy = field(default_factory=SpacingPolicy)
    params: VehicleParams = field(default_factory=VehicleParams)
    standstill_v: float = DEFAULT_STANDSTILL_V
    extended_lookahead: bool = True
    feedforward: bool = True

    def __post_init__(self):
        if not math.isfinite(self.standstill_v) or self.standstill_v < 0:
            raise ArgumentError(f"standstill_v must be >= 0, got {self.standstill_v}")


def desired_spacing_vector(policy: SpacingPolicy, v_i: float, theta_i: float) -> Vec2:
    """``(r + h*v) * (cos theta, sin theta)``."""
    if v_i < 0:
        raise ArgumentError(f"follower speed must be >= 0, got {v_i}")
    dist = policy.distance(v_i)
    return Vec2(dist * math.cos(theta_i), dist * math.sin(theta_i))


def spacing_error(p_prev, p_i, d_r) -> Vec2:
    """Actual inter-vehicle vector minus the desired one."""
    return Vec2(p_prev[0] - p_i[0] - d_r[0], p_prev[1] - p_i[1] - d_r[1])


def _turn_angle(v: float, omega: float, length: float) -> float:
    """Signed heading change after driving ``length`` on the current arc."""
    if v < V_CURVATURE_EPS:
        return 0.0
    phi = length * omega / v
    if abs(phi) < PHI_EPS:
        return 0.0
    return max(-PHI_MAX, min(PHI_MAX, phi))


def _arc_chord(theta: float, phi: float, length: float) -> Vec2:
    # chord of an arc of given length that turns by phi, starting at heading theta;
    # written with sin(x)/x so that phi -> 0 is smooth
    half = 0.5 * phi
    k = length * (math.sin(half) / half if half != 0.0 else 1.0)
    return Vec2(k * math.cos(theta + half), k * math.sin(theta + half))


def lookahead_extension(leader: LeaderSnapshot, L: float) -> Vec2:
    """Displacement of the leader after driving arc length ``L`` on its circle.

    The radius is ``v / omega``. Without usable curvature (tiny turn angle or
    non-positive speed) the straight-line limit ``L * (cos, sin)`` is used.
    """
    if not math.isfinite(L) or L <= 0:
        raise ArgumentError(f"look-ahead length must be > 0, got {L}")
    phi = _turn_angle(leader.v, leader.omega, L)
    return _arc_chord(leader.theta, phi, L)


def extension_vector(leader: LeaderSnapshot, L: float) -> Vec2:
    """Offset added to the leader position to form the tracking target.

    Assumes the follower rides the leader's circle, arc length ``L`` behind,
    and returns where the follower's look-ahead point would then sit relative
    to the leader. Zero on straight motion.
    """
    if not math.isfinite(L) or L <= 0:
        raise ArgumentError(f"look-ahead length must be > 0, got {L}")
    phi = _turn_angle(leader.v, leader.omega, L)
    if phi == 0.0:
        return Vec2(0.0, 0.0)
    theta_f = leader.theta - phi
    chord = _arc_chord(theta_f, phi, L)
    return Vec2(L * math.cos(theta_f) - chord.x, L * math.sin(theta_f) - chord.y)


def tracking_error(
    leader: LeaderSnapshot,
    follower: VehicleState,
    policy: SpacingPolicy,
    extended: bool = True,
) -> Vec2:
    """World-frame error between the target point and the follower look-ahead point."""
    v_i = max(follower.v, 0.0)
    L = policy.distance(v_i)
    target = leader.p
    if extended:
        target = Vec2(*target) + extension_vector(leader, L)
    d_r = desired_spacing_vector(policy, v_i, follower.theta)
    return spacing_error(target, (follower.x, follower.y), d_r)


def control_law(e_world, follower_theta: float, gains: ControllerGains) -> ControlOutput:
    """Proportional law on the body-frame error."""
    c, s = math.cos(follower_theta), math.sin(follower_theta)
    ex = c * e_world[0] + s * e_world[1]
    ey = -s * e_world[0] + c * e_world[1]
    return ControlOutput(gains.k_long * ex, gains.k_lat * ey)


def body_frame(e_world, theta: float) -> Vec2:
    c, s = math.cos(theta), math.sin(theta)
    return Vec2(c * e_world[0] + s * e_world[1], -s * e_world[0] + c * e_world[1])


def feedforward_yaw_rate(leader: LeaderSnapshot, v_i: float) -> float:
    """Yaw rate that puts a follower at speed ``v_i`` on the leader's current circle."""
    if leader.v < V_CURVATURE_EPS:
        return 0.0
    return v_i * leader.omega / leader.v


def integrate_velocity(
    state: ControllerState,
    a: float,
    dt: float,
    leader_v: float,
    standstill_v: float = DEFAULT_STANDSTILL_V,
) -> float:
    """Integrate the acceleration into ``state.v_cmd`` and return it.

    The result is clipped at zero and forced to zero while the leader is
    slower than ``standstill_v``.
    """
    if not math.isfinite(dt) or dt <= 0:
        raise ArgumentError(f"dt must be > 0, got {dt}")
    v = max(0.0, state.v_cmd + a * dt)
    if leader_v < standstill_v:
        v = 0.0
    state.v_cmd = v
    return v


def controller_step(
    state: ControllerState,
    leader: Optional[LeaderSnapshot],
    follower: VehicleState,
    cfg: ControllerConfig,
    dt: float,
) -> AckermannCommand:
    """One control cycle: error, law, speed integrator, steering conversion.

    ``state`` is updated in place (speed integrator, last output). With no
    leader data yet the vehicle is held at rest.
    """
    if not math.isfinite(dt) or dt <= 0:
        raise ArgumentError(f"dt must be > 0, got {dt}")
    if leader is None:
        leader = state.last_leader
    if leader is None:
        state.v_cmd = 0.0
        state.last_output = ControlOutput(0.0, 0.0)
        return AckermannCommand(0.0, 0.0)
    state.last_leader = leader

    e = tracking_error(leader, follower, cfg.policy, extended=cfg.extended_lookahead)
    out = control_law(e, follower.theta, cfg.gains)
    if cfg.feedforward:
        out = ControlOutput(out.a + leader.a, out.omega + feedforward_yaw_rate(leader, follower.v))
    v = integrate_velocity(state, out.a, dt, leader.v, cfg.standstill_v)
    state.last_output = out
    state.last_update = leader.stamp
    delta = yaw_rate_to_steering(out.omega, v, cfg.params.wheelbase_d)
    return AckermannCommand(v, delta)
