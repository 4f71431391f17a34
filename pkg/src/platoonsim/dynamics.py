"""Planar kinematic vehicle models.

Two plants are provided. The Ackermann (single-track bicycle) model takes a
speed and a steering angle; the unicycle model takes an acceleration and a
yaw rate. Both are integrated with forward Euler at a fixed step and keep the
heading normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ArgumentError, DomainError

#: Below this speed the yaw-rate to steering conversion returns 0.
V_EPS = 1e-3

DEFAULT_WHEELBASE = 0.32

_TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi].

    Angles already inside the interval are returned unchanged (bit for bit).
    """
    if not math.isfinite(theta):
        raise DomainError(f"angle must be finite, got {theta!r}")
    if -math.pi < theta <= math.pi:
        return theta
    r = math.remainder(theta, _TWO_PI)
    if r <= -math.pi:
        r += _TWO_PI
    return r


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        _check_finite(x=self.x, y=self.y, theta=self.theta)
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class ControlVector:
    v: float
    omega: float

    def __post_init__(self):
        _check_finite(v=self.v, omega=self.omega)
        if self.v < 0:
            raise ArgumentError(f"v must be >= 0, got {self.v}")


@dataclass(frozen=True)
class AckermannCommand:
    v: float
    delta: float

    def __post_init__(self):
        _check_finite(v=self.v, delta=self.delta)
        if self.v < 0:
            raise ArgumentError(f"v must be >= 0, got {self.v}")
        if abs(self.delta) >= math.pi / 2:
            raise ArgumentError(f"|delta| must be < pi/2, got {self.delta}")


@dataclass(frozen=True)
class VehicleParams:
    wheelbase_d: float = DEFAULT_WHEELBASE

    def __post_init__(self):
        _check_finite(wheelbase_d=self.wheelbase_d)
        if self.wheelbase_d <= 0:
            raise ArgumentError(f"wheelbase must be > 0, got {self.wheelbase_d}")


@dataclass(frozen=True)
class VehicleState:
    """Full kinematic state of one vehicle."""

    pose: Pose = field(default_factory=Pose)
    v: float = 0.0
    a: float = 0.0
    omega: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        _check_finite(v=self.v, a=self.a, omega=self.omega, delta=self.delta)
        if self.v < 0:
            raise ArgumentError(f"v must be >= 0, got {self.v}")

    @property
    def x(self) -> float:
        return self.pose.x

    @property
    def y(self) -> float:
        return self.pose.y

    @property
    def theta(self) -> float:
        return self.pose.theta


def _check_dt(dt: float) -> None:
    if not math.isfinite(dt):
        raise DomainError(f"dt must be finite, got {dt!r}")
    if dt <= 0:
        raise ArgumentError(f"dt must be > 0, got {dt}")


def steering_to_yaw_rate(delta: float, v: float, d: float) -> float:
    """Yaw rate ``v * tan(delta) / d`` of a single-track vehicle."""
    _check_finite(delta=delta, v=v, d=d)
    if abs(delta) >= math.pi / 2:
        raise ArgumentError(f"|delta| must be < pi/2, got {delta}")
    if d <= 0:
        raise ArgumentError(f"wheelbase must be > 0, got {d}")
    return v * math.tan(delta) / d


def yaw_rate_to_steering(omega: float, v: float, d: float) -> float:
    """Steering angle ``atan(omega * d / v)`` producing yaw rate ``omega``.

    Returns 0 when ``v`` is below :data:`V_EPS`, where the conversion is
    singular.
    """
    _check_finite(omega=omega, v=v, d=d)
    if d <= 0:
        raise ArgumentError(f"wheelbase must be > 0, got {d}")
    if v < V_EPS:
        return 0.0
    return math.atan(omega * d / v)


def bicycle_step(
    state: VehicleState,
    cmd: AckermannCommand,
    params: VehicleParams,
    dt: float,
) -> VehicleState:
    """Advance the Ackermann model by one Euler step.

    The commanded speed and steering angle take effect immediately; the
    position is moved along the old heading and the heading is then rotated
    by ``v * tan(delta) / d * dt``.
    """
    _check_dt(dt)
    v, delta, d = cmd.v, cmd.delta, params.wheelbase_d
    pose = state.pose
    omega = steering_to_yaw_rate(delta, v, d)
    x = pose.x + v * math.cos(pose.theta) * dt
    y = pose.y + v * math.sin(pose.theta) * dt
    theta = normalize_angle(pose.theta + omega * dt)
    return VehicleState(
        pose=Pose(x, y, theta),
        v=v,
        a=(v - state.v) / dt,
        omega=omega,
        delta=delta,
    )


def unicycle_step(
    state: VehicleState,
    a: float,
    omega: float,
    dt: float,
    params: VehicleParams | None = None,
) -> VehicleState:
    """Advance the unicycle model by one Euler step.

    ``v`` is clamped at zero from below. ``params`` is only used to fill in
    the equivalent steering angle of the new state.
    """
    _check_dt(dt)
    _check_finite(a=a, omega=omega)
    pose = state.pose
    v = state.v
    x = pose.x + v * math.cos(pose.theta) * dt
    y = pose.y + v * math.sin(pose.theta) * dt
    theta = normalize_angle(pose.theta + omega * dt)
    v_new = max(0.0, v + a * dt)
    d = params.wheelbase_d if params is not None else DEFAULT_WHEELBASE
    return VehicleState(
        pose=Pose(x, y, theta),
        v=v_new,
        a=a,
        omega=omega,
        delta=yaw_rate_to_steering(omega, v_new, d),
    )
