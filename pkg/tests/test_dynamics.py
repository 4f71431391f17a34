import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoonsim.dynamics import (
    AckermannCommand,
    Pose,
    VehicleParams,
    VehicleState,
    bicycle_step,
    normalize_angle,
    steering_to_yaw_rate,
    unicycle_step,
    yaw_rate_to_steering,
)
from platoonsim.errors import ArgumentError, DomainError

D = VehicleParams(0.32)


def _arc_end(v, omega, T, theta0=0.0):
    """Closed-form pose after driving at constant (v, omega) for T seconds from the origin."""
    R = v / omega
    th = theta0 + omega * T
    return R * (math.sin(th) - math.sin(theta0)), R * (math.cos(theta0) - math.cos(th)), th


def _bicycle_arc_error(dt, T=1.0):
    s = VehicleState()
    cmd = AckermannCommand(1.0, math.atan(0.32))
    for _ in range(round(T / dt)):
        s = bicycle_step(s, cmd, D, dt)
    x, y, _ = _arc_end(1.0, 1.0, T)
    return math.hypot(s.x - x, s.y - y)


def _unicycle_arc_error(dt, T=1.0):
    s = VehicleState(v=1.0)
    for _ in range(round(T / dt)):
        s = unicycle_step(s, 0.0, 0.5, dt)
    x, y, _ = _arc_end(1.0, 0.5, T)
    return math.hypot(s.x - x, s.y - y)


class TestNormalizeAngle:
    def test_examples(self):
        assert normalize_angle(0.0) == 0.0
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == math.pi

    @given(st.floats(-1e4, 1e4))
    def test_range_and_equivalence(self, th):
        r = normalize_angle(th)
        assert -math.pi < r <= math.pi
        k = (th - r) / (2 * math.pi)
        assert abs(k - round(k)) < 1e-9

    def test_non_finite(self):
        with pytest.raises(DomainError):
            normalize_angle(float("nan"))


class TestConversions:
    def test_yaw_rate_to_steering_examples(self):
        assert yaw_rate_to_steering(0.0, 3.0, 0.32) == 0.0
        # atan(0.32) to 30 digits: 0.309702944542456199917...
        assert yaw_rate_to_steering(1.0, 1.0, 0.32) == pytest.approx(0.3097029445424562, abs=1e-12)
        assert yaw_rate_to_steering(5.0, 1e-6, 0.32) == 0.0

    def test_steering_to_yaw_rate_examples(self):
        assert steering_to_yaw_rate(0.0, 5.0, 0.32) == 0.0
        assert steering_to_yaw_rate(math.atan(0.32), 1.0, 0.32) == pytest.approx(1.0, abs=1e-12)
        assert steering_to_yaw_rate(0.1, 2.0, 0.5) == pytest.approx(0.401338, abs=1e-6)

    def test_errors(self):
        with pytest.raises(ArgumentError):
            yaw_rate_to_steering(1.0, 1.0, 0.0)
        with pytest.raises(ArgumentError):
            steering_to_yaw_rate(math.pi / 2, 1.0, 0.32)

    @given(st.floats(0.1, 20), st.floats(-1.0, 1.0), st.floats(0.1, 3.0))
    def test_round_trip(self, v, delta, d):
        assert yaw_rate_to_steering(steering_to_yaw_rate(delta, v, d), v, d) == pytest.approx(delta, abs=1e-12)


class TestBicycle:
    def test_zero_velocity(self):
        s = bicycle_step(VehicleState(), AckermannCommand(0.0, 0.3), D, 0.1)
        assert (s.x, s.y, s.theta) == (0.0, 0.0, 0.0)

    def test_straight(self):
        s = bicycle_step(VehicleState(), AckermannCommand(1.0, 0.0), D, 0.1)
        assert (s.x, s.y, s.theta) == pytest.approx((0.1, 0.0, 0.0))
        assert s.v == 1.0 and s.delta == 0.0

    def test_state_bookkeeping(self):
        s = bicycle_step(VehicleState(v=1.0), AckermannCommand(2.0, 0.2), D, 0.5)
        assert s.a == pytest.approx(2.0)
        assert s.omega == pytest.approx(2.0 * math.tan(0.2) / 0.32)

    def test_unit_circle(self):
        assert _bicycle_arc_error(1e-4) < 1e-2

    def test_errors(self):
        with pytest.raises(ArgumentError):
            bicycle_step(VehicleState(), AckermannCommand(1.0, 0.0), D, 0.0)
        with pytest.raises(DomainError):
            bicycle_step(VehicleState(), AckermannCommand(1.0, 0.0), D, float("inf"))


class TestUnicycle:
    def test_uniform_motion(self):
        s = unicycle_step(VehicleState(v=2.0), 0.0, 0.0, 0.5)
        assert s.x == pytest.approx(1.0) and s.v == 2.0

    def test_clamp(self):
        assert unicycle_step(VehicleState(), -1.0, 0.0, 0.1).v == 0.0

    def test_radius_two_circle(self):
        assert _unicycle_arc_error(1e-4) < 1e-2

    def test_errors(self):
        with pytest.raises(ArgumentError):
            unicycle_step(VehicleState(), 0.0, 0.0, -0.1)
        with pytest.raises(DomainError):
            unicycle_step(VehicleState(), float("nan"), 0.0, 0.1)


@pytest.mark.parametrize("err_fn", [_bicycle_arc_error, _unicycle_arc_error])
def test_first_order_convergence(err_fn):
    errs = [err_fn(dt) for dt in (1e-3, 5e-4, 2.5e-4)]
    for coarse, fine in zip(errs, errs[1:]):
        # halving dt at most halves the error, and not much less than that
        assert 1.8 <= coarse / fine <= 2.2


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-3, 3))
def test_zero_input_fixpoint(x, y, th):
    s0 = VehicleState(Pose(x, y, th))
    s1 = bicycle_step(s0, AckermannCommand(0.0, 0.0), D, 0.01)
    s2 = unicycle_step(s0, 0.0, 0.0, 0.01)
    assert s1.pose == s0.pose and s2.pose == s0.pose


@settings(max_examples=25, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.1, 5.0), st.floats(-0.5, 0.5))
def test_rotational_symmetry(phi, v, delta):
    c, s = math.cos(phi), math.sin(phi)
    a = VehicleState(Pose(1.0, 2.0, 0.3))
    b = VehicleState(Pose(c * 1.0 - s * 2.0, s * 1.0 + c * 2.0, 0.3 + phi))
    cmd = AckermannCommand(v, delta)
    for _ in range(200):
        a = bicycle_step(a, cmd, D, 0.01)
        b = bicycle_step(b, cmd, D, 0.01)
        bx, by = c * b.x + s * b.y, -s * b.x + c * b.y
        assert bx == pytest.approx(a.x, abs=1e-9)
        assert by == pytest.approx(a.y, abs=1e-9)
        assert abs(normalize_angle(b.theta - phi - a.theta)) < 1e-9
