"""ITS-G5 style V2V messaging: CAM triggering, quantization, channel, filter.

Field resolutions follow the cooperative awareness message format: speed in
0.01 m/s, heading in 0.1 deg, longitudinal acceleration in 0.1 m/s^2, yaw
rate in 0.01 deg/s. Positions are local Cartesian centimeters. Each field
reserves its top value as the "unavailable" sentinel, which the encoder never
produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .controller import LeaderSnapshot, Vec2
from .dynamics import VehicleState, normalize_angle
from .errors import ArgumentError, NoPredecessorError, OrderingError, UnavailableFieldError

SPEED_UNAVAILABLE = 16383
SPEED_MAX = 16382
HEADING_UNAVAILABLE = 3601
HEADING_MAX = 3600
ACCEL_UNAVAILABLE = 161
ACCEL_MIN, ACCEL_MAX = -160, 160
YAWRATE_UNAVAILABLE = 32767
YAWRATE_MIN, YAWRATE_MAX = -32766, 32766

# slack for comparing float times built from integer microseconds
_TIME_TOL = 1e-9

CAM_LOG_HEADER = (
    "tx_time", "rx_time", "station_id", "seq",
    "speed_q", "heading_q", "accel_q", "yawrate_q", "dropped",
)


def round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _clamp(q: int, lo: int, hi: int) -> int:
    return lo if q < lo else hi if q > hi else q


@dataclass(frozen=True)
class CamMessage:
    station_id: int
    seq: int
    gen_time: float
    pos_x_cm: int
    pos_y_cm: int
    speed_q: int
    heading_q: int
    accel_q: int
    yawrate_q: int

    def __post_init__(self):
        if self.station_id < 1:
            raise ArgumentError(f"station_id must be >= 1, got {self.station_id}")
        checks = (
            ("speed_q", self.speed_q, 0, SPEED_UNAVAILABLE),
            ("heading_q", self.heading_q, 0, HEADING_UNAVAILABLE),
            ("accel_q", self.accel_q, ACCEL_MIN, ACCEL_UNAVAILABLE),
            ("yawrate_q", self.yawrate_q, YAWRATE_MIN, YAWRATE_UNAVAILABLE),
        )
        for name, q, lo, hi in checks:
            if not lo <= q <= hi:
                raise ArgumentError(f"{name}={q} outside [{lo}, {hi}]")


@dataclass
class CaServiceState:
    """Per-vehicle CA basic service bookkeeping and trigger thresholds."""

    last_tx_time: Optional[float] = None
    last_tx_pos: Vec2 = Vec2(0.0, 0.0)
    last_tx_speed: float = 0.0
    last_tx_heading: float = 0.0
    t_gen_min: float = 0.1
    t_gen_max: float = 1.0
    d_pos_thresh: float = 4.0
    d_speed_thresh: float = 0.5
    d_heading_thresh: float = math.radians(4.0)
    seq: int = 0

    def __post_init__(self):
        if not 0 < self.t_gen_min <= self.t_gen_max:
            raise ArgumentError(
                f"need 0 < t_gen_min <= t_gen_max, got {self.t_gen_min}, {self.t_gen_max}"
            )

    def record_tx(self, state: VehicleState, now: float) -> int:
        """Remember the transmitted state and return the message sequence number."""
        self.last_tx_time = now
        self.last_tx_pos = Vec2(state.x, state.y)
        self.last_tx_speed = state.v
        self.last_tx_heading = state.theta
        seq = self.seq
        self.seq += 1
        return seq


@dataclass(frozen=True)
class ChannelModel:
    delay_min: float = 0.1
    delay_max: float = 0.2
    loss_prob: float = 0.0
    # None: take the scenario seed
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.delay_min <= self.delay_max:
            raise ArgumentError(
                f"need 0 <= delay_min <= delay_max, got {self.delay_min}, {self.delay_max}"
            )
        if not 0 <= self.loss_prob <= 1:
            raise ArgumentError(f"loss_prob must be in [0, 1], got {self.loss_prob}")

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed or 0)


def should_generate_cam(svc: CaServiceState, state: VehicleState, now: float) -> bool:
    """CA basic service trigger decision at time ``now``.

    A first message is always due. Afterwards nothing is sent before
    ``t_gen_min`` and something is always sent once ``t_gen_max`` has
    elapsed; in between, a position, speed or heading change beyond its
    threshold triggers generation.
    """
    if svc.last_tx_time is None:
        return True
    elapsed = now - svc.last_tx_time
    if elapsed < -_TIME_TOL:
        raise OrderingError(f"now={now} precedes last transmission {svc.last_tx_time}")
    if elapsed < svc.t_gen_min - _TIME_TOL:
        return False
    if elapsed >= svc.t_gen_max - _TIME_TOL:
        return True
    moved = math.hypot(state.x - svc.last_tx_pos.x, state.y - svc.last_tx_pos.y)
    if moved >= svc.d_pos_thresh:
        return True
    if abs(state.v - svc.last_tx_speed) >= svc.d_speed_thresh:
        return True
    dh = abs(normalize_angle(state.theta - svc.last_tx_heading))
    return dh >= svc.d_heading_thresh


def encode_cam(state: VehicleState, station_id: int, seq: int, now: float) -> CamMessage:
    """Quantize a vehicle state into a CAM."""
    heading_deg = math.degrees(state.theta) % 360.0
    heading_q = round_half_away(heading_deg * 10.0)
    if heading_q >= HEADING_MAX:
        heading_q -= HEADING_MAX
    return CamMessage(
        station_id=station_id,
        seq=seq,
        gen_time=now,
        pos_x_cm=round_half_away(state.x * 100.0),
        pos_y_cm=round_half_away(state.y * 100.0),
        speed_q=_clamp(round_half_away(state.v * 100.0), 0, SPEED_MAX),
        heading_q=heading_q,
        accel_q=_clamp(round_half_away(state.a * 10.0), ACCEL_MIN, ACCEL_MAX),
        yawrate_q=_clamp(
            round_half_away(math.degrees(state.omega) * 100.0), YAWRATE_MIN, YAWRATE_MAX
        ),
    )


def decode_cam(msg: CamMessage) -> LeaderSnapshot:
    """Undo the quantization of :func:`encode_cam`."""
    sentinels = (
        ("speed", msg.speed_q, SPEED_UNAVAILABLE),
        ("heading", msg.heading_q, HEADING_UNAVAILABLE),
        ("acceleration", msg.accel_q, ACCEL_UNAVAILABLE),
        ("yaw rate", msg.yawrate_q, YAWRATE_UNAVAILABLE),
    )
    for name, q, sentinel in sentinels:
        if q == sentinel:
            raise UnavailableFieldError(f"{name} field unavailable in CAM {msg.station_id}/{msg.seq}")
    return LeaderSnapshot(
        p=Vec2(msg.pos_x_cm / 100.0, msg.pos_y_cm / 100.0),
        v=msg.speed_q / 100.0,
        a=msg.accel_q / 10.0,
        theta=normalize_angle(math.radians(msg.heading_q / 10.0)),
        omega=math.radians(msg.yawrate_q / 100.0),
        stamp=msg.gen_time,
    )


def transmit(
    ch: ChannelModel, msg: CamMessage, now: float, rng: np.random.Generator
) -> Optional[float]:
    """Delivery time of ``msg`` sent at ``now``, or None if the channel drops it.

    Exactly one uniform draw is consumed for the loss decision and one for
    the delay, so the stream position does not depend on the parameters.
    """
    if now < 0:
        raise ArgumentError(f"now must be >= 0, got {now}")
    lost = rng.random() < ch.loss_prob
    u = rng.random()
    if lost:
        return None
    return now + ch.delay_min + u * (ch.delay_max - ch.delay_min)


def platoon_filter(msg: CamMessage, own_id: int, latest_gen_time: Optional[float]) -> bool:
    """Accept only fresh CAMs from the direct predecessor ``own_id - 1``."""
    if own_id < 2:
        raise NoPredecessorError(f"vehicle {own_id} has no predecessor")
    if msg.station_id != own_id - 1:
        return False
    return latest_gen_time is None or msg.gen_time > latest_gen_time
