"""Platoon quality and channel metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, UndefinedMetricError
from .trace import Trace

if TYPE_CHECKING:
    from .kernel import World
    from .scenario import ScenarioConfig

TRANSIENT_FRACTION = 0.1


def amplification_ratio(trace: Trace, window: tuple[float, float], v_ss: float) -> list[float]:
    """Peak speed deviation of each follower relative to its predecessor's.

    ``A_i = max|v_i - v_ss| / max|v_{i-1} - v_ss|`` over ``window``, for
    vehicles 2..n. Values above 1 mean the disturbance grows down the string.
    """
    t0, t1 = window
    if t0 > t1 or t1 < trace.t[0] or t0 > trace.t[-1]:
        raise ArgumentError(f"window {window} outside the run [{trace.t[0]}, {trace.t[-1]}]")
    sel = (trace.t >= t0) & (trace.t <= t1)
    if not sel.any():
        raise ArgumentError(f"window {window} contains no samples")
    peaks = np.max(np.abs(trace.v[sel] - v_ss), axis=0)
    ratios = []
    for i in range(1, trace.n_vehicles):
        if peaks[i - 1] == 0:
            raise UndefinedMetricError(f"vehicle {i} shows no speed deviation in {window}")
        ratios.append(float(peaks[i] / peaks[i - 1]))
    return ratios


def _dedupe(path: np.ndarray) -> np.ndarray:
    keep = np.ones(len(path), dtype=bool)
    keep[1:] = np.any(np.diff(path, axis=0) != 0, axis=1)
    return path[keep]


def distance_to_polyline(points: np.ndarray, path: np.ndarray) -> np.ndarray:
    """Exact distance from each point to the piecewise-linear ``path``."""
    path = _dedupe(np.asarray(path, dtype=float))
    points = np.asarray(points, dtype=float)
    if len(path) < 2:
        raise ArgumentError("path must contain at least two distinct points")
    a, b = path[:-1], path[1:]
    ab = b - a
    seg_len2 = np.einsum("ij,ij->i", ab, ab)
    mid = 0.5 * (a + b)
    half = 0.5 * np.sqrt(seg_len2)

    # nearest vertex bounds the answer; any closer segment has its midpoint within bound + half length
    bound, _ = cKDTree(path).query(points)
    cand = cKDTree(mid).query_ball_point(points, bound + half.max() + 1e-12)
    counts = np.fromiter((len(c) for c in cand), dtype=np.int64, count=len(points))
    q_idx = np.repeat(np.arange(len(points)), counts)
    s_idx = np.fromiter((j for c in cand for j in c), dtype=np.int64, count=int(counts.sum()))

    ap = points[q_idx] - a[s_idx]
    u = np.clip(np.einsum("ij,ij->i", ap, ab[s_idx]) / seg_len2[s_idx], 0.0, 1.0)
    d = np.hypot(*(ap - u[:, None] * ab[s_idx]).T)
    out = bound.copy()
    np.minimum.at(out, q_idx, d)
    return out


def cross_track_rmse(leader_path, follower_path, discard_fraction: float = TRANSIENT_FRACTION) -> float:
    """RMS distance of follower samples from the leader's path.

    The first ``discard_fraction`` of follower samples is dropped as start-up
    transient.
    """
    follower_path = np.asarray(follower_path, dtype=float)
    if len(follower_path) == 0:
        raise ArgumentError("follower path is empty")
    start = int(math.floor(discard_fraction * len(follower_path)))
    pts = follower_path[start:]
    d = distance_to_polyline(pts, leader_path)
    return float(np.sqrt(np.mean(d**2)))


def estimate_lag(t, true_v, received_v, fresh=None, max_lag: float = 0.5) -> float:
    """Delay between a true signal and its received copy.

    Each fresh reception is compared with the true signal shifted back by a
    candidate lag; the lag on the sample grid with the smallest squared
    mismatch wins. Without a ``fresh`` mask, receptions are the samples where
    the received value changes.
    """
    t = np.asarray(t, dtype=float)
    true_v = np.asarray(true_v, dtype=float)
    recv = np.asarray(received_v, dtype=float)
    if fresh is None:
        fresh = np.zeros(len(recv), dtype=bool)
        fresh[1:] = np.diff(recv) != 0
        fresh[0] = np.isfinite(recv[0])
    fresh = np.asarray(fresh, dtype=bool) & np.isfinite(recv)
    if fresh.sum() < 2:
        raise UndefinedMetricError("not enough receptions to estimate a lag")
    dt = float(np.median(np.diff(t)))
    lags = np.arange(0, int(round(max_lag / dt)) + 1) * dt
    tf, rf = t[fresh], recv[fresh]
    sse = np.array([np.sum((rf - np.interp(tf - lag, t, true_v)) ** 2) for lag in lags])
    return float(lags[int(np.argmin(sse))])


@dataclass
class FollowerMetrics:
    vehicle_id: int
    mean_abs_e_long: float
    max_abs_e_long: float
    steady_state_abs_e_long: float
    amplification_ratio: Optional[float]
    cross_track_rmse: float


@dataclass
class ChannelStats:
    mean_delay: float
    delivery_count: int
    drop_count: int
    mean_inter_arrival: Optional[float]
    generated: int = 0
    rejected: int = 0
    pending: int = 0


@dataclass
class MetricsReport:
    followers: list[FollowerMetrics] = field(default_factory=list)
    channel: Optional[ChannelStats] = None

    def to_dict(self) -> dict:
        return asdict(self)



def compute_metrics(trace: Trace, world: "World", cfg: "ScenarioConfig") -> MetricsReport:
    t = trace.t
    if len(t) == 0:
        return MetricsReport(channel=_channel_stats(world, cfg))
    after = t >= TRANSIENT_FRACTION * cfg.duration
    if not after.any():
        after = np.ones_like(t, dtype=bool)
    steady = cfg.leader_profile.steady_mask(t, cfg.steady_settle) & after
    if not steady.any():
        steady = after

    amp: list[Optional[float]]
    try:
        t0 = float(t[after][0])
        v_ss = float(trace.v[after][0, 0])
        amp = list(amplification_ratio(trace, (t0, float(t[-1])), v_ss))
    except UndefinedMetricError:
        amp = [None] * (trace.n_vehicles - 1)

    leader_path = trace.path(1)
    degenerate = len(_dedupe(leader_path)) < 2
    followers = []
    for vid in range(2, trace.n_vehicles + 1):
        e = np.abs(trace.e_long[:, vid - 1])
        path = trace.path(vid)
        if degenerate:
            # leader never moved: measure against the line it faces
            th = trace.theta[0, 0]
            rel = path[int(math.floor(TRANSIENT_FRACTION * len(path))):] - leader_path[0]
            xt = float(np.sqrt(np.mean((-math.sin(th) * rel[:, 0] + math.cos(th) * rel[:, 1]) ** 2)))
        else:
            xt = cross_track_rmse(leader_path, path)
        followers.append(FollowerMetrics(
            vehicle_id=vid,
            mean_abs_e_long=float(np.mean(e[after])),
            max_abs_e_long=float(np.max(e[after])),
            steady_state_abs_e_long=float(np.max(e[steady])),
            amplification_ratio=amp[vid - 2],
            cross_track_rmse=xt,
        ))
    return MetricsReport(followers, _channel_stats(world, cfg))


def _channel_stats(world: "World", cfg: "ScenarioConfig") -> ChannelStats:
    c = world.counters
    now_us = world.clock.now_us
    if cfg.channel == "ideal":
        mean_delay = 0.0
    else:
        delays = [
            (r.rx_time_us / 1e6) - r.msg.gen_time
            for r in world.cam_records
            if r.rx_time_us is not None and r.rx_time_us <= now_us
        ]
        mean_delay = float(np.mean(delays)) if delays else 0.0
    gaps = [np.diff(np.asarray(a, dtype=float)) / 1e6 for a in world.arrivals.values() if len(a) > 1]
    inter = float(np.mean(np.concatenate(gaps))) if gaps else None
    return ChannelStats(
        mean_delay=mean_delay,
        delivery_count=c.accepted,
        drop_count=c.dropped,
        mean_inter_arrival=inter,
        generated=c.generated,
        rejected=c.rejected,
        pending=len(world.queue),
    )
