"""Scenario JSON loading and result file writers."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional

from .comms import CAM_LOG_HEADER, CaServiceState, ChannelModel
from .controller import ControllerConfig, ControllerGains, SpacingPolicy
from .dynamics import VehicleParams
from .errors import ConfigError, PlatoonSimError
from .metrics import MetricsReport
from .scenario import (
    PRESETS,
    LeaderProfile,
    NoiseModel,
    ProfileSegment,
    ScenarioConfig,
    mixed_profile,
)
from .trace import TRACE_COLUMNS

RECEIVED_HEADER = ("t", "true_v", "received_v", "channel")

_TOP_KEYS = {
    "preset", "n_vehicles", "dt", "duration", "plant", "channel", "channel_model",
    "ca_service", "controller", "leader_profile", "noise", "seed", "initial_spacing",
    "wheelbase", "steady_settle",
}
_CONTROLLER_KEYS = {
    "k_long", "k_lat", "r", "h", "standstill_v", "wheelbase", "extended_lookahead", "feedforward",
}
_PRESET_CRUISE = {"theoretical": 3.0, "realistic": 1.0}


def _num(value: Any, path: tuple, *, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"must be {kind}, got {json.dumps(value)}", path)
    if integer and not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value}", path)
    if not math.isfinite(value):
        raise ConfigError("must be finite", path)
    return value


def _bool(value: Any, path: tuple) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"must be true or false, got {json.dumps(value)}", path)
    return value


def _obj(value: Any, path: tuple, allowed: set) -> dict:
    if not isinstance(value, dict):
        raise ConfigError("must be an object", path)
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ConfigError(f"unknown field {unknown[0]!r}", path + (unknown[0],))
    return value


def _build(cls, path: tuple, **kwargs):
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (PlatoonSimError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def _controller(data: Any, path: tuple, base: ControllerConfig, wheelbase: float) -> ControllerConfig:
    d = _obj(data, path, _CONTROLLER_KEYS)
    floats = {k: _num(d[k], path + (k,)) for k in ("k_long", "k_lat", "r", "h", "standstill_v", "wheelbase") if k in d}
    gains = _build(ControllerGains, path, k_long=floats.get("k_long", base.gains.k_long),
                   k_lat=floats.get("k_lat", base.gains.k_lat))
    policy = _build(SpacingPolicy, path, r=floats.get("r", base.policy.r), h=floats.get("h", base.policy.h))
    params = _build(VehicleParams, path + ("wheelbase",), wheelbase_d=floats.get("wheelbase", wheelbase))
    flags = {k: _bool(d[k], path + (k,)) for k in ("extended_lookahead", "feedforward") if k in d}
    return _build(
        ControllerConfig, path, gains=gains, policy=policy, params=params,
        standstill_v=floats.get("standstill_v", base.standstill_v),
        extended_lookahead=flags.get("extended_lookahead", base.extended_lookahead),
        feedforward=flags.get("feedforward", base.feedforward),
    )


def _profile(data: Any, path: tuple) -> LeaderProfile:
    d = _obj(data, path, {"segments", "ramp_time"})
    if "segments" not in d:
        raise ConfigError("missing field 'segments'", path)
    segs_raw = d["segments"]
    if not isinstance(segs_raw, list) or not segs_raw:
        raise ConfigError("must be a non-empty list", path + ("segments",))
    segs = []
    for i, s in enumerate(segs_raw):
        p = path + ("segments", i)
        if isinstance(s, list):
            if len(s) not in (2, 3):
                raise ConfigError("segment must be [duration, target_v] or [duration, target_v, yaw_rate]", p)
            vals = [_num(x, p) for x in s]
            segs.append(ProfileSegment(*vals))
        else:
            so = _obj(s, p, {"duration", "target_v", "yaw_rate"})
            for k in ("duration", "target_v"):
                if k not in so:
                    raise ConfigError(f"missing field {k!r}", p)
            segs.append(ProfileSegment(**{k: _num(v, p + (k,)) for k, v in so.items()}))
    ramp = _num(d.get("ramp_time", 0.0), path + ("ramp_time",))
    return _build(LeaderProfile, path, segments=tuple(segs), ramp_time=ramp)


def config_from_dict(data: Any) -> ScenarioConfig:
    """Validate a parsed scenario JSON document and build the config.

    Omitted fields take the values of the selected ``preset``
    (``theoretical`` by default).
    """
    try:
        return _config_from_dict(data)
    except ConfigError:
        raise
    except (PlatoonSimError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _config_from_dict(data: Any) -> ScenarioConfig:
    d = _obj(data, (), _TOP_KEYS)
    preset = d.get("preset", "theoretical")
    if preset not in PRESETS:
        raise ConfigError(f"must be one of {sorted(PRESETS)}", ("preset",))
    n = _num(d.get("n_vehicles", 4), ("n_vehicles",), integer=True)
    if n < 2:
        raise ConfigError(f"got {n}, need n_vehicles ≥ 2", ("n_vehicles",))
    duration = _num(d.get("duration", 60.0), ("duration",))
    if duration <= 0:
        raise ConfigError("must be > 0", ("duration",))
    base = PRESETS[preset](duration=duration, n_vehicles=n)

    kw: dict[str, Any] = {"n_vehicles": n, "duration": duration}
    for key in ("dt", "initial_spacing", "wheelbase", "steady_settle"):
        if key in d and d[key] is not None:
            kw[key] = _num(d[key], (key,))
    seed = _num(d.get("seed", base.seed), ("seed",), integer=True)
    kw["seed"] = seed
    for key in ("plant", "channel"):
        if key in d:
            if not isinstance(d[key], str):
                raise ConfigError("must be a string", (key,))
            kw[key] = d[key]
    wheelbase = kw.get("wheelbase", base.wheelbase)

    cm = _obj(d.get("channel_model", {}), ("channel_model",),
              {"delay_min", "delay_max", "loss_prob", "rng_seed"})
    cm_vals = {
        k: _num(v, ("channel_model", k), integer=(k == "rng_seed"))
        for k, v in cm.items() if not (k == "rng_seed" and v is None)
    }
    kw["channel_model"] = _build(ChannelModel, ("channel_model",), **cm_vals)

    ca_fields = {"t_gen_min", "t_gen_max", "d_pos_thresh", "d_speed_thresh", "d_heading_thresh"}
    ca = _obj(d.get("ca_service", {}), ("ca_service",), ca_fields)
    kw["ca_service"] = _build(
        CaServiceState, ("ca_service",), **{k: _num(v, ("ca_service", k)) for k, v in ca.items()}
    )

    nz = _obj(d.get("noise", {}), ("noise",), {"enabled", "sigma_pos", "sigma_v", "sigma_heading"})
    nz_vals = {k: (_bool(v, ("noise", k)) if k == "enabled" else _num(v, ("noise", k))) for k, v in nz.items()}
    kw["noise"] = _build(NoiseModel, ("noise",), **{**asdict(base.noise), **nz_vals})

    base_ctrl = base.controller[0]
    raw_ctrl = d.get("controller", {})
    if isinstance(raw_ctrl, list):
        if len(raw_ctrl) not in (1, n - 1):
            raise ConfigError(f"need 1 or {n - 1} entries, got {len(raw_ctrl)}", ("controller",))
        kw["controller"] = tuple(
            _controller(c, ("controller", i), base_ctrl, wheelbase) for i, c in enumerate(raw_ctrl)
        )
    else:
        kw["controller"] = (_controller(raw_ctrl, ("controller",), base_ctrl, wheelbase),)

    if "leader_profile" in d:
        kw["leader_profile"] = _profile(d["leader_profile"], ("leader_profile",))
    else:
        kw["leader_profile"] = mixed_profile(_PRESET_CRUISE[preset], duration)

    fields = {**{k: getattr(base, k) for k in ("plant", "channel", "dt")}, **kw}
    return ScenarioConfig(**fields)


def locate(text: str, path: tuple) -> Optional[int]:
    """Best-effort 1-based line number of the JSON key named by ``path``."""
    pos = 0
    line = None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


def load_config(path, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Read and validate a scenario file.

    Errors are re-raised as :class:`ConfigError` with the message prefixed
    by ``file:line``.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if overrides and isinstance(data, dict):
        data = {**data, **overrides}
        if "seed" in overrides and isinstance(data.get("channel_model"), dict):
            data["channel_model"] = {**data["channel_model"], "rng_seed": overrides["seed"]}
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        line = locate(text, exc.path) if exc.path else None
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: {exc}") from None


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`config_from_dict` (fully explicit, no preset)."""
    def ctrl(c: ControllerConfig) -> dict:
        return {
            "k_long": c.gains.k_long, "k_lat": c.gains.k_lat, "r": c.policy.r, "h": c.policy.h,
            "standstill_v": c.standstill_v, "wheelbase": c.params.wheelbase_d,
            "extended_lookahead": c.extended_lookahead, "feedforward": c.feedforward,
        }

    ca = cfg.ca_service
    return {
        "n_vehicles": cfg.n_vehicles,
        "dt": cfg.dt,
        "duration": cfg.duration,
        "plant": cfg.plant,
        "channel": cfg.channel,
        "seed": cfg.seed,
        "wheelbase": cfg.wheelbase,
        "initial_spacing": cfg.initial_spacing,
        "steady_settle": cfg.steady_settle,
        "channel_model": asdict(cfg.channel_model),
        "ca_service": {k: getattr(ca, k) for k in
                       ("t_gen_min", "t_gen_max", "d_pos_thresh", "d_speed_thresh", "d_heading_thresh")},
        "noise": asdict(cfg.noise),
        "controller": [ctrl(c) for c in cfg.controller],
        "leader_profile": {
            "segments": [asdict(s) for s in cfg.leader_profile.segments],
            "ramp_time": cfg.leader_profile.ramp_time,
        },
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value)) if math.isfinite(value) else ""
    return str(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_trace_csv(path, rows) -> None:
    _write_csv(path, TRACE_COLUMNS, rows)


def cam_log_rows(records) -> list[tuple]:
    rows = []
    for rec in records:
        m = rec.msg
        rx = None if rec.rx_time_us is None else rec.rx_time_us / 1e6
        rows.append((m.gen_time, rx, m.station_id, m.seq, m.speed_q, m.heading_q,
                     m.accel_q, m.yawrate_q, int(rec.dropped)))
    return rows


def write_cam_log_csv(path, records) -> None:
    _write_csv(path, CAM_LOG_HEADER, cam_log_rows(records))


def write_received_csv(path, rows) -> None:
    _write_csv(path, RECEIVED_HEADER, rows)


def write_metrics_json(path, report: MetricsReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_result(out_dir, result, label: Optional[str] = None) -> None:
    """Write trace.csv, cam_log.csv, received_signal.csv and metrics.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = label or result.config.channel
    write_trace_csv(out / "trace.csv", result.world.trace)
    write_cam_log_csv(out / "cam_log.csv", result.world.cam_records)
    write_received_csv(out / "received_signal.csv",
                       [(t, tv, rv, label) for t, tv, rv, _ in result.world.received])
    write_metrics_json(out / "metrics.json", result.metrics)


def read_csv_columns(path) -> dict[str, list[str]]:
    """Column name -> list of raw string cells."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}
