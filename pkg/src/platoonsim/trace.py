"""Per-step vehicle logs as arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRACE_COLUMNS = ("t", "vehicle_id", "x", "y", "theta", "v", "a", "omega", "delta", "e_long", "e_lat")


@dataclass
class Trace:
    """Trace rows reshaped to ``(n_steps, n_vehicles)`` arrays.

    Vehicle ``i`` (1-based) is column ``i - 1``. Error columns are NaN for
    the leader.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    a: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    e_long: np.ndarray
    e_lat: np.ndarray

    @property
    def n_vehicles(self) -> int:
        return self.x.shape[1]

    @property
    def n_steps(self) -> int:
        return self.x.shape[0]

    def path(self, vid: int) -> np.ndarray:
        return np.column_stack([self.x[:, vid - 1], self.y[:, vid - 1]])

    @classmethod
    def from_rows(cls, rows, n_vehicles: int) -> "Trace":
        if not rows:
            empty = np.empty((0, n_vehicles))
            return cls(np.empty(0), *([empty] * 9))
        arr = np.array(
            [[np.nan if c is None else c for c in row] for row in rows], dtype=float
        )
        if arr.shape[0] % n_vehicles:
            raise ValueError("row count is not a multiple of the vehicle count")
        arr = arr.reshape(-1, n_vehicles, len(TRACE_COLUMNS))
        cols = {name: arr[:, :, i] for i, name in enumerate(TRACE_COLUMNS)}
        return cls(
            t=cols["t"][:, 0].copy(),
            **{k: np.ascontiguousarray(v) for k, v in cols.items() if k not in ("t", "vehicle_id")},
        )
