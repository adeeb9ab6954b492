"""Slope metrics along trajectories.

The "slope" at a point is |grad_x f|^2 + |grad_y f|^2; lower values mean
flatter regions of the min-max landscape.  Two aggregates are provided: a
path-averaged line integral (trapezoid weights over the Euclidean arc
length in joint (x, y) space) and a per-step running mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrajectory

ZERO_LENGTH = 1e-12


def slope_at(game, x, y) -> float:
    """Squared gradient norm |gx|^2 + |gy|^2 at a single point."""
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    return float(gx @ gx + gy @ gy)


def _slopes(game, traj) -> np.ndarray:
    if game.scalar_form and traj.x.shape[1] == 1 and traj.y.shape[1] == 1:
        gx, gy = game.grad_s(traj.x[:, 0], traj.y[:, 0])  # vectorized closed forms
        return np.asarray(gx) ** 2 + np.asarray(gy) ** 2
    vals = np.empty(len(traj))
    for i in range(len(traj)):
        gx, gy = game.grad_impl(traj.x[i], traj.y[i])
        vals[i] = gx @ gx + gy @ gy
    return vals


@dataclass
class SlopeReport:
    avg_slope: float
    total_length: float
    per_segment: list | None = None  # (segment index, trapezoid slope, ds)

    def to_json(self) -> str:
        doc = {"avg_slope": self.avg_slope, "total_length": self.total_length}
        if self.per_segment is not None:
            doc["per_segment"] = [
                {"segment": int(i), "slope": float(s), "ds": float(d)}
                for i, s, d in self.per_segment
            ]
        return json.dumps(doc, indent=2)


def avg_slope(game, traj, tail=None, keep_segments=False) -> SlopeReport:
    """Path-averaged slope along a trajectory.

    Discretized line integral: each consecutive pair contributes its
    Euclidean distance ds and the trapezoid average of the endpoint
    slopes; the report's avg_slope is the ds-weighted mean.  A `tail`
    fraction restricts to the final part of the trajectory (used to
    discount the transient approach to a limit cycle).  Zero-length paths
    fall back to the slope at the final state so the metric is total.
    """
    if len(traj) < 2:
        raise EmptyTrajectory("avg_slope needs at least two states")
    if tail is not None:
        traj = traj.tail(tail)
    s = _slopes(game, traj)
    dx = np.diff(traj.x, axis=0)
    dy = np.diff(traj.y, axis=0)
    ds = np.sqrt((dx**2).sum(axis=1) + (dy**2).sum(axis=1))
    total = float(ds.sum())
    seg = 0.5 * (s[1:] + s[:-1])
    if total < ZERO_LENGTH:
        value = float(s[-1])
    else:
        value = float((seg * ds).sum() / total)
    segments = list(zip(range(len(ds)), seg, ds)) if keep_segments else None
    return SlopeReport(value, total, segments)


def cumulative_avg_slope(game, traj):
    """Running mean of the slope over visited states.

    Returns (steps, values) where values[k] is the mean slope of the first
    k+1 recorded states; the first entry equals the slope at the first
    state exactly.
    """
    if len(traj) < 1:
        raise EmptyTrajectory("cumulative_avg_slope needs a nonempty trajectory")
    s = _slopes(game, traj)
    running = np.cumsum(s) / np.arange(1, len(s) + 1)
    return traj.steps.copy(), running


def cumulative_to_csv(path, steps, values):
    with open(path, "w") as fh:
        fh.write("step,avg_slope\n")
        for k, v in zip(steps, values):
            fh.write(f"{int(k)},{v:.17g}\n")
