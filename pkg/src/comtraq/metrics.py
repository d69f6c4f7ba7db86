"""Table-style tracking metrics computed from an episode log."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .mpc import ReferenceTrajectory


@dataclass(frozen=True)
class MetricsReport:
    waypoints_followed: int
    mae: float
    goal_reached: bool
    updates_used: int
    steps: int

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(positions, traj: ReferenceTrajectory, radius: float = 0.1, updates_used: int = 0) -> MetricsReport:
    """Metrics for the executed (true) positions of one episode.

    * waypoints followed: reference waypoints with at least one executed
      position within ``radius``
    * MAE: mean over steps of the distance to the nearest reference waypoint
    * goal reached: final position within ``radius`` of the last waypoint

    ``positions`` is an (n, 2) array or an object with ``positions()`` and
    ``updates_used`` (an :class:`~comtraq.baselines.EpisodeLog`).
    """
    if hasattr(positions, "positions"):
        updates_used = positions.updates_used
        positions = positions.positions()
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pos) == 0:
        raise ValueError("cannot compute metrics for an empty log")
    wp = traj.waypoints
    dx = pos[:, None, 0] - wp[None, :, 0]
    dy = pos[:, None, 1] - wp[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    nearest = d.min(axis=1)
    return MetricsReport(
        waypoints_followed=int(np.sum(d.min(axis=0) <= radius)),
        # fsum is correctly rounded, so the result does not depend on summation order.
        mae=math.fsum(nearest.tolist()) / len(nearest),
        goal_reached=bool(d[-1, -1] <= radius),
        updates_used=int(updates_used),
        steps=len(pos),
    )
