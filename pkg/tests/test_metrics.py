import math

import numpy as np

from comtraq.metrics import compute_metrics
from comtraq.mpc import ReferenceTrajectory
from conftest import straight_line


def dist(p, w):
    dx, dy = p[0] - w[0], p[1] - w[1]
    return math.sqrt(dx * dx + dy * dy)


def brute_force_metrics(positions, waypoints, radius):
    """Double loop over (steps x waypoints)."""
    followed = 0
    for w in waypoints:
        if any(dist(p, w) <= radius for p in positions):
            followed += 1
    nearest = []
    for p in positions:
        best = math.inf
        for w in waypoints:
            best = min(best, dist(p, w))
        nearest.append(best)
    goal = dist(positions[-1], waypoints[-1]) <= radius
    return followed, math.fsum(nearest) / len(nearest), goal


def test_perfect_tracking():
    traj = straight_line(40)
    r = compute_metrics(traj.waypoints.copy(), traj, 0.1)
    assert r.waypoints_followed == 40 and r.mae == 0.0 and r.goal_reached


def test_stationary_at_start():
    traj = straight_line(40)
    r = compute_metrics(np.zeros((25, 2)), traj, 0.1)
    # Waypoints 0 and 1 lie within 0.1 m of the start.
    assert r.waypoints_followed == 2
    assert not r.goal_reached
    assert r.steps == 25


def test_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        wp = np.cumsum(rng.uniform(0.02, 0.1, size=(n, 2)) * rng.choice([-1, 1], size=2), axis=0)
        traj = ReferenceTrajectory(wp)
        pos = wp[rng.integers(0, n, 50)] + rng.normal(0, 0.08, size=(50, 2))
        radius = float(rng.uniform(0.05, 0.2))
        r = compute_metrics(pos, traj, radius)
        f, mae, goal = brute_force_metrics(pos.tolist(), wp.tolist(), radius)
        assert r.waypoints_followed == f
        assert r.mae == mae
        assert r.goal_reached == goal
