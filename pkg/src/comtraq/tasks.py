"""Trajectory-budget tasks: random generation, built-in scenarios, CSV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from shapely.geometry import LineString

from .dynamics import DynamicsParams
from .mpc import ReferenceTrajectory


@dataclass(frozen=True)
class TaskSpec:
    trajectory: ReferenceTrajectory
    budget: int
    name: str = ""

    def __post_init__(self):
        if self.budget < 0 or int(self.budget) != self.budget:
            raise ValueError(f"budget must be a non-negative integer, got {self.budget}")


@dataclass(frozen=True)
class TaskGenConfig:
    workspace: float = 5.0
    n_control_points: tuple = (4, 8)
    spacing: float = 0.1
    n_waypoints: tuple = (60, 250)
    budget_ratio: tuple = (0.05, 0.12)
    turn_radius_margin: float = 1.0
    max_attempts: int = 100


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def budget_for(n_waypoints: int, ratio: float) -> int:
    return round_half_up(ratio * n_waypoints)


def resample_polyline(points: np.ndarray, spacing: float | None = None, n: int | None = None) -> np.ndarray:
    """Resample a dense polyline by arc length.

    With ``spacing`` the samples sit at multiples of it plus the endpoint;
    with ``n`` exactly n evenly spaced samples are returned.
    """
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if n is not None:
        targets = np.linspace(0.0, total, n)
    else:
        targets = np.arange(0.0, total, spacing)
        if total - targets[-1] > 1e-6 * spacing:
            targets = np.append(targets, total)
    return np.column_stack([np.interp(targets, s, points[:, 0]), np.interp(targets, s, points[:, 1])])


def centripetal_spline(ctrl: np.ndarray, dense: int = 4000) -> np.ndarray:
    """Interpolating cubic through ``ctrl`` with centripetal knot spacing."""
    d = np.linalg.norm(np.diff(ctrl, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(np.sqrt(d))])
    cs = CubicSpline(t, ctrl, axis=0, bc_type="natural")
    return cs(np.linspace(0.0, t[-1], dense))


def min_turn_radius(wp: np.ndarray) -> float:
    """Smallest radius of the circle through any three consecutive waypoints."""
    a, b, c = wp[:-2], wp[1:-1], wp[2:]
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    cross = np.abs((b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0])
    with np.errstate(divide="ignore"):
        r = np.where(cross > 0, ab * bc * ca / (2.0 * np.maximum(cross, 1e-300)), np.inf)
    return float(r.min()) if len(r) else math.inf


def sample_task(gen: TaskGenConfig, rng: np.random.Generator, dyn: DynamicsParams | None = None,
                name: str = "") -> TaskSpec:
    """Random smooth path plus a budget proportional to its waypoint count."""
    dyn = dyn or DynamicsParams()
    r_feasible = dyn.wheelbase / math.tan(max(abs(dyn.delta_min), abs(dyn.delta_max)))
    lo, hi = gen.n_waypoints
    for _ in range(gen.max_attempts):
        k = int(rng.integers(gen.n_control_points[0], gen.n_control_points[1] + 1))
        ctrl = rng.uniform(0.0, gen.workspace, size=(k, 2))
        ratio = float(rng.uniform(*gen.budget_ratio))
        if np.any(np.linalg.norm(np.diff(ctrl, axis=0), axis=1) < 1e-6):
            continue
        wp = resample_polyline(centripetal_spline(ctrl), spacing=gen.spacing)
        if not lo <= len(wp) <= hi:
            continue
        if not LineString(wp).is_simple:
            continue
        if min_turn_radius(wp) < gen.turn_radius_margin * r_feasible:
            continue
        return TaskSpec(ReferenceTrajectory(wp), budget_for(len(wp), ratio), name)
    raise RuntimeError(f"no feasible task after {gen.max_attempts} attempts (config: {gen})")


def sample_suite(n: int, gen: TaskGenConfig, rng: np.random.Generator, dyn: DynamicsParams | None = None,
                 prefix: str = "task") -> list:
    return [sample_task(gen, rng, dyn, name=f"{prefix}{i:03d}") for i in range(n)]


def _scenario_s1() -> np.ndarray:
    # Gentle S-bend, ~13.4 m.
    t = np.linspace(0.0, 1.0, 4000)
    x = 10.0 * t
    y = 1.2 * np.sin(2.0 * np.pi * t)
    return np.column_stack([x, y])


def _scenario_s2() -> np.ndarray:
    # Two sharp turns early, a long gentle stretch, then a final turn; ~24.4 m.
    ctrl = np.array([[0.0, 0.0], [3.0, 0.2], [3.6, 2.4], [1.2, 3.4], [1.5, 5.6],
                     [5.0, 6.2], [8.5, 5.6], [10.5, 4.0], [11.0, 1.5]])
    return centripetal_spline(ctrl)


SCENARIOS = {
    # (path builder, waypoint count, budget)
    "s1-like": (_scenario_s1, 135, 10),
    "s2-like": (_scenario_s2, 245, 20),
}


def builtin_scenario(name: str) -> TaskSpec:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    build, n, budget = SCENARIOS[name]
    wp = resample_polyline(build(), n=n)
    return TaskSpec(ReferenceTrajectory(wp), budget, name)


def write_trajectory_csv(traj: ReferenceTrajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in traj.waypoints:
            w.writerow([repr(float(x)), repr(float(y))])


def read_trajectory_csv(path) -> ReferenceTrajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise ValueError(f"{path}: expected header 'x,y', got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    return ReferenceTrajectory(np.array(rows))


def write_suite(tasks, directory) -> Path:
    """Write each trajectory as CSV plus an index ``tasks.csv`` of budgets."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = directory / "tasks.csv"
    with open(index, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "trajectory", "budget"])
        for t in tasks:
            fname = f"{t.name}.csv"
            write_trajectory_csv(t.trajectory, directory / fname)
            w.writerow([t.name, fname, t.budget])
    return index


def read_suite(index_path) -> list:
    index_path = Path(index_path)
    out = []
    with open(index_path, newline="") as fh:
        for row in csv.DictReader(fh):
            traj = read_trajectory_csv(index_path.parent / row["trajectory"])
            out.append(TaskSpec(traj, int(row["budget"]), row["name"]))
    return out
