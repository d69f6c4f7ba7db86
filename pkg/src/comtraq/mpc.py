"""Sampling-based (cross-entropy) MPC for waypoint tracking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .dynamics import ControlInput, DynamicsParams, PhysicalState, clamp_controls


@dataclass(frozen=True)
class ReferenceTrajectory:
    waypoints: np.ndarray  # (n, 2), meters
    nominal_speed: float = 0.3
    max_spacing: float = field(default=0.2, repr=False)

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 2:
            raise ValueError(f"waypoints must have shape (n, 2), got {wp.shape}")
        if len(wp) < 2:
            raise ValueError("a reference trajectory needs at least 2 waypoints")
        gaps = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        if np.any(gaps == 0):
            raise ValueError("consecutive waypoints must be distinct")
        if np.any(gaps > self.max_spacing + 1e-9):
            raise ValueError(
                f"waypoint spacing {gaps.max():.3f} m exceeds {self.max_spacing} m"
            )
        object.__setattr__(self, "waypoints", wp)

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 10
    population: int = 64
    elites: int = 8
    iterations: int = 5
    init_std: tuple = (0.1, 0.3)
    min_std: tuple = (0.01, 0.03)

    def __post_init__(self):
        if self.horizon < 1 or self.iterations < 1:
            raise ValueError("horizon and iterations must be >= 1")
        if not 1 <= self.elites <= self.population:
            raise ValueError("need 1 <= elites <= population")


@dataclass
class MpcSolution:
    controls: np.ndarray  # (horizon, 2) rows of (a, delta)
    optimal_cost: float
    best_cost_history: list = field(default_factory=list)  # best-so-far after each iteration

    @property
    def first(self) -> ControlInput:
        return ControlInput(float(self.controls[0, 0]), float(self.controls[0, 1]))


def nearest_progress_index(traj: ReferenceTrajectory, point, prev: int, window: int = 10) -> int:
    """Closest waypoint in ``[prev, prev + window]``; never moves backwards."""
    hi = min(prev + window, len(traj) - 1)
    d = np.linalg.norm(traj.waypoints[prev : hi + 1] - np.asarray(point, dtype=float), axis=1)
    return prev + int(np.argmin(d))


def reference_window(traj: ReferenceTrajectory, progress: int, h: int) -> np.ndarray:
    idx = np.minimum(np.arange(progress + 1, progress + h + 1), len(traj) - 1)
    return traj.waypoints[idx]


def tracking_cost(predicted, refs) -> float:
    """Sum of squared position errors between predicted states and refs."""
    predicted = np.asarray(predicted, dtype=float)
    refs = np.asarray(refs, dtype=float)
    if len(predicted) != len(refs):
        raise ValueError(f"length mismatch: {len(predicted)} states vs {len(refs)} refs")
    if len(predicted) == 0:
        return 0.0
    return float(np.sum((predicted[:, :2] - refs) ** 2))


def rollout(s0: np.ndarray, controls: np.ndarray, p: DynamicsParams) -> np.ndarray:
    """Noiseless rollout of a batch of control sequences.

    ``controls`` has shape (batch, horizon, 2); returns (batch, horizon, 4)
    holding the states after each control. Same arithmetic as
    :func:`~comtraq.dynamics.step_array`, unrolled over plain 1-d arrays.
    """
    batch, horizon, _ = controls.shape
    states = np.empty((batch, horizon, 4))
    dv = controls[:, :, 0] * p.dt
    turn = np.tan(controls[:, :, 1]) * p.dt
    x = np.full(batch, s0[0])
    y = np.full(batch, s0[1])
    v = np.full(batch, s0[2])
    psi = np.full(batch, s0[3])
    two_pi = 2.0 * np.pi
    for t in range(horizon):
        x = x + v * np.cos(psi) * p.dt
        y = y + v * np.sin(psi) * p.dt
        psi = np.pi - np.mod(np.pi - (psi + v / p.wheelbase * turn[:, t]), two_pi)
        v = np.minimum(np.maximum(v + dv[:, t], p.v_min), p.v_max)
        states[:, t, 0] = x
        states[:, t, 1] = y
        states[:, t, 2] = v
        states[:, t, 3] = psi
    return states


@numba.njit(cache=True)
def _rollout_costs(s0, controls, refs, dt, wheelbase, v_min, v_max):
    batch, horizon = controls.shape[0], controls.shape[1]
    costs = np.zeros(batch)
    two_pi = 2.0 * np.pi
    for b in range(batch):
        x, y, v, psi = s0[0], s0[1], s0[2], s0[3]
        c = 0.0
        for t in range(horizon):
            nx = x + v * np.cos(psi) * dt
            ny = y + v * np.sin(psi) * dt
            psi = np.pi - np.mod(np.pi - (psi + v / wheelbase * (np.tan(controls[b, t, 1]) * dt)), two_pi)
            v = min(max(v + controls[b, t, 0] * dt, v_min), v_max)
            x, y = nx, ny
            c += (x - refs[t, 0]) ** 2 + (y - refs[t, 1]) ** 2
        costs[b] = c
    return costs


def rollout_costs(s0: np.ndarray, controls: np.ndarray, refs: np.ndarray, p: DynamicsParams) -> np.ndarray:
    """Tracking cost of each noiseless rollout, without materializing states."""
    return _rollout_costs(np.ascontiguousarray(s0, dtype=float), np.ascontiguousarray(controls, dtype=float),
                          np.ascontiguousarray(refs, dtype=float), p.dt, p.wheelbase, p.v_min, p.v_max)


def batch_costs(states: np.ndarray, refs: np.ndarray) -> np.ndarray:
    return np.sum((states[..., :2] - refs) ** 2, axis=(-2, -1))


def shift_warm_start(controls: np.ndarray) -> np.ndarray:
    return np.concatenate([controls[1:], controls[-1:]], axis=0)


def solve(
    mean: PhysicalState,
    traj: ReferenceTrajectory,
    progress: int,
    cfg: MpcConfig,
    dyn: DynamicsParams,
    rng: np.random.Generator,
    warm: np.ndarray | None = None,
) -> MpcSolution:
    """CEM over control sequences, scored on the noiseless rollout of ``mean``.

    ``warm`` is the previous solution's control sequence; it is shifted by one
    step to seed the sampling mean. The best sequence ever sampled is returned,
    so the reported cost never gets worse with more iterations.
    """
    H = cfg.horizon
    refs = reference_window(traj, progress, H)
    s0 = mean.as_array()
    if warm is None:
        mu = np.zeros((H, 2))
    else:
        warm = np.asarray(warm, dtype=float)
        if warm.shape != (H, 2):
            raise ValueError(f"warm start must have shape {(H, 2)}, got {warm.shape}")
        mu = shift_warm_start(warm)
    sigma = np.broadcast_to(np.asarray(cfg.init_std, dtype=float), (H, 2)).copy()
    floor = np.asarray(cfg.min_std, dtype=float)

    best_u, best_cost = None, np.inf
    history = []
    for _ in range(cfg.iterations):
        samples = mu + sigma * rng.standard_normal((cfg.population, H, 2))
        # Keep the current mean in the population so a good warm start survives.
        samples[0] = mu
        samples = clamp_controls(samples, dyn)
        costs = rollout_costs(s0, samples, refs, dyn)
        order = np.argsort(costs, kind="stable")
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_u = samples[order[0]].copy()
        history.append(best_cost)
        elite = samples[order[: cfg.elites]]
        mu = elite.mean(axis=0)
        sigma = np.maximum(elite.std(axis=0), floor)
    return MpcSolution(best_u, best_cost, history)
