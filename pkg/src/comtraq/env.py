"""Budgeted POMDP tracking environment.

Ties the dynamics, the particle belief and the localization budget together.
Each step takes the physical control chosen by the planner, the localization
decision and the planner's optimized cost (the MPC feedback signal), and
returns the DQN reward.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import belief as bel
from .dynamics import ControlInput, DynamicsParams, PhysicalState, clamp_control, step_stochastic
from .mpc import nearest_progress_index
from .tasks import TaskSpec


@dataclass(frozen=True)
class EnvConfig:
    alpha: float = 0.5
    r_min: float = -1000.0
    goal_radius: float = 0.1
    max_steps_factor: float = 3.0
    max_steps: int | None = None  # overrides the factor when set
    divergence_radius: float = 5.0
    progress_window: int = 10
    n_particles: int = 500
    training_mode: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.goal_radius > 0:
            raise ValueError("goal_radius must be positive")

    def step_limit(self, n_waypoints: int) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return int(round(self.max_steps_factor * n_waypoints))


@dataclass
class EnvState:
    true_state: PhysicalState
    belief: bel.ParticleSet
    remaining: int
    progress: int = 0
    steps: int = 0
    done: bool = False
    summary: bel.BeliefSummary | None = None


@dataclass
class StepOutcome:
    observation: PhysicalState | None
    r_dqn: float
    r_mpc: float
    r_deviation: float
    done: bool
    info: dict = field(default_factory=dict)


class EpisodeOver(RuntimeError):
    pass


def observe(s_true: PhysicalState, u_l: int) -> PhysicalState | None:
    """All-or-nothing observation: the exact state iff an update is made."""
    return s_true if u_l == 1 else None


def compute_reward(r_mpc: float, dev: float, violated: bool, cfg: EnvConfig) -> float:
    if violated:
        return cfg.r_min
    return r_mpc - (1.0 - cfg.alpha) * dev


def initial_state(task: TaskSpec) -> PhysicalState:
    (x0, y0), (x1, y1) = task.trajectory.waypoints[:2]
    return PhysicalState(float(x0), float(y0), 0.0, float(np.arctan2(y1 - y0, x1 - x0)))


@dataclass
class Streams:
    """Independent random substreams of one episode.

    ``slip`` drives the true state, ``particles`` the belief, ``mpc`` the
    planner and ``policy`` any exploration. Runners that differ only in
    localization policy therefore see identical slip draws per step index.
    """
    slip: np.random.Generator
    particles: np.random.Generator
    mpc: np.random.Generator
    policy: np.random.Generator

    @classmethod
    def from_seed(cls, seed) -> "Streams":
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        return cls(*(np.random.default_rng(s) for s in ss.spawn(4)))


class TrackingEnv:
    def __init__(self, task: TaskSpec, cfg: EnvConfig | None = None, dyn: DynamicsParams | None = None):
        self.task = task
        self.cfg = cfg or EnvConfig()
        self.dyn = dyn or DynamicsParams()
        self.max_steps = self.cfg.step_limit(len(task.trajectory))
        self.state: EnvState | None = None
        self.streams: Streams | None = None

    def reset(self, streams: Streams) -> EnvState:
        s0 = initial_state(self.task)
        ps = bel.init_delta(s0, self.cfg.n_particles)
        self.streams = streams
        self.state = EnvState(s0, ps, self.task.budget, summary=bel.summarize(ps))
        return self.state

    @property
    def belief_summary(self) -> bel.BeliefSummary:
        return self.state.summary

    def step(self, u_p: ControlInput, u_l: int, mpc_cost: float) -> StepOutcome:
        st = self.state
        if st is None or st.done:
            raise EpisodeOver("step() called on a finished or unreset episode")
        if u_l not in (0, 1):
            raise ValueError(f"localization action must be 0 or 1, got {u_l}")
        cfg, dyn, wp = self.cfg, self.dyn, self.task.trajectory.waypoints
        u_p = clamp_control(u_p, dyn)

        violated = u_l == 1 and st.remaining == 0
        granted = u_l == 1 and not violated
        remaining = st.remaining - int(granted)

        true_state = step_stochastic(st.true_state, u_p, dyn, self.streams.slip)
        ps = bel.predict(st.belief, u_p, dyn, self.streams.particles)
        obs = observe(true_state, int(granted))
        if obs is not None:
            ps = bel.collapse_to(ps, obs)
        summary = bel.summarize(ps)

        r_mpc = -cfg.alpha * float(mpc_cost)
        if cfg.training_mode:
            dev = float(np.hypot(true_state.x - summary.mean.x, true_state.y - summary.mean.y))
            r_dev = (1.0 - cfg.alpha) * dev
        else:
            dev, r_dev = 0.0, 0.0
        r_dqn = compute_reward(r_mpc, dev, violated, cfg)

        progress = nearest_progress_index(
            self.task.trajectory, (summary.mean.x, summary.mean.y), st.progress, cfg.progress_window
        )
        steps = st.steps + 1
        true_xy = np.array([true_state.x, true_state.y])
        goal = bool(np.linalg.norm(true_xy - wp[-1]) <= cfg.goal_radius)
        diverged = bool(np.min(np.linalg.norm(wp - true_xy, axis=1)) > cfg.divergence_radius)
        done = goal or diverged or steps >= self.max_steps

        self.state = EnvState(true_state, ps, remaining, progress, steps, done, summary)
        info = {
            "progress": progress,
            "remaining": remaining,
            "belief_std": summary.std,
            "granted": granted,
            "violation": violated,
            "goal_reached": goal,
            "diverged": diverged,
        }
        return StepOutcome(obs, r_dqn, r_mpc, r_dev, done, info)
