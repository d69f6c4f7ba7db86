"""DQN localization scheduler: features, replay, TD learning, meta-training."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .belief import BeliefSummary
from .dynamics import DynamicsParams
from .env import EnvConfig, Streams, TrackingEnv
from .mpc import MpcConfig, ReferenceTrajectory, solve
from .qnet import Adam, QNetwork, config_digest, forward, mse_loss_and_grads

log = logging.getLogger(__name__)

N_FEATURES = 11
LAYER_SIZES = (N_FEATURES, 64, 64, 2)


def featurize(b: BeliefSummary, remaining: int, budget: int, progress: int, traj: ReferenceTrajectory) -> np.ndarray:
    """11-vector seen by the Q-network.

    Positions are shifted to the trajectory's bounding box and divided by its
    diagonal so longer, unseen paths land in the same range.
    """
    m = b.mean
    raw = np.array([m.x, m.y, m.v, m.psi, *b.std], dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"non-finite belief summary: mean={m}, std={b.std}")
    wp = traj.waypoints
    lo = wp.min(axis=0)
    diag = max(float(np.linalg.norm(wp.max(axis=0) - lo)), 1e-9)
    budget_frac = remaining / budget if budget > 0 else 0.0
    return np.array([
        (m.x - lo[0]) / diag,
        (m.y - lo[1]) / diag,
        m.v,
        math.sin(m.psi),
        math.cos(m.psi),
        *b.std,
        min(max(budget_frac, 0.0), 1.0),
        progress / (len(traj) - 1),
    ])


@dataclass
class Transition:
    input: np.ndarray
    action: int
    reward: float
    next_input: np.ndarray
    done: bool


class Batch(NamedTuple):
    x: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    x_next: np.ndarray
    done: np.ndarray

    @classmethod
    def from_transitions(cls, ts) -> "Batch":
        return cls(
            np.array([t.input for t in ts], dtype=float),
            np.array([t.action for t in ts], dtype=int),
            np.array([t.reward for t in ts], dtype=float),
            np.array([t.next_input for t in ts], dtype=float),
            np.array([t.done for t in ts], dtype=bool),
        )


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, n_features: int = N_FEATURES):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.x = np.zeros((capacity, n_features))
        self.x_next = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0
        self._pushed = 0  # total pushes, used as insertion ids

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._next
        self.x[i] = t.input
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.x_next[i] = t.next_input
        self.done[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._pushed += 1

    def oldest_first(self) -> np.ndarray:
        """Slot indices ordered from oldest to newest."""
        start = (self._next - self._size) % self.capacity
        return (start + np.arange(self._size)) % self.capacity

    def get(self, idx) -> Batch:
        return Batch(self.x[idx], self.actions[idx], self.rewards[idx], self.x_next[idx], self.done[idx])

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.get(rng.integers(0, self._size, size=n))


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 64
    target_sync_period: int = 1000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 50_000
    replay_capacity: int = 100_000
    warmup: int = 1000
    total_env_steps: int = 200_000
    n_tasks: int = 100
    hidden: tuple = (64, 64)
    # Random exploratory picks skip the update action once the budget is
    # spent; greedy picks stay unmasked and still meet r_min.
    explore_valid_only: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        for name in ("batch_size", "target_sync_period", "epsilon_decay_steps", "replay_capacity", "n_tasks"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.total_env_steps < 0 or self.warmup < 0:
            raise ValueError("total_env_steps and warmup must be >= 0")


def epsilon_at(step: int, cfg: TrainConfig) -> float:
    if step >= cfg.epsilon_decay_steps:
        return cfg.epsilon_end
    frac = step / cfg.epsilon_decay_steps
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    if len(batch.rewards) == 0:
        raise ValueError("empty batch")
    q_next = forward(target_net, batch.x_next).max(axis=1)
    return np.where(batch.done, batch.rewards, batch.rewards + gamma * q_next)


class NonFiniteLoss(FloatingPointError):
    pass


def train_step(net: QNetwork, target_net: QNetwork, batch: Batch, gamma: float, opt: Adam) -> float:
    """One Adam step on the TD regression loss; returns the pre-step loss."""
    y = td_targets(batch, target_net, gamma)
    loss, grads = mse_loss_and_grads(net, batch.x, batch.actions, y)
    if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteLoss(
            f"non-finite loss {loss} (targets in [{np.min(y)}, {np.max(y)}], "
            f"rewards in [{batch.rewards.min()}, {batch.rewards.max()}], Adam step {opt.t})"
        )
    opt.step(net.params(), grads)
    return loss


def select_action(q, epsilon: float, remaining: int, mask_on_empty: bool, rng: np.random.Generator | None = None,
                  mask_exploration: bool = False) -> int:
    """Epsilon-greedy over {0: passive, 1: active}; ties go to 0.

    ``q`` is the pair of Q-values. No random draw is made when epsilon is 0.
    ``mask_exploration`` masks only the random branch.
    """
    empty = remaining <= 0
    if epsilon > 0 and rng.random() < epsilon:
        allowed = [0] if empty and (mask_on_empty or mask_exploration) else [0, 1]
        return int(allowed[rng.integers(len(allowed))])
    if mask_on_empty and empty:
        return 0
    return 1 if q[1] > q[0] else 0


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    losses: list = field(default_factory=list)  # per train step
    warnings: list = field(default_factory=list)

    COLUMNS = ("episode", "task_id", "return", "loss_mean", "epsilon", "updates_used", "steps", "goal_reached")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([r[c] if not isinstance(r[c], float) else repr(r[c]) for c in self.COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def replay_transition(x, action: int, out, x_next, gamma: float) -> Transition:
    """Replay entry for one env step.

    Reaching the goal is terminal. Diverging is terminal too, valued as if
    its reward continued forever (r / (1 - gamma)), so losing the track is
    never cheaper than following it. Hitting the step limit is a truncation
    and bootstraps like any other step.
    """
    if out.info["goal_reached"]:
        return Transition(x, action, out.r_dqn, x_next, True)
    if out.info["diverged"]:
        return Transition(x, action, out.r_dqn / (1.0 - gamma), x_next, True)
    return Transition(x, action, out.r_dqn, x_next, False)


def meta_train(
    tasks: list,
    cfg: TrainConfig,
    seed: int,
    env_cfg: EnvConfig | None = None,
    dyn: DynamicsParams | None = None,
    mpc_cfg: MpcConfig | None = None,
    progress_every: int = 0,
) -> tuple:
    """Train one Q-network across a suite of trajectory-budget tasks.

    Each episode draws a task uniformly from ``tasks`` and runs the full
    closed loop: the MPC plans from the belief mean, the network (epsilon
    greedy, unmasked) decides on localization, and the environment returns
    the augmented reward. Transitions from all tasks share one replay buffer,
    so every minibatch mixes tasks.

    See :func:`replay_transition` for how episode endings are stored.
    """
    env_cfg = env_cfg or EnvConfig()
    if not env_cfg.training_mode:
        env_cfg = EnvConfig(**{**asdict(env_cfg), "training_mode": True})
    dyn = dyn or DynamicsParams()
    mpc_cfg = mpc_cfg or MpcConfig()
    ss = np.random.SeedSequence(seed)
    init_ss, task_ss, replay_ss, episode_ss = ss.spawn(4)
    net = QNetwork.init((N_FEATURES, *cfg.hidden, 2), np.random.default_rng(init_ss))
    target = net.copy()
    opt = Adam(lr=cfg.learning_rate)
    buf = ReplayBuffer(cfg.replay_capacity)
    task_rng = np.random.default_rng(task_ss)
    replay_rng = np.random.default_rng(replay_ss)
    tlog = TrainLog()

    step = 0
    episode = 0
    while step < cfg.total_env_steps:
        task_id = int(task_rng.integers(len(tasks)))
        task = tasks[task_id]
        env = TrackingEnv(task, env_cfg, dyn)
        streams = Streams.from_seed(np.random.SeedSequence([seed, 1, episode]))
        st = env.reset(streams)
        x = featurize(st.summary, st.remaining, task.budget, st.progress, task.trajectory)
        warm = None
        ep_return, ep_losses, eps = 0.0, [], epsilon_at(step, cfg)
        used = 0
        while not env.state.done and step < cfg.total_env_steps:
            eps = epsilon_at(step, cfg)
            sol = solve(env.state.summary.mean, task.trajectory, env.state.progress, mpc_cfg, dyn, streams.mpc, warm)
            warm = sol.controls
            u_l = select_action(forward(net, x), eps, env.state.remaining, False, streams.policy, cfg.explore_valid_only)
            out = env.step(sol.first, u_l, sol.optimal_cost)
            st = env.state
            x_next = featurize(st.summary, st.remaining, task.budget, st.progress, task.trajectory)
            buf.push(replay_transition(x, u_l, out, x_next, cfg.gamma))
            x = x_next
            ep_return += out.r_dqn
            used += int(out.info["granted"])
            step += 1
            if len(buf) >= max(cfg.warmup, cfg.batch_size):
                loss = train_step(net, target, buf.sample(cfg.batch_size, replay_rng), cfg.gamma, opt)
                ep_losses.append(loss)
                tlog.losses.append(loss)
            if step % cfg.target_sync_period == 0:
                target.load_params_from(net)
        tlog.rows.append({
            "episode": episode,
            "task_id": task_id,
            "return": float(ep_return),
            "loss_mean": float(np.mean(ep_losses)) if ep_losses else float("nan"),
            "epsilon": float(eps),
            "updates_used": used,
            "steps": env.state.steps,
            "goal_reached": int(env.state.done and bool(np.linalg.norm(
                np.array([env.state.true_state.x, env.state.true_state.y]) - task.trajectory.goal) <= env_cfg.goal_radius)),
        })
        if progress_every and (episode + 1) % progress_every == 0:
            recent = tlog.rows[-progress_every:]
            log.info("episode %d step %d eps %.3f mean return %.1f updates %.1f/%s",
                     episode + 1, step, eps, np.mean([r["return"] for r in recent]),
                     np.mean([r["updates_used"] for r in recent]), task.budget)
        episode += 1
    return net, tlog


def train_digest(cfg: TrainConfig, env_cfg: EnvConfig, dyn: DynamicsParams, mpc_cfg: MpcConfig) -> str:
    return config_digest({"train": asdict(cfg), "env": asdict(env_cfg), "dyn": asdict(dyn), "mpc": asdict(mpc_cfg)})
