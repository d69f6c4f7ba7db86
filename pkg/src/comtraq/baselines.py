"""Episode runners for ComTraQ-MPC and the three comparison methods.

Every runner uses the same environment, dynamics and per-episode random
substreams; they differ only in where the localization decision (and, for
the vanilla DQN, the physical control) comes from.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import ControlInput, DynamicsParams, clamp_controls
from .env import EnvConfig, Streams, TrackingEnv
from .mpc import MpcConfig, batch_costs, reference_window, rollout, solve
from .qnet import Adam, QNetwork, forward
from .scheduler import (
    N_FEATURES,
    ReplayBuffer,
    TrainConfig,
    TrainLog,
    replay_transition,
    epsilon_at,
    featurize,
    select_action,
    train_step,
)
from .tasks import TaskSpec

METHODS = ("comtraq", "naive-mpc", "passive-mpc", "vanilla-dqn")

LOG_COLUMNS = (
    "step", "x", "y", "v", "psi",
    "mean_x", "mean_y", "mean_v", "mean_psi",
    "std_x", "std_y", "std_v", "std_psi",
    "a", "delta", "u_l", "granted", "denied",
    "r_dqn", "r_mpc", "remaining", "progress", "q0", "q1",
)


@dataclass
class EpisodeLog:
    method: str
    task: str
    seed: int
    budget: int
    records: list = field(default_factory=list)
    goal_reached: bool = False
    diverged: bool = False

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def updates_used(self) -> int:
        return sum(r["granted"] for r in self.records)

    def positions(self) -> np.ndarray:
        return np.array([[r["x"], r["y"]] for r in self.records]).reshape(-1, 2)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "task": self.task,
            "seed": self.seed,
            "budget": self.budget,
            "steps": self.steps,
            "updates_used": self.updates_used,
            "goal_reached": self.goal_reached,
            "diverged": self.diverged,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.records:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in LOG_COLUMNS])
        return buf.getvalue()

    def write(self, csv_path, json_path=None) -> None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.to_csv())
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.summary(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def read_episode_csv(path) -> list:
    """Parse an EpisodeLog CSV back into records (numbers as float/int)."""
    ints = {"step", "u_l", "granted", "denied", "remaining", "progress"}
    with open(path, newline="") as fh:
        return [{k: (int(v) if k in ints else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


def _record(k, env, u_p, u_l, out, q) -> dict:
    st, s = env.state, env.state.summary
    t, m = st.true_state, s.mean
    return {
        "step": k,
        "x": t.x, "y": t.y, "v": t.v, "psi": t.psi,
        "mean_x": m.x, "mean_y": m.y, "mean_v": m.v, "mean_psi": m.psi,
        "std_x": float(s.std[0]), "std_y": float(s.std[1]), "std_v": float(s.std[2]), "std_psi": float(s.std[3]),
        "a": u_p.a, "delta": u_p.delta,
        "u_l": int(u_l), "granted": int(out.info["granted"]), "denied": int(out.info["violation"]),
        "r_dqn": float(out.r_dqn), "r_mpc": float(out.r_mpc),
        "remaining": st.remaining, "progress": st.progress,
        "q0": float(q[0]) if q is not None else math.nan,
        "q1": float(q[1]) if q is not None else math.nan,
    }


def run_mpc_episode(task: TaskSpec, localize, method: str, seed: int, env_cfg: EnvConfig | None = None,
                    dyn: DynamicsParams | None = None, mpc_cfg: MpcConfig | None = None) -> EpisodeLog:
    """Closed loop with MPC controls; ``localize(env, k)`` returns ``(u_l, q)``."""
    env = TrackingEnv(task, env_cfg, dyn)
    streams = Streams.from_seed(seed)
    env.reset(streams)
    mpc_cfg = mpc_cfg or MpcConfig()
    elog = EpisodeLog(method, task.name, seed, task.budget)
    warm = None
    k = 0
    while not env.state.done:
        u_l, q = localize(env, k)
        sol = solve(env.state.summary.mean, task.trajectory, env.state.progress, mpc_cfg, env.dyn, streams.mpc, warm)
        warm = sol.controls
        out = env.step(sol.first, u_l, sol.optimal_cost)
        k += 1
        elog.records.append(_record(k, env, sol.first, u_l, out, q))
        elog.goal_reached = out.info["goal_reached"]
        elog.diverged = out.info["diverged"]
    return elog


def run_passive_mpc(task, seed, env_cfg=None, dyn=None, mpc_cfg=None) -> EpisodeLog:
    return run_mpc_episode(task, lambda env, k: (0, None), "passive-mpc", seed, env_cfg, dyn, mpc_cfg)


def naive_interval(n_waypoints: int, budget: int) -> int:
    return max(n_waypoints // budget, 1) if budget > 0 else 0


def run_naive_mpc(task, seed, env_cfg=None, dyn=None, mpc_cfg=None) -> EpisodeLog:
    """Localize every ``n_waypoints // budget`` steps until the budget is spent."""
    interval = naive_interval(len(task.trajectory), task.budget)

    def localize(env, k):
        # The decision at loop index k produces step k + 1.
        step = k + 1
        due = interval > 0 and step % interval == 0 and env.state.remaining > 0
        return int(due), None

    return run_mpc_episode(task, localize, "naive-mpc", seed, env_cfg, dyn, mpc_cfg)


def run_comtraq(task, net: QNetwork, seed, env_cfg=None, dyn=None, mpc_cfg=None) -> EpisodeLog:
    """Greedy, budget-masked Q-network decisions with MPC control."""

    def localize(env, k):
        st = env.state
        x = featurize(st.summary, st.remaining, task.budget, st.progress, task.trajectory)
        q = forward(net, x)
        return select_action(q, 0.0, st.remaining, True), q

    return run_mpc_episode(task, localize, "comtraq", seed, env_cfg, dyn, mpc_cfg)


# --- vanilla DQN over a joint (acceleration, steering, localization) grid ---

N_ACCEL_BINS = 5
N_STEER_BINS = 7
N_JOINT_ACTIONS = N_ACCEL_BINS * N_STEER_BINS * 2
REF_LOOKAHEAD = (2, 5, 10)
VANILLA_FEATURES = N_FEATURES + 2 * len(REF_LOOKAHEAD)


def encode_action(i_accel: int, i_steer: int, u_l: int) -> int:
    return (i_accel * N_STEER_BINS + i_steer) * 2 + u_l


def decode_action(index: int) -> tuple:
    if not 0 <= index < N_JOINT_ACTIONS:
        raise ValueError(f"action index {index} outside [0, {N_JOINT_ACTIONS})")
    rest, u_l = divmod(index, 2)
    i_accel, i_steer = divmod(rest, N_STEER_BINS)
    return i_accel, i_steer, u_l


def action_control(index: int, dyn: DynamicsParams) -> tuple:
    i_accel, i_steer, u_l = decode_action(index)
    a = np.linspace(dyn.a_min, dyn.a_max, N_ACCEL_BINS)[i_accel]
    d = np.linspace(dyn.delta_min, dyn.delta_max, N_STEER_BINS)[i_steer]
    return ControlInput(float(a), float(d)), u_l


def vanilla_features(env: TrackingEnv) -> np.ndarray:
    """Scheduler features plus upcoming waypoints in the belief-mean body frame."""
    st, task = env.state, env.task
    base = featurize(st.summary, st.remaining, task.budget, st.progress, task.trajectory)
    m = st.summary.mean
    n = len(task.trajectory)
    pts = task.trajectory.waypoints[[min(st.progress + k, n - 1) for k in REF_LOOKAHEAD]]
    d = pts - np.array([m.x, m.y])
    c, s = math.cos(m.psi), math.sin(m.psi)
    body = np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])
    return np.concatenate([base, body.ravel()])


def _mask_q(q: np.ndarray, remaining: int) -> np.ndarray:
    if remaining > 0:
        return q
    q = q.copy()
    q[1::2] = -np.inf
    return q


def held_control_cost(env: TrackingEnv, u: ControlInput, mpc_cfg: MpcConfig) -> float:
    """Tracking cost of holding ``u`` over the MPC horizon from the belief mean.

    Stands in for the optimized MPC cost in the reward when no MPC runs.
    """
    seq = clamp_controls(np.tile([u.a, u.delta], (1, mpc_cfg.horizon, 1)), env.dyn)
    refs = reference_window(env.task.trajectory, env.state.progress, mpc_cfg.horizon)
    return float(batch_costs(rollout(env.state.summary.mean.as_array(), seq, env.dyn), refs)[0])


def train_vanilla_dqn(tasks: list, cfg: TrainConfig, seed: int, env_cfg: EnvConfig | None = None,
                      dyn: DynamicsParams | None = None, mpc_cfg: MpcConfig | None = None) -> tuple:
    env_cfg = EnvConfig(**{**asdict(env_cfg or EnvConfig()), "training_mode": True})
    dyn = dyn or DynamicsParams()
    mpc_cfg = mpc_cfg or MpcConfig()
    init_ss, task_ss, replay_ss = np.random.SeedSequence([seed, 2]).spawn(3)
    net = QNetwork.init((VANILLA_FEATURES, *cfg.hidden, N_JOINT_ACTIONS), np.random.default_rng(init_ss))
    target = net.copy()
    opt = Adam(lr=cfg.learning_rate)
    buf = ReplayBuffer(cfg.replay_capacity, VANILLA_FEATURES)
    task_rng = np.random.default_rng(task_ss)
    replay_rng = np.random.default_rng(replay_ss)
    tlog = TrainLog()
    step = episode = 0
    while step < cfg.total_env_steps:
        task_id = int(task_rng.integers(len(tasks)))
        env = TrackingEnv(tasks[task_id], env_cfg, dyn)
        streams = Streams.from_seed(np.random.SeedSequence([seed, 3, episode]))
        env.reset(streams)
        x = vanilla_features(env)
        ret, losses, used = 0.0, [], 0
        eps = epsilon_at(step, cfg)
        while not env.state.done and step < cfg.total_env_steps:
            eps = epsilon_at(step, cfg)
            if streams.policy.random() < eps:
                a_idx = int(streams.policy.integers(N_JOINT_ACTIONS))
                if cfg.explore_valid_only and env.state.remaining <= 0:
                    a_idx -= a_idx % 2  # same control, no update
            else:
                a_idx = int(np.argmax(forward(net, x)))
            u, u_l = action_control(a_idx, dyn)
            out = env.step(u, u_l, held_control_cost(env, u, mpc_cfg))
            x_next = vanilla_features(env)
            buf.push(replay_transition(x, a_idx, out, x_next, cfg.gamma))
            x = x_next
            ret += out.r_dqn
            used += int(out.info["granted"])
            step += 1
            if len(buf) >= max(cfg.warmup, cfg.batch_size):
                losses.append(train_step(net, target, buf.sample(cfg.batch_size, replay_rng), cfg.gamma, opt))
            if step % cfg.target_sync_period == 0:
                target.load_params_from(net)
        tlog.rows.append({
            "episode": episode, "task_id": task_id, "return": float(ret),
            "loss_mean": float(np.mean(losses)) if losses else float("nan"), "epsilon": float(eps),
            "updates_used": used, "steps": env.state.steps, "goal_reached": 0,
        })
        episode += 1
    return net, tlog


def run_vanilla_episode(task, net: QNetwork, seed, env_cfg=None, dyn=None, mpc_cfg=None) -> EpisodeLog:
    """Greedy joint-action policy; localization is masked once the budget is spent."""
    env = TrackingEnv(task, env_cfg, dyn)
    streams = Streams.from_seed(seed)
    env.reset(streams)
    mpc_cfg = mpc_cfg or MpcConfig()
    elog = EpisodeLog("vanilla-dqn", task.name, seed, task.budget)
    k = 0
    while not env.state.done:
        q = forward(net, vanilla_features(env))
        a_idx = int(np.argmax(_mask_q(q, env.state.remaining)))
        u, u_l = action_control(a_idx, env.dyn)
        out = env.step(u, u_l, held_control_cost(env, u, mpc_cfg))
        k += 1
        qpair = (float(np.max(q[0::2])), float(np.max(q[1::2])))
        elog.records.append(_record(k, env, u, u_l, out, qpair))
        elog.goal_reached = out.info["goal_reached"]
        elog.diverged = out.info["diverged"]
    return elog


def run_vanilla_dqn(train_tasks, eval_tasks, cfg: TrainConfig, seed: int, env_cfg=None, dyn=None, mpc_cfg=None):
    net, _ = train_vanilla_dqn(train_tasks, cfg, seed, env_cfg, dyn, mpc_cfg)
    return net, [run_vanilla_episode(t, net, seed, env_cfg, dyn, mpc_cfg) for t in eval_tasks]
