# Meta-training the localization scheduler
# ========================================
#
# One Q-network is trained across a suite of random trajectory-budget tasks.
# This demo uses a short run so it finishes in a few minutes; the acceptance
# suite trains for longer.
import logging

import numpy as np

from comtraq.env import EnvConfig
from comtraq.qnet import save_checkpoint
from comtraq.scheduler import TrainConfig, meta_train
from comtraq.tasks import TaskGenConfig, sample_suite

logging.basicConfig(level=logging.INFO, format="%(message)s")

tasks = sample_suite(100, TaskGenConfig(n_waypoints=(60, 150)), np.random.default_rng(0))
print("task sizes:", [len(t.trajectory) for t in tasks[:10]], "...")
print("budgets:   ", [t.budget for t in tasks[:10]], "...")

# The reward weights the belief-vs-truth distance only (alpha 0), and the
# over-budget penalty is kept moderate: with a -1000 penalty the network
# learns to hoard its last updates.
env_cfg = EnvConfig(alpha=0.0, r_min=-100.0)
cfg = TrainConfig(total_env_steps=20_000, epsilon_decay_steps=10_000, gamma=0.95)
net, log = meta_train(tasks, cfg, seed=0, env_cfg=env_cfg, progress_every=10)
save_checkpoint(net, "scheduler_demo.npz", cfg=cfg, seed=0)

returns = [r["return"] for r in log.rows]
print(f"{len(returns)} episodes; mean return first 10: {np.mean(returns[:10]):.0f}, last 10: {np.mean(returns[-10:]):.0f}")
