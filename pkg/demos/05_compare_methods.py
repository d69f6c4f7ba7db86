# Comparing localization strategies
# =================================
#
# Runs passive MPC, naive periodic localization and the scheduler from
# 04_meta_train_scheduler.py on the built-in "s1-like" scenario, then writes an
# SVG overlay for each method.
import sys
from pathlib import Path

import numpy as np

from comtraq.baselines import run_comtraq, run_naive_mpc, run_passive_mpc
from comtraq.metrics import compute_metrics
from comtraq.qnet import load_checkpoint
from comtraq.svg import write_overlay
from comtraq.tasks import builtin_scenario

ckpt = Path(sys.argv[1] if len(sys.argv) > 1 else "scheduler_demo.npz")
task = builtin_scenario("s1-like")
net = load_checkpoint(ckpt)

runners = {
    "passive-mpc": lambda s: run_passive_mpc(task, s),
    "naive-mpc": lambda s: run_naive_mpc(task, s),
    "comtraq": lambda s: run_comtraq(task, net, s),
}
for name, run in runners.items():
    reports = [compute_metrics(run(s), task.trajectory) for s in range(5)]
    wf = np.mean([r.waypoints_followed for r in reports])
    mae = np.mean([r.mae for r in reports])
    used = np.mean([r.updates_used for r in reports])
    print(f"{name:12s} waypoints followed {wf:6.1f}  MAE {mae:.3f} m  updates {used:.1f}/{task.budget}")
    write_overlay(run(0), task.trajectory, f"overlay_{name}.svg")
