# Tracking a reference with the cross-entropy MPC
# ===============================================
#
# With exact state knowledge and no slip, the MPC follows a straight line and
# the S-shaped built-in scenario closely.
import numpy as np

from comtraq.baselines import run_passive_mpc
from comtraq.dynamics import DynamicsParams
from comtraq.metrics import compute_metrics
from comtraq.mpc import MpcConfig, ReferenceTrajectory, solve
from comtraq.dynamics import PhysicalState
from comtraq.tasks import TaskSpec, builtin_scenario

line = ReferenceTrajectory(np.column_stack([np.arange(100) * 0.1, np.zeros(100)]))

# One solve from rest at the start of the line.
sol = solve(PhysicalState(0, 0, 0, 0), line, 0, MpcConfig(), DynamicsParams(), np.random.default_rng(0))
print("first control:", sol.first, "cost:", round(sol.optimal_cost, 4))
print("best cost per CEM iteration:", np.round(sol.best_cost_history, 4))

noiseless = DynamicsParams(slip_sigma=0.0)
for task in (TaskSpec(line, 0, "line"), builtin_scenario("s1-like")):
    log = run_passive_mpc(task, seed=0, dyn=noiseless)
    print(task.name or "line", compute_metrics(log, task.trajectory))
