# Passive localization with a particle belief
# ==========================================
#
# Without an active update the agent only dead-reckons: particles are pushed
# through the noisy model and spread out. An active update collapses them onto
# the true state.
import numpy as np

from comtraq.belief import collapse_to, init_delta, predict, summarize
from comtraq.dynamics import ControlInput, DynamicsParams, PhysicalState, step_stochastic

p = DynamicsParams()
rng_true, rng_belief = np.random.default_rng(1), np.random.default_rng(2)

truth = PhysicalState(0.0, 0.0, 0.4, 0.0)
belief = init_delta(truth, 500)
u = ControlInput(0.0, 0.0)

for k in range(1, 31):
    truth = step_stochastic(truth, u, p, rng_true)
    belief = predict(belief, u, p, rng_belief)
    b = summarize(belief)
    err = np.hypot(truth.x - b.mean.x, truth.y - b.mean.y)
    if k % 5 == 0:
        print(f"step {k:2d}  std_x={b.std[0]:.3f} std_y={b.std[1]:.3f} std_psi={b.std[3]:.2f}  error={err:.3f} m")

belief = collapse_to(belief, truth)
b = summarize(belief)
print("after active update: error", np.hypot(truth.x - b.mean.x, truth.y - b.mean.y), "std", b.std)
