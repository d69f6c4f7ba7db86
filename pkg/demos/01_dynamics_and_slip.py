# Kinematic bicycle model and heading slip
# ========================================
#
# The vehicle state is (x, y, v, psi). Controls are acceleration and steering
# angle, clamped to [-0.2, 0.2] m/s^2 and [-60, 60] degrees.
import math

import numpy as np

from comtraq.dynamics import (
    ControlInput, DynamicsParams, PhysicalState, clamp_control, step_deterministic, step_stochastic, wrap_angle,
)

p = DynamicsParams()
print(p)

# Out-of-range commands are projected onto the box.
print(clamp_control(ControlInput(0.5, -2.0), p))

# Drive a gentle left turn for two seconds without noise.
s = PhysicalState(0.0, 0.0, 0.3, 0.0)
u = clamp_control(ControlInput(0.0, 0.3), p)
for _ in range(20):
    s = step_deterministic(s, u, p)
print("noiseless after 2 s:", s)

# The same maneuver with 15 degree heading slip per step, several seeds.
for seed in range(3):
    rng = np.random.default_rng(seed)
    s = PhysicalState(0.0, 0.0, 0.3, 0.0)
    for _ in range(20):
        s = step_stochastic(s, u, p, rng)
    print(f"seed {seed}: x={s.x:.3f} y={s.y:.3f} psi={math.degrees(s.psi):.1f} deg")

# The per-step heading perturbation is Gaussian with sigma = 15 degrees.
rng = np.random.default_rng(0)
s0 = PhysicalState(0.0, 0.0, 0.3, 0.0)
det = step_deterministic(s0, u, p).psi
w = np.array([wrap_angle(step_stochastic(s0, u, p, rng).psi - det) for _ in range(20_000)])
print(f"slip mean {math.degrees(w.mean()):+.2f} deg, std {math.degrees(w.std()):.2f} deg")
