"""Particle belief over the physical state.

Between active localization updates the filter is pure dead reckoning: the
only observation the agent ever gets is the exact state, so weights never
change and no resampling happens.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import PSI, ControlInput, DynamicsParams, PhysicalState, add_slip, step_array, wrap_angle


@dataclass
class ParticleSet:
    particles: np.ndarray  # (n, 4) rows of (x, y, v, psi)
    weights: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class BeliefSummary:
    mean: PhysicalState
    std: np.ndarray  # (std_x, std_y, std_v, std_psi)


def init_delta(s0: PhysicalState, n: int = 500) -> ParticleSet:
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    return ParticleSet(np.tile(s0.as_array(), (n, 1)), np.full(n, 1.0 / n))


def predict(ps: ParticleSet, u: ControlInput, p: DynamicsParams, rng: np.random.Generator) -> ParticleSet:
    """Advance every particle through the stochastic model.

    Draws one slip sample per particle, in particle order.
    """
    w = p.slip_sigma * rng.standard_normal(len(ps))
    nxt = step_array(ps.particles, np.array([u.a, u.delta]), p)
    if p.slip_sigma != 0:
        nxt = add_slip(nxt, w)
    return ParticleSet(nxt, ps.weights.copy())


def collapse_to(ps: ParticleSet, s_true: PhysicalState) -> ParticleSet:
    return init_delta(s_true, len(ps))


def summarize(ps: ParticleSet) -> BeliefSummary:
    """Weighted mean and spread; heading uses circular statistics."""
    w = np.asarray(ps.weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("particle weights sum to zero")
    w = w / total
    P = ps.particles
    lin = w @ P[:, :PSI]
    var = w @ (P[:, :PSI] - lin) ** 2
    c = w @ np.cos(P[:, PSI])
    s = w @ np.sin(P[:, PSI])
    r = np.hypot(c, s)
    if np.ptp(P[:, PSI]) == 0:
        # Exact delta in heading: skip atan2 round-off.
        psi_mean, psi_std = float(P[0, PSI]), 0.0
    else:
        psi_mean = float(wrap_angle(np.arctan2(s, c)))
        psi_std = float(np.sqrt(-2.0 * np.log(min(max(r, 1e-300), 1.0))))
    mean = PhysicalState(float(lin[0]), float(lin[1]), float(lin[2]), psi_mean)
    std = np.sqrt(np.maximum(var, 0.0))
    if np.ptp(P[:, :PSI], axis=0).max() == 0:
        mean = PhysicalState(float(P[0, 0]), float(P[0, 1]), float(P[0, 2]), psi_mean)
        std = np.zeros(3)
    return BeliefSummary(mean, np.append(std, psi_std))
