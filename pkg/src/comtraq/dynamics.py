"""Kinematic bicycle model with additive heading slip.

States are carried either as :class:`PhysicalState` objects or as float64
arrays whose last axis is ``(x, y, v, psi)``. The array form is what the
particle filter and the MPC rollouts use; the scalar form delegates to it so
both paths share the same arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

X, Y, V, PSI = 0, 1, 2, 3


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


@dataclass(frozen=True)
class PhysicalState:
    x: float  # m
    y: float  # m
    v: float  # m/s
    psi: float  # rad, (-pi, pi]

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.psi], dtype=float)

    @classmethod
    def from_array(cls, a) -> "PhysicalState":
        return cls(float(a[X]), float(a[Y]), float(a[V]), float(a[PSI]))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ControlInput:
    a: float  # m/s^2
    delta: float  # rad


@dataclass(frozen=True)
class DynamicsParams:
    wheelbase: float = 0.16
    dt: float = 0.1
    slip_sigma: float = math.radians(15.0)
    a_min: float = -0.2
    a_max: float = 0.2
    delta_min: float = -math.pi / 3
    delta_max: float = math.pi / 3
    v_min: float = 0.0
    v_max: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.wheelbase > 0:
            raise ValueError(f"wheelbase must be positive, got {self.wheelbase}")
        if self.slip_sigma < 0:
            raise ValueError(f"slip_sigma must be >= 0, got {self.slip_sigma}")
        for lo, hi in (("a_min", "a_max"), ("delta_min", "delta_max"), ("v_min", "v_max")):
            if getattr(self, lo) > getattr(self, hi):
                raise ValueError(f"{lo} > {hi}")
        if max(abs(self.delta_min), abs(self.delta_max)) >= math.pi / 2:
            raise ValueError("steering bounds must stay inside (-pi/2, pi/2)")

    @property
    def control_low(self) -> np.ndarray:
        return np.array([self.a_min, self.delta_min])

    @property
    def control_high(self) -> np.ndarray:
        return np.array([self.a_max, self.delta_max])


def clamp_control(u: ControlInput, p: DynamicsParams) -> ControlInput:
    return ControlInput(
        a=min(max(u.a, p.a_min), p.a_max),
        delta=min(max(u.delta, p.delta_min), p.delta_max),
    )


def clamp_controls(u: np.ndarray, p: DynamicsParams) -> np.ndarray:
    """Array form of :func:`clamp_control`; last axis is ``(a, delta)``."""
    return np.clip(u, p.control_low, p.control_high)


def step_array(s: np.ndarray, u: np.ndarray, p: DynamicsParams) -> np.ndarray:
    """Forward-Euler bicycle update (rear-axle reference), broadcasting.

    ``s`` has shape (..., 4) and ``u`` shape (..., 2). Position integrates with
    the pre-step speed and heading; controls must already be clamped.
    """
    x, y, v, psi = s[..., X], s[..., Y], s[..., V], s[..., PSI]
    a, delta = u[..., 0], u[..., 1]
    out = np.empty(np.broadcast_shapes(s.shape, u.shape[:-1] + (4,)))
    out[..., X] = x + v * np.cos(psi) * p.dt
    out[..., Y] = y + v * np.sin(psi) * p.dt
    out[..., V] = np.clip(v + a * p.dt, p.v_min, p.v_max)
    out[..., PSI] = wrap_angle(psi + v / p.wheelbase * np.tan(delta) * p.dt)
    return out


def step_deterministic(s: PhysicalState, u: ControlInput, p: DynamicsParams) -> PhysicalState:
    nxt = step_array(s.as_array()[None], np.array([[u.a, u.delta]]), p)
    return PhysicalState.from_array(nxt[0])


def add_slip(s: np.ndarray, noise: np.ndarray) -> np.ndarray:
    out = np.array(s, dtype=float, copy=True)
    out[..., PSI] = wrap_angle(out[..., PSI] + noise)
    return out


def step_stochastic(
    s: PhysicalState, u: ControlInput, p: DynamicsParams, rng: np.random.Generator
) -> PhysicalState:
    """Deterministic step, then heading slip w ~ N(0, slip_sigma^2).

    Always consumes exactly one standard-normal draw from ``rng``, even when
    ``slip_sigma`` is zero, so noise streams stay aligned across configs.
    """
    w = p.slip_sigma * rng.standard_normal()
    nxt = step_array(s.as_array()[None], np.array([[u.a, u.delta]]), p)
    if p.slip_sigma == 0:
        return PhysicalState.from_array(nxt[0])
    return PhysicalState.from_array(add_slip(nxt[0], w))
