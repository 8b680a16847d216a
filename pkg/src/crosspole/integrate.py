"""Classical fixed-step Runge-Kutta core shared by the simulator and lti."""

from __future__ import annotations

import math

import numpy as np


class SimulationError(RuntimeError):
    """Numerical failure during integration (non-finite state or derivative)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


def rk4_step(derivative_fn, state, t: float, dt: float):
    """Advance ``state`` by one classical RK4 step of ``x' = derivative_fn(t, x)``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    h2 = 0.5 * dt
    k1 = derivative_fn(t, state)
    k2 = derivative_fn(t + h2, state + h2 * k1)
    k3 = derivative_fn(t + h2, state + h2 * k2)
    k4 = derivative_fn(t + dt, state + dt * k3)
    incr = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(incr)):
        raise SimulationError(f"non-finite derivative at t={t!r}", t)
    return state + incr


def rk4_step_seq(derivative_fn, state: list, t: float, dt: float) -> list:
    """``rk4_step`` on plain float lists; avoids array overhead for small systems."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    h2 = 0.5 * dt
    k1 = derivative_fn(t, state)
    k2 = derivative_fn(t + h2, [s + h2 * k for s, k in zip(state, k1)])
    k3 = derivative_fn(t + h2, [s + h2 * k for s, k in zip(state, k2)])
    k4 = derivative_fn(t + dt, [s + dt * k for s, k in zip(state, k3)])
    h6 = dt / 6.0
    incr = [h6 * (a + 2.0 * b + 2.0 * c + e) for a, b, c, e in zip(k1, k2, k3, k4)]
    if not all(math.isfinite(v) for v in incr):
        raise SimulationError(f"non-finite derivative at t={t!r}", t)
    return [s + v for s, v in zip(state, incr)]


def rk4_linear_map(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrices of one RK4 step on ``x' = A x + B w`` with ``w`` held.

    Returns ``(Phi, Gamma)`` such that ``rk4_step`` equals
    ``Phi @ x + Gamma @ w`` (fourth-order Taylor truncation of the exact
    exponential).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    hA = dt * A
    eye = np.eye(n)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = eye + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
    Gamma = dt * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B
    return Phi, Gamma


def linear_matrices(fn, n_state: int, n_input: int) -> tuple[np.ndarray, np.ndarray]:
    """Extract ``(A, B)`` from a linear derivative ``fn(x, w)`` by unit probing.

    ``fn`` must be exactly linear and vanish at the origin.
    """
    zero_x = np.zeros(n_state)
    zero_w = np.zeros(n_input)
    A = np.column_stack([fn(e, zero_w) for e in np.eye(n_state)])
    B = np.column_stack([fn(zero_x, e) for e in np.eye(n_input)]) if n_input else np.zeros((n_state, 0))
    return A, B
