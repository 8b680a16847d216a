import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from crosspole.integrate import SimulationError, linear_matrices, rk4_linear_map, rk4_step, rk4_step_seq


def decay(_t, x):
    return -x


def test_rk4_single_step_value():
    # Fourth-order Taylor polynomial of exp(-0.1).
    x = rk4_step(decay, np.array([1.0]), 0.0, 0.1)
    assert x[0] == pytest.approx(1 - 0.1 + 0.005 - 0.1**3 / 6 + 0.1**4 / 24, rel=1e-15)
    assert abs(x[0] - 0.904837418) < 1e-7


def test_rk4_fourth_order_convergence():
    def solve(n):
        x = np.array([1.0, 0.0])
        h = 1.0 / n
        for k in range(n):
            x = rk4_step(lambda t, s: np.array([s[1], -s[0]]), x, k * h, h)
        return abs(x[0] - math.cos(1.0))

    ratio = solve(20) / solve(40)
    assert 14.0 < ratio < 18.0


def test_seq_stepper_matches_array_stepper():
    def f(t, s):
        return [s[1], -4.0 * s[0] + math.sin(t)]

    a = np.array([0.3, -0.2])
    b = [0.3, -0.2]
    for k in range(100):
        a = rk4_step(lambda t, s: np.array(f(t, s)), a, k * 0.01, 0.01)
        b = rk4_step_seq(f, b, k * 0.01, 0.01)
    assert np.array_equal(a, np.array(b))


def test_nonfinite_increment_raises():
    with pytest.raises(SimulationError) as exc:
        rk4_step(lambda t, s: np.array([np.inf]), np.array([1.0]), 0.5, 0.1)
    assert exc.value.t == 0.5
    with pytest.raises(SimulationError):
        rk4_step_seq(lambda t, s: [math.nan], [1.0], 0.0, 0.1)
    with pytest.raises(ValueError):
        rk4_step(decay, np.array([1.0]), 0.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_map_equals_generic_step(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    B = rng.normal(size=(4, 2))
    x = rng.normal(size=4)
    w = rng.normal(size=2)
    Phi, Gamma = rk4_linear_map(A, B, 0.01)
    direct = rk4_step(lambda t, s: A @ s + B @ w, x, 0.0, 0.01)
    assert np.allclose(Phi @ x + Gamma @ w, direct, rtol=1e-12, atol=1e-14)


def test_linear_map_matches_matrix_exponential():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3)) * 50.0
    B = rng.normal(size=(3, 1))
    dt = 1e-5
    Phi, Gamma = rk4_linear_map(A, B, dt)
    M = np.zeros((4, 4))
    M[:3, :3], M[:3, 3:] = A, B
    E = expm(M * dt)
    assert np.allclose(Phi, E[:3, :3], rtol=0, atol=1e-13)
    assert np.allclose(Gamma, E[:3, 3:], rtol=0, atol=1e-13)


def test_linear_matrices_probe():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    B = np.array([[0.0], [1.0]])
    a, b = linear_matrices(lambda x, w: A @ x + B @ w, 2, 1)
    assert np.array_equal(a, A) and np.array_equal(b, B)
