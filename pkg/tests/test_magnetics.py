import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from crosspole import magnetics as mag

# Tabulated carrier constants.
K_A_TAB, K_B_TAB = 12473.0, 9.88
E_PM, S_AREA, Z0 = 3970.0, 12e-4, 19.3e-3


def _params(N=159.79, l_pm=0.38e-3, **kw):
    base = dict(mu0=mag.MU0, S=S_AREA, N=N, l_pm=l_pm, E_pm=E_PM, R=1.0, L_table=0.016, m=10.0, J_alpha=0.3, J_beta=0.3)
    base.update(kw)
    return mag.MagnetParams(**base)


def _mp_force(p, z, i):
    return 2 * mpmath.mpf(p.mu0) * p.S * (p.E_pm + p.N * i) ** 2 / (z + p.l_pm) ** 2


def test_force_at_tabulated_point(model):
    p, _, op = model
    # Permanent-magnet lift alone exceeds the 98.1 N weight, so hover needs negative current.
    assert mag.attractive_force(p, op.z0, 0.0) == pytest.approx(122.733, rel=1e-5)
    assert mag.equilibrium_current(p, op.z0) < 0


def test_analytic_matches_high_precision_derivative():
    rng = np.random.default_rng(7)
    mpmath.mp.dps = 40
    for _ in range(25):
        p = _params(N=rng.uniform(50, 400), l_pm=rng.uniform(0.1e-3, 2e-3))
        op = mag.OperatingPoint(z0=rng.uniform(5e-3, 30e-3), i_z0=rng.uniform(-3, 3))
        ka, kb = mag.linearize_translation(p, op)
        ka_ref = -mpmath.diff(lambda z: _mp_force(p, z, op.i_z0), mpmath.mpf(op.z0))
        kb_ref = mpmath.diff(lambda i: _mp_force(p, op.z0, i), mpmath.mpf(op.i_z0))
        assert ka == pytest.approx(float(ka_ref), rel=1e-12)
        assert kb == pytest.approx(float(kb_ref), rel=1e-12)


def test_finite_difference_agrees_over_random_points():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        p = _params(N=rng.uniform(50, 400), l_pm=rng.uniform(0.1e-3, 2e-3))
        op = mag.OperatingPoint(z0=rng.uniform(5e-3, 30e-3), i_z0=rng.uniform(-3, 3))
        a = mag.linearize_translation(p, op)
        f = mag.linearize_translation_fd(p, op)
        worst = max(worst, *(abs(x - y) / abs(x) for x, y in zip(a, f)))
    assert worst < 1e-6


def test_calibration_values():
    N, l_pm = mag.calibrate(K_A_TAB, K_B_TAB, E_PM, S_AREA, Z0)
    assert N == pytest.approx(159.8, abs=0.05)
    assert l_pm * 1e3 == pytest.approx(0.38, abs=0.005)


def test_calibration_matches_root_finding_oracle():
    # Independent route: solve K_A(gap) = K_A_TAB for the gap by bracketing.
    def ka_of_gap(g):
        return 4 * mag.MU0 * S_AREA * E_PM**2 / g**3 - K_A_TAB

    gap = brentq(ka_of_gap, 1e-3, 1.0, xtol=1e-16, rtol=1e-15)
    N_ref = K_B_TAB * gap**2 / (4 * mag.MU0 * S_AREA * E_PM)
    N, l_pm = mag.calibrate(K_A_TAB, K_B_TAB, E_PM, S_AREA, Z0)
    assert l_pm == pytest.approx(gap - Z0, rel=1e-9)
    assert N == pytest.approx(N_ref, rel=1e-12)


def test_calibration_round_trip():
    N, l_pm = mag.calibrate(K_A_TAB, K_B_TAB, E_PM, S_AREA, Z0)
    ka, kb = mag.linearize_translation(_params(N=N, l_pm=l_pm), mag.OperatingPoint(Z0))
    assert abs(ka / K_A_TAB - 1) < 1e-9
    assert abs(kb / K_B_TAB - 1) < 1e-9


def test_calibration_negative_thickness_warns():
    # A very stiff magnet needs a gap smaller than z0.
    with pytest.warns(mag.CalibrationWarning):
        N, l_pm = mag.calibrate(5e6, K_B_TAB, E_PM, S_AREA, Z0)
    assert l_pm < 0
    with pytest.warns(mag.CalibrationWarning):
        _params(l_pm=l_pm, N=N)


def test_calibration_rejects_bad_inputs():
    with pytest.raises(mag.DomainError):
        mag.calibrate(-1.0, K_B_TAB, E_PM, S_AREA, Z0)
    with pytest.raises(mag.DomainError):
        mag.calibrate(K_A_TAB, K_B_TAB, E_PM, S_AREA, Z0, i_z0=0.5)


def test_equilibrium_current_matches_bisection(model):
    p, _, op = model
    weight = p.m * p.g_accel
    i_ref = brentq(lambda i: mag.attractive_force(p, op.z0, i) - weight, -10.0, 0.0, xtol=1e-15)
    assert mag.equilibrium_current(p, op.z0) == pytest.approx(i_ref, abs=1e-12)


def test_gap_inductance_value(model):
    p, _, op = model
    assert mag.gap_inductance(p, op.z0) == pytest.approx(7.826e-3, rel=1e-3)


def test_nonpositive_gap_is_domain_error():
    p = _params()
    with pytest.raises(mag.DomainError):
        mag.attractive_force(p, -p.l_pm, 0.0)
    with pytest.warns(mag.CalibrationWarning):
        thin = _params(l_pm=-2e-3)
    with pytest.raises(mag.DomainError):
        mag.linearize_translation(thin, mag.OperatingPoint(1e-3))
    with pytest.raises(mag.DomainError):
        mag.gap_inductance(p, -1.0)


def test_invalid_params_rejected():
    with pytest.raises(mag.DomainError):
        _params(m=0.0)
    with pytest.raises(mag.DomainError):
        _params(S=math.nan)
    with pytest.raises(mag.DomainError):
        mag.OperatingPoint(z0=0.0)


def test_coil_jacobian_matches_high_precision():
    p = _params()
    mpmath.mp.dps = 40
    x0 = dict(z=0.02, z_dot=0.05, i=-1.2, e=3.0)

    def f(**kw):
        z, zd, i, e = kw["z"], kw["z_dot"], kw["i"], kw["e"]
        mu0 = mpmath.mpf(p.mu0)
        gap = z + p.l_pm
        L = 4 * mu0 * p.N**2 * p.S / gap
        motional = 4 * mu0 * p.N * p.S * (p.N * i + p.E_pm) * zd / gap**2
        return (e - p.R * i + motional) / L

    assert mag.coil_current_derivative(p, **x0) == pytest.approx(float(f(**x0)), rel=1e-12)
    jac = mag.coil_current_jacobian(p, **x0)
    for key in x0:
        def g(v, key=key):
            kw = dict(x0)
            kw[key] = v
            return f(**kw)

        ref = float(mpmath.diff(g, mpmath.mpf(x0[key])))
        assert jac[key] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_rotational_accel_sign():
    lc = mag.LinearCoeffs(12473, 9.88, 79.28, 2.38)
    assert mag.rotational_accel(lc, 0.3, 0.01, 0.0) > 0
    assert mag.rotational_accel(lc, 0.3, 0.0, 1.0) < 0
    with pytest.raises(mag.DomainError):
        mag.rotational_accel(lc, 0.0, 0.0, 0.0)


def test_physical_coeffs_balance_gravity(model):
    p, lc, op = model
    phys, i_eq, L_geo = mag.physical_coeffs(p, op, lc)
    assert mag.attractive_force(p, op.z0, i_eq) == pytest.approx(p.m * p.g_accel, rel=1e-12)
    # Weaker bias flux at hover lowers both sensitivities.
    assert phys.K_A < lc.K_A and phys.K_B < lc.K_B
    assert (phys.K_C, phys.K_D) == (lc.K_C, lc.K_D)
    assert L_geo == mag.gap_inductance(p, op.z0)


@settings(max_examples=200, deadline=None)
@given(
    z=st.floats(1e-4, 0.1),
    i=st.floats(-50, 50),
    N=st.floats(10, 1000),
)
def test_force_is_nonnegative(z, i, N):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert mag.attractive_force(_params(N=N), z, i) >= 0.0


@settings(max_examples=100, deadline=None)
@given(z=st.floats(1e-3, 0.05), k=st.floats(1.1, 4.0))
def test_force_inverse_square_in_effective_gap(z, k):
    p = _params(l_pm=0.5e-3)
    f1 = mag.attractive_force(p, z, 0.0)
    f2 = mag.attractive_force(p, k * (z + p.l_pm) - p.l_pm, 0.0)
    assert f2 == pytest.approx(f1 / k**2, rel=1e-12)
