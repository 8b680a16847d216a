"""Hybrid-electromagnet plant physics for the cross-type 4-pole carrier.

Gap convention: ``z`` is the air-gap length and grows when the carrier
drops.  Linearized quantities (``K_A``, ``K_B``) refer to the upward
displacement ``z0 - z``, which is why the gap stiffness is positive
(destabilizing).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

MU0 = 4e-7 * math.pi  # H/m
G_ACCEL = 9.81  # m/s^2


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its physical domain."""


class CalibrationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MagnetParams:
    """Physical constants of the electromagnet and the carried body (SI units).

    ``L_table`` is the lumped coil inductance as tabulated for the carrier;
    it is distinct from the gap-dependent geometric inductance returned by
    :func:`gap_inductance`.
    """

    mu0: float
    S: float
    N: float
    l_pm: float
    E_pm: float
    R: float
    L_table: float
    m: float
    J_alpha: float
    J_beta: float
    g_accel: float = G_ACCEL

    def __post_init__(self):
        for name in ("mu0", "S", "N", "E_pm", "R", "L_table", "m", "J_alpha", "J_beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not math.isfinite(self.l_pm):
            raise DomainError(f"l_pm must be finite, got {self.l_pm!r}")
        if self.l_pm < 0:
            warnings.warn(
                f"negative magnet thickness l_pm={self.l_pm:.3e} m; model kept evaluable",
                CalibrationWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class OperatingPoint:
    z0: float
    i_z0: float = 0.0
    alpha0: float = 0.0
    beta0: float = 0.0
    i_alpha0: float = 0.0
    i_beta0: float = 0.0

    def __post_init__(self):
        if not self.z0 > 0:
            raise DomainError(f"z0 must be > 0, got {self.z0!r}")


@dataclass(frozen=True)
class LinearCoeffs:
    """Small-signal force/torque sensitivities.

    K_A gap stiffness [N/m], K_B current gain [N/A], K_C angular stiffness
    [N·m/rad], K_D angular current gain [N·m/A].
    """

    K_A: float
    K_B: float
    K_C: float
    K_D: float


def _effective_gap(p: MagnetParams, z: float) -> float:
    gap = z + p.l_pm
    if not gap > 0:
        raise DomainError(f"effective gap z + l_pm = {gap!r} m must be > 0")
    return gap


def attractive_force(p: MagnetParams, z: float, i: float) -> float:
    """Total attractive force of the four poles [N] at gap ``z`` and current ``i``."""
    gap = _effective_gap(p, z)
    mmf = p.E_pm + p.N * i
    return 2.0 * p.mu0 * p.S * mmf * mmf / (gap * gap)


def linearize_translation(p: MagnetParams, op: OperatingPoint) -> tuple[float, float]:
    """Analytic ``(K_A, K_B)`` of the force law at the operating point.

    ``K_A = -df/dz`` and ``K_B = df/di``.
    """
    gap = _effective_gap(p, op.z0)
    mmf = p.E_pm + p.N * op.i_z0
    K_A = 4.0 * p.mu0 * p.S * mmf * mmf / gap**3
    K_B = 4.0 * p.mu0 * p.S * p.N * mmf / gap**2
    return K_A, K_B


def linearize_translation_fd(
    p: MagnetParams, op: OperatingPoint, rel_step: float = 1e-5
) -> tuple[float, float]:
    """Central finite-difference estimate of ``(K_A, K_B)``.

    Steps are scaled to the operand magnitude: ``rel_step * (z0 + l_pm)`` in
    the gap and ``rel_step * E_pm / N`` in the current.
    """
    hz = rel_step * (op.z0 + p.l_pm)
    hi = rel_step * p.E_pm / p.N
    f = attractive_force
    dfdz = (f(p, op.z0 + hz, op.i_z0) - f(p, op.z0 - hz, op.i_z0)) / (2 * hz)
    dfdi = (f(p, op.z0, op.i_z0 + hi) - f(p, op.z0, op.i_z0 - hi)) / (2 * hi)
    return -dfdz, dfdi


def calibrate(
    K_A: float,
    K_B: float,
    E_pm: float,
    S: float,
    z0: float,
    i_z0: float = 0.0,
    mu0: float = MU0,
) -> tuple[float, float]:
    """Recover ``(N, l_pm)`` from published linearization constants.

    Closed-form inversion of the ``K_A``/``K_B`` expressions, valid for a
    zero nominal current.  A negative ``l_pm`` is reported with a
    :class:`CalibrationWarning` and returned unchanged.
    """
    if not K_A > 0 or not K_B > 0:
        raise DomainError(f"K_A and K_B must be > 0, got K_A={K_A!r}, K_B={K_B!r}")
    if i_z0 != 0.0:
        raise DomainError("closed-form calibration requires i_z0 = 0")
    gap = (4.0 * mu0 * S * E_pm**2 / K_A) ** (1.0 / 3.0)
    l_pm = gap - z0
    if not gap > 0:
        raise DomainError(f"calibrated effective gap {gap!r} m is not positive")
    N = K_B * gap**2 / (4.0 * mu0 * S * E_pm)
    if l_pm < 0:
        warnings.warn(
            f"calibration gives negative magnet thickness l_pm={l_pm:.3e} m",
            CalibrationWarning,
            stacklevel=2,
        )
    return N, l_pm


def equilibrium_current(p: MagnetParams, z: float) -> float:
    """Coil current that makes the magnetic force balance the carried weight at gap ``z``."""
    gap = _effective_gap(p, z)
    mmf = math.sqrt(p.m * p.g_accel * gap * gap / (2.0 * p.mu0 * p.S))
    return (mmf - p.E_pm) / p.N


def gap_inductance(p: MagnetParams, z: float) -> float:
    """Geometric four-pole coil inductance ``4·mu0·N²·S/(z + l_pm)`` [H]."""
    gap = _effective_gap(p, z)
    return 4.0 * p.mu0 * p.N**2 * p.S / gap


def coil_current_derivative(p: MagnetParams, z: float, z_dot: float, i: float, e: float) -> float:
    """di/dt [A/s] of the voltage-driven coil with flux linkage ``4·mu0·N·S·(N·i + E_pm)/(z + l_pm)``.

    ``z_dot`` is the gap rate (positive when the gap opens); opening the gap
    lowers the flux linkage and induces current in the positive sense.
    """
    gap = _effective_gap(p, z)
    L = 4.0 * p.mu0 * p.N**2 * p.S / gap
    motional = 4.0 * p.mu0 * p.N * p.S * (p.N * i + p.E_pm) * z_dot / (gap * gap)
    return (e - p.R * i + motional) / L


def coil_current_jacobian(
    p: MagnetParams, z: float, z_dot: float, i: float, e: float
) -> dict[str, float]:
    """Analytic partial derivatives of :func:`coil_current_derivative`.

    Returns a mapping with keys ``"z"``, ``"z_dot"``, ``"i"``, ``"e"``.
    """
    gap = _effective_gap(p, z)
    k = 4.0 * p.mu0 * p.N**2 * p.S  # L(z) = k / gap
    mmf = p.N * i + p.E_pm
    c = 4.0 * p.mu0 * p.N * p.S
    num = e - p.R * i + c * mmf * z_dot / gap**2
    dnum_dz = -2.0 * c * mmf * z_dot / gap**3
    return {
        "z": (dnum_dz * gap + num) / k,
        "z_dot": c * mmf / gap**2 * gap / k,
        "i": (-p.R + c * p.N * z_dot / gap**2) * gap / k,
        "e": gap / k,
    }


def rotational_accel(lc: LinearCoeffs, J: float, theta: float, i_ax: float) -> float:
    """Angular acceleration of a tilt axis from its linearized torque."""
    if not J > 0:
        raise DomainError(f"J must be > 0, got {J!r}")
    return (lc.K_C * theta - lc.K_D * i_ax) / J


def physical_coeffs(p: MagnetParams, op: OperatingPoint, lc: LinearCoeffs) -> tuple[LinearCoeffs, float, float]:
    """Linearize the force-balanced nonlinear plant at ``op.z0``.

    Returns ``(coeffs, i_eq, L_geo)``: translation constants evaluated at the
    gravity-balancing bias current, that bias current, and the geometric
    inductance at ``z0``.  Rotational constants are carried over from ``lc``.
    """
    i_eq = equilibrium_current(p, op.z0)
    K_A, K_B = linearize_translation(p, OperatingPoint(z0=op.z0, i_z0=i_eq))
    return LinearCoeffs(K_A, K_B, lc.K_C, lc.K_D), i_eq, gap_inductance(p, op.z0)
