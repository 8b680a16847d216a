"""Coefficient-diagram-method gain synthesis for the voltage-driven axis loop.

The I-PD / PID characteristic polynomial of a voltage-driven axis is

    a4·s⁴ + a3·s³ + a2·s² + a1·s + a0
    = m·L·s⁴ + m·R·s³ + K_B·kd·s² + (K_B·kp − K_A·R)·s + K_B·ki

The two leading coefficients are fixed by the plant; the remaining three
follow from the stability indices ``gamma_i = a_i² / (a_{i+1}·a_{i-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .control import PidGains
from .lti import AxisPlant, Polynomial, routh_array
from .magnetics import DomainError

DEFAULT_GAMMAS = (2.5, 2.0, 2.0)


@dataclass(frozen=True)
class StabilityIndices:
    gammas: tuple[float, ...]  # (gamma1, gamma2, ..., gamma_{n-1})
    tau: float  # equivalent time constant a1/a0 [s]

    @property
    def gamma1(self) -> float:
        return self.gammas[0]

    @property
    def gamma2(self) -> float:
        return self.gammas[1]

    @property
    def gamma3(self) -> float:
        return self.gammas[2]


def target_coefficients(a4: float, a3: float, gammas=DEFAULT_GAMMAS) -> tuple[float, float, float, float, float]:
    """Ascending ``(a0, a1, a2, a3, a4)`` with the prescribed indices."""
    g1, g2, g3 = gammas
    if min(gammas) <= 1.0:
        raise DomainError(f"stability indices must exceed 1, got {tuple(gammas)!r}")
    a2 = a3 * a3 / (g3 * a4)
    a1 = a2 * a2 / (g2 * a3)
    a0 = a1 * a1 / (g1 * a2)
    return a0, a1, a2, a3, a4


def cdm_gains(
    m: float, L: float, R: float, K_A: float, K_B: float, gammas=DEFAULT_GAMMAS
) -> tuple[PidGains, float]:
    """Synthesize (kp, ki, kd) and the equivalent time constant tau.

    For a tilt axis pass (J, L, R, K_C, K_D); the simulator takes care of the
    negative torque-per-current sign.
    """
    if K_B == 0:
        raise DomainError("current gain K_B must be nonzero")
    if not (m > 0 and L > 0 and R > 0):
        raise DomainError("m, L and R must be > 0")
    a0, a1, a2, _, _ = target_coefficients(m * L, m * R, gammas)
    gains = PidGains(kp=(a1 + K_A * R) / K_B, ki=a0 / K_B, kd=a2 / K_B)
    return gains, a1 / a0


def cdm_gains_for(plant: AxisPlant, gammas=DEFAULT_GAMMAS) -> tuple[PidGains, float]:
    return cdm_gains(plant.inertia, plant.L, plant.R, plant.stiffness, plant.gain, gammas)


def characteristic_polynomial(plant: AxisPlant, gains: PidGains) -> Polynomial:
    """Closed-loop denominator shared by the PID and I-PD loops (ideal derivative)."""
    return Polynomial(
        [
            plant.gain * gains.ki,
            gains.kp * plant.gain - plant.stiffness * plant.R,
            plant.gain * gains.kd,
            plant.inertia * plant.R,
            plant.inertia * plant.L,
        ]
    )


def stability_indices(p: Polynomial) -> StabilityIndices:
    c = p.coeffs
    if p.degree < 2:
        raise DomainError("stability indices need degree >= 2")
    if any(x == 0.0 for x in c):
        raise DomainError(f"zero coefficient in {p!r}; stability indices undefined")
    gammas = tuple(c[i] ** 2 / (c[i + 1] * c[i - 1]) for i in range(1, p.degree))
    return StabilityIndices(gammas, c[1] / c[0])


def routh_margins(p: Polynomial) -> list[float]:
    """Row-normalized Routh first column.

    Each entry from the s^(n-2) row down is divided by the polynomial
    coefficient heading the same row pair, giving scale-free ratios in
    (0, 1] for well-damped designs (all equal to 1 means no cancellation).
    """
    rows, _, _ = routh_array(p)
    d = p.descending()
    out = []
    for k in range(2, len(rows)):
        head = d[k] if k < len(d) else None
        if head:
            out.append(rows[k][0] / head)
    return out


def damping_margin(p: Polynomial) -> float:
    """Smallest row-normalized Routh entry; invariant under time scaling."""
    return min(routh_margins(p))
