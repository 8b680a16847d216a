"""Per-pole <-> centralized (z, alpha, beta) axis transforms.

Poles are numbered counter-clockwise; poles 1 and 3 sit on the alpha lever
arm, poles 2 and 4 on the beta lever arm, each at distance ``r`` from the
center.  Small-angle approximations throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .magnetics import DomainError


class PoleVector(NamedTuple):
    v1: float
    v2: float
    v3: float
    v4: float


class AxisVector(NamedTuple):
    z: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class Geometry:
    r: float = 0.1  # m

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"lever arm r must be > 0, got {self.r!r}")


def gaps_to_axes(gv: PoleVector, geo: Geometry) -> AxisVector:
    g1, g2, g3, g4 = gv
    if min(gv) <= 0:
        raise DomainError(f"pole gaps must be > 0, got {tuple(gv)!r}")
    return AxisVector(
        z=(g1 + g2 + g3 + g4) / 4.0,
        alpha=(g3 - g1) / (2.0 * geo.r),
        beta=(g4 - g2) / (2.0 * geo.r),
    )


def axes_to_gaps(av: AxisVector, geo: Geometry) -> PoleVector:
    """Pole gaps of a rigid carrier at heave ``z`` and tilts ``alpha``/``beta``."""
    z, alpha, beta = av
    return PoleVector(z - geo.r * alpha, z - geo.r * beta, z + geo.r * alpha, z + geo.r * beta)


def axes_to_pole_currents(av: AxisVector, geo: Geometry | None = None) -> PoleVector:
    # Unit distribution weights; lever-arm scaling lives in K_D.
    i_z, i_a, i_b = av
    return PoleVector(i_z - i_a, i_z - i_b, i_z + i_a, i_z + i_b)


def _matrix(fn, geo: Geometry) -> np.ndarray:
    cols = [fn(AxisVector(*e), geo) for e in np.eye(3)]
    return np.array(cols, dtype=float).T


def pole_superposition(K_A: float, K_B: float, geo: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """Generalized-force sensitivities of the 4-pole superposition model.

    Each pole contributes a quarter of the total linearized force,
    ``df_j = (K_A/4)·(-dg_j) + (K_B/4)·di_j``.  Heave force is the sum; the
    alpha torque is ``r·(f1 - f3)`` and the beta torque ``r·(f2 - f4)``, so a
    positive tilt current produces a restoring (negative) torque.

    Returns ``(stiffness, current_gain)``, each 3×3, mapping axis
    displacements and axis currents to (force, torque_alpha, torque_beta).
    """
    gaps = _matrix(axes_to_gaps, geo)  # 4x3, axis displacement -> pole gaps
    currents = _matrix(axes_to_pole_currents, geo)  # 4x3
    r = geo.r
    collect = np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [r, 0.0, -r, 0.0],
            [0.0, r, 0.0, -r],
        ]
    )
    stiffness = collect @ (-(K_A / 4.0) * gaps)
    # Heave displacement is measured upward in the linear model.
    stiffness[:, 0] = -stiffness[:, 0]
    gain = collect @ ((K_B / 4.0) * currents)
    return stiffness, gain
