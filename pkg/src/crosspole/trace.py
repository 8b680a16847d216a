from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("t_s", "ref_m", "gap_dev_m", "control_V", "coil_A", "dist_N")


@dataclass
class Trace:
    """Uniformly sampled closed-loop record.

    ``output`` is the controlled displacement: upward gap deviation
    ``z0 - z`` [m] on the z axis, tilt angle [rad] on alpha/beta.
    ``contact_time`` is set when a run was truncated by a mechanical limit.
    """

    t: np.ndarray
    ref: np.ndarray
    output: np.ndarray
    control: np.ndarray
    current: np.ndarray
    dist: np.ndarray
    contact_time: float | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for col in ("ref", "output", "control", "current", "dist"):
            arr = np.asarray(getattr(self, col), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"trace column {col} has shape {arr.shape}, expected ({n},)")
            setattr(self, col, arr)
        self.t = np.asarray(self.t, dtype=float)

    def __len__(self):
        return len(self.t)

    @property
    def contact(self) -> bool:
        return self.contact_time is not None

    def columns(self) -> list[np.ndarray]:
        return [self.t, self.ref, self.output, self.control, self.current, self.dist]
