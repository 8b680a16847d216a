"""Sampled PID and I-PD controllers with explicit state.

Both controllers share one state layout.  The integrator holds the
integral *term* in volts, so an anti-windup clamp is expressed directly in
controller-output units.

The derivative is a backward-Euler first-order filtered differentiator with
time constant ``Tf = (kd / kp) / nf``.  ``nf=None`` drops the filter and
uses a raw backward difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

DEFAULT_NF = 100.0


@dataclass(frozen=True)
class PidGains:
    kp: float  # V/m
    ki: float  # V/(m·s)
    kd: float  # V·s/m

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")


PUBLISHED_GAINS = PidGains(kp=1756.0, ki=3088.0, kd=32.0)


@dataclass(frozen=True)
class ControllerState:
    integrator: float = 0.0
    d_filter: float = 0.0
    last_input: float = 0.0


def filter_time_constant(gains: PidGains, nf: float | None) -> float:
    """Derivative filter time constant [s]; 0 means unfiltered."""
    if nf is None or gains.kd == 0.0 or gains.kp == 0.0:
        return 0.0
    if not nf > 0:
        raise ValueError(f"filter ratio nf must be > 0, got {nf!r}")
    return gains.kd / (gains.kp * nf)


def _clamp(x: float, limit: float | None) -> float:
    if limit is None:
        return x
    return min(max(x, -limit), limit)


def _advance(st: ControllerState, gains, err, w, dt, nf, limit):
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    tf = filter_time_constant(gains, nf)
    integrator = _clamp(st.integrator + gains.ki * err * dt, limit)
    d = (tf * st.d_filter + (w - st.last_input)) / (tf + dt)
    return replace(st, integrator=integrator, d_filter=d, last_input=w)


def pid_output(
    st: ControllerState,
    gains: PidGains,
    r: float,
    y: float,
    dt: float,
    nf: float | None = DEFAULT_NF,
    limit: float | None = None,
) -> tuple[float, ControllerState]:
    """One PID sample; all three terms act on the error ``r - y``.

    A reference step therefore reaches the output through the proportional
    and derivative paths immediately (derivative kick).
    """
    e = r - y
    st = _advance(st, gains, e, e, dt, nf, limit)
    return gains.kp * e + st.integrator + gains.kd * st.d_filter, st


def ipd_output(
    st: ControllerState,
    gains: PidGains,
    r: float,
    y: float,
    dt: float,
    nf: float | None = DEFAULT_NF,
    limit: float | None = None,
) -> tuple[float, ControllerState]:
    """One I-PD sample: integral on the error, P and D on the measurement only."""
    st = _advance(st, gains, r - y, y, dt, nf, limit)
    return st.integrator - gains.kp * y - gains.kd * st.d_filter, st
