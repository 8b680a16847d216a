"""Fixed-step closed-loop simulation of one control axis.

Plant modes
-----------
``paper-linear``
    Deviation-variable model built from the tabulated constants (K_A, K_B,
    K_C, K_D, tabulated L); gravity is assumed balanced.
``physical-linear``
    Linearization of the force-balanced nonlinear z plant at ``z0``: bias
    current from :func:`~crosspole.magnetics.equilibrium_current`, geometric
    inductance.  The small-signal reference for ``physical-nonlinear``.
``physical-nonlinear``
    Full force law, gravity, and gap-dependent coil dynamics (z axis only).

Exogenous inputs (reference, disturbance) are sampled at the start of each
step and held across it.  Runs start at rest with the initial reference
already in place, so only later reference changes excite the loop.

With ``nf=None`` in continuous mode the derivative is exact: the rate of
the measured displacement is taken from the plant velocity state, and a
reference jump under PID injects the equivalent voltage impulse (a coil
current jump ``kd·Δr/L``).  The closed loop then realizes the ideal
PID / I-PD transfer functions.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import magnetics as mag
from .control import DEFAULT_NF, ControllerState, PidGains, PUBLISHED_GAINS, filter_time_constant, ipd_output, pid_output
from .integrate import SimulationError, linear_matrices, rk4_linear_map, rk4_step_seq
from .lti import AxisPlant, ResponseMetrics, axis_plant, response_metrics
from .trace import Trace

AXES = ("z", "alpha", "beta")
PLANT_MODES = ("paper-linear", "physical-linear", "physical-nonlinear")
CONTROLLERS = ("pid", "ipd", "open-loop")
DRIVES = ("voltage", "current")
INITIAL_KEYS = ("dev", "rate", "current")
MAX_DT = 1e-3


class ScenarioError(ValueError):
    pass


def _schedule(entries, what: str) -> tuple[tuple[float, float], ...]:
    sched = tuple((float(t), float(v)) for t, v in entries)
    if not sched:
        raise ScenarioError(f"{what} schedule is empty")
    times = [t for t, _ in sched]
    if any(not (math.isfinite(t) and math.isfinite(v)) for t, v in sched):
        raise ScenarioError(f"{what} schedule has non-finite entries")
    if any(b < a for a, b in zip(times, times[1:])):
        raise ScenarioError(f"{what} schedule is not time-sorted")
    return sched


@dataclass(frozen=True)
class Scenario:
    """A timed reference/disturbance program for one axis.

    Reference values are metres (z) or radians (alpha/beta); disturbances
    are newtons or newton-metres, positive pushing the axis away from the
    magnet (gap opening).  ``control_period=None`` runs the controller
    continuously inside the RK4 step.  ``gap_ceiling=None`` means ``2·z0``.
    """

    name: str = "scenario"
    axis: str = "z"
    plant_mode: str = "paper-linear"
    controller: str = "ipd"
    gains: PidGains = PUBLISHED_GAINS
    reference: tuple = ((0.0, 0.0),)
    disturbance: tuple = ((0.0, 0.0),)
    t_end: float = 10.0
    dt: float = 5e-5
    initial_state: dict = field(default_factory=dict)
    nf: float | None = None
    control_period: float | None = None
    integrator_limit: float | None = None
    drive: str = "voltage"
    gap_ceiling: float | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ScenarioError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.plant_mode not in PLANT_MODES:
            raise ScenarioError(f"plant_mode must be one of {PLANT_MODES}, got {self.plant_mode!r}")
        if self.plant_mode != "paper-linear" and self.axis != "z":
            raise ScenarioError(f"{self.plant_mode} is only defined for the z axis")
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.drive not in DRIVES:
            raise ScenarioError(f"drive must be one of {DRIVES}, got {self.drive!r}")
        if not (self.dt > 0 and self.t_end > 0):
            raise ScenarioError("dt and t_end must be > 0")
        if self.dt > MAX_DT:
            raise ScenarioError(f"dt={self.dt!r} s exceeds {MAX_DT} s")
        if self.t_end < self.dt:
            raise ScenarioError("t_end must be at least one step")
        object.__setattr__(self, "reference", _schedule(self.reference, "reference"))
        object.__setattr__(self, "disturbance", _schedule(self.disturbance, "disturbance"))
        unknown = set(self.initial_state) - set(INITIAL_KEYS)
        if unknown:
            raise ScenarioError(f"unknown initial_state keys {sorted(unknown)}")
        if self.nf is not None and not self.nf > 0:
            raise ScenarioError("nf must be > 0")
        if self.control_period is not None:
            ratio = self.control_period / self.dt
            if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
                raise ScenarioError("control_period must be a positive multiple of dt")
        if self.integrator_limit is not None and not self.integrator_limit > 0:
            raise ScenarioError("integrator_limit must be > 0")
        if (
            self.controller == "pid"
            and self.nf is None
            and self.control_period is None
            and self.drive == "current"
            and self.plant_mode == "physical-nonlinear"
        ):
            raise ScenarioError("ideal-derivative PID cannot drive a nonlinear current-input plant")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def sample_schedule(sched, t: np.ndarray, dt: float) -> np.ndarray:
    """Piecewise-constant schedule on a time grid (0 before the first entry)."""
    times = np.array([e[0] for e in sched])
    values = np.array([e[1] for e in sched])
    idx = np.searchsorted(times, t + 1e-9 * dt, side="right") - 1
    return np.where(idx >= 0, values[np.maximum(idx, 0)], 0.0)


class _LinearAxis:
    """Deviation-variable axis: state (y, v, i) under voltage drive, (y, v) under current drive.

    Internally the tilt axes use the sign-flipped current so every axis has
    the z-axis form; ``sign`` restores physical coil quantities for traces.
    """

    linear = True

    def __init__(self, ap: AxisPlant, drive: str, sign: float = 1.0, i_bias: float = 0.0, e_bias: float = 0.0):
        self.ap = ap
        self.drive = drive
        self.sign = sign
        self.i_bias = i_bias
        self.e_bias = e_bias
        self.n = 3 if drive == "voltage" else 2
        self.motional = ap.stiffness * ap.L / ap.gain

    def initial(self, init: dict) -> np.ndarray:
        x = np.zeros(self.n)
        x[0] = init.get("dev", 0.0)
        x[1] = init.get("rate", 0.0)
        if self.drive == "voltage":
            x[2] = self.sign * init.get("current", 0.0)
        return x

    def deriv(self, x, u, d):
        ap = self.ap
        if self.drive == "voltage":
            return np.array(
                [
                    x[1],
                    (ap.stiffness * x[0] + ap.gain * x[2] - d) / ap.inertia,
                    (u - ap.R * x[2] - self.motional * x[1]) / ap.L,
                ]
            )
        return np.array([x[1], (ap.stiffness * x[0] + ap.gain * u - d) / ap.inertia])

    def output(self, x):
        return x[0]

    def rate(self, x):
        return x[1]

    def impulse(self, x, area):
        x = x.copy()
        if self.drive == "voltage":
            x[2] += area / self.ap.L
        else:
            x[1] += self.ap.gain * area / self.ap.inertia
        return x

    def coil_current(self, x, u):
        di = x[2] if self.drive == "voltage" else u
        return self.i_bias + self.sign * di

    def coil_voltage(self, x, u):
        if self.drive == "voltage":
            return self.e_bias + self.sign * u
        return np.full_like(np.asarray(u, dtype=float), np.nan)


class _NonlinearZ:
    """Absolute-variable z plant: state (gap z, gap rate, coil current)."""

    linear = False

    def __init__(self, p: mag.MagnetParams, z0: float, i_bias: float, drive: str):
        self.p = p
        self.z0 = z0
        self.i_bias = i_bias
        self.e_bias = p.R * i_bias
        self.drive = drive
        self.n = 3 if drive == "voltage" else 2
        self._kf = 2.0 * p.mu0 * p.S
        self._kc = 4.0 * p.mu0 * p.N * p.S
        self._kl = 4.0 * p.mu0 * p.N**2 * p.S

    def initial(self, init: dict) -> np.ndarray:
        x = np.zeros(self.n)
        x[0] = self.z0 - init.get("dev", 0.0)
        x[1] = -init.get("rate", 0.0)
        if self.drive == "voltage":
            x[2] = self.i_bias + init.get("current", 0.0)
        return x

    def deriv(self, x, u, d):
        # Inlined force law and coil equation; this is the inner loop of the nonlinear run.
        p = self.p
        z, zd = float(x[0]), float(x[1])
        gap = z + p.l_pm
        if not gap > 0:
            raise mag.DomainError(f"effective gap {gap!r} m must be > 0")
        i = float(x[2]) if self.drive == "voltage" else self.i_bias + u
        mmf = p.E_pm + p.N * i
        inv_g2 = 1.0 / (gap * gap)
        force = self._kf * mmf * mmf * inv_g2
        zdd = p.g_accel + (d - force) / p.m
        if self.drive == "voltage":
            di = (self.e_bias + u - p.R * i + self._kc * mmf * zd * inv_g2) * gap / self._kl
            return [zd, zdd, di]
        return [zd, zdd]

    def output(self, x):
        return self.z0 - x[0]

    def rate(self, x):
        return -x[1]

    def impulse(self, x, area):
        x = x.copy()
        x[2] += area / mag.gap_inductance(self.p, x[0])
        return x

    def coil_current(self, x, u):
        return x[2] if self.drive == "voltage" else self.i_bias + u

    def coil_voltage(self, x, u):
        if self.drive == "voltage":
            return self.e_bias + u
        return np.full_like(np.asarray(u, dtype=float), np.nan)


def build_plant(sc: Scenario, params: mag.MagnetParams, coeffs: mag.LinearCoeffs, op: mag.OperatingPoint):
    if sc.plant_mode == "paper-linear":
        ap = axis_plant(params, coeffs, sc.axis)
        return _LinearAxis(ap, sc.drive, sign=1.0 if sc.axis == "z" else -1.0, i_bias=op.i_z0 if sc.axis == "z" else 0.0)
    phys, i_eq, L_geo = mag.physical_coeffs(params, op, coeffs)
    if sc.plant_mode == "physical-linear":
        ap = axis_plant(params, phys, "z", L=L_geo)
        return _LinearAxis(ap, sc.drive, i_bias=i_eq, e_bias=params.R * i_eq)
    return _NonlinearZ(params, op.z0, i_eq, sc.drive)


def _coil_time_constant(plant) -> float:
    if isinstance(plant, _LinearAxis):
        return plant.ap.L / plant.ap.R
    return mag.gap_inductance(plant.p, plant.z0) / plant.p.R


class _ContinuousLoop:
    """Plant plus controller states integrated together.

    Controller state layout after the plant states: integral term [V]
    (pid/ipd) and, when filtered, the derivative-filter state.
    """

    def __init__(self, plant, sc: Scenario):
        self.plant = plant
        self.kind = sc.controller
        self.g = sc.gains
        self.tf = filter_time_constant(sc.gains, sc.nf) if sc.nf is not None else 0.0
        if sc.nf is not None and self.tf == 0.0 and sc.gains.kd != 0.0:
            raise ScenarioError("a filtered derivative needs kp > 0")
        self.filtered = self.tf > 0.0
        n_ctrl = 0 if self.kind == "open-loop" else (2 if self.filtered else 1)
        self.np = plant.n
        self.n = plant.n + n_ctrl

    def _signal(self, r, y):
        return r - y if self.kind == "pid" else y

    def initial(self, sc: Scenario, r0: float) -> np.ndarray:
        x = np.zeros(self.n)
        x[: self.np] = self.plant.initial(sc.initial_state)
        if self.filtered:
            x[self.np + 1] = self._signal(r0, self.plant.output(x[: self.np]))
        return x

    def control(self, x, r):
        """Controller output for state(s) ``x`` (works on stacked histories too)."""
        if self.kind == "open-loop":
            return 0.0 * x[0]
        g, npl = self.g, self.np
        xp = x[:npl]
        y = self.plant.output(xp)
        if self.filtered:
            dterm = g.kd * (self._signal(r, y) - x[npl + 1]) / self.tf
        elif self.kind == "pid":
            dterm = -g.kd * self.plant.rate(xp)
        else:
            dterm = g.kd * self.plant.rate(xp)
        if self.kind == "pid":
            return x[npl] + g.kp * (r - y) + dterm
        return x[npl] - g.kp * y - dterm

    def deriv(self, x, w):
        r, d = float(w[0]), float(w[1])
        npl = self.np
        u = float(self.control(x, r))
        dxp = [float(v) for v in self.plant.deriv(x[:npl], u, d)]
        if self.kind == "open-loop":
            return dxp
        y = float(self.plant.output(x[:npl]))
        if self.filtered:
            return dxp + [self.g.ki * (r - y), (self._signal(r, y) - float(x[npl + 1])) / self.tf]
        return dxp + [self.g.ki * (r - y)]


def _limits(sc: Scenario, plant, op: mag.OperatingPoint) -> tuple[float, float]:
    """Allowed range of the recorded output before a contact event."""
    if sc.axis != "z":
        return -math.inf, math.inf
    ceiling = 2.0 * op.z0 if sc.gap_ceiling is None else sc.gap_ceiling
    # output = z0 - gap; gap in (0, ceiling)
    return op.z0 - ceiling, op.z0


def run_closed_loop(
    sc: Scenario,
    params: mag.MagnetParams,
    coeffs: mag.LinearCoeffs,
    op: mag.OperatingPoint,
) -> Trace:
    """Simulate ``sc`` and return the sampled trace.

    Leaving the gap range ``(0, gap_ceiling)`` truncates the trace at the
    first offending sample and sets ``contact_time``.  Non-finite states
    raise :class:`~crosspole.integrate.SimulationError`.
    """
    plant = build_plant(sc, params, coeffs, op)
    if _coil_time_constant(plant) < 10.0 * sc.dt:
        warnings.warn(
            f"dt={sc.dt:g} s gives less than 10x margin on the coil time constant",
            RuntimeWarning,
            stacklevel=2,
        )
    t = sc.grid()
    r = sample_schedule(sc.reference, t, sc.dt)
    d = sample_schedule(sc.disturbance, t, sc.dt)
    lo, hi = _limits(sc, plant, op)
    if sc.control_period is None or sc.controller == "open-loop":
        X, U, n_done, contact_time = _run_continuous(sc, plant, r, d, lo, hi)
    else:
        X, U, n_done, contact_time = _run_sampled(sc, plant, r, d, lo, hi)
    xs = X[:n_done].T
    xp = xs[: plant.n]
    trace = Trace(
        t=t[:n_done],
        ref=r[:n_done],
        output=plant.output(xp),
        control=plant.coil_voltage(xp, U[:n_done]),
        current=plant.coil_current(xp, U[:n_done]),
        dist=d[:n_done],
        contact_time=contact_time,
        name=sc.name,
        meta={"axis": sc.axis, "plant_mode": sc.plant_mode, "controller": sc.controller},
    )
    return trace


def _check(x, y, lo, hi, t_next):
    """True when the new sample is a contact event."""
    if lo < y < hi:
        return False
    if not np.all(np.isfinite(x)):
        raise SimulationError(f"non-finite state at t={t_next!r}", t_next)
    return True


def _run_continuous(sc, plant, r, d, lo, hi):
    loop = _ContinuousLoop(plant, sc)
    n_steps = len(r) - 1
    X = np.empty((n_steps + 1, loop.n))
    x = loop.initial(sc, r[0])
    kick = sc.controller == "pid" and not loop.filtered
    jumps = np.zeros(n_steps + 1, dtype=bool)
    if kick:
        jumps[1:] = np.diff(r) != 0
    xi = plant.n if sc.controller != "open-loop" else None
    limit = sc.integrator_limit if xi is not None else None
    dt = sc.dt
    n_done = n_steps + 1
    contact = None

    if plant.linear:
        A, B = linear_matrices(lambda xx, ww: np.asarray(loop.deriv(xx, ww)), loop.n, 2)
        Phi, Gamma = rk4_linear_map(A, B, dt)
        Gw = np.column_stack([r, d]) @ Gamma.T
    else:
        w = [0.0, 0.0]

        def f(_t, state):
            return loop.deriv(state, w)

    for k in range(n_steps):
        if jumps[k]:
            x[: plant.n] = plant.impulse(x[: plant.n], sc.gains.kd * (r[k] - r[k - 1]))
        X[k] = x
        if plant.linear:
            x = Phi @ x + Gw[k]
        else:
            w[0], w[1] = float(r[k]), float(d[k])
            try:
                x = np.array(rk4_step_seq(f, x.tolist(), k * dt, dt))
            except mag.DomainError:
                n_done, contact = k + 1, (k + 1) * dt
                break
        if limit is not None:
            x[xi] = min(max(x[xi], -limit), limit)
        if _check(x, plant.output(x), lo, hi, (k + 1) * dt):
            X[k + 1] = x
            n_done, contact = k + 2, (k + 1) * dt
            break
    else:
        if jumps[n_steps]:
            x[: plant.n] = plant.impulse(x[: plant.n], sc.gains.kd * (r[n_steps] - r[n_steps - 1]))
        X[n_steps] = x
    U = loop.control(X[:n_done].T, r[:n_done])
    return X, np.broadcast_to(U, (n_done,)).astype(float), n_done, contact


def _run_sampled(sc, plant, r, d, lo, hi):
    n_steps = len(r) - 1
    every = int(round(sc.control_period / sc.dt))
    ts = every * sc.dt
    nf = DEFAULT_NF if sc.nf is None else sc.nf
    law = pid_output if sc.controller == "pid" else ipd_output
    X = np.empty((n_steps + 1, plant.n))
    U = np.zeros(n_steps + 1)
    x = plant.initial(sc.initial_state)
    y0 = plant.output(x)
    st = ControllerState(last_input=(r[0] - y0) if sc.controller == "pid" else y0)
    dt = sc.dt
    n_done = n_steps + 1
    contact = None
    u = 0.0

    if plant.linear:
        A, B = linear_matrices(lambda s, w: plant.deriv(s, w[0], w[1]), plant.n, 2)
        Phi, Gamma = rk4_linear_map(A, B, dt)
    else:
        w = [0.0, 0.0]

        def f(_t, state):
            return plant.deriv(state, w[0], w[1])

    for k in range(n_steps):
        X[k] = x
        if k % every == 0:
            u, st = law(st, sc.gains, r[k], plant.output(x), ts, nf=nf, limit=sc.integrator_limit)
        U[k] = u
        if plant.linear:
            x = Phi @ x + Gamma @ np.array([u, d[k]])
        else:
            w[0], w[1] = float(u), float(d[k])
            try:
                x = np.array(rk4_step_seq(f, x.tolist(), k * dt, dt))
            except mag.DomainError:
                n_done, contact = k + 1, (k + 1) * dt
                break
        if _check(x, plant.output(x), lo, hi, (k + 1) * dt):
            X[k + 1] = x
            U[k + 1] = u
            n_done, contact = k + 2, (k + 1) * dt
            break
    else:
        X[n_steps] = x
        U[n_steps] = u
    return X, U, n_done, contact


def run_batch(jobs, max_workers: int | None = None) -> list[Trace]:
    """Run independent ``(scenario, params, coeffs, op)`` jobs, possibly in parallel.

    Results are returned in job order and are identical to serial execution.
    """
    jobs = list(jobs)
    if max_workers == 1 or len(jobs) < 2:
        return [run_closed_loop(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda job: run_closed_loop(*job), jobs))


@dataclass(frozen=True)
class ComparisonReport:
    name_a: str
    name_b: str
    metrics_a: ResponseMetrics
    metrics_b: ResponseMetrics
    ref_value: float
    max_deviation: float  # max |output_a - output_b|


def final_reference(trace: Trace) -> float:
    return float(trace.ref[-1])


def compare_runs(a: Trace, b: Trace) -> ComparisonReport:
    if len(a) != len(b) or not np.array_equal(a.t, b.t):
        raise ValueError("traces are on different time grids")
    if not np.array_equal(a.ref, b.ref):
        raise ValueError("traces follow different references")
    ref = final_reference(a)
    return ComparisonReport(
        name_a=a.name,
        name_b=b.name,
        metrics_a=response_metrics(a, ref),
        metrics_b=response_metrics(b, ref),
        ref_value=ref,
        max_deviation=float(np.max(np.abs(a.output - b.output))),
    )


def with_overrides(sc: Scenario, **changes) -> Scenario:
    """``dataclasses.replace`` that drops ``None`` overrides."""
    return replace(sc, **{k: v for k, v in changes.items() if v is not None})
