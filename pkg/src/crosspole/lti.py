"""Polynomial / transfer-function algebra, stability tests and step responses.

Polynomials store real coefficients in ascending powers of ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import PidGains, filter_time_constant
from .integrate import rk4_linear_map
from .magnetics import LinearCoeffs, MagnetParams
from .trace import Trace


class PolynomialError(ValueError):
    pass


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple[float, ...]

    def __init__(self, coeffs):
        c = [float(x) for x in coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            raise PolynomialError("empty polynomial")
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_descending(cls, coeffs) -> Polynomial:
        return cls(list(coeffs)[::-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def descending(self) -> list[float]:
        return list(self.coeffs[::-1])

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def __add__(self, other: Polynomial) -> Polynomial:
        return Polynomial(np.polynomial.polynomial.polyadd(self.coeffs, _poly(other).coeffs))

    def __sub__(self, other: Polynomial) -> Polynomial:
        return Polynomial(np.polynomial.polynomial.polysub(self.coeffs, _poly(other).coeffs))

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, float)):
            return Polynomial([other * c for c in self.coeffs])
        return Polynomial(np.polynomial.polynomial.polymul(self.coeffs, _poly(other).coeffs))

    __rmul__ = __mul__

    def __neg__(self) -> Polynomial:
        return self * -1.0

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)!r})"


def _poly(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial([float(p)])


@dataclass(frozen=True)
class TransferFunction:
    num: Polynomial
    den: Polynomial

    def __call__(self, s):
        return self.num(s) / self.den(s)

    @property
    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree

    def dc_gain(self) -> float:
        return self.num.coeffs[0] / self.den.coeffs[0]

    def feedback(self, h: TransferFunction | float = 1.0) -> TransferFunction:
        """Negative-feedback closure ``G / (1 + G H)``."""
        if not isinstance(h, TransferFunction):
            h = TransferFunction(Polynomial([h]), Polynomial([1.0]))
        return TransferFunction(self.num * h.den, self.den * h.den + self.num * h.num)

    def __mul__(self, other: TransferFunction) -> TransferFunction:
        return TransferFunction(self.num * other.num, self.den * other.den)


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @classmethod
    def from_tf(cls, tf: TransferFunction) -> StateSpace:
        """Controllable canonical realization of a proper SISO transfer function."""
        if not tf.is_proper:
            raise PolynomialError("improper transfer function cannot be realized")
        n = tf.den.degree
        if n < 1:
            raise PolynomialError("denominator degree must be >= 1")
        a = np.array(tf.den.coeffs) / tf.den.leading
        b = np.zeros(n + 1)
        b[: tf.num.degree + 1] = np.array(tf.num.coeffs) / tf.den.leading
        D = b[n]
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -a[:n]
        B = np.zeros((n, 1))
        B[-1, 0] = 1.0
        C = (b[:n] - D * a[:n]).reshape(1, n)
        return cls(A, B, C, float(D))

    def dc_gain(self) -> float:
        return float(-(self.C @ np.linalg.solve(self.A, self.B))[0, 0] + self.D)


@dataclass(frozen=True)
class AxisPlant:
    """Linearized single-axis plant ``inertia·ÿ = stiffness·y + gain·i`` with an RL coil.

    For the z axis these are (m, K_A, K_B); for a tilt axis (J, K_C, K_D)
    with the current sign absorbed (the simulator inverts the coil command).
    """

    inertia: float
    stiffness: float
    gain: float
    R: float
    L: float


def axis_plant(p: MagnetParams, lc: LinearCoeffs, axis: str = "z", L: float | None = None) -> AxisPlant:
    L = p.L_table if L is None else L
    if axis == "z":
        return AxisPlant(p.m, lc.K_A, lc.K_B, p.R, L)
    if axis == "alpha":
        return AxisPlant(p.J_alpha, lc.K_C, lc.K_D, p.R, L)
    if axis == "beta":
        return AxisPlant(p.J_beta, lc.K_C, lc.K_D, p.R, L)
    raise ValueError(f"unknown axis {axis!r}")


def plant_tf_current(K_A: float, K_B: float, m: float) -> tuple[TransferFunction, TransferFunction]:
    """Current-driven mechanics: ``(Z/I, Z/F_d)``."""
    if not m > 0:
        raise ValueError("m must be > 0")
    den = Polynomial([-K_A, 0.0, m])
    return TransferFunction(Polynomial([K_B]), den), TransferFunction(Polynomial([-1.0]), den)


def plant_tf_voltage(
    K_A: float, K_B: float, m: float, R: float, L: float
) -> tuple[TransferFunction, TransferFunction]:
    """Voltage-driven plant ``(Z/E, Z/F_d)`` assembled from its block diagram.

    The coil lag ``1/(L s + R)`` drives the current-input mechanics, closed by
    the motional feedback ``(K_A·L/K_B)·s`` from gap velocity back to coil
    voltage.  After closure the first-order term cancels and the
    denominator is ``m·L·s³ + m·R·s² − K_A·R``.
    """
    if not (m > 0 and R > 0 and L > 0):
        raise ValueError("m, R and L must be > 0")
    coil = TransferFunction(Polynomial([1.0]), Polynomial([R, L]))
    mech, _ = plant_tf_current(K_A, K_B, m)
    motional = TransferFunction(Polynomial([0.0, K_A * L / K_B]), Polynomial([1.0]))
    cmd = (coil * mech).feedback(motional)
    # F_d enters at the mechanics, so the coil lag appears in its numerator.
    dist = TransferFunction(-coil.den, cmd.den)
    return cmd, dist


def voltage_plant_denominator(K_A: float, m: float, R: float, L: float) -> Polynomial:
    """Closed-form voltage-plant denominator with the motional term already cancelled."""
    return Polynomial([-K_A * R, 0.0, m * R, m * L])


def _controller_polys(gains: PidGains, nf: float | None) -> tuple[Polynomial, Polynomial]:
    """PID controller ``C(s) = Cn/Cd`` with optional filtered derivative."""
    tf = filter_time_constant(gains, nf)
    if tf == 0.0:
        return Polynomial([gains.ki, gains.kp, gains.kd]), Polynomial([0.0, 1.0])
    # kp + ki/s + kd·s/(tf·s + 1) over s·(tf·s + 1)
    cd = Polynomial([0.0, 1.0, tf])
    cn = Polynomial([gains.ki, gains.kp + gains.ki * tf, gains.kp * tf + gains.kd])
    return cn, cd


def closed_loop_pid(plant: AxisPlant, gains: PidGains, nf: float | None = None) -> TransferFunction:
    """Reference-to-output closed loop with all three terms on the error.

    ``nf=None`` gives the ideal-derivative loop; otherwise the derivative is
    filtered exactly as in the time-domain controller.
    """
    g, _ = plant_tf_voltage(plant.stiffness, plant.gain, plant.inertia, plant.R, plant.L)
    cn, cd = _controller_polys(gains, nf)
    return TransferFunction(g.num * cn, g.den * cd + g.num * cn)


def closed_loop_ipd(plant: AxisPlant, gains: PidGains, nf: float | None = None) -> TransferFunction:
    """Reference-to-output closed loop with only the integral acting on the reference."""
    g, _ = plant_tf_voltage(plant.stiffness, plant.gain, plant.inertia, plant.R, plant.L)
    cn, cd = _controller_polys(gains, nf)
    # Reference path ki/s expressed over the same cd.
    ref = Polynomial([gains.ki]) * Polynomial(cd.coeffs[1:])
    return TransferFunction(g.num * ref, g.den * cd + g.num * cn)


@dataclass(frozen=True)
class RouthResult:
    stable: bool
    first_column: tuple[float, ...]
    zero_row: bool = False
    eps_substituted: bool = False
    sign_changes: int = 0

    def __iter__(self):
        yield self.stable
        yield self.first_column


def routh_array(p: Polynomial, eps: float = 1e-9) -> tuple[list[list[float]], bool, bool]:
    """Routh table rows s^n ... s^0, plus (zero_row, eps_substituted) flags.

    Entries that cancel to within 1e-12 of their contributing products are
    treated as exact zeros.  Construction stops at an all-zero row.
    """
    if p.degree < 1:
        raise PolynomialError("Routh test needs degree >= 1")
    d = p.descending()
    width = len(d) // 2 + 1
    rows = [
        d[0::2] + [0.0] * (width - len(d[0::2])),
        d[1::2] + [0.0] * (width - len(d[1::2])),
    ]
    zero_row = False
    eps_used = False
    for _ in range(p.degree - 1):
        prev, cur = rows[-2], rows[-1]
        if all(c == 0.0 for c in cur):
            zero_row = True
            break
        if cur[0] == 0.0:
            cur = rows[-1] = [eps] + cur[1:]
            eps_used = True
        pivot = cur[0]
        new = []
        for j in range(width - 1):
            a, b = pivot * prev[j + 1], prev[0] * cur[j + 1]
            diff = a - b
            new.append(0.0 if abs(diff) <= 1e-12 * (abs(a) + abs(b)) else diff / pivot)
        rows.append(new + [0.0])
    if not zero_row and all(c == 0.0 for c in rows[-1]):
        zero_row = True
    return rows, zero_row, eps_used


def routh_stable(p: Polynomial, eps: float = 1e-9) -> RouthResult:
    """Routh–Hurwitz test on ``p``.

    A vanishing pivot is replaced by ``eps`` so the table can be completed;
    the polynomial is then not asymptotically stable.  An all-zero row
    (roots symmetric about the origin, e.g. on the imaginary axis) is flagged
    with ``zero_row`` and never reported as stable.
    """
    rows, zero_row, eps_used = routh_array(p, eps)
    first = tuple(r[0] for r in rows)
    signs = [math.copysign(1.0, c) for c in first if c != 0.0]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if zero_row:
        return RouthResult(False, first, zero_row=True, eps_substituted=eps_used, sign_changes=changes)
    lead = math.copysign(1.0, p.leading)
    stable = not eps_used and all(c * lead > 0 for c in first)
    return RouthResult(stable, first, eps_substituted=eps_used, sign_changes=changes)


def companion_matrix(p: Polynomial) -> np.ndarray:
    a = np.array(p.coeffs) / p.leading
    n = p.degree
    C = np.zeros((n, n))
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -a[:n]
    return C


def poles(p: Polynomial, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
    """Roots of ``p`` from companion-matrix eigenvalues, Newton-polished.

    Each eigenvalue is refined by Newton steps until the relative update is
    below ``tol`` or ``max_iter`` is reached.  Roots whose residual fails the
    acceptance bound raise :class:`RootFindingError`.
    """
    if p.degree < 1:
        raise PolynomialError("root finding needs degree >= 1")
    try:
        roots = np.linalg.eigvals(companion_matrix(p)).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(f"eigensolver failed for {p!r}") from exc
    c = np.array(p.coeffs, dtype=complex)
    dc = np.polynomial.polynomial.polyder(c)
    scale = np.max(np.abs(c))
    for k, r in enumerate(roots):
        for _ in range(max_iter):
            f = np.polynomial.polynomial.polyval(r, c)
            fp = np.polynomial.polynomial.polyval(r, dc)
            if fp == 0:
                break
            step = f / fp
            cand = r - step
            # Newton polishing must not make the residual worse (multiple roots).
            if abs(np.polynomial.polynomial.polyval(cand, c)) > abs(f):
                break
            r = cand
            if abs(step) <= tol * max(1.0, abs(r)):
                break
        roots[k] = r
        bound = 1e-8 * scale * max(1.0, abs(r)) ** p.degree
        if abs(np.polynomial.polynomial.polyval(r, c)) > bound:
            raise RootFindingError(f"root {r!r} of {p!r} did not converge")
    real = np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots))
    roots[real] = roots[real].real
    return roots[np.lexsort((roots.imag, -roots.real))]


def step_response(
    tf: TransferFunction,
    t_end: float,
    dt: float,
    amplitude: float = 1.0,
    t_step: float = 0.0,
) -> Trace:
    """Step response by RK4 integration of the controllable canonical realization.

    The input is sampled at each step start and held across the step.
    """
    if not dt > 0 or not t_end > dt:
        raise ValueError("need dt > 0 and t_end > dt")
    ss = StateSpace.from_tf(tf)
    Phi, Gamma = rk4_linear_map(ss.A, ss.B, dt)
    n_steps = int(round(t_end / dt))
    t = np.arange(n_steps + 1) * dt
    u = np.where(t >= t_step - 1e-9 * dt, amplitude, 0.0)
    x = np.zeros(ss.A.shape[0])
    y = np.empty(n_steps + 1)
    c = ss.C[0]
    g = Gamma[:, 0]
    for k in range(n_steps + 1):
        y[k] = c @ x + ss.D * u[k]
        x = Phi @ x + g * u[k]
    nan = np.full_like(t, np.nan)
    return Trace(t, u, y, nan, nan.copy(), np.zeros_like(t), name="step_response")


@dataclass(frozen=True)
class ResponseMetrics:
    overshoot_pct: float
    settling_time_2pct: float
    steady_state_error: float
    peak: float
    final: float
    settled: bool


def response_metrics(trace: Trace, ref_value: float, band: float = 0.02) -> ResponseMetrics:
    """Step-response metrics against ``ref_value``.

    Settling time is measured from the last change of the trace's reference
    column (or the first sample) to the first sample after which the output
    stays inside ``±band·|ref_value|``.  The final value and steady-state
    error average the last 5 % of samples.  A trace whose tail window is not
    inside the band is reported with ``settled=False`` and NaN settling time.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    y = trace.output
    n_tail = max(1, int(math.ceil(0.05 * len(y))))
    final = float(np.mean(y[-n_tail:]))
    sse = float(ref_value - final)
    direction = 1.0 if ref_value >= 0 else -1.0
    peak = float(direction * np.max(direction * y))
    if ref_value == 0:
        overshoot = 0.0
        tol = band * max(np.max(np.abs(y)), 1e-300)
    else:
        overshoot = max(0.0, direction * (peak - final) / abs(ref_value) * 100.0)
        tol = band * abs(ref_value)
    changes = np.nonzero(np.diff(trace.ref) != 0)[0]
    t0 = trace.t[changes[-1] + 1] if len(changes) else trace.t[0]
    outside = np.nonzero(np.abs(y - ref_value) > tol)[0]
    settled = not np.any(outside >= len(y) - n_tail)
    if not settled:
        ts = math.nan
    elif len(outside) == 0:
        ts = 0.0
    else:
        ts = max(0.0, float(trace.t[outside[-1] + 1] - t0))
    return ResponseMetrics(overshoot, ts, sse, peak, final, settled)
