"""Command-line front end: ``crosspole linearize|tune|simulate|compare``.

Exit codes: 0 success, 1 parse/validation error, 2 numerical failure
(including an unstable tuning verdict), 3 contact event.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import magnetics as mag
from .config import ConfigError, ParameterSet, load_params, load_scenario, write_merged_csv, write_trace_csv
from .control import PUBLISHED_GAINS
from .integrate import SimulationError
from .lti import (
    PolynomialError,
    RootFindingError,
    axis_plant,
    plant_tf_current,
    poles,
    response_metrics,
    routh_stable,
    voltage_plant_denominator,
)
from .sim import AXES, PLANT_MODES, ScenarioError, compare_runs, final_reference, run_batch, run_closed_loop, with_overrides
from .tuning import cdm_gains_for, characteristic_polynomial, stability_indices, target_coefficients

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CONTACT = 0, 1, 2, 3

# Each tuned gain must land this close to the published one for the "reproduces" line.
PUBLISHED_TOLERANCE = 0.02


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _g(x: float) -> str:
    return format(x, ".10g")


def _emit(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _params(args) -> ParameterSet:
    return load_params(args.params)


# --- linearize ---------------------------------------------------------------


def cmd_linearize(args) -> list[str]:
    ps = _params(args)
    p, lc, op = ps.model()
    ka, kb = mag.linearize_translation(p, op)
    ka_fd, kb_fd = mag.linearize_translation_fd(p, op)
    i_eq = mag.equilibrium_current(p, op.z0)
    L_geo = mag.gap_inductance(p, op.z0)
    source = "calibrated" if ps.calibrated else "file"
    lines = [
        f"operating point: z0 = {_g(op.z0)} m, i0 = {_g(op.i_z0)} A",
        f"tabulated: K_A = {_g(lc.K_A)} N/m, K_B = {_g(lc.K_B)} N/A, K_C = {_g(lc.K_C)} Nm/rad, K_D = {_g(lc.K_D)} Nm/A",
        f"{'':10s}{'analytic':>20s}{'finite-diff':>20s}{'rel.err':>12s}",
        f"{'K_A N/m':10s}{_g(ka):>20s}{_g(ka_fd):>20s}{abs(ka_fd - ka) / abs(ka):>12.2e}",
        f"{'K_B N/A':10s}{_g(kb):>20s}{_g(kb_fd):>20s}{abs(kb_fd - kb) / abs(kb):>12.2e}",
        f"N = {_g(p.N)} turns ({source})",
        f"l_pm = {_g(p.l_pm * 1e3)} mm ({source})",
        f"lift at z0, i=0: {_g(mag.attractive_force(p, op.z0, 0.0))} N; weight {_g(p.m * p.g_accel)} N",
        f"equilibrium current: {_g(i_eq)} A",
        f"gap inductance at z0: {_g(L_geo)} H (tabulated L = {_g(p.L_table)} H)",
    ]
    for axis in AXES if args.axis is None else (args.axis,):
        ap = axis_plant(p, lc, axis)
        cur, _ = plant_tf_current(ap.stiffness, ap.gain, ap.inertia)
        pc = poles(cur.den)
        pv = poles(voltage_plant_denominator(ap.stiffness, ap.inertia, ap.R, ap.L))
        rhp = int(np.sum(pv.real > 0))
        lines.append(f"[{axis}] current-input poles: " + ", ".join(_g(float(s.real)) for s in pc) + " rad/s")
        lines.append(
            f"[{axis}] voltage-input poles: "
            + ", ".join(_g(float(s.real)) for s in pv)
            + f" rad/s ({rhp} in right half-plane)"
        )
    return lines


# --- tune ----------------------------------------------------------------------


def _parse_gammas(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, f"--gamma: expected three comma-separated numbers, got {text!r}") from exc
    if len(vals) != 3:
        raise _Fail(EXIT_INPUT, f"--gamma: expected three values, got {len(vals)}")
    return vals


def cmd_tune(args) -> list[str]:
    ps = _params(args)
    p, lc, _ = ps.model()
    gammas = _parse_gammas(args.gamma) if args.gamma else ps.defaults.gammas
    axis = args.axis or "z"
    ap = axis_plant(p, lc, axis)
    unit = "m" if axis == "z" else "rad"
    try:
        gains, tau = cdm_gains_for(ap, gammas)
    except mag.DomainError as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc
    target = target_coefficients(ap.inertia * ap.L, ap.inertia * ap.R, gammas)
    char = characteristic_polynomial(ap, gains)
    idx = stability_indices(char)
    verdict = routh_stable(char)
    lines = [
        f"axis: {axis}",
        "gammas: " + ", ".join(_g(x) for x in gammas),
        f"kp = {_g(gains.kp)} V/{unit}",
        f"ki = {_g(gains.ki)} V/({unit} s)",
        f"kd = {_g(gains.kd)} V s/{unit}",
        f"tau = {_g(tau)} s",
        "target polynomial (s^4..s^0): " + ", ".join(_g(c) for c in reversed(target)),
        "achieved indices: " + ", ".join(_g(x) for x in idx.gammas) + f"; tau = {_g(idx.tau)} s",
        "Routh first column: " + ", ".join(_g(c) for c in verdict.first_column),
        f"Routh verdict: {'stable' if verdict.stable else 'NOT STABLE'} ({verdict.sign_changes} sign changes)",
    ]
    if axis == "z":
        ref = PUBLISHED_GAINS
        errs = [abs(a - b) / abs(b) for a, b in zip((gains.kp, gains.ki, gains.kd), (ref.kp, ref.ki, ref.kd))]
        ok = max(errs) <= PUBLISHED_TOLERANCE
        lines.append(
            f"published gains ({_g(ref.kp)}, {_g(ref.ki)}, {_g(ref.kd)}): "
            f"{'reproduces' if ok else 'does not reproduce'} within 2% "
            f"(errors {', '.join(f'{100 * e:.2f}%' for e in errs)})"
        )
    if not verdict.stable:
        _emit(lines, args.out)
        raise _Fail(EXIT_NUMERIC, "tuning failed the Routh check")
    return lines


# --- simulate / compare --------------------------------------------------------


def _scenario(args, ps: ParameterSet, spec: str):
    d = ps.defaults
    sc = load_scenario(spec, d)
    ceiling = None
    if sc.gap_ceiling is None and d.gap_ceiling_factor != 2.0:
        ceiling = d.gap_ceiling_factor * ps.op.z0
    try:
        return with_overrides(sc, dt=args.dt, plant_mode=args.mode, axis=args.axis, gap_ceiling=ceiling)
    except ScenarioError as exc:
        raise ConfigError(str(exc), spec) from exc


def _metric_lines(trace, prefix: str = "") -> list[str]:
    if trace.contact:
        return [f"{prefix}CONTACT at t={trace.contact_time:.6g} s"]
    m = response_metrics(trace, final_reference(trace))
    settle = f"{m.settling_time_2pct:.6g} s" if m.settled else "not settled"
    return [
        f"{prefix}overshoot: {m.overshoot_pct:.6g} %",
        f"{prefix}peak: {m.peak * 1e3:.6g} mm" if trace.meta.get("axis", "z") == "z" else f"{prefix}peak: {m.peak:.6g} rad",
        f"{prefix}settling (2%): {settle}",
        f"{prefix}steady-state error: {m.steady_state_error:.6g}",
    ]


def cmd_simulate(args) -> list[str]:
    ps = _params(args)
    sc = _scenario(args, ps, args.scenario)
    trace = run_closed_loop(sc, *ps.model())
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_trace_csv(trace, fh)
    lines = [f"scenario: {sc.name} ({sc.axis}, {sc.plant_mode}, {sc.controller})", f"samples: {len(trace)}"]
    lines += _metric_lines(trace)
    if trace.contact:
        sys.stdout.write("\n".join(lines) + "\n")
        raise _Fail(EXIT_CONTACT, f"contact event in {sc.name}")
    return lines


def cmd_compare(args) -> list[str]:
    ps = _params(args)
    sa = _scenario(args, ps, args.scenario_a)
    sb = _scenario(args, ps, args.scenario_b)
    if sa.dt != sb.dt or sa.n_steps != sb.n_steps:
        raise _Fail(EXIT_INPUT, "scenarios have different time grids")
    if sa.reference != sb.reference:
        raise _Fail(EXIT_INPUT, "scenarios have different reference schedules")
    model = ps.model()
    ta, tb = run_batch([(sa, *model), (sb, *model)], max_workers=2)
    lines = [f"A: {sa.name} ({sa.controller}, {sa.plant_mode})", f"B: {sb.name} ({sb.controller}, {sb.plant_mode})"]
    if ta.contact or tb.contact:
        lines += _metric_lines(ta, "A ") + _metric_lines(tb, "B ")
        sys.stdout.write("\n".join(lines) + "\n")
        raise _Fail(EXIT_CONTACT, "contact event during comparison")
    rep = compare_runs(ta, tb)
    ma, mb = rep.metrics_a, rep.metrics_b
    lines += [
        f"{'metric':24s}{'A':>16s}{'B':>16s}",
        f"{'overshoot %':24s}{ma.overshoot_pct:>16.6g}{mb.overshoot_pct:>16.6g}",
        f"{'peak':24s}{ma.peak:>16.6g}{mb.peak:>16.6g}",
        f"{'settling 2% s':24s}{ma.settling_time_2pct:>16.6g}{mb.settling_time_2pct:>16.6g}",
        f"{'final value':24s}{ma.final:>16.6g}{mb.final:>16.6g}",
        f"{'steady-state error':24s}{ma.steady_state_error:>16.6g}{mb.steady_state_error:>16.6g}",
        f"settling reference: {_g(rep.ref_value)}",
        f"max |A - B|: {rep.max_deviation:.6g}",
    ]
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            write_merged_csv(ta, tb, fh)
    return lines


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="parameter file (default: shipped Table 1 set)")
    common.add_argument("--out", help="output file (CSV for simulate, report text otherwise)")
    common.add_argument("--dt", type=float, help="override integration step [s]")
    common.add_argument("--mode", choices=PLANT_MODES, help="override plant mode")
    common.add_argument("--axis", choices=AXES, help="axis to analyse or simulate")

    ap = argparse.ArgumentParser(prog="crosspole", description="Cross-pole magnetic levitation design tools.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("linearize", parents=[common], help="force-law linearization and open-loop poles")
    t = sub.add_parser("tune", parents=[common], help="coefficient-diagram gain synthesis")
    t.add_argument("--gamma", help="stability indices g1,g2,g3")
    s = sub.add_parser("simulate", parents=[common], help="run one scenario")
    s.add_argument("scenario", help="scenario file or shipped name (fig6, fig8, fig8_nonlinear)")
    c = sub.add_parser("compare", parents=[common], help="run two scenarios side by side")
    c.add_argument("scenario_a")
    c.add_argument("scenario_b")
    c.add_argument("--csv", help="merged trace CSV")
    return ap


COMMANDS = {"linearize": cmd_linearize, "tune": cmd_tune, "simulate": cmd_simulate, "compare": cmd_compare}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        lines = COMMANDS[args.command](args)
        if args.command != "simulate":
            _emit(lines, args.out)
        else:
            sys.stdout.write("\n".join(lines) + "\n")
        return EXIT_OK
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ScenarioError, mag.DomainError, PolynomialError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimulationError, RootFindingError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
