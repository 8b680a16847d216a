"""Parameter files, scenario files and trace CSV.

Both file kinds are INI-style sectioned ``key = value`` documents (see
``docs/file-formats.md``).  Unit suffixes are part of every physical key
name; values are read exactly as written and converted to SI on access, so
a parse/write/parse cycle reproduces the same in-memory value.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .axes import Geometry
from .control import PidGains
from .magnetics import MU0, LinearCoeffs, MagnetParams, OperatingPoint, calibrate
from .sim import Scenario, ScenarioError
from .trace import COLUMNS, Trace


class ConfigError(ValueError):
    """Parse or validation failure; ``line`` is 1-based when known."""

    def __init__(self, message: str, source: str = "<string>", line: int | None = None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


# (section, key) -> required
PARAM_KEYS: dict[str, dict[str, bool]] = {
    "magnet": {
        "mu0_H_per_m": False,
        "S_m2": True,
        "E_pm_AT": True,
        "R_ohm": True,
        "L_H": True,
        "m_kg": True,
        "J_alpha_kg_m2": True,
        "J_beta_kg_m2": True,
        "g_m_per_s2": False,
        "N_turns": False,
        "l_pm_mm": False,
    },
    "table1": {
        "z0_mm": True,
        "i_z0_A": False,
        "K_A_N_per_m": True,
        "K_B_N_per_A": True,
        "K_C_Nm_per_rad": True,
        "K_D_Nm_per_A": True,
    },
    "geometry": {"r_m": False},
    "defaults": {
        "dt_s": False,
        "t_end_s": False,
        "gamma1": False,
        "gamma2": False,
        "gamma3": False,
        "gap_ceiling_factor": False,
    },
}

PARAM_DEFAULTS = {
    ("magnet", "mu0_H_per_m"): MU0,
    ("magnet", "g_m_per_s2"): 9.81,
    ("table1", "i_z0_A"): 0.0,
    ("geometry", "r_m"): 0.1,
    ("defaults", "dt_s"): 5e-5,
    ("defaults", "t_end_s"): 10.0,
    ("defaults", "gamma1"): 2.5,
    ("defaults", "gamma2"): 2.0,
    ("defaults", "gamma3"): 2.0,
    ("defaults", "gap_ceiling_factor"): 2.0,
}

_KEY_LINE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_index(text: str) -> dict[tuple[str, str], int]:
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_LINE.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, ""), n)
            continue
        m = _KEY_LINE.match(line)
        if m and section is not None:
            out.setdefault((section, m.group(1)), n)
    return out


def _read_ini(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key before any [section] header", source, exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", source, line) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], source, exc.lineno) from exc
    return cp


def _float(value: str, key: str, source: str, line: int | None) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}", source, line) from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite", source, line)
    return x


@dataclass(frozen=True)
class SimDefaults:
    dt: float
    t_end: float
    gammas: tuple[float, float, float]
    gap_ceiling_factor: float


@dataclass(frozen=True)
class ParameterSet:
    """Parsed parameter file.

    ``raw`` holds the explicitly written values in file units; everything
    else is derived from it.  When ``N_turns``/``l_pm_mm`` are absent they
    are recovered by :func:`~crosspole.magnetics.calibrate`.
    """

    raw: dict

    def get(self, section: str, key: str) -> float:
        try:
            return self.raw[section][key]
        except KeyError:
            return PARAM_DEFAULTS[(section, key)]

    def has(self, section: str, key: str) -> bool:
        return key in self.raw.get(section, {})

    @property
    def calibrated(self) -> bool:
        return not (self.has("magnet", "N_turns") and self.has("magnet", "l_pm_mm"))

    @property
    def coeffs(self) -> LinearCoeffs:
        g = self.get
        return LinearCoeffs(
            g("table1", "K_A_N_per_m"),
            g("table1", "K_B_N_per_A"),
            g("table1", "K_C_Nm_per_rad"),
            g("table1", "K_D_Nm_per_A"),
        )

    @property
    def op(self) -> OperatingPoint:
        return OperatingPoint(z0=self.get("table1", "z0_mm") * 1e-3, i_z0=self.get("table1", "i_z0_A"))

    def turns_and_thickness(self) -> tuple[float, float]:
        g = self.get
        if not self.calibrated:
            return g("magnet", "N_turns"), g("magnet", "l_pm_mm") * 1e-3
        lc, op = self.coeffs, self.op
        return calibrate(lc.K_A, lc.K_B, g("magnet", "E_pm_AT"), g("magnet", "S_m2"), op.z0, op.i_z0, g("magnet", "mu0_H_per_m"))

    @property
    def magnet(self) -> MagnetParams:
        g = self.get
        N, l_pm = self.turns_and_thickness()
        return MagnetParams(
            mu0=g("magnet", "mu0_H_per_m"),
            S=g("magnet", "S_m2"),
            N=N,
            l_pm=l_pm,
            E_pm=g("magnet", "E_pm_AT"),
            R=g("magnet", "R_ohm"),
            L_table=g("magnet", "L_H"),
            m=g("magnet", "m_kg"),
            J_alpha=g("magnet", "J_alpha_kg_m2"),
            J_beta=g("magnet", "J_beta_kg_m2"),
            g_accel=g("magnet", "g_m_per_s2"),
        )

    @property
    def geometry(self) -> Geometry:
        return Geometry(self.get("geometry", "r_m"))

    @property
    def defaults(self) -> SimDefaults:
        g = self.get
        return SimDefaults(
            dt=g("defaults", "dt_s"),
            t_end=g("defaults", "t_end_s"),
            gammas=(g("defaults", "gamma1"), g("defaults", "gamma2"), g("defaults", "gamma3")),
            gap_ceiling_factor=g("defaults", "gap_ceiling_factor"),
        )

    def model(self) -> tuple[MagnetParams, LinearCoeffs, OperatingPoint]:
        return self.magnet, self.coeffs, self.op


def parse_params(text: str, source: str = "<params>") -> ParameterSet:
    cp = _read_ini(text, source)
    lines = _line_index(text)
    raw: dict[str, dict[str, float]] = {}
    for section in cp.sections():
        if section not in PARAM_KEYS:
            raise ConfigError(f"unknown section [{section}]", source, lines.get((section, ""), None))
        for key, value in cp.items(section):
            line = lines.get((section, key))
            if key not in PARAM_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", source, line)
            raw.setdefault(section, {})[key] = _float(value, key, source, line)
    for section, keys in PARAM_KEYS.items():
        for key, required in keys.items():
            if required and key not in raw.get(section, {}):
                raise ConfigError(f"missing required key {key!r} in [{section}]", source)
    if ("N_turns" in raw.get("magnet", {})) != ("l_pm_mm" in raw.get("magnet", {})):
        raise ConfigError("N_turns and l_pm_mm must be given together", source)
    ps = ParameterSet(raw)
    try:
        ps.magnet, ps.op, ps.geometry
    except ValueError as exc:
        raise ConfigError(str(exc), source) from exc
    return ps


def write_params(ps: ParameterSet) -> str:
    out = []
    for section, keys in PARAM_KEYS.items():
        values = ps.raw.get(section, {})
        if not values:
            continue
        out.append(f"[{section}]")
        out.extend(f"{key} = {values[key]!r}" for key in keys if key in values)
        out.append("")
    return "\n".join(out)


def load_params(path: str | Path | None = None) -> ParameterSet:
    """Load a parameter file; ``None`` loads the shipped table values."""
    if path is None:
        return parse_params(shipped_text("table1.params"), "table1.params")
    path = Path(path)
    return parse_params(path.read_text(encoding="utf-8"), str(path))


def shipped_text(name: str) -> str:
    return (resources.files("crosspole") / "data" / name).read_text(encoding="utf-8")


def shipped_scenarios() -> list[str]:
    return sorted(
        p.name.removesuffix(".scenario")
        for p in (resources.files("crosspole") / "data").iterdir()
        if p.name.endswith(".scenario")
    )


# --- scenarios -------------------------------------------------------------

SCENARIO_KEYS = {
    "name": True,
    "axis": False,
    "plant_mode": False,
    "controller": True,
    "drive": False,
    "kp_V_per_m": False,
    "ki_V_per_m_s": False,
    "kd_V_s_per_m": False,
    "reference": True,
    "disturbance": False,
    "t_end_s": False,
    "dt_s": False,
    "derivative_nf": False,
    "control_period_s": False,
    "integrator_limit_V": False,
    "gap_ceiling_m": False,
    "initial_dev": False,
    "initial_rate": False,
    "initial_current_A": False,
}
_INITIAL = {"initial_dev": "dev", "initial_rate": "rate", "initial_current_A": "current"}
_OPTIONAL_WORDS = {"derivative_nf": "ideal", "control_period_s": "continuous", "integrator_limit_V": "none", "gap_ceiling_m": "auto"}


def _parse_schedule(value: str, key: str, source: str, line: int | None):
    entries = []
    for item in filter(None, (p.strip() for p in value.split(","))):
        if ":" not in item:
            raise ConfigError(f"{key}: entries are 'time_s:value', got {item!r}", source, line)
        t, v = item.split(":", 1)
        entries.append((_float(t, key, source, line), _float(v, key, source, line)))
    if not entries:
        raise ConfigError(f"{key}: schedule is empty", source, line)
    return tuple(entries)


def parse_scenario(text: str, source: str = "<scenario>", defaults: SimDefaults | None = None) -> Scenario:
    cp = _read_ini(text, source)
    lines = _line_index(text)
    if cp.sections() != ["scenario"]:
        raise ConfigError("expected exactly one [scenario] section", source)
    items = dict(cp.items("scenario"))
    for key in items:
        if key not in SCENARIO_KEYS:
            raise ConfigError(f"unknown key {key!r}", source, lines.get(("scenario", key)))
    for key, required in SCENARIO_KEYS.items():
        if required and key not in items:
            raise ConfigError(f"missing required key {key!r}", source)

    def num(key, default=None):
        if key not in items:
            return default
        word = _OPTIONAL_WORDS.get(key)
        if word is not None and items[key].strip().lower() == word:
            return None
        return _float(items[key], key, source, lines.get(("scenario", key)))

    kw = {
        "name": items["name"].strip(),
        "axis": items.get("axis", "z").strip(),
        "plant_mode": items.get("plant_mode", "paper-linear").strip(),
        "controller": items["controller"].strip(),
        "drive": items.get("drive", "voltage").strip(),
        "gains": PidGains(num("kp_V_per_m", 0.0), num("ki_V_per_m_s", 0.0), num("kd_V_s_per_m", 0.0)),
        "reference": _parse_schedule(items["reference"], "reference", source, lines.get(("scenario", "reference"))),
        "disturbance": _parse_schedule(
            items.get("disturbance", "0:0"), "disturbance", source, lines.get(("scenario", "disturbance"))
        ),
        "nf": num("derivative_nf"),
        "control_period": num("control_period_s"),
        "integrator_limit": num("integrator_limit_V"),
        "gap_ceiling": num("gap_ceiling_m"),
        "initial_state": {v: num(k) for k, v in _INITIAL.items() if k in items},
    }
    if defaults is not None:
        kw["t_end"], kw["dt"] = defaults.t_end, defaults.dt
    if "t_end_s" in items:
        kw["t_end"] = num("t_end_s")
    if "dt_s" in items:
        kw["dt"] = num("dt_s")
    try:
        return Scenario(**kw)
    except ScenarioError as exc:
        raise ConfigError(str(exc), source) from exc


def write_scenario(sc: Scenario) -> str:
    def sched(s):
        return ", ".join(f"{t!r}:{v!r}" for t, v in s)

    def opt(x, word):
        return word if x is None else repr(x)

    lines = [
        "[scenario]",
        f"name = {sc.name}",
        f"axis = {sc.axis}",
        f"plant_mode = {sc.plant_mode}",
        f"controller = {sc.controller}",
        f"drive = {sc.drive}",
        f"kp_V_per_m = {sc.gains.kp!r}",
        f"ki_V_per_m_s = {sc.gains.ki!r}",
        f"kd_V_s_per_m = {sc.gains.kd!r}",
        f"reference = {sched(sc.reference)}",
        f"disturbance = {sched(sc.disturbance)}",
        f"t_end_s = {sc.t_end!r}",
        f"dt_s = {sc.dt!r}",
        f"derivative_nf = {opt(sc.nf, 'ideal')}",
        f"control_period_s = {opt(sc.control_period, 'continuous')}",
        f"integrator_limit_V = {opt(sc.integrator_limit, 'none')}",
        f"gap_ceiling_m = {opt(sc.gap_ceiling, 'auto')}",
    ]
    for key, field_name in _INITIAL.items():
        if field_name in sc.initial_state:
            lines.append(f"{key} = {sc.initial_state[field_name]!r}")
    return "\n".join(lines) + "\n"


def load_scenario(spec: str | Path, defaults: SimDefaults | None = None) -> Scenario:
    """Load a scenario from a path, or a shipped scenario by bare name (e.g. ``fig8``)."""
    path = Path(spec)
    if path.is_file():
        return parse_scenario(path.read_text(encoding="utf-8"), str(path), defaults)
    name = str(spec).removesuffix(".scenario")
    if name in shipped_scenarios():
        return parse_scenario(shipped_text(f"{name}.scenario"), f"{name}.scenario", defaults)
    raise ConfigError("no such scenario file or shipped scenario", str(spec))


# --- trace CSV -------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace: Trace, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in zip(*trace.columns()):
        w.writerow([_fmt(v) for v in row])


def trace_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()


def read_trace_csv(fh) -> Trace:
    rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ConfigError(f"trace CSV header must be {','.join(COLUMNS)}")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, len(COLUMNS))
    return Trace(*data.T)


def write_merged_csv(a: Trace, b: Trace, fh) -> None:
    """Shared time column followed by both traces' data columns, prefixed ``a_``/``b_``."""
    if not np.array_equal(a.t, b.t):
        raise ValueError("traces are on different time grids")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t_s"] + [f"a_{c}" for c in COLUMNS[1:]] + [f"b_{c}" for c in COLUMNS[1:]])
    for k in range(len(a)):
        row = [a.t[k]] + [c[k] for c in a.columns()[1:]] + [c[k] for c in b.columns()[1:]]
        w.writerow([_fmt(v) for v in row])
