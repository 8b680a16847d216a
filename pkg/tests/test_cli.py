import io
import re
import subprocess
import sys

import numpy as np
import pytest

from crosspole import magnetics as mag
from crosspole.cli import main
from crosspole.config import read_trace_csv, shipped_text
from crosspole.lti import poles, voltage_plant_denominator
from crosspole.trace import COLUMNS

TABLE1 = shipped_text("table1.params")


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _short(tmp_path, name, **edits):
    text = shipped_text(f"{name}.scenario").replace("t_end_s = 10.0", "t_end_s = 3.0")
    for old, new in edits.items():
        text = text.replace(old, new)
    f = tmp_path / f"{name}_short.scenario"
    f.write_text(text)
    return str(f)


def test_linearize_report(capsys, model):
    code, out, _ = _run(capsys, "linearize")
    assert code == 0
    p, lc, op = model
    ka, kb = mag.linearize_translation(p, op)
    row = re.search(r"K_A N/m\s+(\S+)\s+(\S+)\s+(\S+)", out)
    assert float(row.group(1)) == pytest.approx(ka, rel=1e-9)
    assert float(row.group(3)) < 1e-6
    assert "12473" in out and "9.88" in out
    assert re.search(r"N = 159\.79", out) and re.search(r"l_pm = 0\.379", out)
    pv = poles(voltage_plant_denominator(lc.K_A, p.m, p.R, p.L_table))
    assert f"{pv[0].real:.10g}" in out
    assert "[z] voltage-input poles: 29.16" in out and "(1 in right half-plane)" in out


def test_linearize_missing_key(capsys, tmp_path):
    f = tmp_path / "bad.params"
    f.write_text("\n".join(l for l in TABLE1.splitlines() if not l.startswith("m_kg")))
    code, _, err = _run(capsys, "linearize", "--params", str(f))
    assert code == 1 and "m_kg" in err


def test_tune_defaults(capsys, tmp_path):
    report = tmp_path / "tune.txt"
    code, out, _ = _run(capsys, "tune", "--out", str(report))
    assert code == 0
    assert "kp = 1756.66" in out and "ki = 3088.82" in out and "kd = 31.629" in out
    assert "reproduces within 2%" in out and "does not" not in out
    assert "Routh verdict: stable" in out
    assert report.read_text() == out


def test_tune_pathological_gammas(capsys):
    code, out, err = _run(capsys, "tune", "--gamma", "1.1,1.1,1.1")
    assert code == 2
    assert "NOT STABLE" in out and "Routh" in err


def test_tune_bad_gamma_list(capsys):
    assert _run(capsys, "tune", "--gamma", "2,2")[0] == 1
    assert _run(capsys, "tune", "--gamma", "0.9,2,2")[0] == 1
    assert _run(capsys, "tune", "--gamma", "a,b,c")[0] == 1


def test_tune_tilt_axis(capsys, model):
    p, lc, _ = model
    code, out, _ = _run(capsys, "tune", "--axis", "alpha")
    assert code == 0 and "axis: alpha" in out and "V/rad" in out
    kd = float(re.search(r"kd = (\S+)", out).group(1))
    assert kd == pytest.approx((p.J_alpha * p.R) ** 2 / (2.0 * p.J_alpha * p.L_table) / lc.K_D, rel=1e-9)


def test_simulate_writes_csv(capsys, tmp_path):
    out_csv = tmp_path / "trace.csv"
    code, out, _ = _run(capsys, "simulate", _short(tmp_path, "fig8"), "--out", str(out_csv))
    assert code == 0
    text = out_csv.read_text()
    assert text.splitlines()[0] == ",".join(COLUMNS)
    tr = read_trace_csv(io.StringIO(text))
    assert len(tr) == int(round(3.0 / 5e-5)) + 1
    assert np.allclose(np.diff(tr.t), 5e-5)
    overshoot = float(re.search(r"overshoot: (\S+) %", out).group(1))
    assert overshoot < 2


def test_simulate_pid_peak_reported(capsys, tmp_path):
    code, out, _ = _run(capsys, "simulate", _short(tmp_path, "fig6"))
    assert code == 0
    peak = float(re.search(r"peak: (\S+) mm", out).group(1))
    assert peak == pytest.approx(1.92246, rel=1e-4)


def test_simulate_contact_exit(capsys, tmp_path):
    sc = _short(tmp_path, "fig8", **{"controller = ipd": "controller = open-loop", "0.0:0.0, 1.0:0.0005": "0:0"})
    with open(sc, "a") as fh:
        fh.write("initial_dev = 1e-5\n")
    code, out, err = _run(capsys, "simulate", sc)
    assert code == 3 and "CONTACT at t=" in out and "overshoot" not in out


def test_simulate_validation_error(capsys, tmp_path):
    sc = _short(tmp_path, "fig8", **{"reference = 0.0:0.0, 1.0:0.0005": "reference ="})
    code, _, err = _run(capsys, "simulate", sc)
    assert code == 1 and "reference" in err


def test_simulate_overrides(capsys, tmp_path):
    code, out, _ = _run(capsys, "simulate", _short(tmp_path, "fig8"), "--dt", "1e-4", "--mode", "physical-nonlinear")
    assert code == 0 and "physical-nonlinear" in out and f"samples: {30001}" in out
    assert _run(capsys, "simulate", _short(tmp_path, "fig8"), "--dt", "0.1")[0] == 1


def test_compare_report_and_merged_csv(capsys, tmp_path):
    merged = tmp_path / "m.csv"
    code, out, _ = _run(capsys, "compare", _short(tmp_path, "fig6"), _short(tmp_path, "fig8"), "--csv", str(merged))
    assert code == 0
    row = re.search(r"overshoot %\s+(\S+)\s+(\S+)", out)
    assert float(row.group(1)) > 100 and float(row.group(2)) < 2
    final = re.search(r"final value\s+(\S+)\s+(\S+)", out)
    assert float(final.group(1)) == pytest.approx(float(final.group(2)), rel=1e-6)
    header = merged.read_text().splitlines()[0].split(",")
    assert len(header) == 11


def test_compare_identical_is_zero(capsys, tmp_path):
    sc = _short(tmp_path, "fig8")
    code, out, _ = _run(capsys, "compare", sc, sc)
    assert code == 0 and "max |A - B|: 0" in out


def test_compare_grid_mismatch(capsys, tmp_path):
    a = _short(tmp_path, "fig8")
    b = _short(tmp_path, "fig6", **{"dt_s = 5e-5": "dt_s = 1e-4"})
    code, _, err = _run(capsys, "compare", a, b)
    assert code == 1 and "grid" in err


def test_usage_errors(capsys):
    assert _run(capsys, "bogus")[0] == 1
    assert _run(capsys, "simulate", "does_not_exist")[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "crosspole", "tune"], capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "Routh verdict" in res.stdout
