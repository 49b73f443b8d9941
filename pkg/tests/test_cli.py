import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from wvamp.cli import main
from wvamp.lerch import xi0_lerch
from wvamp.model import shift_ssh_claimed

from conftest import SQRT3

THETA = repr(2 * math.pi / 3)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def write_scenario(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


# --- shift -------------------------------------------------------------------------

def test_shift_weak_gaussian(capsys):
    code, out, _ = run(capsys, "shift", "--theta", THETA, "--probe", "gaussian", "--param", "width=0.01")
    assert code == 0
    assert json.loads(out)["shift"] == pytest.approx(1.7320, abs=1e-3)


def test_shift_from_scenario_file(tmp_path, capsys):
    path = write_scenario(tmp_path, {"weak_value": {"theta_radians": 2 * math.pi / 3},
                                     "probe": {"family": "ssh_optimal", "params": {}}})
    code, out, _ = run(capsys, "shift", "--scenario", path)
    assert code == 0
    assert json.loads(out)["shift"] == pytest.approx(2 / SQRT3, rel=1e-8)


@pytest.mark.parametrize("probe", [["--probe", "tabulated"], ["--probe", "gaussian", "--param", "width=0.3"],
                                   ["--probe", "arbitrary_shift", "--param", "alpha=2"]])
def test_shift_unit_weak_value(capsys, probe):
    code, out, _ = run(capsys, "shift", "--aw", "1", "0", *probe)
    assert code == 0
    assert json.loads(out)["shift"] == pytest.approx(1.0, abs=1e-8)


def test_shift_orthogonal_post_selection(capsys):
    code, _, err = run(capsys, "shift", "--theta", repr(math.pi), "--probe", "gaussian", "--param", "width=1")
    assert code == 2
    assert json.loads(err)["error"] == "OrthogonalPostSelection"


def test_shift_singular_probe_needs_epsilon(capsys):
    args = ["shift", "--aw", repr(SQRT3), "0", "--probe", "variational",
            "--param", "mean_kernel_norm=2", "--param", "target_shift=5"]
    code, _, err = run(capsys, *args)
    assert code == 3
    assert json.loads(err)["error"] == "SingularProbe"
    code, out, _ = run(capsys, *args, "--epsilon", "1e-3")
    assert code == 0
    assert json.loads(out)["shift"] == pytest.approx(5.0, rel=1e-8)


def test_shift_csv_has_units(capsys):
    code, out, _ = run(capsys, "shift", "--aw", "2", "0.5", "--probe", "gaussian", "--param", "width=1",
                       "--format", "csv")
    assert code == 0
    table = rows(out)
    assert "shift [rescaled position x = q/g]" in table[0]
    assert len(table) == 2


def test_shift_position_check(capsys):
    code, out, _ = run(capsys, "shift", "--aw", "1.5", "0", "--probe", "gaussian", "--param", "width=0.8",
                       "--param", "center=1", "--position-check")
    assert code == 0
    rec = json.loads(out)
    assert rec["position_mean_initial"] == pytest.approx(rec["mean_initial"], abs=1e-6)
    assert rec["position_mean_final"] == pytest.approx(rec["mean_final"], abs=1e-6)


# --- scenario validation -----------------------------------------------------------------

@pytest.mark.parametrize("data", [
    {"weak_value": {"re": 1.0, "theta_radians": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1}}},
    {"weak_value": {}, "probe": {"family": "gaussian", "params": {"width": 1}}},
    {"weak_value": {"re": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1}}, "colour": "red"},
    {"weak_value": {"re": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1}, "extra": 1}},
    {"weak_value": {"re": 1.0}, "probe": {"family": "lorentzian", "params": {}}},
    {"weak_value": {"re": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1}},
     "numerics": {"rel_tol": -1}},
    {"weak_value": {"re": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1, "sigma": 2}}},
    {"weak_value": {"re": 0.0, "im": 1.0}, "probe": {"family": "gaussian", "params": {"width": 1}}},
])
def test_invalid_scenarios_exit_2(tmp_path, capsys, data):
    code, _, err = run(capsys, "shift", "--scenario", write_scenario(tmp_path, data))
    assert code == 2
    assert "error" in json.loads(err)


def test_malformed_scenario_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(capsys, "shift", "--scenario", str(path))[0] == 2
    assert run(capsys, "shift", "--scenario", str(tmp_path / "missing.json"))[0] == 2


def test_flags_override_file(tmp_path, capsys):
    path = write_scenario(tmp_path, {"weak_value": {"re": 3.0},
                                     "probe": {"family": "gaussian", "params": {"width": 0.01}}})
    code, out, _ = run(capsys, "shift", "--scenario", path, "--aw", "2", "0")
    assert code == 0
    assert json.loads(out)["shift"] == pytest.approx(2.0, abs=1e-3)


# --- scan ------------------------------------------------------------------------------

def test_alpha_scan(capsys):
    code, out, _ = run(capsys, "scan", "alpha", "--aw", repr(SQRT3), "0", "--probe", "arbitrary_shift",
                       "--param", "n=8", "--range", "-2", "2", "--steps", "9")
    assert code == 0
    table = rows(out)
    assert len(table) == 10
    assert table[0][0] == "alpha"
    alpha = np.array([float(r[0]) for r in table[1:]])
    shift = np.array([float(r[1]) for r in table[1:]])
    assert np.all(np.diff(shift) < 0) or np.all(np.diff(shift) > 0)
    fit = np.polyfit(alpha, shift, 1)
    assert np.max(np.abs(np.polyval(fit, alpha) - shift)) < 1e-6
    assert all(r[-1] == "ok" for r in table[1:])


def test_theta_scan_three_probes(tmp_path, capsys):
    path = write_scenario(tmp_path, {"probe": [
        {"family": "gaussian", "params": {"width": 0.01}, "label": "weak"},
        {"family": "gaussian", "params": {"width": 100}, "label": "strong"},
        {"family": "ssh_optimal", "label": "optimal"}]})
    code, out, _ = run(capsys, "scan", "theta", "--scenario", path, "--range", "1.6", "3.0", "--steps", "8")
    assert code == 0
    table = rows(out)
    header = table[0]
    assert header[0] == "theta [rad]"
    col = {name: header.index(f"shift[{name}] [rescaled position x = q/g]") for name in ("weak", "strong", "optimal")}
    for r in table[1:]:
        assert float(r[col["strong"]]) <= float(r[col["optimal"]]) <= float(r[col["weak"]])


def test_width_scan_log_spaced(capsys):
    code, out, _ = run(capsys, "scan", "W", "--theta", THETA, "--probe", "gaussian", "--param", "width=1",
                       "--range", "0.01", "100", "--steps", "9", "--log")
    assert code == 0
    table = rows(out)
    assert table[0][0] == "W [rescaled momentum k = g*p]"
    width = np.array([float(r[0]) for r in table[1:]])
    shift = np.array([float(r[1]) for r in table[1:]])
    assert shift[0] == pytest.approx(SQRT3, abs=1e-3)
    assert shift[-1] == pytest.approx(SQRT3 / 2, abs=1e-3)
    # strictly decreasing while the +-8W support is untruncated; wider probes
    # are cut to whole periods of |B|^2 and carry truncation error ~1e-5
    uncapped = 8 * width <= 20 * math.pi
    assert np.all(np.diff(shift[uncapped]) < 0)
    assert np.all(np.abs(shift[~uncapped] - SQRT3 / 2) < 1e-4)


def test_scan_marks_failed_rows(capsys):
    code, out, _ = run(capsys, "scan", "theta", "--probe", "gaussian", "--param", "width=1",
                       "--range", "0", "1", "--steps", "3")
    assert code == 0
    table = rows(out)
    assert table[1][-1] == "error:DegenerateWeakValue"
    assert table[1][1] == "nan"
    assert table[2][-1] == "ok"


def test_scan_all_rows_failed(capsys):
    code, _, _ = run(capsys, "scan", "theta", "--probe", "gaussian", "--param", "width=1",
                     "--range", "0", "0", "--steps", "1")
    assert code == 3


def test_scan_rejects_bad_requests(capsys):
    base = ["--aw", "2", "0", "--probe", "gaussian", "--param", "width=1"]
    assert run(capsys, "scan", "alpha", *base, "--range", "0", "1", "--steps", "3")[0] == 2
    assert run(capsys, "scan", "W", *base, "--range", "0", "1", "--steps", "0")[0] == 2
    assert run(capsys, "scan", "W", *base, "--range", "-1", "1", "--steps", "3", "--log")[0] == 2
    assert run(capsys, "scan", "theta", "--probe", "ssh_optimal", "--range", "1", "4", "--steps", "3")[0] == 2


def test_scan_parallel_matches_serial(capsys):
    args = ["scan", "n", "--aw", "2", "1", "--probe", "arbitrary_shift", "--param", "alpha=1",
            "--range", "1", "6", "--steps", "6"]
    serial = run(capsys, *args)[1]
    parallel = run(capsys, *args, "--jobs", "3")[1]
    assert serial == parallel
    assert [r[0] for r in rows(serial)[1:]] == ["1", "2", "3", "4", "5", "6"]


def test_scan_json(capsys):
    code, out, _ = run(capsys, "scan", "alpha", "--aw", "2", "0", "--probe", "arbitrary_shift",
                       "--range", "0", "1", "--steps", "2", "--format", "json")
    assert code == 0
    assert len(json.loads(out)["rows"]) == 2


# --- verify ---------------------------------------------------------------------------

def test_verify_single_claim(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--claims", "C1", "--out", str(tmp_path / "v"))
    assert code == 0
    assert "C1" in out and "pass" in out
    report = json.loads((tmp_path / "v" / "report.json").read_text())
    assert len(report) == 1
    totals = [c["computed"] for c in report[0]["checks"] if c["name"].startswith("even_sum")]
    assert totals and all(abs(t - 0.5) < 1e-6 for t in totals)
    assert (tmp_path / "v" / "run_metadata.json").exists()


def test_verify_all(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--out", str(tmp_path / "v"))
    assert code == 0
    report = json.loads((tmp_path / "v" / "report.json").read_text())
    assert [r["id"] for r in report] == [f"C{i}" for i in range(1, 8)]
    assert all(r["verdict"] == "pass" for r in report)


def test_verify_unknown_claim(tmp_path, capsys):
    code, _, err = run(capsys, "verify", "--claims", "C1,C9", "--out", str(tmp_path / "v"))
    assert code == 2
    assert "C9" in json.loads(err)["message"]


def test_verify_indeterminate_exit_code(tmp_path, capsys, monkeypatch):
    from wvamp import claims
    from wvamp.claims import ClaimResult

    monkeypatch.setitem(claims.REGISTRY, "C1", lambda *a, **k: ClaimResult("C1", "stub", 0.0).finish())
    code, _, _ = run(capsys, "verify", "--claims", "C1", "--out", str(tmp_path / "v"))
    assert code == 4


def test_verify_failed_claim_exit_code(tmp_path, capsys, monkeypatch):
    from wvamp import claims
    from wvamp.claims import ClaimResult

    def failing(*args, **kwargs):
        res = ClaimResult("C1", "stub", 0.0)
        res.check("x", 1.0, 0.0, "exact", 0.0)
        return res.finish()

    monkeypatch.setitem(claims.REGISTRY, "C1", failing)
    code, _, _ = run(capsys, "verify", "--claims", "C1", "--out", str(tmp_path / "v"))
    assert code == 1


# --- probe-dump -------------------------------------------------------------------------

def test_probe_dump_ssh_position(capsys):
    code, out, _ = run(capsys, "probe-dump", "--aw", repr(SQRT3), "0", "--probe", "ssh_optimal",
                       "--space", "x", "--grid", "-6", "6", "0.1")
    assert code == 0
    table = rows(out)
    assert table[0] == ["x [rescaled position x = q/g]", "re", "im", "abs2"]
    data = np.array(table[1:], dtype=float)
    assert len(data) == 121
    expected = xi0_lerch(SQRT3, data[:, 0] - shift_ssh_claimed(SQRT3))
    assert np.max(np.abs(data[:, 1] + 1j * data[:, 2] - expected)) < 1e-8


@pytest.mark.parametrize("probe", [["ssh_optimal"], ["gaussian", "--param", "width=0.7"],
                                   ["gaussian", "--param", "width=0.01"]])
def test_probe_dump_momentum_normalized(capsys, probe):
    code, out, _ = run(capsys, "probe-dump", "--aw", "0.5", "0.8", "--probe", *probe)
    assert code == 0
    table = rows(out)
    assert table[0][0] == "k [rescaled momentum k = g*p]"
    data = np.array(table[1:], dtype=float)
    assert np.trapezoid(data[:, 3], data[:, 0]) == pytest.approx(1.0, abs=1e-3)


def test_probe_dump_variational_needs_epsilon(capsys):
    args = ["probe-dump", "--aw", repr(SQRT3), "0", "--probe", "variational",
            "--param", "mean_kernel_norm=2", "--param", "target_shift=5"]
    code, _, err = run(capsys, *args)
    assert code == 3
    assert json.loads(err)["error"] == "SingularProbe"
    code, out, _ = run(capsys, *args, "--epsilon", "1e-2")
    assert code == 0
    data = np.array(rows(out)[1:], dtype=float)
    assert np.min(np.abs(np.abs(data[:, 0]) - math.pi / 4)) > 1e-2


def test_probe_dump_bad_grid(capsys):
    code, _, _ = run(capsys, "probe-dump", "--aw", "2", "0", "--probe", "ssh_optimal", "--grid", "1", "0", "0.1")
    assert code == 2


# --- reproducibility -------------------------------------------------------------------

def test_outputs_are_byte_identical(tmp_path, capsys):
    args = ["scan", "W", "--theta", THETA, "--probe", "gaussian", "--param", "width=1",
            "--range", "0.1", "10", "--steps", "4", "--log"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert "timestamp_utc" in meta and "timestamp" not in a.read_text()


def test_seeded_tabulated_probe_is_reproducible(capsys):
    args = ["shift", "--aw", "2", "0.3", "--probe", "tabulated"]
    first = run(capsys, *args, "--seed", "4")[1]
    assert run(capsys, *args, "--seed", "4")[1] == first
    assert run(capsys, *args, "--seed", "5")[1] != first


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wvamp", "shift", "--aw", "1", "0", "--probe", "gaussian",
                           "--param", "width=0.5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["shift"] == pytest.approx(1.0, abs=1e-8)
