import csv
import subprocess
import sys

import pytest

from burstgate.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def quick(scenario_dir, tmp_path):
    def go(name, out, *extra):
        return ["run", "--scenario", scenario_dir / name, "--iterations", 4, "--seed", 1,
                "--out", tmp_path / out, *extra]
    return go


def test_run_writes_outputs(quick, tmp_path, capsys):
    code, _, _ = run(quick("scenario2_mixed.json", "a"), capsys)
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["loss_histogram.csv", "mos_cdf.csv", "mos_histogram.csv",
                     "per_iteration.csv", "summary.txt"]
    rows = list(csv.DictReader(open(tmp_path / "a" / "per_iteration.csv")))
    assert len(rows) == 4 * 5
    for r in rows:
        assert int(r["sent"]) == int(r["delivered"]) + int(r["dropped"]) + int(r["residual"])


def test_run_cameras_only(quick, tmp_path, capsys):
    code, _, _ = run(quick("scenario1_two_cameras.json", "b"), capsys)
    assert code == 0
    assert not (tmp_path / "b" / "mos_cdf.csv").exists()
    summary = (tmp_path / "b" / "summary.txt").read_text()
    util = float(summary.split("measured_utilization: ")[1].split()[0])
    assert util == pytest.approx(0.57, abs=0.02)


def test_run_twice_byte_identical(quick, tmp_path, capsys):
    run(quick("scenario2_mixed.json", "x"), capsys)
    run(quick("scenario2_mixed.json", "y", "--threads", 3), capsys)
    for p in (tmp_path / "x").iterdir():
        assert p.read_bytes() == (tmp_path / "y" / p.name).read_bytes()


def test_run_instrumented(quick, capsys):
    assert run(quick("scenario1_three_cameras.json", "i", "--instrumented"), capsys)[0] == 0


def test_missing_scenario(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code, _, err = run(["run", "--scenario", missing, "--out", tmp_path], capsys)
    assert code == 1 and str(missing) in err and "io" in err


def test_invalid_scenario_names_stage(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"link": {"capacity_bps": 1e6}, "buffer": {"mode": "packets", "limit": 5}, "flows": []}')
    code, _, err = run(["run", "--scenario", bad, "--out", tmp_path], capsys)
    assert code == 1 and "validate" in err and "EmptyFlows" in err
    bad.write_text("{not json")
    code, _, err = run(["run", "--scenario", bad, "--out", tmp_path], capsys)
    assert code == 1 and "parse" in err


def test_sweep_buffer(scenario_dir, tmp_path, capsys):
    code, _, _ = run(["sweep", "--scenario", scenario_dir / "scenario1_three_cameras.json",
                      "--param", "buffer", "--values", "10,20,30,40", "--iterations", 5,
                      "--seed", 1, "--out", tmp_path], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert list(rows[0]) == ["value", "flow_id", "mean_loss_rate", "std_loss_rate"]
    assert len(rows) == 4 * 3
    for flow in ("camera1", "camera2", "camera3"):
        means = [float(r["mean_loss_rate"]) for r in rows if r["flow_id"] == flow]
        assert all(b <= a for a, b in zip(means, means[1:]))


def test_sweep_capacity_single_value(scenario_dir, tmp_path, capsys):
    code, _, _ = run(["sweep", "--scenario", scenario_dir / "scenario2_mixed.json", "--param", "capacity",
                      "--values", "5000000", "--iterations", 2, "--out", tmp_path], capsys)
    assert code == 0
    assert len(list(csv.DictReader(open(tmp_path / "sweep.csv")))) == 5


def test_sweep_rejects_bad_values(scenario_dir, tmp_path, capsys):
    code, _, _ = run(["sweep", "--scenario", scenario_dir / "scenario2_mixed.json", "--param", "buffer",
                      "--values", "0", "--out", tmp_path], capsys)
    assert code == 1
    code, _, _ = run(["sweep", "--scenario", scenario_dir / "scenario2_mixed.json", "--param", "buffer",
                      "--values", "2.5", "--out", tmp_path], capsys)
    assert code == 1


@pytest.mark.parametrize("argv,expected", [
    (["--rule", "bdp", "--capacity-bps", "40e6", "--rtt-s", "0.1"], "500000 bytes (333 packets @1500B)"),
    (["--rule", "small", "--capacity-bps", "40e6", "--rtt-s", "0.1", "--flows", "4"], "250000 bytes"),
    (["--rule", "tiny"], "30 packets"),
])
def test_sizing(argv, expected, capsys):
    code, out, _ = run(["sizing", *argv], capsys)
    assert code == 0 and out.startswith(expected)


def test_sizing_missing_flags(capsys):
    code, _, err = run(["sizing", "--rule", "small", "--capacity-bps", "1e6", "--rtt-s", "0.1"], capsys)
    assert code == 1 and "--flows" in err


@pytest.mark.parametrize("loss,delay,expected", [
    (0, 0, "R=82.20 MOS=4.10 band=high"),
    (3, 25, "R=70.15 MOS=3.60 band=medium"),
])
def test_mos(loss, delay, expected, capsys):
    code, out, _ = run(["mos", "--loss-percent", loss, "--delay-ms", delay], capsys)
    assert code == 0 and out.strip() == expected


def test_mos_saturated_and_domain(capsys):
    assert run(["mos", "--loss-percent", 100, "--delay-ms", 0], capsys)[1].strip().endswith("band=poor")
    assert run(["mos", "--loss-percent", 101, "--delay-ms", 0], capsys)[0] == 1
    assert run(["mos", "--loss-percent", 1, "--delay-ms", -5], capsys)[0] == 1


def test_table1(capsys, tmp_path):
    code, out, _ = run(["table1"], capsys)
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and len(rows) == 6
    assert ["704x576", "32", "26"] in rows and ["704x576", "16", "10"] in rows
    run(["table1", "--out", tmp_path / "t1.csv"], capsys)
    assert (tmp_path / "t1.csv").read_text() == out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "burstgate", "mos", "--loss-percent", "0",
                           "--delay-ms", "0"], capture_output=True, text=True)
    assert proc.returncode == 0 and "MOS=4.10" in proc.stdout
