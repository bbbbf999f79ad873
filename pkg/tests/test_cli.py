import csv

import pytest

from tdcp import harness
from tdcp.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from tdcp.scenario import load_scenario

TINY = """
[scenario]
seed = 5
drops = 2
speeds_kmh = 3, 60

[channel]
model = TDL
tdl_taps = 6
num_rays = 16

[trs]
bandwidth_prbs = 8
second_offset_slots = auto

[report]
delays = {delays}

[ue]
max_delay = 10 slots

[csi]
realizations_per_drop = 2
periods_per_realization = 1

[dmrs]
realizations_per_drop = 2

[autocorr]
delays = 4 OS, 1 slot
realizations_per_drop = 3
"""


@pytest.fixture
def tiny(tmp_path):
    def make(delays="1 slot, 3 slots"):
        p = tmp_path / "tiny.ini"
        p.write_text(TINY.format(delays=delays))
        return p
    return make


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.mark.parametrize("command", ["autocorr", "usecase-a", "usecase-b", "calibrate"])
def test_csv_identical_across_jobs(tiny, tmp_path, command):
    scn = tiny("4 OS, 1 slot" if command == "usecase-b" else "1 slot, 3 slots")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([command, "--scenario", str(scn), "--out", str(a), "--jobs", "1"]) == EXIT_OK
    assert main([command, "--scenario", str(scn), "--out", str(b), "--jobs", "2"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert rows(a)


def test_seed_override_changes_output(tiny, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["autocorr", "--scenario", str(tiny()), "--out", str(a)])
    main(["autocorr", "--scenario", str(tiny()), "--out", str(b), "--seed", "6"])
    assert a.read_bytes() != b.read_bytes()


def test_usecase_a_rows_per_speed(tiny, tmp_path):
    out = tmp_path / "a.csv"
    assert main(["usecase-a", "--scenario", str(tiny("3 slots")), "--out", str(out), "--drops", "1"]) == 0
    got = rows(out)
    assert list(got[0]) == list(harness.USECASE_COLUMNS)
    for v in ("3", "60"):
        schemes = [r["scheme"] for r in got if float(r["speed_kmh"]) == float(v)]
        assert schemes == ["TypeI", "TypeII", "switched-3slot", "genie"]
        se = {r["scheme"]: float(r["mean_se_bpshz"]) for r in got if float(r["speed_kmh"]) == float(v)}
        assert se["genie"] >= max(se["TypeI"], se["TypeII"])


def test_harness_is_deterministic(tiny):
    scn = load_scenario(tiny())
    assert harness.autocorr_table(scn) == harness.autocorr_table(scn, jobs=2)


def test_config_errors_exit_2(tiny, tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert main(["usecase-a", "--scenario", str(tmp_path / "missing.ini"), "--out", out]) == EXIT_CONFIG
    bad = tmp_path / "bad.ini"
    bad.write_text("[report]\ndelays = 7 slots\n")
    assert main(["usecase-a", "--scenario", str(bad), "--out", out]) == EXIT_CONFIG
    assert main(["autocorr", "--scenario", str(tiny()), "--out", out, "--drops", "0"]) == EXIT_CONFIG
    assert main(["autocorr", "--scenario", str(tiny()), "--out", out, "--jobs", "0"]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_unwritable_output_exits_3(tiny, tmp_path):
    out = str(tmp_path / "no" / "such" / "dir.csv")
    assert main(["autocorr", "--scenario", str(tiny()), "--out", out]) == EXIT_RUNTIME


def test_report_round_trip(capsys):
    assert main(["report", "encode", "--delays", "1 slot", "--amplitudes", "0.97"]) == EXIT_OK
    hexdata = capsys.readouterr().out.strip()
    assert main(["report", "decode", "--hex", hexdata]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "delay,amplitude"
    label, amp = lines[2].split(",")
    assert label == "1 slot" and abs(float(amp) - 0.97) <= 2 ** -8


def test_report_encode_file_round_trip(tmp_path, capsys):
    out = tmp_path / "r.bin"
    args = ["report", "encode", "--delays", "4 OS, 1 slot", "--amplitudes", "0.9, 0.5",
            "--phases", "0.1, -2.0", "--time", "0.25", "--out", str(out)]
    assert main(args) == EXIT_OK
    capsys.readouterr()
    assert main(["report", "decode", "--in", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("time_s,0.25\ndelay,amplitude,phase\n")


def test_report_encode_rule_violations(capsys):
    five = "4 OS, 1 slot, 2 slots, 3 slots, 10 slots"
    assert main(["report", "encode", "--delays", five, "--amplitudes", "1,1,1,1,1"]) == EXIT_CONFIG
    assert "max four delays" in capsys.readouterr().err
    assert main(["report", "encode", "--delays", "3 slots", "--amplitudes", "1"]) == EXIT_CONFIG
    assert main(["report", "encode", "--delays", "1 slot", "--amplitudes", "1.5"]) == EXIT_CONFIG
    assert main(["report", "encode", "--delays", "1 slot", "--amplitudes", "x"]) == EXIT_CONFIG


def test_report_encode_uses_scenario_trs(tiny, capsys):
    args = ["report", "encode", "--delays", "1 slot, 3 slots", "--amplitudes", "0.9, 0.8"]
    assert main(args) == EXIT_CONFIG
    assert main(args + ["--scenario", str(tiny())]) == EXIT_OK


def test_report_decode_errors(capsys):
    assert main(["report", "decode", "--hex", "01"]) == EXIT_RUNTIME
    assert "framing error" in capsys.readouterr().err
    assert main(["report", "decode", "--hex", "zz"]) == EXIT_CONFIG


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
