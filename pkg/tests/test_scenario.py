import math
from pathlib import Path

import pytest

from tdcp.report import Delay
from tdcp.scenario import Scenario, ScenarioError, load_scenario, report_violations
from tdcp.trs import TrsConfig

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_gives_defaults(tmp_path):
    s = load_scenario(write(tmp_path, "# nothing\n"))
    assert s == Scenario()
    assert s.carrier_hz == 3.5e9 and s.channel.model == "CDL"
    assert s.trs.bandwidth_prbs == 273 and s.trs.comb_spacing == 4


def test_tdl_defaults(tmp_path):
    s = load_scenario(write(tmp_path, "[channel]\nmodel = TDL\n"))
    assert s.channel.model == "TDL"
    assert s.channel.num_rays == 64


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.ini")))
def test_shipped_scenarios_load(name):
    assert isinstance(load_scenario(SCENARIOS / name), Scenario)


def test_unrealizable_delay_reports_file_and_line(tmp_path):
    p = write(tmp_path, "[scenario]\nseed = 1\n[report]\ndelays = 1 slot, 3 slots\n")
    with pytest.raises(ScenarioError, match=r"s\.ini:4: \[report\] delays: delay not realizable"):
        load_scenario(p)


def test_seven_slots_rejected_with_location(tmp_path):
    p = write(tmp_path, "[report]\ndelays = 7 slots\n")
    with pytest.raises(ScenarioError, match=r"s\.ini:2: .*not in allowed set"):
        load_scenario(p)


def test_auto_second_trs(tmp_path):
    s = load_scenario(write(tmp_path, "[trs]\nsecond_offset_slots = auto\n[report]\ndelays = 3 slots\n"))
    assert s.per_delay_trs and s.trs.second_trs_offset is None
    assert s.trs_for(Delay.slots(3)).second_trs_offset == 3
    assert s.trs_for(Delay(4)) == s.trs


def test_fixed_second_trs_wins_over_per_delay():
    s = Scenario(trs=TrsConfig(second_trs_offset=10), per_delay_trs=True)
    assert s.trs_for(Delay.slots(3)).second_trs_offset == 10
    assert Scenario().trs_for(Delay.slots(3)).second_trs_offset is None


def test_snr_inf_accepted_nan_rejected(tmp_path):
    assert load_scenario(write(tmp_path, "[trs]\nsnr_db = inf\n")).trs_snr_db == math.inf
    with pytest.raises(ScenarioError, match="snr_db"):
        load_scenario(write(tmp_path, "[trs]\nsnr_db = nan\n"))


@pytest.mark.parametrize("text, pattern", [
    ("[trs]\ncomb = 4\ncomb = 2\n", "parse error"),
    ("[trs]\ncolour = red\n", r":2: \[trs\] colour: unknown key"),
    ("[extras]\na = 1\n", "unknown section"),
    ("[scenario]\ndrops = many\n", r"drops: bad value"),
    ("[channel]\nmodel = WINNER\n", "model"),
])
def test_bad_files(tmp_path, text, pattern):
    with pytest.raises(ScenarioError, match=pattern):
        load_scenario(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "nope.ini")


def test_every_error_is_listed(tmp_path):
    p = write(tmp_path, "[scenario]\ndrops = x\nseed = y\n")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(p)
    assert str(exc.value).count("bad value") == 2


def test_overrides():
    s = Scenario().with_overrides(seed=9, drops=3)
    assert (s.seed, s.drops) == (9, 3)
    with pytest.raises(ScenarioError):
        Scenario().with_overrides(drops=0)


def test_report_violations_per_delay():
    from tdcp.report import TdcpReportConfig, UeCapability
    cfg = TdcpReportConfig((Delay.slots(1), Delay.slots(3)))
    cap = UeCapability(max_delay=Delay.slots(10))
    assert any("not realizable" in v for v in report_violations(cfg, cap, TrsConfig()))
    assert report_violations(cfg, cap, TrsConfig(), per_delay_trs=True) == []


def test_metric_filter_key(tmp_path):
    assert Scenario().metric_filter == "running"
    p = tmp_path / "f.ini"
    p.write_text("[trs]\nmetric_filter = none\n")
    assert load_scenario(p).metric_filter == "none"
    p.write_text("[trs]\nmetric_filter = median\n")
    with pytest.raises(ScenarioError, match="metric_filter"):
        load_scenario(p)
