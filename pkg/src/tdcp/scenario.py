"""
Scenario files: INI-style ``key = value`` text with ``#`` comments.

Every key is optional; missing keys take the defaults below (3.5 GHz carrier,
30 kHz subcarrier spacing, 100 MHz TRS, CDL-A with 100 ns delay spread, 45 deg
ASA and 10 deg ZSA)::

    [scenario]   seed, drops, speeds_kmh, directions_deg, carrier_ghz
    [numerology] subcarrier_spacing_khz
    [channel]    model (CDL | TDL), delay_spread_ns, asa_deg, zsa_deg,
                 asd_deg, zsd_deg, tdl_taps, tdl_profile (exponential | equal),
                 num_rays, num_rx
    [trs]        comb, symbols, slots_per_burst, periodicity_slots,
                 second_offset_slots (a slot count, or ``auto`` for one
                 second TRS per measured delay), second_period_multiple, bandwidth_prbs,
                 snr_db (``inf`` for noiseless), averaging_bursts (TRS periods averaged per measurement),
                 metric_filter (``running``: switching decisions use the mean of every
                 measurement so far in the drop; ``none``: the latest measurement only)
    [pdsch]      snr_db, bandwidth_prbs (centred in the TRS band; default the whole band)
    [report]     delays, phase, amplitude_bits, phase_bits
    [ue]         max_delay, max_num_delays, phase_supported
    [policy]     delay, threshold, hysteresis
    [csi]        feedback_period_slots, feedback_delay_slots, subband_prbs,
                 oversampling, realizations_per_drop, periods_per_realization
    [dmrs]       low_positions, high_positions, realizations_per_drop,
                 frequency_tracking (receiver tuned to the TRS frequency estimate)
    [autocorr]   delays, realizations_per_drop

Lists are comma separated. Delays are labels such as ``4 OS`` or ``3 slots``.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .policy import SwitchingPolicy
from .report import Delay, TdcpReportConfig, UeCapability, validate_config
from .report import delay_realizable
from .trs import ALLOWED_OFFSET_SLOTS, Numerology, TrsConfig


METRIC_FILTERS = ("running", "none")


class ScenarioError(ValueError):
    """Scenario file cannot be read, parsed or validated."""


@dataclass(frozen=True)
class ChannelConfig:
    model: str = "CDL"
    delay_spread: float = 100e-9
    asa_deg: float = 45.0
    zsa_deg: float = 10.0
    asd_deg: float | None = None
    zsd_deg: float | None = None
    tdl_taps: int = 23
    tdl_profile: str = "exponential"
    num_rays: int = 64
    num_rx: int = 2


@dataclass(frozen=True)
class CsiConfig:
    feedback_period_slots: int = 20
    feedback_delay_slots: int = 4
    subband_prbs: int = 4
    oversampling: int = 4
    realizations_per_drop: int = 8
    periods_per_realization: int = 2


@dataclass(frozen=True)
class DmrsConfig:
    low_positions: tuple = (2, 11)
    high_positions: tuple = (2, 7, 11)
    realizations_per_drop: int = 4
    frequency_tracking: bool = True


@dataclass(frozen=True)
class Scenario:
    carrier_hz: float = 3.5e9
    numerology: Numerology = field(default_factory=Numerology)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    trs: TrsConfig = field(default_factory=TrsConfig)
    per_delay_trs: bool = False
    trs_snr_db: float = 10.0
    averaging_bursts: int = 1
    metric_filter: str = "running"
    pdsch_snr_db: float = 10.0
    pdsch_prbs: int | None = None
    report: TdcpReportConfig = field(default_factory=lambda: TdcpReportConfig((Delay.slots(1),)))
    capability: UeCapability = field(default_factory=UeCapability)
    policy: SwitchingPolicy | None = None
    csi: CsiConfig = field(default_factory=CsiConfig)
    dmrs: DmrsConfig = field(default_factory=DmrsConfig)
    autocorr_delays: tuple = ()
    autocorr_realizations: int = 50
    speeds: tuple = (3.0, 10.0, 20.0, 30.0, 60.0)
    directions: tuple = ()
    drops: int = 200
    seed: int = 0

    def with_overrides(self, seed: int | None = None, drops: int | None = None) -> "Scenario":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if drops is not None:
            if drops < 1:
                raise ScenarioError("drops must be >= 1")
            out = replace(out, drops=int(drops))
        return out

    @property
    def num_pdsch_prbs(self) -> int:
        return self.trs.bandwidth_prbs if self.pdsch_prbs is None else self.pdsch_prbs

    def trs_for(self, delay: Delay) -> TrsConfig:
        """TRS pattern used to measure ``delay``.

        The configured TRS, unless ``per_delay_trs`` is set and no second TRS
        is configured: then a delay of n > 1 slots is measured with a second
        TRS placed n slots after the first, as a separate configuration per
        delay would do.
        """
        slots, rem = divmod(delay.symbols, self.numerology.symbols_per_slot)
        if (not self.per_delay_trs or self.trs.second_trs_offset is not None or rem
                or slots not in ALLOWED_OFFSET_SLOTS[1:]):
            return self.trs
        return replace(self.trs, second_trs_offset=slots)


_SCHEMA = {
    "scenario": {"seed", "drops", "speeds_kmh", "directions_deg", "carrier_ghz"},
    "numerology": {"subcarrier_spacing_khz"},
    "channel": {"model", "delay_spread_ns", "asa_deg", "zsa_deg", "asd_deg", "zsd_deg",
                "tdl_taps", "tdl_profile", "num_rays", "num_rx"},
    "trs": {"comb", "symbols", "slots_per_burst", "periodicity_slots", "second_offset_slots",
            "second_period_multiple", "bandwidth_prbs", "snr_db", "averaging_bursts",
            "metric_filter"},
    "pdsch": {"snr_db", "bandwidth_prbs"},
    "report": {"delays", "phase", "amplitude_bits", "phase_bits"},
    "ue": {"max_delay", "max_num_delays", "phase_supported"},
    "policy": {"delay", "threshold", "hysteresis"},
    "csi": {"feedback_period_slots", "feedback_delay_slots", "subband_prbs", "oversampling",
            "realizations_per_drop", "periods_per_realization"},
    "dmrs": {"low_positions", "high_positions", "realizations_per_drop", "frequency_tracking"},
    "autocorr": {"delays", "realizations_per_drop"},
}


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, by rescanning the raw text."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            where.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), n)
    return where


class _Reader:
    def __init__(self, parser, lines, path):
        self.parser, self.lines, self.path = parser, lines, path
        self.errors = []

    def loc(self, section, key=None):
        n = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.path}:{n}" if n else str(self.path)

    def error(self, section, key, msg):
        self.errors.append(f"{self.loc(section, key)}: [{section}] {key}: {msg}")

    def get(self, section, key, conv, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.error(section, key, f"bad value {raw!r} ({exc})")
            return default


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _snr(s):
    # "inf" turns the TRS noise off
    v = float(s)
    if math.isnan(v) or v == -math.inf:
        raise ValueError("not a number or -inf")
    return v


def _int(s):
    return int(s.strip())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _floats(s):
    return tuple(_float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(_int(x) for x in s.split(",") if x.strip())


def _delays(s):
    return tuple(Delay.parse(x) for x in s.split(",") if x.strip())


def _optional_int(s):
    return None if s.strip().lower() in ("", "none") else _int(s)


def load_scenario(path) -> Scenario:
    """Parse, default and validate a scenario file.

    Raises ``ScenarioError`` listing every problem with its ``file:line``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror or exc})") from None
    parser = configparser.ConfigParser(strict=True, interpolation=None,
                                       inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from None
    r = _Reader(parser, _key_lines(text), path)
    for section in parser.sections():
        if section not in _SCHEMA:
            r.error(section, None, "unknown section")
            continue
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                r.error(section, key, "unknown key")
    if r.errors:
        raise ScenarioError("\n".join(r.errors))
    return _build(r)


def _build(r: _Reader) -> Scenario:
    d = Scenario()
    num = Numerology(r.get("numerology", "subcarrier_spacing_khz", _float,
                           d.numerology.subcarrier_spacing / 1e3) * 1e3)

    ch = ChannelConfig(
        model=r.get("channel", "model", lambda s: s.strip().upper(), d.channel.model),
        delay_spread=r.get("channel", "delay_spread_ns", _float, d.channel.delay_spread * 1e9) / 1e9,
        asa_deg=r.get("channel", "asa_deg", _float, d.channel.asa_deg),
        zsa_deg=r.get("channel", "zsa_deg", _float, d.channel.zsa_deg),
        asd_deg=r.get("channel", "asd_deg", _float, d.channel.asd_deg),
        zsd_deg=r.get("channel", "zsd_deg", _float, d.channel.zsd_deg),
        tdl_taps=r.get("channel", "tdl_taps", _int, d.channel.tdl_taps),
        tdl_profile=r.get("channel", "tdl_profile", lambda s: s.strip().lower(), d.channel.tdl_profile),
        num_rays=r.get("channel", "num_rays", _int, d.channel.num_rays),
        num_rx=r.get("channel", "num_rx", _int, d.channel.num_rx),
    )
    if ch.model not in ("CDL", "TDL"):
        r.error("channel", "model", f"{ch.model!r} is not CDL or TDL")
    if ch.tdl_profile not in ("exponential", "equal"):
        r.error("channel", "tdl_profile", f"{ch.tdl_profile!r} is not exponential or equal")
    if ch.delay_spread <= 0:
        r.error("channel", "delay_spread_ns", "must be positive")
    if ch.tdl_taps < 1 or ch.num_rays < 8 or ch.num_rx < 1:
        r.error("channel", None, "tdl_taps >= 1, num_rays >= 8 and num_rx >= 1 required")

    t = d.trs
    trs = None
    offset = r.get("trs", "second_offset_slots", lambda s: s.strip().lower(), None)
    per_delay = offset == "auto"
    try:
        trs = TrsConfig(
            comb_spacing=r.get("trs", "comb", _int, t.comb_spacing),
            symbol_positions=r.get("trs", "symbols", _ints, t.symbol_positions),
            slots_per_burst=r.get("trs", "slots_per_burst", _int, t.slots_per_burst),
            burst_periodicity=r.get("trs", "periodicity_slots", _int, t.burst_periodicity),
            second_trs_offset=None if per_delay else r.get("trs", "second_offset_slots", _optional_int,
                                                            t.second_trs_offset),
            second_trs_period_multiple=r.get("trs", "second_period_multiple", _int,
                                             t.second_trs_period_multiple),
            bandwidth_prbs=r.get("trs", "bandwidth_prbs", _int, t.bandwidth_prbs),
            numerology=num,
        )
    except ValueError as exc:
        r.error("trs", None, str(exc))

    cap = report = policy = None
    try:
        cap = UeCapability(
            max_delay=r.get("ue", "max_delay", Delay.parse, d.capability.max_delay),
            max_num_delays=r.get("ue", "max_num_delays", _int, d.capability.max_num_delays),
            phase_supported=r.get("ue", "phase_supported", _bool, d.capability.phase_supported),
        )
    except ValueError as exc:
        r.error("ue", None, str(exc))
    try:
        report = TdcpReportConfig(
            delays=r.get("report", "delays", _delays, d.report.delays),
            report_phase=r.get("report", "phase", _bool, d.report.report_phase),
            amplitude_bits=r.get("report", "amplitude_bits", _int, d.report.amplitude_bits),
            phase_bits=r.get("report", "phase_bits", _int, d.report.phase_bits),
        )
    except ValueError as exc:
        r.error("report", None, str(exc))
    if r.parser.has_section("policy"):
        try:
            policy = SwitchingPolicy(
                metric_delay=r.get("policy", "delay", Delay.parse, Delay.slots(3)),
                threshold=r.get("policy", "threshold", _float, 0.5),
                hysteresis=r.get("policy", "hysteresis", _float, 0.0),
            )
        except ValueError as exc:
            r.error("policy", None, str(exc))

    if report is not None and cap is not None and trs is not None:
        for msg in report_violations(report, cap, trs, per_delay):
            r.error("report", "delays", msg)
    if policy is not None and trs is not None and not _realizable(policy.metric_delay, trs, per_delay):
        r.error("policy", "delay", f"{policy.metric_delay.label} cannot be measured with the TRS")

    csi = CsiConfig(**{k: r.get("csi", k, _int, getattr(d.csi, k)) for k in vars(d.csi)})
    if csi.feedback_delay_slots < 0 or min(v for k, v in vars(csi).items()
                                           if k != "feedback_delay_slots") < 1:
        r.error("csi", None, "counts must be >= 1 and the feedback delay >= 0")
    dm = DmrsConfig(
        low_positions=r.get("dmrs", "low_positions", _ints, d.dmrs.low_positions),
        high_positions=r.get("dmrs", "high_positions", _ints, d.dmrs.high_positions),
        realizations_per_drop=r.get("dmrs", "realizations_per_drop", _int, d.dmrs.realizations_per_drop),
        frequency_tracking=r.get("dmrs", "frequency_tracking", _bool, d.dmrs.frequency_tracking),
    )
    for key in ("low_positions", "high_positions"):
        pos = getattr(dm, key)
        if not pos or list(pos) != sorted(set(pos)) or pos[0] < 0 or pos[-1] >= num.symbols_per_slot:
            r.error("dmrs", key, f"positions {pos} must be distinct, sorted and inside the slot")
    if dm.realizations_per_drop < 1:
        r.error("dmrs", "realizations_per_drop", "must be >= 1")

    ac_delays = r.get("autocorr", "delays", _delays, ())
    ac_real = r.get("autocorr", "realizations_per_drop", _int, d.autocorr_realizations)
    if ac_real < 1:
        r.error("autocorr", "realizations_per_drop", "must be >= 1")

    speeds = r.get("scenario", "speeds_kmh", _floats, d.speeds)
    if not speeds or min(speeds) < 0:
        r.error("scenario", "speeds_kmh", "need at least one non-negative speed")
    drops = r.get("scenario", "drops", _int, d.drops)
    if drops < 1:
        r.error("scenario", "drops", "must be >= 1")
    carrier = r.get("scenario", "carrier_ghz", _float, d.carrier_hz / 1e9) * 1e9
    if carrier <= 0:
        r.error("scenario", "carrier_ghz", "must be positive")
    trs_snr = r.get("trs", "snr_db", _snr, d.trs_snr_db)
    pdsch_snr = r.get("pdsch", "snr_db", _float, d.pdsch_snr_db)
    pdsch_prbs = r.get("pdsch", "bandwidth_prbs", _int, d.pdsch_prbs)
    averaging = r.get("trs", "averaging_bursts", _int, d.averaging_bursts)
    if averaging < 1:
        r.error("trs", "averaging_bursts", "must be >= 1")
    metric_filter = r.get("trs", "metric_filter", lambda s: s.strip().lower(), d.metric_filter)
    if metric_filter not in METRIC_FILTERS:
        r.error("trs", "metric_filter", f"{metric_filter!r} is not one of {', '.join(METRIC_FILTERS)}")
    if pdsch_prbs is not None and trs is not None and not 1 <= pdsch_prbs <= trs.bandwidth_prbs:
        r.error("pdsch", "bandwidth_prbs", f"must be in 1..{trs.bandwidth_prbs} (the TRS band)")
    directions = r.get("scenario", "directions_deg", _floats, d.directions)
    seed = r.get("scenario", "seed", _int, d.seed)

    if r.errors:
        raise ScenarioError("\n".join(r.errors))
    return Scenario(
        carrier_hz=carrier,
        numerology=num,
        channel=ch,
        trs=trs,
        per_delay_trs=per_delay,
        trs_snr_db=trs_snr,
        averaging_bursts=averaging,
        metric_filter=metric_filter,
        pdsch_snr_db=pdsch_snr,
        pdsch_prbs=pdsch_prbs,
        report=report,
        capability=cap,
        policy=policy,
        csi=csi,
        dmrs=dm,
        autocorr_delays=ac_delays,
        autocorr_realizations=ac_real,
        speeds=speeds,
        directions=directions,
        drops=drops,
        seed=seed,
    )


def report_violations(report: TdcpReportConfig, cap: UeCapability, trs: TrsConfig,
                      per_delay_trs: bool = False) -> list[str]:
    """Rule violations of a report configuration.

    With ``per_delay_trs`` realizability is judged per delay, each measured
    with the TRS that ``Scenario.trs_for`` would use for it.
    """
    out = [str(v) for v in validate_config(report, cap, trs)]
    if not per_delay_trs:
        return out
    out = [m for m in out if not m.startswith("delay not realizable")]
    for d in report.delays:
        if d.is_allowed and not _realizable(d, trs, True):
            out.append(f"delay not realizable with TRS: no TRS symbol pair {d.label} apart")
    return out


def _realizable(delay: Delay, trs: TrsConfig, per_delay_trs: bool) -> bool:
    if not delay.is_allowed:
        return False
    scn = Scenario(numerology=trs.numerology, trs=trs, per_delay_trs=per_delay_trs)
    return delay_realizable(delay, scn.trs_for(delay))
