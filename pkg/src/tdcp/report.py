"""
TDCP report configuration rules, quantization and a compact byte layout.

Byte layout (big-endian), version 1::

    offset  size  field
    0       1     version (= 1)
    1       1     flags, bit 0 set when phase indices are present
    2       1     amplitude bits B
    3       1     phase bits P
    4       1     number of delays n (1..4)
    5       8     measurement time, IEEE-754 double, seconds
    13      ...   n records: delay code (u8), amplitude index (u16)
                  [, phase index (u16) when flag bit 0 is set]

The delay code is the position of the delay in ``ALLOWED_DELAYS``.
"""
from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Sequence

from .trs import Numerology, TrsConfig, snapshot_pairs, trs_occasions

FORMAT_VERSION = 1
MAX_DELAYS = 4


class ReportError(ValueError):
    """Report content does not match its configuration."""


class ReportFramingError(ReportError):
    """Serialized report bytes are truncated or malformed."""


@total_ordering
@dataclass(frozen=True)
class Delay:
    """A correlation delay counted in OFDM symbols."""

    symbols: int

    @classmethod
    def slots(cls, n: int, symbols_per_slot: int = 14) -> "Delay":
        return cls(int(n) * symbols_per_slot)

    @classmethod
    def parse(cls, text: str) -> "Delay":
        """Parse labels such as ``"4 OS"``, ``"4 symbols"``, ``"1 slot"``, ``"10slots"``."""
        m = re.fullmatch(r"\s*(\d+)\s*(os|sym|symbols?|slots?)\s*", str(text).lower())
        if not m:
            raise ValueError(f"cannot parse delay {text!r}")
        n, unit = int(m.group(1)), m.group(2)
        return cls.slots(n) if unit.startswith("slot") else cls(n)

    def seconds(self, numerology: Numerology | None = None) -> float:
        return self.symbols * (numerology or Numerology()).symbol_duration

    @property
    def label(self) -> str:
        if self.symbols % 14 == 0:
            n = self.symbols // 14
            return f"{n} slot" if n == 1 else f"{n} slots"
        return f"{self.symbols} OS"

    @property
    def is_allowed(self) -> bool:
        return self in ALLOWED_DELAYS

    def __lt__(self, other):
        return self.symbols < other.symbols

    def __str__(self):
        return self.label


ALLOWED_DELAYS = (Delay(4),) + tuple(Delay.slots(n) for n in (1, 2, 3, 4, 5, 6, 10))


def as_delay(x) -> Delay:
    return x if isinstance(x, Delay) else Delay.parse(x)


@dataclass(frozen=True)
class UeCapability:
    max_delay: Delay = ALLOWED_DELAYS[-1]
    max_num_delays: int = MAX_DELAYS
    phase_supported: bool = False

    def __post_init__(self):
        object.__setattr__(self, "max_delay", as_delay(self.max_delay))
        if not 1 <= self.max_num_delays <= MAX_DELAYS:
            raise ValueError("max_num_delays must be in 1..4")


@dataclass(frozen=True)
class TdcpReportConfig:
    delays: tuple
    report_phase: bool = False
    amplitude_bits: int = 7
    phase_bits: int = 6
    trigger: str = "aperiodic"

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(as_delay(d) for d in self.delays))
        if not 1 <= self.amplitude_bits <= 16 or not 1 <= self.phase_bits <= 16:
            raise ValueError("quantizer bit widths must be in 1..16")
        if self.trigger != "aperiodic":
            raise ValueError("only aperiodic triggering is modeled")


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str

    def __str__(self):
        return f"{self.rule}: {self.detail}"


def delay_realizable(delay: Delay, trs: TrsConfig) -> bool:
    """True when some pair of TRS symbols is separated by ``delay``."""
    num = trs.numerology
    period = trs.burst_periodicity * trs.second_trs_period_multiple
    occ = trs_occasions(trs, (0.0, period * num.slot_duration))
    return bool(snapshot_pairs(occ, delay.seconds(num), numerology=num))


def validate_config(cfg: TdcpReportConfig, cap: UeCapability, trs: TrsConfig) -> list[Violation]:
    """Every rule the configuration breaks; an empty list means it is valid."""
    out = []
    delays = cfg.delays
    if not delays:
        out.append(Violation("at least one delay", "no delays configured"))
    if len(delays) > MAX_DELAYS:
        out.append(Violation("max four delays", f"{len(delays)} delays configured"))
    if len(delays) > cap.max_num_delays:
        out.append(Violation("exceeds UE delay count",
                             f"{len(delays)} delays, UE supports {cap.max_num_delays}"))
    if len(set(delays)) != len(delays):
        out.append(Violation("delays distinct", "duplicate delay values"))
    if any(b <= a for a, b in zip(delays, delays[1:])):
        out.append(Violation("delays ascending", "delays are not sorted ascending"))
    for d in delays:
        if not d.is_allowed:
            out.append(Violation("delay not in allowed set",
                                 f"{d.label} not in {[x.label for x in ALLOWED_DELAYS]}"))
        if d > cap.max_delay:
            out.append(Violation("exceeds UE capability",
                                 f"{d.label} above UE maximum {cap.max_delay.label}"))
        if not delay_realizable(d, trs):
            out.append(Violation("delay not realizable with TRS",
                                 f"no TRS symbol pair {d.label} apart"))
    if cfg.report_phase and not cap.phase_supported:
        out.append(Violation("phase not supported", "phase reporting configured for a UE without it"))
    return out


def quantize_amplitude(c: float, bits: int = 7) -> int:
    """Uniform mid-rise quantizer with ``2**bits`` levels on [0, 1]."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"amplitude {c} outside [0, 1]")
    levels = 1 << bits
    return min(int(c * levels), levels - 1)


def dequantize_amplitude(index: int, bits: int = 7) -> float:
    levels = 1 << bits
    if not 0 <= index < levels:
        raise ValueError(f"amplitude index {index} outside 0..{levels - 1}")
    return (index + 0.5) / levels


def quantize_phase(phase: float, bits: int = 6) -> int:
    """Uniform wrap-around quantizer on (-pi, pi]; -pi and pi share an index."""
    if not math.isfinite(phase):
        raise ValueError("phase must be finite")
    levels = 1 << bits
    step = 2 * math.pi / levels
    return int(round((phase + math.pi) / step)) % levels


def dequantize_phase(index: int, bits: int = 6) -> float:
    levels = 1 << bits
    if not 0 <= index < levels:
        raise ValueError(f"phase index {index} outside 0..{levels - 1}")
    p = -math.pi + index * 2 * math.pi / levels
    return math.pi if index == 0 else p


@dataclass(frozen=True)
class TdcpReport:
    delays: tuple
    amplitude_index: tuple
    phase_index: tuple | None
    measurement_time: float
    amplitude_bits: int = 7
    phase_bits: int = 6


@dataclass(frozen=True)
class DecodedReport:
    delays: tuple
    amplitudes: tuple
    phases: tuple | None
    measurement_time: float


def build_report(cfg: TdcpReportConfig, amplitudes: Sequence[float],
                 phases: Sequence[float] | None = None, time: float = 0.0) -> TdcpReport:
    if len(amplitudes) != len(cfg.delays):
        raise ReportError(f"{len(amplitudes)} amplitudes for {len(cfg.delays)} delays")
    if cfg.report_phase != (phases is not None):
        raise ReportError("phases must be given exactly when report_phase is configured")
    if phases is not None and len(phases) != len(cfg.delays):
        raise ReportError(f"{len(phases)} phases for {len(cfg.delays)} delays")
    amp = tuple(quantize_amplitude(a, cfg.amplitude_bits) for a in amplitudes)
    ph = None if phases is None else tuple(quantize_phase(p, cfg.phase_bits) for p in phases)
    return TdcpReport(cfg.delays, amp, ph, float(time), cfg.amplitude_bits, cfg.phase_bits)


def parse_report(report: TdcpReport, cfg: TdcpReportConfig) -> DecodedReport:
    if tuple(report.delays) != tuple(cfg.delays):
        raise ReportError("report delays do not match the configuration")
    if len(report.amplitude_index) != len(cfg.delays):
        raise ReportError("amplitude count does not match the configured delays")
    if (report.phase_index is not None) != cfg.report_phase:
        raise ReportError("phase fields present/absent contrary to configuration")
    if report.amplitude_bits != cfg.amplitude_bits or report.phase_bits != cfg.phase_bits:
        raise ReportError("quantizer widths differ from the configuration")
    amps = tuple(dequantize_amplitude(i, report.amplitude_bits) for i in report.amplitude_index)
    phases = None
    if report.phase_index is not None:
        if len(report.phase_index) != len(cfg.delays):
            raise ReportError("phase count does not match the configured delays")
        phases = tuple(dequantize_phase(i, report.phase_bits) for i in report.phase_index)
    return DecodedReport(report.delays, amps, phases, report.measurement_time)


_HEADER = struct.Struct(">BBBBBd")


def encode_report(report: TdcpReport) -> bytes:
    n = len(report.delays)
    if not 1 <= n <= MAX_DELAYS:
        raise ReportError(f"cannot encode {n} delays")
    has_phase = report.phase_index is not None
    out = bytearray(_HEADER.pack(FORMAT_VERSION, int(has_phase), report.amplitude_bits,
                                 report.phase_bits, n, report.measurement_time))
    for k, d in enumerate(report.delays):
        if not d.is_allowed:
            raise ReportError(f"delay {d.label} has no code")
        out += struct.pack(">BH", ALLOWED_DELAYS.index(d), report.amplitude_index[k])
        if has_phase:
            out += struct.pack(">H", report.phase_index[k])
    return bytes(out)


def decode_report(data: bytes) -> TdcpReport:
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise ReportFramingError(f"truncated header: {len(data)} bytes")
    version, flags, abits, pbits, n, t = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise ReportFramingError(f"unsupported version {version}")
    if flags & ~1:
        raise ReportFramingError(f"unknown flag bits {flags:#x}")
    if not 1 <= n <= MAX_DELAYS:
        raise ReportFramingError(f"bad delay count {n}")
    if not (1 <= abits <= 16 and 1 <= pbits <= 16):
        raise ReportFramingError("bad quantizer widths")
    has_phase = bool(flags & 1)
    rec = 5 if has_phase else 3
    if len(data) != _HEADER.size + n * rec:
        raise ReportFramingError(f"expected {_HEADER.size + n * rec} bytes, got {len(data)}")
    delays, amps, phases = [], [], []
    pos = _HEADER.size
    for _ in range(n):
        code, amp = struct.unpack_from(">BH", data, pos)
        if code >= len(ALLOWED_DELAYS):
            raise ReportFramingError(f"bad delay code {code}")
        if amp >= 1 << abits:
            raise ReportFramingError(f"amplitude index {amp} exceeds {abits} bits")
        delays.append(ALLOWED_DELAYS[code])
        amps.append(amp)
        pos += 3
        if has_phase:
            (ph,) = struct.unpack_from(">H", data, pos)
            if ph >= 1 << pbits:
                raise ReportFramingError(f"phase index {ph} exceeds {pbits} bits")
            phases.append(ph)
            pos += 2
    return TdcpReport(tuple(delays), tuple(amps), tuple(phases) if has_phase else None,
                      t, abits, pbits)
