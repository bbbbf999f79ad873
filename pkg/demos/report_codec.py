"""
Building and checking a TDCP report
===================================

A report configuration names up to four delays from the allowed set. The
UE capability and the TRS pattern decide which configurations are legal;
the amplitudes are quantized to 7 bits and serialized.
"""

from tdcp import Delay, TdcpReportConfig, TrsConfig, UeCapability, decode_report, encode_report, validate_config
from tdcp.report import build_report, parse_report

cap = UeCapability(max_delay=Delay.slots(10), phase_supported=True)

# Delays above one slot need a second TRS at that offset
cfg = TdcpReportConfig(("4 OS", "1 slot", "10 slots"), report_phase=True)
for trs in (TrsConfig(), TrsConfig(second_trs_offset=10)):
    problems = validate_config(cfg, cap, trs)
    print(f"second TRS offset {trs.second_trs_offset}: {[str(p) for p in problems] or 'ok'}")

# Quantize, serialize and read back
rep = build_report(cfg, [0.998, 0.97, 0.41], [0.02, 0.3, -2.9], time=0.125)
data = encode_report(rep)
print(f"\n{len(data)} bytes: {data.hex()}")

back = parse_report(decode_report(data), cfg)
for d, a, p in zip(back.delays, back.amplitudes, back.phases):
    print(f"{d.label:>8}  amplitude {a:.4f}  phase {p:+.3f} rad")
