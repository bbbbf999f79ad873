"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .report import (Delay, ReportError, ReportFramingError, TdcpReportConfig, UeCapability,
                     build_report, decode_report, encode_report, parse_report)
from .scenario import Scenario, ScenarioError, load_scenario, report_violations

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--drops", type=int, help="override the number of drops per speed")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tdcp", description="TDCP feedback experiments and report tools")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("autocorr", help="correlation amplitude against delay"))
    _common(sub.add_parser("usecase-a", help="Type-I / Type-II CSI switching"))
    _common(sub.add_parser("usecase-b", help="DMRS density switching"))
    cal = sub.add_parser("calibrate", help="calibrate switching thresholds per report delay")
    _common(cal)
    cal.add_argument("--usecase", choices=("A", "B"), default="A")

    rep = sub.add_parser("report", help="encode or decode a TDCP report")
    rsub = rep.add_subparsers(dest="action", required=True)
    enc = rsub.add_parser("encode", help="quantize and serialize; prints hex")
    enc.add_argument("--delays", required=True, help='comma separated, e.g. "1 slot, 3 slots"')
    enc.add_argument("--amplitudes", required=True, help="comma separated, in [0, 1]")
    enc.add_argument("--phases", help="comma separated radians")
    enc.add_argument("--time", type=float, default=0.0, help="measurement time in seconds")
    enc.add_argument("--amplitude-bits", type=int, default=7)
    enc.add_argument("--phase-bits", type=int, default=6)
    enc.add_argument("--scenario", help="scenario whose TRS and UE capability constrain the delays")
    enc.add_argument("--out", help="also write the raw bytes here")
    dec = rsub.add_parser("decode", help="parse a serialized report")
    src = dec.add_mutually_exclusive_group(required=True)
    src.add_argument("--hex", help="report bytes as hex")
    src.add_argument("--in", dest="infile", help="file with the raw report bytes")
    return ap


def _scenario(args) -> Scenario:
    try:
        return load_scenario(args.scenario).with_overrides(seed=args.seed, drops=args.drops)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def _check_out(path: str) -> Path:
    # fail before a long run rather than after it
    p = Path(path)
    if not p.parent.is_dir():
        raise OSError(f"cannot write {p}: directory {p.parent} does not exist")
    return p


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list {text!r}") from None


def _encode(args) -> int:
    try:
        delays = tuple(Delay.parse(x) for x in args.delays.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    amps = _floats(args.amplitudes, "amplitude")
    phases = None if args.phases is None else _floats(args.phases, "phase")
    if args.scenario:
        scn = load_scenario(args.scenario)
        trs, cap, per_delay = scn.trs, scn.capability, scn.per_delay_trs
    else:
        trs, cap, per_delay = Scenario().trs, UeCapability(phase_supported=phases is not None), False
    try:
        cfg = TdcpReportConfig(delays, phases is not None, args.amplitude_bits, args.phase_bits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problems = report_violations(cfg, cap, trs, per_delay)
    if problems:
        raise ConfigError("\n".join(problems))
    try:
        data = encode_report(build_report(cfg, amps, phases, args.time))
    except (ReportError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if args.out:
        Path(args.out).write_bytes(data)
    print(data.hex())
    return EXIT_OK


def _decode(args) -> int:
    if args.hex is not None:
        try:
            data = bytes.fromhex(args.hex)
        except ValueError:
            raise ConfigError("--hex is not valid hexadecimal") from None
    else:
        data = Path(args.infile).read_bytes()
    rep = decode_report(data)
    cfg = TdcpReportConfig(rep.delays, rep.phase_index is not None, rep.amplitude_bits, rep.phase_bits)
    dec = parse_report(rep, cfg)
    print(f"time_s,{dec.measurement_time!r}")
    print("delay,amplitude" + (",phase" if dec.phases is not None else ""))
    for k, d in enumerate(dec.delays):
        line = f"{d.label},{dec.amplitudes[k]!r}"
        if dec.phases is not None:
            line += f",{dec.phases[k]!r}"
        print(line)
    return EXIT_OK


def _run(args) -> int:
    if args.command == "report":
        return _encode(args) if args.action == "encode" else _decode(args)
    scn = _scenario(args)
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = _check_out(args.out)
    try:
        if args.command == "autocorr":
            harness.run_autocorr(scn, None, out, args.jobs)
        elif args.command == "calibrate":
            rows = harness.calibrate(scn, args.usecase, None, args.jobs)
            harness.write_csv(out, harness.CALIBRATION_COLUMNS,
                              [(d.label, scn.trs_snr_db, scn.pdsch_snr_db, thr, se) for d, thr, se in rows])
        else:
            harness.run_usecase(scn, "A" if args.command == "usecase-a" else "B", out, args.jobs)
    except ValueError as exc:
        # raised for configurations that parse but cannot be simulated
        raise ConfigError(str(exc)) from None
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"tdcp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReportFramingError as exc:
        print(f"tdcp: framing error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:    # noqa: BLE001 - anything else is a runtime failure
        print(f"tdcp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
