"""Seeded sweeps, threshold calibration and CSV output."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import link
from .metric import corr_amplitude
from .policy import SwitchingPolicy, calibrate_threshold, threshold_objective
from .report import Delay
from .trs import observe_many, trs_occasions

AUTOCORR_COLUMNS = ("model", "direction_deg", "speed_kmh", "delay_s", "mean_amplitude", "stddev")
USECASE_COLUMNS = ("speed_kmh", "scheme", "delay_label", "trs_snr_db", "pdsch_snr_db",
                   "mean_se_bpshz", "mean_metric")
CALIBRATION_COLUMNS = ("delay_label", "trs_snr_db", "pdsch_snr_db", "threshold", "calibration_se_bpshz")

# calibration drops use a seed stream disjoint from the evaluation drops
CALIBRATION_SEED_OFFSET = 0x5EED


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def write_csv(path, columns, rows) -> None:
    """Write rows with fixed formatting and LF line endings."""
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@contextmanager
def parallel_map(jobs: int | None):
    """A ``map``-like callable over ``jobs`` worker processes (builtin ``map`` for one)."""
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield lambda fn, *its: pool.map(fn, *its, chunksize=4)


# ---------------------------------------------------------------- autocorrelation

def _autocorr_task(scenario, speed, direction, drop_index, delays):
    num = scenario.numerology
    seq = link.drop_seed(scenario.seed, "C", speed, drop_index)
    chan_seed, noise_seed = (link._int_seed(s) for s in seq.spawn(2))
    sampler = link.make_sampler(scenario, speed, direction, chan_seed)
    base = trs_occasions(scenario.trs, (0.0, scenario.trs.burst_periodicity * num.slot_duration))[0]
    # a TRS-like snapshot at the first TRS symbol and one at each delay after it
    occasions = [base] + [replace(base, absolute_time=base.time + d.seconds(num)) for d in delays]
    snaps = observe_many(sampler, occasions, scenario.trs_snr_db, noise_seed)
    return [corr_amplitude(snaps[0], s) for s in snaps[1:]]


def autocorr_table(scenario, delays=None, jobs: int | None = 1) -> list:
    """Rows ``(model, direction, speed, delay_s, mean, stddev)`` over ``scenario.drops`` realizations."""
    delays = tuple(delays if delays is not None else scenario.autocorr_delays or scenario.report.delays)
    delays = tuple(d if isinstance(d, Delay) else Delay.parse(d) for d in delays)
    if not delays:
        raise ValueError("no autocorrelation delays configured")
    model = "CDL-A" if scenario.channel.model == "CDL" else "TDL"
    directions = scenario.directions or (0.0,)
    keys = [(float(v), float(a)) for a in directions for v in scenario.speeds]
    tasks = [(scenario, v, a, i, delays) for v, a in keys for i in range(scenario.drops)]
    with parallel_map(jobs) as pmap:
        amps = list(pmap(_autocorr_task, *zip(*tasks)))
    amps = np.asarray(amps).reshape(len(keys), scenario.drops, len(delays))
    rows = []
    for (v, a), block in zip(keys, amps):
        for j, d in enumerate(delays):
            col = block[:, j]
            mean = math.fsum(col) / len(col)
            std = math.sqrt(math.fsum((col - mean) ** 2) / len(col))
            rows.append((model, a, v, d.seconds(scenario.numerology), mean, std))
    return rows


def run_autocorr(scenario, delays=None, out_path=None, jobs: int | None = 1) -> list:
    rows = autocorr_table(scenario, delays, jobs)
    if out_path is not None:
        write_csv(out_path, AUTOCORR_COLUMNS, rows)
    return rows


# ---------------------------------------------------------------- use cases

_SIMULATE = {"A": link.simulate_drop_a, "B": link.simulate_drop_b}
_MODES = link.USECASE_MODES


def _check_usecase(usecase: str) -> str:
    u = str(usecase).upper()
    if u not in _SIMULATE:
        raise ValueError(f"unknown use case {usecase!r}")
    return u


def simulate_drops(scenario, usecase: str, delays, jobs: int | None = 1) -> list:
    u = _check_usecase(usecase)
    tasks = [(scenario, float(v), i, tuple(delays)) for v in scenario.speeds for i in range(scenario.drops)]
    with parallel_map(jobs) as pmap:
        return list(pmap(_SIMULATE[u], *zip(*tasks)))


def calibration_samples(drops, delay_label: str, high: str, low: str, metric_filter: str = "running") -> list:
    """``(speed, metric, SE high-corr mode, SE low-corr mode)`` per realization.

    The metric is the one a switching decision would see under ``metric_filter``.
    """
    return [(d.speed_kmh, m, r.se[high], r.se[low])
            for d in sorted(drops, key=lambda d: (d.speed_kmh, d.drop_index))
            for r, m in zip(d.realizations, link.decision_metrics(d, delay_label, metric_filter))]


def calibrate(scenario, usecase: str = "A", delays=None, jobs: int | None = 1) -> list:
    """Calibrated threshold per delay, from drops seeded apart from the evaluation drops.

    Returns ``[(delay, threshold, mean SE at that threshold)]``.
    """
    u = _check_usecase(usecase)
    delays = link.check_delays(scenario, delays if delays is not None else scenario.report.delays)
    cal = replace(scenario, seed=scenario.seed + CALIBRATION_SEED_OFFSET)
    drops = simulate_drops(cal, u, delays, jobs)
    high, low = _MODES[u][1]
    out = []
    for d in delays:
        samples = calibration_samples(drops, d.label, high, low, scenario.metric_filter)
        thr = calibrate_threshold(samples)
        out.append((d, thr, threshold_objective(samples, thr)))
    return out


def usecase_policies(scenario, usecase: str, jobs: int | None = 1) -> list:
    """One switching policy per report delay.

    A ``[policy]`` section fixes the threshold for its own delay; every other
    delay is calibrated on held-out drops.
    """
    u = _check_usecase(usecase)
    high, low = _MODES[u][1]
    fixed = {}
    if scenario.policy is not None:
        fixed[scenario.policy.metric_delay] = scenario.policy
    delays = sorted(set(scenario.report.delays) | set(fixed))
    todo = [d for d in delays if d not in fixed]
    calibrated = {d: thr for d, thr, _ in calibrate(scenario, u, todo, jobs)} if todo else {}
    out = []
    for d in delays:
        p = fixed.get(d) or SwitchingPolicy(d, calibrated[d])
        out.append(replace(p, high_corr_mode=high, low_corr_mode=low))
    return out


def usecase_rows(result: link.ScenarioResult) -> list:
    return [(r.speed_kmh, r.scheme, r.delay_label, result.trs_snr_db, result.pdsch_snr_db,
             r.mean_se, r.mean_metric) for r in result.rows]


def run_usecase(scenario, usecase: str, out_path=None, jobs: int | None = 1,
                policies=None) -> link.ScenarioResult:
    """Fixed, switched and genie rows per speed; switched rows use calibrated thresholds
    unless ``policies`` are given."""
    u = _check_usecase(usecase)
    if policies is None:
        policies = usecase_policies(scenario, u, jobs)
    policies = link.adapt_policies(policies, u)
    delays = link.check_delays(scenario, set(scenario.report.delays) | {p.metric_delay for p in policies})
    drops = simulate_drops(scenario, u, delays, jobs)
    result = link.aggregate(drops, _MODES[u][0], policies, scenario.trs_snr_db, scenario.pdsch_snr_db,
                            scenario.metric_filter)
    if out_path is not None:
        write_csv(out_path, USECASE_COLUMNS, usecase_rows(result))
    return result
