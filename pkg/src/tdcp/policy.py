"""Threshold switching on the correlation amplitude and threshold calibration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .report import Delay, as_delay


@dataclass(frozen=True)
class SwitchingPolicy:
    """Pick ``high_corr_mode`` for a slowly varying channel, ``low_corr_mode`` otherwise."""

    metric_delay: Delay
    threshold: float
    hysteresis: float = 0.0
    high_corr_mode: str = "TypeII"
    low_corr_mode: str = "TypeI"

    def __post_init__(self):
        object.__setattr__(self, "metric_delay", as_delay(self.metric_delay))
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")
        lo, hi = self.threshold - self.hysteresis, self.threshold + self.hysteresis
        if lo < 0 or hi > 1:
            raise ValueError(f"threshold band [{lo}, {hi}] not inside [0, 1]")


@dataclass(frozen=True)
class ModeDecision:
    mode: str
    metric_value: float
    decided_at: float = 0.0


def decide_mode(metric: float, previous: ModeDecision | None, policy: SwitchingPolicy,
                time: float = 0.0) -> ModeDecision:
    if not 0.0 <= metric <= 1.0:
        raise ValueError(f"metric {metric} outside [0, 1]")
    if metric > policy.threshold + policy.hysteresis:
        mode = policy.high_corr_mode
    elif metric < policy.threshold - policy.hysteresis:
        mode = policy.low_corr_mode
    elif previous is not None:
        mode = previous.mode
    else:
        mode = policy.high_corr_mode
    return ModeDecision(mode, metric, time)


def threshold_objective(samples, threshold: float) -> float:
    """Mean throughput when mode A is used for ``metric > threshold``, mode B otherwise."""
    s = np.asarray([row[1:4] for row in samples], dtype=float)
    return float(np.where(s[:, 0] > threshold, s[:, 1], s[:, 2]).mean())


def calibrate_threshold(samples: Sequence[tuple]) -> float:
    """Threshold maximizing the mean throughput of the selected mode.

    ``samples`` are ``(speed, metric, throughput_mode_A, throughput_mode_B)``
    where mode A is the high-correlation mode. Candidates are the midpoints
    between consecutive distinct metric values (plus one below the smallest
    and one above the largest), so every attainable split is considered once.
    Ties go to the larger threshold.
    """
    if not samples:
        raise ValueError("no calibration samples")
    s = np.asarray([row[1:4] for row in samples], dtype=float)
    s = s[np.lexsort((s[:, 2], s[:, 1], s[:, 0]))]
    metric, tput_a, tput_b = s.T
    values, first = np.unique(metric, return_index=True)
    # sum of B over samples at or below each distinct value, A above it
    csum_b = np.concatenate([[0.0], np.cumsum(tput_b)])
    csum_a = np.concatenate([[0.0], np.cumsum(tput_a)])
    split = np.concatenate([first, [len(metric)]])       # samples below candidate k
    totals = csum_b[split] + (csum_a[-1] - csum_a[split])
    lo = values[0] / 2
    if values[0] <= 0.0:
        # a metric of exactly 0 can never exceed a threshold in [0, 1]
        totals[0] = -np.inf
    hi = (values[-1] + 1.0) / 2 if values[-1] < 1.0 else 1.0
    candidates = np.concatenate([[lo], (values[:-1] + values[1:]) / 2, [hi]])
    best = np.flatnonzero(totals >= totals.max() - 1e-12 * max(1.0, abs(totals.max())))
    return float(candidates[best[-1]])


@dataclass(frozen=True)
class ThresholdTable:
    """Per-SNR thresholds, linearly interpolated in dB and clamped at the ends."""

    points: tuple

    def __post_init__(self):
        pts = tuple(sorted((float(s), float(t)) for s, t in self.points))
        if not pts:
            raise ValueError("empty threshold table")
        object.__setattr__(self, "points", pts)

    def __call__(self, snr_db: float) -> float:
        snr, thr = zip(*self.points)
        return float(np.interp(snr_db, snr, thr))
