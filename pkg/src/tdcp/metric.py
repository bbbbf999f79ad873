"""
Normalized instantaneous channel autocorrelation and related Doppler measures.

The correlation amplitude between two channel snapshots ``a`` and ``b`` is

    c = |sum_n b_n a_n*| / (sqrt(sum_n |b_n|^2) * sqrt(sum_n |a_n|^2))

where ``n`` runs over every observed resource element (subcarrier and receive
antenna). The geometric-mean normalization makes ``c`` insensitive to gain
changes between the two instants, and taking the magnitude removes any common
phase jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special


class UndefinedCorrelationError(ValueError):
    """Raised when a snapshot carries no energy."""


@dataclass(frozen=True)
class CorrelationSample:
    delay: float
    amplitude: float
    phase: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude {self.amplitude} outside [0, 1]")


@dataclass(frozen=True)
class DopplerEstimate:
    f_d: float


def _values(x) -> tuple[np.ndarray, float]:
    est = getattr(x, "estimates", x)
    return np.asarray(est).ravel(), float(getattr(x, "noise_variance", 0.0) or 0.0)


def _inner(a, b):
    va, na = _values(a)
    vb, nb = _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"snapshot shapes differ: {va.shape} vs {vb.shape}")
    ea = np.vdot(va, va).real
    eb = np.vdot(vb, vb).real
    if ea == 0 or eb == 0:
        raise UndefinedCorrelationError("correlation undefined for an all-zero snapshot")
    return np.vdot(va, vb), ea, eb, na * va.size, nb * vb.size


def corr_amplitude(a, b, noise_correction: bool = False) -> float:
    """Correlation amplitude between two snapshots (arrays or ``ObservedSnapshot``).

    With ``noise_correction`` the expected noise energy (taken from the
    snapshots' ``noise_variance``) is removed from each normalization term
    and the result is clipped to 1.
    """
    cross, ea, eb, noise_a, noise_b = _inner(a, b)
    if noise_correction:
        ea = max(ea - noise_a, np.finfo(float).tiny)
        eb = max(eb - noise_b, np.finfo(float).tiny)
    c = abs(cross) / math.sqrt(ea * eb)
    return min(c, 1.0)


def _wrap(phase: float) -> float:
    # into (-pi, pi]
    w = math.remainder(phase, 2 * math.pi)
    return math.pi if w == -math.pi else w


def corr_phase(a, b, delay: float, residual_offset_hz: float = 0.0) -> float:
    """Phase of the correlation, wrapped to (-pi, pi].

    ``residual_offset_hz`` is the frequency the receiver has retuned by
    (frequency-offset compensation); it rotates the phase linearly with the
    delay. Tuning to the received frequency of a single Doppler shift ``nu``
    corresponds to ``residual_offset_hz = -nu``.
    """
    cross, *_ = _inner(a, b)
    return _wrap(float(np.angle(cross)) + 2 * math.pi * residual_offset_hz * delay)


def average_amplitude(samples: Sequence[CorrelationSample]) -> float:
    """Arithmetic mean of the amplitudes; phases never enter."""
    if not samples:
        raise ValueError("no samples to average")
    delays = {s.delay for s in samples}
    if len(delays) > 1:
        raise ValueError(f"samples have mixed delays {sorted(delays)}")
    return math.fsum(s.amplitude for s in samples) / len(samples)


def doppler_spread_from_corr(c: float, delay: float) -> DopplerEstimate:
    """RMS Doppler spread from the second-order expansion of the correlation.

    ``c(dt) ~ 1 - (2 pi f_d dt)^2 / 2`` gives ``f_d = sqrt(1 - c) / (sqrt(2) pi dt)``.
    """
    if delay <= 0:
        raise ValueError("delay must be positive")
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"correlation {c} outside [0, 1]")
    return DopplerEstimate(math.sqrt(1.0 - c) / (math.sqrt(2.0) * math.pi * delay))


def doppler_spread_max_min(ray_dopplers, detection_threshold_db: float) -> float:
    """Maximum minus minimum Doppler over rays detected above a threshold.

    ``ray_dopplers`` is a sequence of ``(doppler_hz, linear_power)``; a ray is
    detected when its power exceeds ``detection_threshold_db`` relative to the
    total power. This measure is kept as a counterexample: a ray too weak to
    affect the channel can dominate it.
    """
    rays = [(float(f), float(p)) for f, p in ray_dopplers]
    if not rays:
        raise ValueError("no rays")
    total = sum(p for _, p in rays)
    floor = total * 10 ** (detection_threshold_db / 10)
    seen = [f for f, p in rays if p > floor]
    if not seen:
        return 0.0
    return max(seen) - min(seen)


def bessel_j0(x: float) -> float:
    """Zeroth-order Bessel function of the first kind."""
    return float(special.j0(x))


def jakes_autocorr_reference(max_doppler_hz: float, delay: float) -> float:
    """``|J0(2 pi fD dt)|``, the autocorrelation magnitude of a Jakes process."""
    if max_doppler_hz < 0 or delay < 0:
        raise ValueError("inputs must be non-negative")
    return abs(bessel_j0(2 * math.pi * max_doppler_hz * delay))
