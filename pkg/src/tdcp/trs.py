"""OFDM numerology, TRS burst patterns and noisy per-RE channel observation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSampler

ALLOWED_OFFSET_SLOTS = (1, 2, 3, 4, 5, 6, 10)


@dataclass(frozen=True)
class Numerology:
    subcarrier_spacing: float = 30e3
    symbols_per_slot: int = 14

    def __post_init__(self):
        if self.subcarrier_spacing <= 0 or self.symbols_per_slot < 1:
            raise ValueError("invalid numerology")

    @property
    def slot_duration(self) -> float:
        # 1 ms at 15 kHz, halved for each doubling of the spacing
        return 1e-3 * 15e3 / self.subcarrier_spacing

    @property
    def symbol_duration(self) -> float:
        return self.slot_duration / self.symbols_per_slot


@dataclass(frozen=True)
class TrsConfig:
    """TRS burst pattern.

    A burst is two TRS symbols in each of ``slots_per_burst`` adjacent slots,
    repeated every ``burst_periodicity`` slots. An optional second TRS is
    placed ``second_trs_offset`` slots after each primary burst, repeating
    every ``second_trs_period_multiple`` primary periods.
    """

    comb_spacing: int = 4
    symbol_positions: tuple = (4, 8)
    slots_per_burst: int = 2
    burst_periodicity: int = 40
    second_trs_offset: int | None = None
    second_trs_period_multiple: int = 1
    bandwidth_prbs: int = 273
    comb_offset: int = 0
    numerology: Numerology = field(default_factory=Numerology)

    def __post_init__(self):
        object.__setattr__(self, "symbol_positions", tuple(int(s) for s in self.symbol_positions))
        pos = self.symbol_positions
        if len(pos) != 2 or pos[1] - pos[0] != 4:
            raise ValueError("TRS needs two symbols exactly 4 symbols apart")
        if not 0 <= pos[0] < pos[1] < self.numerology.symbols_per_slot:
            raise ValueError("TRS symbol positions outside the slot")
        if self.comb_spacing < 1 or not 0 <= self.comb_offset < self.comb_spacing:
            raise ValueError("invalid comb")
        if self.slots_per_burst < 1 or self.burst_periodicity < self.slots_per_burst:
            raise ValueError("invalid burst structure")
        if self.second_trs_offset is not None and self.second_trs_offset not in ALLOWED_OFFSET_SLOTS:
            raise ValueError(f"second TRS offset {self.second_trs_offset} not in {ALLOWED_OFFSET_SLOTS}")
        if self.second_trs_period_multiple < 1:
            raise ValueError("second TRS periodicity multiple must be >= 1")
        if self.bandwidth_prbs < 1:
            raise ValueError("bandwidth must be at least one PRB")

    @property
    def num_subcarriers(self) -> int:
        return 12 * self.bandwidth_prbs

    @property
    def bandwidth(self) -> float:
        return self.num_subcarriers * self.numerology.subcarrier_spacing

    @property
    def symbols_per_burst(self) -> int:
        return len(self.symbol_positions) * self.slots_per_burst

    def subcarriers(self) -> np.ndarray:
        return np.arange(self.comb_offset, self.num_subcarriers, self.comb_spacing)


def subcarrier_frequencies(indices, num_subcarriers: int, numerology: Numerology) -> np.ndarray:
    """Baseband frequency (Hz) of subcarrier indices, centred on the carrier."""
    return (np.asarray(indices) - num_subcarriers / 2 + 0.5) * numerology.subcarrier_spacing


@dataclass(frozen=True)
class TrsOccasion:
    absolute_time: float
    subcarrier_indices: tuple
    frequencies: np.ndarray = field(repr=False, compare=False)
    trs_id: int = 0

    @property
    def time(self) -> float:
        return self.absolute_time


@dataclass(frozen=True)
class ObservedSnapshot:
    time: float
    estimates: np.ndarray    # (subcarrier, rx)
    noise_variance: float


def _bursts(first_slot, period, start_slot, end_slot):
    k = max(0, math.ceil((start_slot - first_slot) / period) - 1)
    while first_slot + k * period < end_slot:
        yield first_slot + k * period
        k += 1


def trs_occasions(cfg: TrsConfig, window) -> list[TrsOccasion]:
    """All TRS symbols with a start time in ``[start, end)``, sorted by time."""
    start, end = window
    if end <= start:
        return []
    num = cfg.numerology
    sc = cfg.subcarriers()
    freqs = subcarrier_frequencies(sc, cfg.num_subcarriers, num)
    freqs.setflags(write=False)
    sc = tuple(int(i) for i in sc)
    sources = [(0, 0, cfg.burst_periodicity)]
    if cfg.second_trs_offset is not None:
        sources.append((1, cfg.second_trs_offset,
                        cfg.burst_periodicity * cfg.second_trs_period_multiple))
    start_slot = start / num.slot_duration
    end_slot = end / num.slot_duration
    by_time = {}
    for trs_id, first, period in sources:
        for burst in _bursts(first, period, start_slot - cfg.slots_per_burst, end_slot):
            for slot in range(burst, burst + cfg.slots_per_burst):
                for sym in cfg.symbol_positions:
                    n_sym = slot * num.symbols_per_slot + sym
                    t = n_sym * num.symbol_duration
                    if start <= t < end and n_sym not in by_time:
                        by_time[n_sym] = TrsOccasion(t, sc, freqs, trs_id)
    return [by_time[k] for k in sorted(by_time)]


def _complex_normal(rng, shape) -> np.ndarray:
    """Unit-variance-per-part complex normals; element k is ``x[k, 0] + j x[k, 1]`` of one draw."""
    return rng.standard_normal(tuple(shape) + (2,)).view(complex)[..., 0]


def _time_key(t: float) -> int:
    return int(round(t * 1e10))


def observe(sampler: ChannelSampler, occasion: TrsOccasion, snr_db: float, seed: int,
            port=None, smoothing: int = 1) -> ObservedSnapshot:
    """Least-squares per-RE channel estimate at one TRS symbol.

    The estimate is the true channel (seen through ``port`` weights over the
    transmit elements, default the first element) plus circular complex
    Gaussian noise of variance ``mean_power / 10**(snr_db / 10)``. The noise
    is a deterministic function of ``(seed, occasion time)``.

    ``smoothing > 1`` applies a moving average of that width across
    subcarriers.
    """
    h = sampler.through(port).response([occasion.absolute_time], occasion.frequencies)[0, :, :, 0]
    if math.isinf(snr_db) and snr_db > 0:
        return ObservedSnapshot(occasion.absolute_time, h, 0.0)
    noise_var = sampler.mean_power / 10 ** (snr_db / 10)
    rng = np.random.default_rng([seed, _time_key(occasion.absolute_time)])
    noise = _complex_normal(rng, h.shape)
    est = h + math.sqrt(noise_var / 2) * noise
    if smoothing > 1:
        kernel = np.ones(smoothing) / smoothing
        est = np.apply_along_axis(lambda x: np.convolve(x, kernel, mode="same"), 0, est)
    return ObservedSnapshot(occasion.absolute_time, est, noise_var)


def observe_many(sampler: ChannelSampler, occasions, snr_db: float, seed: int,
                 port=None) -> list[ObservedSnapshot]:
    """``observe`` over several occasions sharing one subcarrier set, in one channel evaluation."""
    occasions = list(occasions)
    if not occasions:
        return []
    freqs = occasions[0].frequencies
    if any(o.subcarrier_indices != occasions[0].subcarrier_indices for o in occasions):
        raise ValueError("occasions use different subcarriers")
    h = sampler.through(port).response([o.absolute_time for o in occasions], freqs)[..., 0]
    if math.isinf(snr_db) and snr_db > 0:
        return [ObservedSnapshot(o.absolute_time, h[k], 0.0) for k, o in enumerate(occasions)]
    noise_var = sampler.mean_power / 10 ** (snr_db / 10)
    out = []
    for k, o in enumerate(occasions):
        rng = np.random.default_rng([seed, _time_key(o.absolute_time)])
        noise = _complex_normal(rng, h[k].shape)
        out.append(ObservedSnapshot(o.absolute_time, h[k] + math.sqrt(noise_var / 2) * noise, noise_var))
    return out


def _time_of(x) -> float:
    return x.time


def snapshot_pairs(items, delay: float, tolerance: float | None = None,
                   numerology: Numerology | None = None) -> list[tuple]:
    """Pairs ``(earlier, later)`` whose time difference matches ``delay``.

    Works on occasions or snapshots. ``tolerance`` defaults to half an OFDM
    symbol of ``numerology``.
    """
    if tolerance is None:
        tolerance = (numerology or Numerology()).symbol_duration / 2
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    ordered = sorted(items, key=_time_of)
    pairs = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            gap = b.time - a.time
            if gap > delay + tolerance:
                break
            if abs(gap - delay) <= tolerance:
                pairs.append((a, b))
    return pairs
