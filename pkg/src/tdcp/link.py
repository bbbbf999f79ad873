"""
Spectral-efficiency proxies for the two switching use cases.

A: Type-I (oversampled DFT grid of beams with co-phasing) against Type-II
(unquantized per-subband eigenbeamforming) CSI feedback, both aging over the
feedback period.

B: one against two additional DMRS symbols, comparing interpolation error
with pilot overhead inside a slot.

A *drop* is one UE moving in one direction. Each drop is evaluated over a few
independent fading realizations; every realization carries its own TRS
measurement, so switching decisions are made once per realization while the
genie picks the better mode once per drop. By default a decision sees the
running mean of the drop's measurements so far rather than the latest one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import (AntennaArray, ChannelSampler, TapProfile, VelocityVector, cdl_a, cis,
                      kmh_to_ms, make_cdl, make_tdl, max_doppler)
from .metric import CorrelationSample, average_amplitude, corr_amplitude
from .policy import ModeDecision, SwitchingPolicy, decide_mode
from .report import Delay, delay_realizable
from .trs import (Numerology, _complex_normal, observe_many, snapshot_pairs, subcarrier_frequencies,
                  trs_occasions)

TYPE_I, TYPE_II = "TypeI", "TypeII"
DMRS_LOW, DMRS_HIGH = "DMRS1+1", "DMRS1+2"
GENIE = "genie"


@dataclass(frozen=True)
class PrecoderReport:
    """Precoder fed back at ``computed_at``.

    ``matrix`` is (tx, rank) for a wideband precoder or (subbands, tx, rank)
    with ``subband_size`` frequency points per subband.
    """

    matrix: np.ndarray
    type: str
    computed_at: float = 0.0
    subband_size: int | None = None

    @property
    def rank(self) -> int:
        return self.matrix.shape[-1]

    def per_frequency(self, num_freqs: int) -> np.ndarray:
        """(F, tx, rank) precoder on a frequency grid of ``num_freqs`` points."""
        w = self.matrix
        if w.ndim == 2:
            return np.broadcast_to(w, (num_freqs,) + w.shape)
        idx = np.minimum(np.arange(num_freqs) // self.subband_size, w.shape[0] - 1)
        return w[idx]


@dataclass(frozen=True)
class ThroughputSample:
    spectral_efficiency: float
    slot_index: int = 0

    def __post_init__(self):
        if not self.spectral_efficiency >= 0:
            raise ValueError("spectral efficiency must be non-negative")


@dataclass(frozen=True)
class ResultRow:
    speed_kmh: float
    scheme: str
    delay_label: str
    mean_se: float
    mean_metric: float | None = None
    accuracy: float | None = None


@dataclass(frozen=True)
class ScenarioResult:
    rows: tuple
    trs_snr_db: float
    pdsch_snr_db: float
    metrics: dict = field(default_factory=dict)    # speed -> {delay label: mean metric}

    def se(self, speed_kmh: float, scheme: str) -> float:
        return self.row(speed_kmh, scheme).mean_se

    def row(self, speed_kmh: float, scheme: str) -> ResultRow:
        for r in self.rows:
            if r.speed_kmh == speed_kmh and r.scheme == scheme:
                return r
        raise KeyError((speed_kmh, scheme))

    @property
    def speeds(self) -> list:
        return sorted({r.speed_kmh for r in self.rows})


# ---------------------------------------------------------------- precoders

def _stack(h) -> np.ndarray:
    """(..., rx, tx) -> (N, tx) with all leading axes folded into rows."""
    h = np.asarray(h)
    return h.reshape(-1, h.shape[-1])


def precoder_type2(h, rank: int, computed_at: float = 0.0) -> PrecoderReport:
    """Dominant ``rank`` right singular vectors of ``h`` (rows stacked)."""
    hs = _stack(h)
    if not 1 <= rank <= min(hs.shape):
        raise ValueError(f"rank {rank} exceeds channel dimensions {hs.shape}")
    _, _, vh = np.linalg.svd(hs, full_matrices=False)
    return PrecoderReport(vh[:rank].conj().T, TYPE_II, computed_at)


def precoder_type2_subband(h_freq, rank: int, subband_size: int,
                           computed_at: float = 0.0) -> PrecoderReport:
    """Per-subband eigenbeamforming; ``h_freq`` is (F, rx, tx)."""
    h_freq = np.asarray(h_freq)
    f, rx, tx = h_freq.shape
    if not 1 <= rank <= min(rx * min(subband_size, f), tx):
        raise ValueError(f"rank {rank} exceeds channel dimensions")
    n_sb = -(-f // subband_size)
    pad = n_sb * subband_size - f
    hp = np.concatenate([h_freq, np.zeros((pad, rx, tx), h_freq.dtype)]) if pad else h_freq
    _, _, vh = np.linalg.svd(hp.reshape(n_sb, subband_size * rx, tx), full_matrices=False)
    w = vh[:, :rank].conj().transpose(0, 2, 1)
    return PrecoderReport(w, TYPE_II, computed_at, subband_size)


def dft_beams(array: AntennaArray, oversampling: int) -> np.ndarray:
    """Oversampled 2D DFT beams over one polarization, (ports, beams), unit-modulus entries."""
    n1, n2 = array.columns, array.rows
    o1 = oversampling
    o2 = oversampling if n2 > 1 else 1
    l = np.arange(n1 * o1)
    m = np.arange(n2 * o2)
    uh = np.exp(2j * np.pi * np.outer(np.arange(n1), l) / (n1 * o1))     # (n1, L)
    uv = np.exp(2j * np.pi * np.outer(np.arange(n2), m) / (n2 * o2))     # (n2, M)
    # element order within a polarization is column-major: index col * rows + row
    return np.einsum("al,bm->ablm", uh, uv).reshape(n1 * n2, -1)


def type1_candidates(array: AntennaArray, oversampling: int, rank: int) -> np.ndarray:
    """Every Type-I precoder of the given rank, (candidates, tx, rank), unit-norm columns."""
    if rank not in (1, 2):
        raise ValueError("the grid-of-beams proxy supports rank 1 and 2 only")
    beams = dft_beams(array, oversampling)
    n = beams.shape[0]
    if array.polarizations == 1:
        if rank == 2:
            raise ValueError("rank 2 needs a dual-polarized array")
        return (beams.T / math.sqrt(n))[:, :, None]
    if rank == 1:
        cands = [np.vstack([beams, phi * beams]) for phi in (1, 1j, -1, -1j)]
        return (np.concatenate(cands, axis=1).T / math.sqrt(2 * n))[:, :, None]
    cands = []
    for phi in (1, 1j):
        w = np.stack([np.vstack([beams, phi * beams]), np.vstack([beams, -phi * beams])], axis=-1)
        cands.append(w.transpose(1, 0, 2))
    return np.concatenate(cands) / math.sqrt(2 * n)


def precoder_type1(h, array: AntennaArray, oversampling: int = 4, rank: int = 1,
                   computed_at: float = 0.0) -> PrecoderReport:
    """Wideband grid-of-beams precoder found by exhaustive search.

    Rank 1 maximizes ``||H w||^2``. Rank 2 puts the same beam on both
    polarizations with opposite co-phasing and maximizes
    ``det(I + W^H R W)`` with ``R`` the per-row channel Gram matrix, since
    ``||H W||^2`` does not depend on the co-phasing.
    """
    hs = _stack(h)
    if hs.shape[1] != array.num_elements:
        raise ValueError(f"channel has {hs.shape[1]} tx elements, array {array.num_elements}")
    if rank > min(hs.shape):
        raise ValueError(f"rank {rank} exceeds channel dimensions {hs.shape}")
    cands = type1_candidates(array, oversampling, rank)
    gram = hs.conj().T @ hs / hs.shape[0]
    g = np.swapaxes(cands.conj(), 1, 2) @ (gram @ cands)
    if rank == 1:
        score = g[:, 0, 0].real
    else:
        score = np.linalg.det(np.eye(rank) + g).real
    return PrecoderReport(cands[int(np.argmax(score))], TYPE_I, computed_at)


# ---------------------------------------------------------------- use case A

def spectral_efficiency(h, w, snr_db: float) -> np.ndarray:
    """``mean_f log2 det(I + SNR/r (H W)^H (H W))`` for each leading time index.

    ``h`` is (T, F, rx, tx) and ``w`` is (F, tx, r) or (tx, r).
    """
    h = np.asarray(h)
    w = np.asarray(w)
    if w.ndim == 2:
        w = np.broadcast_to(w, (h.shape[1],) + w.shape)
    r = w.shape[-1]
    snr = 10 ** (snr_db / 10)
    hw = h @ w                                           # (T, F, rx, r)
    g = np.swapaxes(hw.conj(), -1, -2) @ hw
    _, logdet = np.linalg.slogdet(np.eye(r) + (snr / r) * g)
    return logdet.mean(axis=1) / math.log(2)


def aged_throughput(sampler: ChannelSampler, report: PrecoderReport, pdsch_snr_db: float,
                    feedback_period_slots: int, freq_grid, feedback_delay_slots: int = 0,
                    numerology: Numerology | None = None) -> ThroughputSample:
    """Period-mean SE of a precoder reported at ``report.computed_at``.

    The precoder is applied ``feedback_delay_slots`` after the measurement and
    then kept for ``feedback_period_slots`` slots while the true channel ages.
    """
    if feedback_period_slots < 1:
        raise ValueError("feedback period must be at least one slot")
    slot = (numerology or Numerology()).slot_duration
    freq_grid = np.asarray(freq_grid, float)
    times = report.computed_at + (feedback_delay_slots + np.arange(feedback_period_slots)) * slot
    h = sampler.response(times, freq_grid)
    se = spectral_efficiency(h, report.per_frequency(len(freq_grid)), pdsch_snr_db)
    return ThroughputSample(max(float(se.mean()), 0.0), 0)


def csi_report(kind: str, h_freq, pdsch_snr_db: float, array: AntennaArray, oversampling: int = 4,
               subband_size: int = 4, computed_at: float = 0.0,
               ranks: Sequence[int] = (1, 2)) -> PrecoderReport:
    """Best-rank report of one type, judged by SE on the channel it was computed from."""
    h_freq = np.asarray(h_freq)
    best, best_se = None, -np.inf
    for r in ranks:
        if r > min(h_freq.shape[1], h_freq.shape[2]):
            continue
        if kind == TYPE_II:
            rep = precoder_type2_subband(h_freq, r, subband_size, computed_at)
        elif kind == TYPE_I:
            rep = precoder_type1(h_freq, array, oversampling, r, computed_at)
        else:
            raise ValueError(f"unknown CSI type {kind!r}")
        se = spectral_efficiency(h_freq[None], rep.per_frequency(len(h_freq)), pdsch_snr_db)[0]
        if se > best_se:
            best, best_se = rep, se
    return best


# ---------------------------------------------------------------- use case B

def _interp_matrix(positions, num_symbols: int) -> np.ndarray:
    """(symbols, pilots) weights for linear interpolation with edge hold."""
    pos = np.asarray(positions)
    w = np.zeros((num_symbols, len(pos)))
    for s in range(num_symbols):
        if s <= pos[0]:
            w[s, 0] = 1.0
        elif s >= pos[-1]:
            w[s, -1] = 1.0
        else:
            j = int(np.searchsorted(pos, s))
            a, b = pos[j - 1], pos[j]
            frac = (s - a) / (b - a)
            w[s, j - 1], w[s, j] = 1.0 - frac, frac
    return w


def _check_positions(positions, num_symbols):
    pos = [int(p) for p in positions]
    if not pos:
        raise ValueError("no DMRS positions")
    if pos != sorted(set(pos)) or pos[0] < 0 or pos[-1] >= num_symbols:
        raise ValueError(f"DMRS positions {pos} must be distinct, sorted and inside the slot")
    return pos


def dmrs_mse(h_slot, positions, pdsch_snr_db: float, rng) -> np.ndarray:
    """Per-symbol normalized MSE of interpolated DMRS estimates of ``h_slot`` (symbols, ...)."""
    h = np.asarray(h_slot)
    pos = _check_positions(positions, h.shape[0])
    power = float(np.mean(np.abs(h) ** 2))
    est = h[pos]
    if not (math.isinf(pdsch_snr_db) and pdsch_snr_db > 0):
        var = power / 10 ** (pdsch_snr_db / 10)
        noise = _complex_normal(rng, est.shape)
        est = est + math.sqrt(var / 2) * noise
    interp = np.tensordot(_interp_matrix(pos, h.shape[0]), est, axes=1)
    err = np.abs(interp - h) ** 2
    return err.reshape(h.shape[0], -1).mean(axis=1) / power


def dmrs_estimate_mse(sampler: ChannelSampler, slot_start: float, dmrs_positions, pdsch_snr_db: float,
                      freq_grid, seed: int = 0, numerology: Numerology | None = None,
                      port=None) -> np.ndarray:
    """Per-symbol MSE over one slot; the effective channel is tx element 0 unless ``port`` is given."""
    num = numerology or Numerology()
    _check_positions(dmrs_positions, num.symbols_per_slot)
    times = slot_start + np.arange(num.symbols_per_slot) * num.symbol_duration
    h = sampler.response(times, np.asarray(freq_grid, float))
    h = h[..., 0] if port is None else h @ np.asarray(port)
    return dmrs_mse(h, dmrs_positions, pdsch_snr_db, np.random.default_rng(seed))


def dmrs_throughput(mse, dmrs_positions, pdsch_snr_db: float) -> float:
    """``(data symbols / 14) * mean log2(1 + SNR / (1 + SNR * MSE))`` over data symbols."""
    mse = np.asarray(mse, float)
    pos = set(int(p) for p in dmrs_positions)
    data = [s for s in range(len(mse)) if s not in pos]
    if not data:
        return 0.0
    snr = 10 ** (pdsch_snr_db / 10)
    eff = snr / (1.0 + snr * mse[data])
    return len(data) / len(mse) * float(np.mean(np.log2(1.0 + eff)))


# ---------------------------------------------------------------- drops

@dataclass(frozen=True)
class RealizationRecord:
    se: dict          # mode -> spectral efficiency
    metrics: dict     # delay label -> correlation amplitude


@dataclass(frozen=True)
class DropRecord:
    speed_kmh: float
    drop_index: int
    direction_deg: float
    realizations: tuple

    def mean_se(self, mode: str) -> float:
        return math.fsum(r.se[mode] for r in self.realizations) / len(self.realizations)


def drop_seed(seed: int, usecase: str, speed_kmh: float, drop_index: int) -> np.random.SeedSequence:
    """Seed material that depends only on the drop's identity, not on the sweep it is part of."""
    tag = sum(ord(c) << (8 * i) for i, c in enumerate(usecase))
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag, int(round(speed_kmh * 1000)), drop_index])


def _int_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, np.uint64)[0])


def make_sampler(scenario, speed_kmh: float, direction_deg: float, seed: int) -> ChannelSampler:
    ch = scenario.channel
    num = scenario.numerology
    bw = scenario.trs.bandwidth_prbs * 12 * num.subcarrier_spacing
    if ch.model == "TDL":
        spacing = 1.0 / bw
        if ch.tdl_profile == "equal":
            profile = TapProfile.equal_power(ch.tdl_taps, spacing)
        else:
            profile = TapProfile.exponential(ch.delay_spread, ch.tdl_taps, spacing)
        fd = max_doppler(kmh_to_ms(speed_kmh), scenario.carrier_hz)
        return make_tdl(profile, fd, ch.num_rays, seed, num_rx=ch.num_rx,
                        num_tx=scenario_tx_array(scenario).num_elements, bandwidth=bw)
    return make_cdl(cdl_a(), ch.delay_spread, ch.asa_deg, ch.zsa_deg, scenario_tx_array(scenario),
                    AntennaArray.ue(), VelocityVector.from_kmh(speed_kmh, direction_deg),
                    scenario.carrier_hz, seed, ch.asd_deg, ch.zsd_deg, bandwidth=bw)


def scenario_tx_array(scenario) -> AntennaArray:
    return AntennaArray.base_station() if scenario.channel.model == "CDL" else AntennaArray()


def _direction(scenario, drop_index: int, rng) -> float:
    if scenario.directions:
        return float(scenario.directions[drop_index % len(scenario.directions)])
    return float(rng.uniform(0.0, 360.0))


def tdcp_metrics(scenario, sampler: ChannelSampler, delays: Iterable[Delay], window_end: float,
                 seed: int) -> dict:
    """Mean correlation amplitude per delay from the TRS symbols in ``[0, window_end)``."""
    num = scenario.numerology
    delays = list(delays)
    occasions = {}
    plan = {}
    for d in delays:
        occ = trs_occasions(scenario.trs_for(d), (0.0, window_end))
        pairs = snapshot_pairs(occ, d.seconds(num), numerology=num)
        if not pairs:
            raise ValueError(f"delay {d.label} cannot be measured with the TRS configuration")
        plan[d] = pairs
        for o in occ:
            occasions.setdefault(round(o.time / num.symbol_duration), o)
    keys = sorted(occasions)
    snaps = observe_many(sampler, [occasions[k] for k in keys], scenario.trs_snr_db, seed)
    by_key = dict(zip(keys, snaps))
    out = {}
    for d, pairs in plan.items():
        samples = []
        for a, b in pairs:
            sa = by_key[round(a.time / num.symbol_duration)]
            sb = by_key[round(b.time / num.symbol_duration)]
            samples.append(CorrelationSample(d.seconds(num), corr_amplitude(sa, sb)))
        out[d.label] = average_amplitude(samples)
    return out


def trs_frequency_offset(scenario, sampler: ChannelSampler, window_end: float, seed: int) -> float:
    """Receive-frequency offset (Hz) the UE tunes to, from the phase of 4-OS TRS pairs.

    Uses the same noisy observations as ``tdcp_metrics`` for a given seed.
    Returns 0 when the TRS has no 4-symbol pairs in the window.
    """
    num = scenario.numerology
    dt = 4 * num.symbol_duration
    occ = trs_occasions(scenario.trs, (0.0, window_end))
    pairs = snapshot_pairs(occ, dt, numerology=num)
    if not pairs:
        return 0.0
    snaps = {round(o.time / num.symbol_duration): o
             for o in observe_many(sampler, occ, scenario.trs_snr_db, seed)}
    cross = sum(np.vdot(snaps[round(a.time / num.symbol_duration)].estimates,
                        snaps[round(b.time / num.symbol_duration)].estimates) for a, b in pairs)
    return float(np.angle(cross)) / (2 * math.pi * dt)


def pdsch_subcarriers(scenario) -> np.ndarray:
    """Subcarrier indices of the PDSCH allocation, centred in the carrier."""
    n_prb = scenario.num_pdsch_prbs
    first = (scenario.trs.bandwidth_prbs - n_prb) // 2 * 12
    return first + np.arange(12 * n_prb)


def prb_grid(scenario) -> np.ndarray:
    """One frequency point per PDSCH PRB (its centre subcarrier)."""
    sc = pdsch_subcarriers(scenario)[6::12]
    return subcarrier_frequencies(sc, scenario.trs.num_subcarriers, scenario.numerology)


def _lead_slots(scenario, delays) -> int:
    """Slots of TRS history before the measurement instant: the averaged bursts plus the longest delay."""
    longest = max((d.symbols for d in delays), default=0)
    trs = scenario.trs
    history = (scenario.averaging_bursts - 1) * trs.burst_periodicity * trs.second_trs_period_multiple
    return history + trs.slots_per_burst + -(-longest // scenario.numerology.symbols_per_slot)


def simulate_drop_a(scenario, speed_kmh: float, drop_index: int, delays: Sequence[Delay]) -> DropRecord:
    """Type-I / Type-II period-mean SE and TDCP metrics for every realization of one drop.

    Per realization the TRS bursts come first (``averaging_bursts`` periods of
    them), the CSI is measured right after the last TRS slot, and
    ``periods_per_realization`` feedback periods follow.
    """
    csi = scenario.csi
    num = scenario.numerology
    seq = drop_seed(scenario.seed, "A", speed_kmh, drop_index)
    rng = np.random.default_rng(seq.spawn(1)[0])
    direction = _direction(scenario, drop_index, rng)
    array = scenario_tx_array(scenario)
    freqs = prb_grid(scenario)
    lead = _lead_slots(scenario, delays)
    slot = num.slot_duration
    records = []
    for child in seq.spawn(csi.realizations_per_drop):
        chan_seed, noise_seed = (_int_seed(s) for s in child.spawn(2))
        sampler = make_sampler(scenario, speed_kmh, direction, chan_seed)
        metrics = tdcp_metrics(scenario, sampler, delays, lead * slot, noise_seed)
        se = {TYPE_I: 0.0, TYPE_II: 0.0}
        for k in range(csi.periods_per_realization):
            t0 = (lead + k * csi.feedback_period_slots) * slot
            h0 = sampler.response([t0], freqs)[0]
            for kind in (TYPE_I, TYPE_II):
                rep = csi_report(kind, h0, scenario.pdsch_snr_db, array, csi.oversampling,
                                 csi.subband_prbs, t0)
                se[kind] += aged_throughput(sampler, rep, scenario.pdsch_snr_db,
                                            csi.feedback_period_slots, freqs,
                                            csi.feedback_delay_slots, num).spectral_efficiency
        se = {m: v / csi.periods_per_realization for m, v in se.items()}
        records.append(RealizationRecord(se, metrics))
    return DropRecord(speed_kmh, drop_index, direction, tuple(records))


def simulate_drop_b(scenario, speed_kmh: float, drop_index: int, delays: Sequence[Delay]) -> DropRecord:
    """DMRS 1+1 / 1+2 SE and TDCP metrics for every realization of one drop.

    The PDSCH slot follows the TRS burst immediately. The receiver is tuned
    to the frequency estimated from the TRS, so DMRS interpolation sees the
    channel with that offset removed.
    """
    num = scenario.numerology
    seq = drop_seed(scenario.seed, "B", speed_kmh, drop_index)
    rng = np.random.default_rng(seq.spawn(1)[0])
    direction = _direction(scenario, drop_index, rng)
    freqs = subcarrier_frequencies(pdsch_subcarriers(scenario)[::2], scenario.trs.num_subcarriers, num)
    lead = _lead_slots(scenario, delays)
    modes = ((DMRS_LOW, scenario.dmrs.low_positions), (DMRS_HIGH, scenario.dmrs.high_positions))
    records = []
    for child in seq.spawn(scenario.dmrs.realizations_per_drop):
        chan_seed, noise_seed, dmrs_seed = (_int_seed(s) for s in child.spawn(3))
        sampler = make_sampler(scenario, speed_kmh, direction, chan_seed)
        metrics = tdcp_metrics(scenario, sampler, delays, lead * num.slot_duration, noise_seed)
        times = lead * num.slot_duration + np.arange(num.symbols_per_slot) * num.symbol_duration
        h = sampler.response(times, freqs)[..., 0]
        if scenario.dmrs.frequency_tracking:
            nu = trs_frequency_offset(scenario, sampler, lead * num.slot_duration, noise_seed)
            h = h * cis(-2 * math.pi * nu * times)[:, None, None]
        dmrs_rng = np.random.default_rng(dmrs_seed)
        se = {}
        for mode, pos in modes:
            se[mode] = dmrs_throughput(dmrs_mse(h, pos, scenario.pdsch_snr_db, dmrs_rng),
                                       pos, scenario.pdsch_snr_db)
        records.append(RealizationRecord(se, metrics))
    return DropRecord(speed_kmh, drop_index, direction, tuple(records))


# ---------------------------------------------------------------- aggregation

def _policies(policy) -> list:
    if policy is None:
        return []
    if isinstance(policy, SwitchingPolicy):
        return [policy]
    return list(policy)


def switched_label(policy: SwitchingPolicy) -> str:
    return "switched-" + policy.metric_delay.label.replace(" ", "").replace("slots", "slot")


def decision_metrics(drop: DropRecord, delay_label: str, metric_filter: str = "running") -> list:
    """Metric each switching decision of the drop sees, one per realization.

    ``running`` averages (abs domain) every measurement of the drop so far,
    ``none`` uses the latest one.
    """
    values = [r.metrics[delay_label] for r in drop.realizations]
    if metric_filter == "none":
        return values
    if metric_filter != "running":
        raise ValueError(f"unknown metric filter {metric_filter!r}")
    return [math.fsum(values[:k + 1]) / (k + 1) for k in range(len(values))]


def aggregate(drops: Sequence[DropRecord], modes: Sequence[str], policies: Sequence[SwitchingPolicy],
              trs_snr_db: float, pdsch_snr_db: float, metric_filter: str = "running") -> ScenarioResult:
    """Per-speed rows for the fixed modes, each policy and the genie.

    Sums run in (speed, drop index) order so results do not depend on how the
    drops were scheduled.
    """
    by_speed = {}
    for rec in sorted(drops, key=lambda r: (r.speed_kmh, r.drop_index)):
        by_speed.setdefault(rec.speed_kmh, []).append(rec)
    rows, metrics = [], {}
    for speed, recs in by_speed.items():
        n = len(recs)
        labels = list(recs[0].realizations[0].metrics)
        metrics[speed] = {
            lab: math.fsum(math.fsum(r.metrics[lab] for r in d.realizations) / len(d.realizations)
                           for d in recs) / n
            for lab in labels
        }
        for m in modes:
            rows.append(ResultRow(speed, m, "", math.fsum(d.mean_se(m) for d in recs) / n))
        genie_modes = [max(modes, key=d.mean_se) for d in recs]
        genie = math.fsum(d.mean_se(g) for d, g in zip(recs, genie_modes)) / n
        for pol in policies:
            lab = pol.metric_delay.label
            if lab not in metrics[speed]:
                raise ValueError(f"policy delay {lab} was not measured")
            total, hits, count = [], 0, 0
            for d, g in zip(recs, genie_modes):
                prev: ModeDecision | None = None
                vals = []
                for r, m in zip(d.realizations, decision_metrics(d, lab, metric_filter)):
                    prev = decide_mode(m, prev, pol)
                    vals.append(r.se[prev.mode])
                    hits += prev.mode == g
                    count += 1
                total.append(math.fsum(vals) / len(vals))
            rows.append(ResultRow(speed, switched_label(pol), lab, math.fsum(total) / n,
                                  metrics[speed][lab], hits / count))
        rows.append(ResultRow(speed, GENIE, "", genie))
    return ScenarioResult(tuple(rows), trs_snr_db, pdsch_snr_db, metrics)


# (fixed modes, (high-correlation mode, low-correlation mode)) per use case
USECASE_MODES = {
    "A": ((TYPE_I, TYPE_II), (TYPE_II, TYPE_I)),
    "B": ((DMRS_LOW, DMRS_HIGH), (DMRS_LOW, DMRS_HIGH)),
}


def adapt_policies(policy, usecase: str) -> list:
    """Policies with their mode names mapped onto the use case's modes."""
    modes, (high, low) = USECASE_MODES[usecase]
    return [p if {p.high_corr_mode, p.low_corr_mode} <= set(modes)
            else replace(p, high_corr_mode=high, low_corr_mode=low)
            for p in _policies(policy)]


def check_delays(scenario, delays) -> list:
    """Sorted distinct delays, each measurable with the scenario's TRS."""
    delays = sorted(set(delays))
    for d in delays:
        if not d.is_allowed or not delay_realizable(d, scenario.trs_for(d)):
            raise ValueError(f"delay {d.label} cannot be measured with the TRS configuration")
    return delays


def _run(simulate, scenario, policy, mapper, usecase):
    policies = adapt_policies(policy, usecase)
    delays = check_delays(scenario, set(scenario.report.delays) | {p.metric_delay for p in policies})
    tasks = [(scenario, float(v), i, tuple(delays)) for v in scenario.speeds for i in range(scenario.drops)]
    drops = list(mapper(simulate, *zip(*tasks)))
    return aggregate(drops, USECASE_MODES[usecase][0], policies, scenario.trs_snr_db, scenario.pdsch_snr_db,
                     scenario.metric_filter)


def eval_usecase_a(scenario, policy=None, mapper: Callable = map) -> ScenarioResult:
    """Type-I vs Type-II rows per speed, plus one switched row per policy and the genie.

    ``mapper`` has the signature of the builtin ``map`` and may run drops in parallel.
    """
    return _run(simulate_drop_a, scenario, policy, mapper, "A")


def eval_usecase_b(scenario, policy=None, mapper: Callable = map) -> ScenarioResult:
    """DMRS 1+1 vs 1+2 rows per speed, plus switched and genie rows."""
    return _run(simulate_drop_b, scenario, policy, mapper, "B")
