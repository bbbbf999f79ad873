import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdcp.channel import AntennaArray, ChannelSampler, TapProfile, make_tdl
from tdcp.link import (DMRS_HIGH, DMRS_LOW, GENIE, TYPE_I, TYPE_II, DropRecord, RealizationRecord,
                       aggregate, aged_throughput, decision_metrics, csi_report, dft_beams, dmrs_estimate_mse, dmrs_mse,
                       dmrs_throughput, eval_usecase_a, precoder_type1, precoder_type2,
                       precoder_type2_subband, spectral_efficiency, trs_frequency_offset,
                       type1_candidates)
from tdcp.policy import SwitchingPolicy
from tdcp.report import Delay, TdcpReportConfig
from tdcp.scenario import CsiConfig, Scenario
from tdcp.trs import Numerology, TrsConfig

BS = AntennaArray.base_station()
SLOT = Numerology().slot_duration


def cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def static(gains, delays=(0.0,)):
    g = np.asarray(gains, complex)
    return ChannelSampler(np.asarray(delays), np.zeros((len(delays), 1)), g)


# ---------------------------------------------------------------- precoders

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 2))
def test_type2_orthonormal_and_optimal(seed, rank):
    rng = np.random.default_rng(seed)
    h = cgauss(rng, 2, 16)
    w = precoder_type2(h, rank).matrix
    assert np.allclose(w.conj().T @ w, np.eye(rank), atol=1e-10)
    s = np.linalg.svd(h, compute_uv=False)
    assert np.linalg.norm(h @ w) ** 2 == pytest.approx(np.sum(s[:rank] ** 2))


def test_type2_rank_one_outer_product():
    rng = np.random.default_rng(0)
    a, b = cgauss(rng, 2), cgauss(rng, 16)
    w = precoder_type2(np.outer(a, b.conj()), 1).matrix[:, 0]
    assert abs(np.vdot(w, b)) / np.linalg.norm(b) == pytest.approx(1.0)


def test_type2_subband_shapes_and_rank_errors():
    rng = np.random.default_rng(1)
    rep = precoder_type2_subband(cgauss(rng, 10, 2, 16), 2, 4)
    assert rep.matrix.shape == (3, 16, 2)
    assert rep.per_frequency(10).shape == (10, 16, 2)
    with pytest.raises(ValueError):
        precoder_type2(cgauss(rng, 2, 16), 3)


def test_type1_candidates_unit_norm():
    for rank in (1, 2):
        c = type1_candidates(BS, 4, rank)
        assert np.allclose(np.linalg.norm(c, axis=1), 1.0)
    with pytest.raises(ValueError):
        type1_candidates(BS, 4, 3)


def test_type1_selects_matched_beam():
    beams = dft_beams(BS, 4)
    k = 11
    v = np.concatenate([beams[:, k], 1j * beams[:, k]])
    h = np.stack([v.conj(), v.conj()])
    w = precoder_type1(h, BS, 4, 1).matrix[:, 0]
    assert abs(np.vdot(w, v)) ** 2 / np.vdot(v, v).real == pytest.approx(1.0)


def test_type1_search_is_exhaustive():
    rng = np.random.default_rng(5)
    h = cgauss(rng, 2, 16)
    w = precoder_type1(h, BS, 4, 1).matrix
    gains = [np.linalg.norm(h @ c) for c in type1_candidates(BS, 4, 1)]
    assert np.linalg.norm(h @ w) == pytest.approx(max(gains))


# ---------------------------------------------------------------- spectral efficiency

def test_type2_beats_type1_at_feedback_instant():
    rng = np.random.default_rng(2)
    for _ in range(20):
        h = cgauss(rng, 8, 2, 16)
        se = {k: spectral_efficiency(h[None], csi_report(k, h, 10.0, BS, subband_size=4)
                                     .per_frequency(8), 10.0)[0] for k in (TYPE_I, TYPE_II)}
        assert se[TYPE_II] >= se[TYPE_I] - 1e-12


def test_static_channel_gives_constant_se():
    rng = np.random.default_rng(3)
    s = static(cgauss(rng, 1, 1, 2, 16))
    rep = precoder_type2(s.response([0.0], [0.0])[0, 0], 1)
    se = spectral_efficiency(s.response(np.arange(5) * SLOT, [0.0, 1e5]), rep.matrix, 10.0)
    assert np.allclose(se, se[0])


def test_se_vanishes_at_low_snr():
    rng = np.random.default_rng(4)
    h = cgauss(rng, 1, 4, 2, 16)
    w = precoder_type2(h[0], 1).matrix
    assert spectral_efficiency(h, w, -80.0)[0] < 1e-6


def test_aged_throughput_drops_with_speed():
    freqs = np.linspace(-1e6, 1e6, 8)
    prof = TapProfile.exponential(100e-9, 8, 1 / 10e6)
    out = []
    for fd in (0.0, 50.0, 400.0):
        vals = []
        for seed in range(30):
            s = make_tdl(prof, fd, 64, seed, num_rx=2, num_tx=8)
            rep = precoder_type2(s.response([0.0], freqs)[0], 1)
            vals.append(aged_throughput(s, rep, 10.0, 20, freqs, 4).spectral_efficiency)
        out.append(np.mean(vals))
    assert out[0] >= out[1] >= out[2]
    with pytest.raises(ValueError):
        aged_throughput(s, rep, 10.0, 0, freqs)


# ---------------------------------------------------------------- DMRS

def test_dmrs_static_noiseless_is_exact():
    h = np.ones((14, 6, 2), complex)
    assert np.allclose(dmrs_mse(h, (2, 11), math.inf, np.random.default_rng(0)), 0.0)


def test_dmrs_interpolation_averages_noise():
    rng = np.random.default_rng(0)
    h = np.ones((14, 4000, 1), complex)
    mse = dmrs_mse(h, (2, 11), 10.0, rng)
    assert mse[2] == pytest.approx(0.1, rel=0.05)
    # linear interpolation: variance (1 - x)^2 + x^2 of the pilot variance
    x = 4.5 / 9
    assert mse[6] == pytest.approx(0.1 * ((1 - x) ** 2 + x ** 2), rel=0.07)
    assert np.all(mse[3:11] <= mse[2] * 1.05)


def test_dmrs_extra_symbol_helps_at_high_speed():
    prof = TapProfile.exponential(100e-9, 8, 1 / 10e6)
    f = np.linspace(-2e6, 2e6, 24)
    low, high = [], []
    for seed in range(20):
        s = make_tdl(prof, 1620.0, 64, seed, num_rx=2)
        low.append(dmrs_estimate_mse(s, 0.0, (2, 11), math.inf, f).mean())
        high.append(dmrs_estimate_mse(s, 0.0, (2, 7, 11), math.inf, f).mean())
    assert np.mean(high) < np.mean(low)


def test_dmrs_static_throughput_ratio_is_overhead():
    mse = np.zeros(14)
    ratio = dmrs_throughput(mse, (2, 11), 18.0) / dmrs_throughput(mse, (2, 7, 11), 18.0)
    assert ratio == pytest.approx(12 / 11, rel=1e-12)


def test_dmrs_position_errors():
    with pytest.raises(ValueError):
        dmrs_mse(np.ones((14, 2)), (11, 2), 10.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        dmrs_mse(np.ones((14, 2)), (2, 14), 10.0, np.random.default_rng(0))


def test_trs_frequency_offset_recovers_single_doppler():
    nu = 300.0
    s = ChannelSampler(np.array([0.0]), np.array([[nu]]), np.ones((1, 1, 2, 1), complex))
    scn = Scenario(trs=TrsConfig(bandwidth_prbs=24), trs_snr_db=math.inf)
    assert trs_frequency_offset(scn, s, 2 * SLOT, 0) == pytest.approx(nu)
    assert trs_frequency_offset(scn, s, 0.0, 0) == 0.0


# ---------------------------------------------------------------- aggregation

def _drop(speed, index, se_pairs, metrics):
    reals = tuple(RealizationRecord({TYPE_I: a, TYPE_II: b}, {"3 slots": m})
                  for (a, b), m in zip(se_pairs, metrics))
    return DropRecord(speed, index, 0.0, reals)


drop_data = st.lists(st.tuples(st.sampled_from((3.0, 60.0)),
                               st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10), st.floats(0, 1)),
                                        min_size=1, max_size=4)),
                     min_size=1, max_size=12)


@settings(max_examples=100, deadline=None)
@given(drop_data, st.floats(0.05, 0.95))
def test_genie_bounds_switching(data, thr):
    drops = [_drop(v, i, [(a, b) for a, b, _ in r], [m for *_, m in r]) for i, (v, r) in enumerate(data)]
    pol = SwitchingPolicy(Delay.slots(3), thr, 0.0, TYPE_II, TYPE_I)
    res = aggregate(drops, (TYPE_I, TYPE_II), [pol], 10.0, 10.0)
    for v in res.speeds:
        g = res.se(v, GENIE)
        fixed = [res.se(v, TYPE_I), res.se(v, TYPE_II)]
        assert g >= max(fixed) - 1e-9
        assert 0.0 <= res.row(v, "switched-3slot").accuracy <= 1.0
        if all(len(d.realizations) == 1 for d in drops if d.speed_kmh == v):
            # one decision per drop cannot beat picking the best mode per drop; the
            # lower bound needs an informative metric and is checked on simulations
            assert res.se(v, "switched-3slot") <= g + 1e-9


def test_decision_metrics_running_mean():
    d = _drop(3.0, 0, [(1.0, 2.0)] * 3, [0.9, 0.3, 0.6])
    assert decision_metrics(d, "3 slots", "none") == [0.9, 0.3, 0.6]
    assert decision_metrics(d, "3 slots") == pytest.approx([0.9, 0.6, 0.6])
    with pytest.raises(ValueError):
        decision_metrics(d, "3 slots", "median")


def test_running_filter_smooths_decisions():
    # a noisy dip in the second measurement flips only the unfiltered decision
    d = _drop(3.0, 0, [(1.0, 2.0)] * 3, [0.9, 0.55, 0.9])
    pol = SwitchingPolicy(Delay.slots(3), 0.7, 0.0, TYPE_II, TYPE_I)
    run = aggregate([d], (TYPE_I, TYPE_II), [pol], 10.0, 10.0)
    raw = aggregate([d], (TYPE_I, TYPE_II), [pol], 10.0, 10.0, metric_filter="none")
    assert run.se(3.0, "switched-3slot") == pytest.approx(2.0)
    assert raw.se(3.0, "switched-3slot") == pytest.approx(5.0 / 3)


def test_aggregate_is_order_independent():
    drops = [_drop(3.0, i, [(1.0 + i, 2.0)], [0.9]) for i in range(4)]
    a = aggregate(drops, (TYPE_I, TYPE_II), [], 10.0, 10.0)
    b = aggregate(list(reversed(drops)), (TYPE_I, TYPE_II), [], 10.0, 10.0)
    assert a == b
    assert [r.scheme for r in a.rows] == [TYPE_I, TYPE_II, GENIE]


def _small(**kw):
    return Scenario(channel=replace(Scenario().channel, model="TDL", tdl_taps=6, num_rays=16),
                    trs=TrsConfig(bandwidth_prbs=8), speeds=(3.0,), drops=2, seed=1,
                    report=TdcpReportConfig((Delay.slots(1),)),
                    csi=CsiConfig(realizations_per_drop=2, periods_per_realization=1), **kw)


def test_usecase_a_rows_without_policy():
    res = eval_usecase_a(_small())
    assert [r.scheme for r in res.rows] == [TYPE_I, TYPE_II, GENIE]
    assert res.se(3.0, GENIE) >= max(res.se(3.0, TYPE_I), res.se(3.0, TYPE_II))


def test_usecase_a_is_deterministic():
    pol = SwitchingPolicy(Delay.slots(1), 0.5)
    assert eval_usecase_a(_small(), pol) == eval_usecase_a(_small(), pol)


def test_dmrs_labels():
    assert {DMRS_LOW, DMRS_HIGH} == {"DMRS1+1", "DMRS1+2"}
