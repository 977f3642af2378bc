import math

import pytest

from mdighz import fock, gains, keyrates
from mdighz.params import (ChannelModel, DetectorModel, SystemParams,
                           parse_config)

from conftest import qcc_config

PPS_CONFIG = """
channel.beta = 0.2
detector.eta_d = {eta_d}
detector.p_d = 1e-7
system.e_d = 0.0
system.f = 1.16
source.kind = wcs
source.mu = 0.11
decoy.mu1 = 0.005
phase.K = {k}
sweep.L_min = {l_min}
sweep.L_max = {l_max}
sweep.L_step = {l_step}
"""

HERALDED_CONFIG = """
channel.beta = 0.2
detector.eta_d = {eta_d}
detector.p_d = 1e-7
system.e_d = 0.015
system.f = 1.16
source.kind = heralded
source.mu = 5e-3
decoy.mu1 = 5e-4
sweep.L_min = 0
sweep.L_max = 60
sweep.L_step = 30
"""

QND_CONFIG = """
channel.beta = 0.2
detector.eta_d = {eta_d}
detector.p_d = 1e-7
system.e_d = 0.015
system.f = 1.16
source.kind = wcs_qnd
source.mu = 0.4
decoy.mu1 = 0.005
sweep.L_min = 0
sweep.L_max = 60
sweep.L_step = 30
"""


def pps_config(eta_d=0.40, k=8, l_min=0, l_max=200, l_step=1):
    return parse_config(PPS_CONFIG.format(eta_d=eta_d, k=k, l_min=l_min,
                                          l_max=l_max, l_step=l_step))


class TestRateFormulas:
    def test_unbounded_error_forces_zero(self):
        signal = gains.assemble_gain_set(
            gains.ZGainComponents(1e-6, 1e-9, 1e-9, 1e-9),
            gains.XGainComponents(1e-6, 1e-7), 0.0)
        rate, raw, diags = keyrates.qcc_rate(1.16, signal, signal, 1e-2, 1e-4,
                                             None, 0.4)
        assert rate == 0.0
        assert any("unbounded" in d for d in diags)

    def test_no_signal_x_gain_is_zero_rate(self):
        empty = gains.assemble_gain_set(gains.ZGainComponents(0, 0, 0, 0),
                                        gains.XGainComponents(0, 0), 0.0)
        rate, raw, _ = keyrates.qss_rate(1.16, empty, 0.0, 0.0, 0.0, 0.0, 0.01)
        assert rate == 0.0

    def test_qcc_monotone_in_phase_error_and_pairwise_qber(self):
        z = gains.z_gain_components(0.4, 0.4, 0.4, 0.04, 1e-7)
        x = gains.x_gain_components(0.4, 0.4, 0.4, 0.04, 1e-7)
        signal = gains.assemble_gain_set(z, x, 0.0)
        vac_z = gains.z_gain_components(0.0, 0.4, 0.4, 0.04, 1e-7)
        vac = gains.assemble_gain_set(vac_z, x, 0.0)
        rates = [keyrates.qcc_rate(1.16, signal, vac, 1e-2, 1e-5, e, 0.4)[0]
                 for e in (0.01, 0.05, 0.2, 0.5)]
        assert all(a >= b - 1e-18 for a, b in zip(rates, rates[1:]))

    def test_raw_rate_sign_tracks_clamp(self):
        signal = gains.assemble_gain_set(
            gains.ZGainComponents(1e-9, 1e-7, 1e-7, 1e-7),
            gains.XGainComponents(1e-9, 1e-9), 0.0)
        rate, raw, _ = keyrates.qcc_rate(1.16, signal, signal, 1e-9, 1e-9,
                                         0.25, 0.4)
        assert rate == 0.0 and raw < 0.0


class TestNaiveQssError:
    def test_plateau_at_paper_point(self, paper_system):
        params = paper_system.at_distance(100.0)
        err = keyrates.naive_qss_error(params, 0.11, 0.11, 0.11)
        assert err == pytest.approx(0.375, abs=0.01)

    def test_single_photon_synthetic_residual(self):
        # single-photon-only events classify almost perfectly; residual darks
        stats = fock.exact_single_photon_stats(0.04, 1e-7, 0.0)
        assert stats.e111_bx < 1e-3

    def test_no_signal_marker(self):
        params = SystemParams(ChannelModel(0.2, 10.0), DetectorModel(0.4, 0.0),
                              0.0, 1.16)
        assert keyrates.naive_qss_error(params, 0.0, 0.0, 0.0) is None


class TestSweeps:
    def test_empty_grid(self):
        cfg = qcc_config(l_min=10, l_max=5)
        curve = keyrates.sweep("qcc", cfg)
        assert curve.points == ()
        assert curve.cutoff_km is None

    def test_qcc_point_matches_known_value(self):
        cfg = qcc_config()
        pt = keyrates.rate_point("qcc", cfg, 100.0)
        assert pt.rate == pytest.approx(2.7644911173633087e-10, rel=1e-6)
        assert pt.rate <= pt.rate_infinite

    def test_two_decoy_below_infinite_and_monotone_tail(self):
        cfg = qcc_config()
        distances = [0, 40, 80, 120, 160, 200]
        curve = keyrates.sweep("qcc", cfg, distances)
        for p in curve.points:
            assert p.rate <= p.rate_infinite * (1 + 1e-9) + 1e-300
        rates = [p.rate for p in curve.points]
        peak = rates.index(max(rates))
        assert all(a >= b for a, b in zip(rates[peak:], rates[peak + 1:]))

    def test_better_detector_dominates(self):
        c40, c93 = qcc_config(eta_d=0.40), qcc_config(eta_d=0.93)
        for length in (10.0, 80.0, 150.0):
            r40 = keyrates.rate_point("qcc", c40, length).rate
            r93 = keyrates.rate_point("qcc", c93, length).rate
            assert r93 >= r40

    def test_worker_count_does_not_change_results(self):
        cfg = qcc_config(l_min=0, l_max=40, l_step=20)
        one = keyrates.sweep("qcc", cfg, workers=1)
        four = keyrates.sweep("qcc", cfg, workers=4)
        assert one == four


class TestPps:
    def test_naive_wcs_error_kills_unsliced_rate(self):
        # K = 1 disables slicing; the 37.5% plateau forces zero rate
        cfg = pps_config(k=1)
        for length in (10.0, 60.0, 120.0):
            assert keyrates.rate_point("qss_pps", cfg, length).rate == 0.0

    def test_sliced_rate_positive_at_short_distance(self):
        cfg = pps_config(k=8)
        pt = keyrates.rate_point("qss_pps", cfg, 50.0)
        assert pt.rate > 0.0
        assert pt.rate <= pt.rate_infinite * (1 + 1e-9)

    def test_k_tradeoff_both_computable(self):
        r1 = keyrates.rate_point("qss_pps", pps_config(k=1), 30.0)
        r8 = keyrates.rate_point("qss_pps", pps_config(k=8), 30.0)
        assert r1.columns["E_x_sliced"] > r8.columns["E_x_sliced"]

    def test_requires_phase_plan(self):
        cfg = qcc_config()
        with pytest.raises(ValueError, match="phase"):
            keyrates.rate_point("qss_pps", cfg, 10.0)


class TestHeraldedAndQnd:
    def test_heralded_positive_at_fifty_km(self):
        for eta_d in (0.40, 0.93):
            cfg = parse_config(HERALDED_CONFIG.format(eta_d=eta_d))
            pt = keyrates.rate_point("qss_heralded", cfg, 50.0)
            assert pt.rate > 0.0
            assert pt.rate <= pt.rate_infinite * (1 + 1e-9)

    def test_qnd_positive_at_fifty_km(self):
        for eta_d in (0.40, 0.93):
            cfg = parse_config(QND_CONFIG.format(eta_d=eta_d))
            pt = keyrates.rate_point("qss_qnd", cfg, 50.0)
            assert pt.rate > 0.0
            # the filtered channel makes two-decoy and infinite-decoy coincide
            assert pt.rate == pytest.approx(pt.rate_infinite, rel=1e-6)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError, match="variant"):
            keyrates.rate_point("qss_teleport", qcc_config(), 10.0)


class TestOptimize:
    def test_degenerate_box_returns_point(self):
        cfg = qcc_config()
        mu, rate = keyrates.optimize_intensities("qcc", cfg, 50.0, (0.4, 0.4))
        assert mu == 0.4
        assert rate > 0.0

    def test_search_dominates_fixed_interior_point(self):
        cfg = qcc_config()
        fixed = keyrates.rate_point("qcc", cfg, 100.0).rate
        mu, rate = keyrates.optimize_intensities("qcc", cfg, 100.0, (0.2, 0.8),
                                                 points=7, rounds=2)
        assert rate >= fixed

    def test_hopeless_box_reports_zero(self):
        cfg = qcc_config()
        mu, rate = keyrates.optimize_intensities("qcc", cfg, 249.0,
                                                 (0.001, 0.004), points=3,
                                                 rounds=1)
        assert rate == 0.0
        assert 0.001 <= mu <= 0.004
