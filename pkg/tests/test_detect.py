"""Tests for packet detection and Doppler estimation."""

import json

import numpy as np
import pytest

from lorasat import detect
from lorasat.channel import apply_awgn, apply_frequency_track
from lorasat.detect import (CorrelatorConfig, DetectionResult, detect_narrowband,
                            detect_wideband, estimate_doppler_fine,
                            narrowband_threshold, select_correlator,
                            wideband_threshold)
from lorasat.phy import IqBuffer, LoRaParams, PacketFrame, modulate_packet

FS = 500000.0  # leaves headroom for the 250 kHz correlator and large offsets
PARAMS = LoRaParams(sample_rate_hz=FS)
CFG = CorrelatorConfig(narrow=PARAMS, wide_bw_hz=250000.0)


def packet_iq(doppler_hz=0.0, snr_db=np.inf, seed=0, payload=bytes(range(32))):
    iq = modulate_packet(PacketFrame(payload, PARAMS))
    if doppler_hz:
        iq = apply_frequency_track(iq, np.full(len(iq), float(doppler_hz)))
    if np.isfinite(snr_db):
        iq = apply_awgn(iq, snr_db, seed=seed, signal_bw_hz=PARAMS.bw_hz)
    return iq


def noise_iq(n, seed):
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return IqBuffer(z, FS)


class TestDetectionResult:
    def test_json_round_trip(self):
        r = DetectionResult(True, 12345.6, 12340.2, 18.7, 0)
        r2 = DetectionResult.from_json(r.to_json())
        assert r2 == r

    def test_json_none_fine(self):
        r = DetectionResult(False, 0.0, None, 3.2, 0)
        body = json.loads(r.to_json())
        assert body["fine_doppler_hz"] is None
        assert DetectionResult.from_json(r.to_json()) == r


class TestCorrelatorConfig:
    def test_ratio_and_wide_sf(self):
        assert CFG.ratio == 4
        assert CFG.wide_sf == PARAMS.sf + 4

    def test_equal_slope(self):
        wide_slope = CFG.wide_bw_hz**2 / 2**CFG.wide_sf
        assert wide_slope == pytest.approx(PARAMS.chirp_slope)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            CorrelatorConfig(narrow=PARAMS, wide_bw_hz=187500.0)

    def test_sub_unity_ratio_rejected(self):
        with pytest.raises(ValueError):
            CorrelatorConfig(narrow=PARAMS, wide_bw_hz=31250.0)


class TestSelectCorrelator:
    def test_zero_offset_keeps_narrow(self):
        assert select_correlator(0.0, PARAMS).wide_bw_hz == 62500.0

    def test_20khz_offset(self):
        assert select_correlator(20000.0, PARAMS).wide_bw_hz == 125000.0

    def test_50khz_offset(self):
        assert select_correlator(50000.0, PARAMS).wide_bw_hz == 250000.0

    def test_cap(self):
        assert select_correlator(400000.0, PARAMS).wide_bw_hz == 250000.0

    def test_sign_independent(self):
        assert (select_correlator(-20000.0, PARAMS).wide_bw_hz
                == select_correlator(20000.0, PARAMS).wide_bw_hz)


class TestNoiselessAccuracy:
    def test_wide_coarse_within_one_bin(self):
        n_sub = int(round(PARAMS.symbol_period_s * FS))
        bin_w = FS / n_sub
        for dopp in (-120000.0, -60000.0, -20000.0, 0.0, 20000.0, 60000.0, 120000.0):
            r = detect_wideband(packet_iq(doppler_hz=dopp), CFG)
            assert r.detected
            assert abs(r.coarse_doppler_hz - dopp) <= bin_w

    def test_narrow_coarse_within_one_bin_in_band(self):
        for dopp in (-20000.0, -10000.0, 0.0, 10000.0, 20000.0):
            r = detect_narrowband(packet_iq(doppler_hz=dopp), PARAMS)
            assert r.detected
            assert abs(r.coarse_doppler_hz - dopp) <= PARAMS.bin_hz

    def test_sign_symmetry(self):
        plus = detect_wideband(packet_iq(doppler_hz=40000.0), CFG)
        minus = detect_wideband(packet_iq(doppler_hz=-40000.0), CFG)
        assert plus.coarse_doppler_hz == pytest.approx(-minus.coarse_doppler_hz, abs=50.0)


class TestDetectionPenalty:
    def test_zero_offset_penalty_about_3db(self):
        diffs = []
        for seed in range(30):
            iq = packet_iq(snr_db=-7.5, seed=seed)
            dn = detect_narrowband(iq, PARAMS).detection_snr_db
            dw = detect_wideband(iq, CFG).detection_snr_db
            diffs.append(dn - dw)
        assert 2.0 <= np.mean(diffs) <= 4.0


class TestDopplerResilience:
    def test_narrow_detects_small_offsets(self):
        for dopp in (0.0, 10000.0):
            r = detect_narrowband(packet_iq(doppler_hz=dopp, snr_db=-12.0, seed=3), PARAMS)
            assert r.detected
            assert abs(r.coarse_doppler_hz - dopp) <= 2 * PARAMS.bin_hz

    def test_narrow_fails_at_full_bandwidth_offset(self):
        for seed in range(5):
            r = detect_narrowband(
                packet_iq(doppler_hz=PARAMS.bw_hz, snr_db=-12.0, seed=seed), PARAMS)
            assert not r.detected

    def test_wide_tracks_through_two_bandwidths(self):
        n_sub = int(round(PARAMS.symbol_period_s * FS))
        bin_w = FS / n_sub
        for dopp in (0.0, 31250.0, 62500.0, 125000.0):
            r = detect_wideband(packet_iq(doppler_hz=dopp, snr_db=-12.0, seed=3), CFG)
            assert r.detected
            assert abs(r.coarse_doppler_hz - dopp) <= 2 * bin_w

    def test_wide_advantage_at_bandwidth_offset(self):
        gains = []
        for seed in range(5):
            iq = packet_iq(doppler_hz=PARAMS.bw_hz, snr_db=-12.0, seed=seed)
            gains.append(detect_wideband(iq, CFG).detection_snr_db
                         - detect_narrowband(iq, PARAMS).detection_snr_db)
        assert np.mean(gains) >= 10.0

    def test_quadruple_tolerance(self):
        n_sub = int(round(PARAMS.symbol_period_s * FS))
        bin_w = FS / n_sub

        def max_tracked(detector, tol):
            best = 0.0
            for dopp in np.arange(0.0, 125001.0, 6250.0):
                r = detector(packet_iq(doppler_hz=dopp, snr_db=-12.0, seed=3))
                if r.detected and abs(r.coarse_doppler_hz - dopp) <= tol:
                    best = dopp
                else:
                    break
            return best

        narrow_max = max_tracked(lambda iq: detect_narrowband(iq, PARAMS), 2 * PARAMS.bin_hz)
        wide_max = max_tracked(lambda iq: detect_wideband(iq, CFG), 2 * bin_w)
        assert wide_max >= 4 * narrow_max
        assert wide_max >= 125000.0


class TestFalseAlarms:
    def test_narrow_false_alarm_rate(self):
        n = PARAMS.preamble_len * PARAMS.n_bins
        hits = sum(detect_narrowband(noise_iq(n * 8, 10_000 + i), PARAMS).detected
                   for i in range(200))
        assert hits / 200 <= 0.04

    def test_wide_false_alarm_rate(self):
        n_sub = int(round(PARAMS.symbol_period_s * FS))
        n = (PARAMS.preamble_len // 2) * n_sub
        hits = sum(detect_wideband(noise_iq(n, 20_000 + i), CFG).detected
                   for i in range(200))
        assert hits / 200 <= 0.04

    def test_thresholds_cached(self):
        assert narrowband_threshold(PARAMS) == narrowband_threshold(PARAMS)
        assert wideband_threshold(CFG, FS) == wideband_threshold(CFG, FS)


class TestFineDoppler:
    def test_accuracy_at_5khz(self):
        true = 5000.0
        clean = packet_iq(doppler_hz=true)
        errs = [estimate_doppler_fine(apply_awgn(clean, 0.0, seed=s,
                                                 signal_bw_hz=PARAMS.bw_hz), CFG) - true
                for s in range(50)]
        assert np.max(np.abs(errs)) <= PARAMS.bin_hz / 8

    def test_preamble_improves_on_sync_only(self):
        true = 5000.0
        clean = packet_iq(doppler_hz=true)
        full, sync_only = [], []
        for s in range(100):
            iq = apply_awgn(clean, 0.0, seed=s, signal_bw_hz=PARAMS.bw_hz)
            full.append(estimate_doppler_fine(iq, CFG) - true)
            sync_only.append(estimate_doppler_fine(iq, CFG, use_preamble=False) - true)
        assert np.std(sync_only) / np.std(full) >= 4.0

    def test_requires_detection(self):
        n_sub = int(round(PARAMS.symbol_period_s * FS))
        n = (PARAMS.preamble_len + PARAMS.sync_len) * n_sub
        with pytest.raises(ValueError):
            estimate_doppler_fine(noise_iq(n, 99), CFG)

    def test_explicit_coarse_skips_detection(self):
        iq = packet_iq(doppler_hz=5000.0)
        est = estimate_doppler_fine(iq, CFG, coarse_doppler_hz=5000.0)
        assert est == pytest.approx(5000.0, abs=1.0)


class TestInputValidation:
    def test_short_buffer_narrow(self):
        with pytest.raises(ValueError):
            detect_narrowband(noise_iq(100, 1), PARAMS)

    def test_short_buffer_wide(self):
        with pytest.raises(ValueError):
            detect_wideband(noise_iq(100, 1), CFG)

    def test_sample_rate_below_wide_bw(self):
        p = LoRaParams(sample_rate_hz=125000.0)
        iq = modulate_packet(PacketFrame(b"\x00" * 8, p))
        with pytest.raises(ValueError):
            detect_wideband(iq, CorrelatorConfig(narrow=p, wide_bw_hz=250000.0))
