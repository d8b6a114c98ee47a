"""Tests for Doppler-curve trajectory estimation."""

import numpy as np
import pytest

from lorasat import orbit, trajectory
from lorasat.orbit import DopplerCurve, OrbitParams, PassGeometry
from lorasat.trajectory import (GridResolution, TrajectoryEstimate,
                                estimate_trajectory, predict_next_pass_doppler,
                                spline_doppler)

PARAMS = OrbitParams(525e3, 97.52, 915.6e6)
FINE_BIN_HZ = 62500.0 / 256 / 8  # fine Doppler estimator resolution


def synth_pass(theta_max, phi, t_start=0.0, period_s=0.5):
    geom = PassGeometry(orbit=OrbitParams(525e3, phi, 915.6e6),
                        max_elevation_deg=theta_max, t_start_s=t_start)
    return orbit.emulate_doppler_curve(geom, period_s)


class TestSpline:
    def test_exact_at_knots(self):
        curve = synth_pass(60.0, 97.52, period_s=30.0)
        s = spline_doppler(curve)
        assert np.allclose(s(curve.times_s), curve.doppler_hz, atol=1e-9)

    def test_reproduces_line(self):
        t = np.arange(6.0)
        curve = DopplerCurve(t, 3.0 * t - 2.0)
        s = spline_doppler(curve)
        tq = np.linspace(0.0, 5.0, 101)
        assert np.allclose(s(tq), 3.0 * tq - 2.0, atol=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            spline_doppler(DopplerCurve(np.arange(3.0), np.ones(3)))

    def test_zenith_pass_30s_sampling(self):
        geom = PassGeometry(orbit=PARAMS, max_elevation_deg=90.0)
        curve = orbit.emulate_doppler_curve(geom, 30.0)
        s = spline_doppler(curve)
        dense_t = np.linspace(curve.times_s[0], curve.times_s[-1], 4001)
        dense = orbit.doppler(geom, dense_t)
        peak = np.max(np.abs(dense))
        assert np.max(np.abs(s(dense_t) - dense)) < 0.05 * peak


class TestEstimateTrajectory:
    def test_noise_free_zenith(self):
        # theta_max near 90 is the flattest part of the parameter space, so
        # the recovered maximum elevation is only good to ~2 grid cells there
        curve = synth_pass(90.0, 97.52)
        est = estimate_trajectory(curve, PARAMS)
        assert abs(est.theta_max_deg - 90.0) <= 0.5
        assert abs(est.phi_deg - 97.52) <= 0.5
        assert abs(est.t_start_s) <= 0.5
        assert est.correlation_score >= 0.999

    def test_noise_free_on_grid_exact(self):
        curve = synth_pass(55.0, 97.5, t_start=120.0)
        est = estimate_trajectory(curve, PARAMS)
        assert est.theta_max_deg == pytest.approx(55.0, abs=0.25)
        assert est.phi_deg == pytest.approx(97.5, abs=0.5)
        assert est.t_start_s == pytest.approx(120.0, abs=0.5)
        assert est.correlation_score >= 0.999

    def test_shift_equivariance(self):
        base = synth_pass(55.0, 97.5, t_start=120.0)
        shifted = DopplerCurve(base.times_s + 60.0, base.doppler_hz)
        e0 = estimate_trajectory(base, PARAMS)
        e1 = estimate_trajectory(shifted, PARAMS)
        assert e1.theta_max_deg == e0.theta_max_deg
        assert e1.phi_deg == e0.phi_deg
        assert e1.t_start_s == pytest.approx(e0.t_start_s + 60.0, abs=1e-6)

    def test_scale_invariance(self):
        base = synth_pass(55.0, 97.5, t_start=120.0)
        scaled = DopplerCurve(base.times_s, base.doppler_hz * 2.5)
        e0 = estimate_trajectory(base, PARAMS)
        e1 = estimate_trajectory(scaled, PARAMS)
        assert (e1.theta_max_deg, e1.phi_deg, e1.t_start_s) == \
            (e0.theta_max_deg, e0.phi_deg, e0.t_start_s)

    def test_flat_curve_ambiguous(self):
        with pytest.raises(ValueError):
            estimate_trajectory(DopplerCurve(np.arange(400.0), np.zeros(400)), PARAMS)

    def test_refinement_monotone(self):
        curve = synth_pass(55.3, 97.52)
        coarse = estimate_trajectory(curve, PARAMS, GridResolution(1.0, 2.0))
        fine = estimate_trajectory(curve, PARAMS)
        err = lambda e: abs(e.theta_max_deg - 55.3) + abs(e.phi_deg - 97.52)
        assert err(fine) <= err(coarse) + 1e-9

    def test_noisy_recovery(self):
        rng = np.random.default_rng(7)
        for _ in range(3):
            th = rng.uniform(25, 75)
            ph = rng.uniform(50, 130)
            ts = rng.uniform(0, 300)
            curve = synth_pass(th, ph, t_start=ts)
            noisy = DopplerCurve(curve.times_s,
                                 curve.doppler_hz
                                 + rng.normal(0.0, FINE_BIN_HZ, curve.times_s.size))
            est = estimate_trajectory(noisy, PARAMS)
            assert abs(est.theta_max_deg - th) <= 0.5
            assert abs(est.phi_deg - ph) <= 1.2
            assert abs(est.t_start_s - ts) <= 1.0


class TestTrajectoryEstimate:
    def test_json_round_trip(self):
        est = TrajectoryEstimate(55.0, 97.5, 120.0, 0.9995, 0.25, 0.5)
        assert TrajectoryEstimate.from_json(est.to_json()) == est

    def test_score_must_be_finite(self):
        with pytest.raises(ValueError):
            TrajectoryEstimate(55.0, 97.5, 0.0, np.nan, 0.25, 0.5)

    def test_grid_resolution_validation(self):
        with pytest.raises(ValueError):
            GridResolution(0.0, 0.5)


class TestPredictNextPass:
    EXACT = TrajectoryEstimate(55.0, 97.5, 0.0, 1.0, 0.25, 0.5)

    def test_zero_horizon_empty(self):
        pred = predict_next_pass_doppler(self.EXACT, PARAMS, 0.0)
        assert pred.times_s.size == 0

    def test_negative_horizon_rejected(self):
        with pytest.raises(ValueError):
            predict_next_pass_doppler(self.EXACT, PARAMS, -1.0)

    def test_exact_estimate_matches_truth(self):
        pred = predict_next_pass_doppler(self.EXACT, PARAMS, 1e4)
        geom = PassGeometry(orbit=OrbitParams(525e3, 97.5, 915.6e6),
                            max_elevation_deg=55.0, t_start_s=0.0)
        truth = orbit.doppler(geom, pred.times_s)
        assert np.max(np.abs(pred.doppler_hz - truth)) <= FINE_BIN_HZ

    def test_degraded_estimate_bounded_error(self):
        degraded = TrajectoryEstimate(55.0, 98.0, 0.0, 1.0, 0.25, 0.5)
        pred = predict_next_pass_doppler(degraded, PARAMS, 600.0)
        geom = PassGeometry(orbit=OrbitParams(525e3, 97.5, 915.6e6),
                            max_elevation_deg=55.0, t_start_s=0.0)
        truth = orbit.doppler(geom, pred.times_s)
        err = np.max(np.abs(pred.doppler_hz - truth))
        assert FINE_BIN_HZ < err < 200.0

    def test_horizon_truncates(self):
        pred = predict_next_pass_doppler(self.EXACT, PARAMS, 100.0)
        assert pred.times_s[-1] < 100.0
        assert pred.times_s.size == 200
