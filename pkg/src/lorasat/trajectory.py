"""Pass-parameter estimation from measured Doppler samples.

A pass Doppler curve is fully determined (for a known orbit altitude and
carrier) by the maximum elevation theta_max, the inclination phi, and the
pass start time.  The estimator splines the measured samples onto a 1 s
grid, emulates candidate curves over a (theta_max, phi) grid, and slides
each candidate over the measurement with a normalized zero-mean
cross-correlation; the global argmax gives the parameters and the best lag
gives t_start.  A coarse-to-fine two-level grid keeps the search desk-scale.

Correlation is normalized (zero-mean, unit-energy per aligned segment), so
the score is invariant to positive scaling of the measured samples and lies
in [-1, 1].  Approaching satellites produce positive Doppler by convention,
which is what disambiguates prograde from retrograde geometries with
near-mirror curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import orbit
from .orbit import DopplerCurve, OrbitParams, PassGeometry

RESAMPLE_PERIOD_S = 0.5


@dataclass(frozen=True)
class GridResolution:
    theta_max_deg: float = 0.25
    phi_deg: float = 0.5

    def __post_init__(self):
        if self.theta_max_deg <= 0 or self.phi_deg <= 0:
            raise ValueError("grid resolutions must be positive")


@dataclass(frozen=True)
class TrajectoryEstimate:
    theta_max_deg: float
    phi_deg: float
    t_start_s: float
    correlation_score: float
    grid_theta_deg: float
    grid_phi_deg: float

    def __post_init__(self):
        if not np.isfinite(self.correlation_score):
            raise ValueError("correlation score must be finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "TrajectoryEstimate":
        return cls(**json.loads(text))


def spline_doppler(measured: DopplerCurve) -> CubicSpline:
    """Cubic spline through the measured (t, doppler) samples."""
    if measured.times_s.size < 4:
        raise ValueError("need at least 4 Doppler samples for a cubic spline")
    return CubicSpline(measured.times_s, measured.doppler_hz)


@lru_cache(maxsize=16384)
def _template_cached(theta_max: float, phi: float, altitude_m: float,
                     carrier_hz: float) -> np.ndarray:
    geom = PassGeometry(
        orbit=OrbitParams(altitude_m, phi, carrier_hz),
        max_elevation_deg=theta_max, t_start_s=0.0)
    dur = orbit.pass_duration(geom)
    # include the horizon endpoint (clamped) so a measured window that runs
    # to the end of the pass never pays a spurious one-sample duration cliff
    t = np.minimum(np.arange(0.0, dur + RESAMPLE_PERIOD_S, RESAMPLE_PERIOD_S), dur)
    return orbit.doppler(geom, t)


def _emulated_template(theta_max: float, phi: float, params: OrbitParams) -> np.ndarray:
    return _template_cached(round(float(theta_max), 6), round(float(phi), 6),
                            params.altitude_m, params.carrier_hz)


def _ncc_best(template: np.ndarray, m0: np.ndarray, m_norm: float):
    """Best normalized cross-correlation of zero-mean m0 slid along template.

    The score is normalized by the measurement energy and by the template
    energy outside at most one resample period of slack beyond the trailing
    window edge, so Gamma reaches 1 only when the candidate matches the
    measurement in shape *and* extent: a candidate pass sticking out beyond
    the window (other than the sub-sample trailing truncation the slack
    forgives) pays for the energy in its uncovered tails, and a too-short
    candidate loses the measured samples it cannot cover.  Returns
    (score, lag) with lag the template index aligned to m0[0]; lag may be
    negative.
    """
    e0 = template - np.mean(template)
    nm, ne = len(m0), len(e0)
    e_sq = e0**2
    e_tot = float(np.sum(e_sq))
    if e_tot == 0 or m_norm == 0:
        return -np.inf, 0
    num = np.correlate(e0, m0, mode="full")
    lags = np.arange(len(num)) - (nm - 1)
    lo = np.clip(lags, 0, ne)
    hi = np.clip(lags + nm, 0, ne)
    csum = np.concatenate(([0.0], np.cumsum(e_sq)))
    e_win = csum[hi] - csum[lo]
    slack_hi = np.clip(lags + nm + 1, 0, ne)
    e_slack = csum[slack_hi] - csum[hi]
    e_out = np.maximum(e_tot - e_win - e_slack, 0.0)
    denom = m_norm * np.sqrt(e_win + e_out)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(denom > 0, num / denom, -np.inf)
    k = int(np.argmax(gamma))
    return float(gamma[k]), int(lags[k])


def _search(thetas, phis, m0, m_norm, params):
    """Score every cell of a parameter grid.

    Cells are independent, so the scan may be parallelized freely; the
    caller's reduction sorts with ties broken toward smaller theta_max,
    then smaller phi, keeping the result deterministic.
    """
    out = []
    for theta in thetas:
        for phi in phis:
            score, lag = _ncc_best(_emulated_template(theta, phi, params), m0, m_norm)
            out.append((score, float(theta), float(phi), lag))
    return out


def _best(cells):
    return max(cells, key=lambda c: (c[0], -c[1], -c[2]))


def estimate_trajectory(measured: DopplerCurve, params: OrbitParams,
                        grid: GridResolution = GridResolution()) -> TrajectoryEstimate:
    """Recover (theta_max, phi, t_start) from a measured Doppler curve.

    The inclination of `params` is ignored; altitude and carrier are taken
    as known.  Coarse-to-fine: a 2deg x 3deg sweep locates the basin, then
    the requested resolutions refine around it.
    """
    spline = spline_doppler(measured)
    t0, t1 = float(measured.times_s[0]), float(measured.times_s[-1])
    tm = np.arange(t0, t1 + 1e-9, RESAMPLE_PERIOD_S)
    m = spline(tm)
    if np.max(np.abs(m)) < 1e-9:
        raise ValueError("flat Doppler curve: trajectory is ambiguous")
    m0 = m - np.mean(m)
    m_norm = float(np.linalg.norm(m0))
    if m_norm == 0:
        raise ValueError("flat Doppler curve: trajectory is ambiguous")

    # Several coarse basins can score within noise of each other, so refine
    # around the best dozen coarse cells, not just the single argmax.
    coarse = _search(np.arange(2.0, 90.0 + 1e-9, 2.0),
                     np.arange(0.0, 180.0, 3.0), m0, m_norm, params)
    seeds = sorted(coarse, key=lambda c: (-c[0], c[1], c[2]))[:12]
    medium = []
    for _, th_c, phi_c, _ in seeds:
        medium += _search(
            np.arange(max(grid.theta_max_deg, th_c - 2.0), min(90.0, th_c + 2.0) + 1e-9, 0.5),
            np.arange(max(0.0, phi_c - 3.0), min(180.0 - 1e-9, phi_c + 3.0) + 1e-9, 1.0),
            m0, m_norm, params)
    _, th_m, phi_m, _ = _best(medium)
    score, theta, phi, lag = _best(_search(
        np.arange(max(grid.theta_max_deg, th_m - 1.25), min(90.0, th_m + 1.25) + 1e-9,
                  grid.theta_max_deg),
        np.arange(max(0.0, phi_m - 2.5), min(180.0 - 1e-9, phi_m + 2.5) + 1e-9,
                  grid.phi_deg),
        m0, m_norm, params))
    return TrajectoryEstimate(
        theta_max_deg=float(theta), phi_deg=float(phi),
        t_start_s=float(t0 - lag * RESAMPLE_PERIOD_S),
        correlation_score=score,
        grid_theta_deg=grid.theta_max_deg, grid_phi_deg=grid.phi_deg)


def predict_next_pass_doppler(est: TrajectoryEstimate, params: OrbitParams,
                              horizon_s: float) -> DopplerCurve:
    """Emulate the Doppler of a pass with the estimated geometry.

    The curve starts at the estimated geometry's pass start and covers
    min(horizon, pass duration); it is directly consumable by the
    correlator-selection logic.
    """
    if horizon_s < 0:
        raise ValueError("horizon must be non-negative")
    if horizon_s == 0:
        return DopplerCurve(np.array([]), np.array([]))
    geom = PassGeometry(
        orbit=OrbitParams(params.altitude_m, est.phi_deg, params.carrier_hz),
        max_elevation_deg=est.theta_max_deg, t_start_s=0.0)
    span = min(horizon_s, orbit.pass_duration(geom))
    t = np.arange(0.0, span, RESAMPLE_PERIOD_S)
    return DopplerCurve(t, orbit.doppler(geom, t))
