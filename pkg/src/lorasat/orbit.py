"""Circular-LEO pass geometry: slant range, Doppler and free-space path loss.

The pass model is a circular orbit over a spherical Earth.  A pass is
parameterized by the maximum elevation reached (theta_max) and the orbit
inclination (phi).  The inclination enters through the ground-track rate
seen by the station: the sub-satellite point moves relative to the rotating
Earth at

    w_rel = sqrt(w_orbit^2 + w_earth^2 - 2*w_orbit*w_earth*cos(phi))

so prograde orbits sweep past a station slightly slower than retrograde
ones.  Everything else (Earth rotation during a single pass, J2, drag,
ellipticity) is ignored; passes are symmetric about closest approach.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

MU_EARTH = 3.986004418e14  # m^3/s^2
R_EARTH = 6.371e6  # m, mean spherical Earth
C_LIGHT = 299792458.0  # m/s
OMEGA_EARTH = 7.2921159e-5  # rad/s, sidereal rate


@dataclass(frozen=True)
class OrbitParams:
    altitude_m: float
    inclination_deg: float
    carrier_hz: float

    def __post_init__(self):
        if not 300e3 <= self.altitude_m <= 2000e3:
            raise ValueError(f"altitude {self.altitude_m} m outside LEO range [300, 2000] km")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError(f"inclination {self.inclination_deg} deg outside [0, 180]")
        if self.carrier_hz <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def radius_m(self) -> float:
        return R_EARTH + self.altitude_m


@dataclass(frozen=True)
class PassGeometry:
    orbit: OrbitParams
    max_elevation_deg: float
    t_start_s: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.max_elevation_deg <= 90.0:
            raise ValueError(f"max elevation {self.max_elevation_deg} deg outside (0, 90]")


@dataclass(frozen=True)
class DopplerCurve:
    times_s: np.ndarray
    doppler_hz: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=float)
        f = np.asarray(self.doppler_hz, dtype=float)
        if t.shape != f.shape or t.ndim != 1:
            raise ValueError("times and doppler arrays must be 1-d and of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "doppler_hz", f)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("t_s,doppler_hz\n")
        for t, f in zip(self.times_s, self.doppler_hz):
            buf.write(f"{float(t)!r},{float(f)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "DopplerCurve":
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        return cls(np.asarray(data["t_s"], float), np.asarray(data["doppler_hz"], float))


def orbital_velocity(orbit: OrbitParams) -> float:
    """Circular orbital speed sqrt(mu / (R + h)) in m/s."""
    return float(np.sqrt(MU_EARTH / orbit.radius_m))


def orbital_period(orbit: OrbitParams) -> float:
    return 2.0 * np.pi * orbit.radius_m / orbital_velocity(orbit)


def orbit_rate(orbit: OrbitParams) -> float:
    """Inertial orbital angular rate in rad/s."""
    return orbital_velocity(orbit) / orbit.radius_m


def relative_track_rate(orbit: OrbitParams) -> float:
    """Angular rate of the sub-satellite point relative to a ground station.

    Vector difference of the orbital rate and Earth's rotation, projected by
    the inclination.  This is where phi shapes a pass' Doppler curve.
    """
    ws = orbit_rate(orbit)
    we = OMEGA_EARTH
    phi = np.radians(orbit.inclination_deg)
    return float(np.sqrt(ws * ws + we * we - 2.0 * ws * we * np.cos(phi)))


def _min_central_angle(pass_: PassGeometry) -> float:
    """Central angle between station and ground track at closest approach."""
    theta = np.radians(pass_.max_elevation_deg)
    return float(np.arccos(R_EARTH / pass_.orbit.radius_m * np.cos(theta)) - theta)


def _horizon_central_angle(orbit: OrbitParams) -> float:
    return float(np.arccos(R_EARTH / orbit.radius_m))


def pass_duration(pass_: PassGeometry) -> float:
    """Horizon-to-horizon pass duration in seconds."""
    g0 = _min_central_angle(pass_)
    gh = _horizon_central_angle(pass_.orbit)
    half_span = np.arccos(np.cos(gh) / np.cos(g0))
    return float(2.0 * half_span / relative_track_rate(pass_.orbit))


def closest_approach_time(pass_: PassGeometry) -> float:
    return pass_.t_start_s + 0.5 * pass_duration(pass_)


def _check_in_pass(pass_: PassGeometry, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    t0 = pass_.t_start_s
    t1 = t0 + pass_duration(pass_)
    # small slack so the horizon endpoints themselves are valid
    eps = 1e-9 * max(1.0, abs(t1))
    if np.any(t < t0 - eps) or np.any(t > t1 + eps):
        raise ValueError(f"time outside pass window [{t0}, {t1}]")
    return t


def _central_angle(pass_: PassGeometry, t: np.ndarray) -> np.ndarray:
    g0 = _min_central_angle(pass_)
    w = relative_track_rate(pass_.orbit)
    dt = t - closest_approach_time(pass_)
    return np.arccos(np.clip(np.cos(g0) * np.cos(w * dt), -1.0, 1.0))


def slant_range(pass_: PassGeometry, t):
    """Station-to-satellite distance in meters at time(s) t."""
    t = _check_in_pass(pass_, t)
    r = pass_.orbit.radius_m
    gamma = _central_angle(pass_, t)
    d = np.sqrt(R_EARTH**2 + r**2 - 2.0 * R_EARTH * r * np.cos(gamma))
    return float(d) if np.isscalar(t) or d.ndim == 0 else d


def elevation_deg(pass_: PassGeometry, t):
    t = _check_in_pass(pass_, t)
    r = pass_.orbit.radius_m
    gamma = _central_angle(pass_, t)
    d = np.sqrt(R_EARTH**2 + r**2 - 2.0 * R_EARTH * r * np.cos(gamma))
    el = np.degrees(np.arcsin(np.clip((r * np.cos(gamma) - R_EARTH) / d, -1.0, 1.0)))
    return float(el) if el.ndim == 0 else el


def doppler(pass_: PassGeometry, t):
    """Doppler shift f_d = -(f_c/c) * d(slant_range)/dt in Hz.

    Positive while the satellite approaches, zero at closest approach.
    Closed form from the spherical pass geometry; the finite-difference of
    slant_range is kept as the test oracle.
    """
    t = _check_in_pass(pass_, t)
    r = pass_.orbit.radius_m
    g0 = _min_central_angle(pass_)
    w = relative_track_rate(pass_.orbit)
    dt = t - closest_approach_time(pass_)
    cosg = np.clip(np.cos(g0) * np.cos(w * dt), -1.0, 1.0)
    d = np.sqrt(R_EARTH**2 + r**2 - 2.0 * R_EARTH * r * cosg)
    ddot = R_EARTH * r * w * np.cos(g0) * np.sin(w * dt) / d
    fd = -pass_.orbit.carrier_hz / C_LIGHT * ddot
    return float(fd) if fd.ndim == 0 else fd


def emulate_doppler_curve(pass_: PassGeometry, sample_period_s: float) -> DopplerCurve:
    """Sample the pass Doppler at t_start, t_start + t_p, ... across the pass."""
    if sample_period_s <= 0:
        raise ValueError("sample period must be positive")
    dur = pass_duration(pass_)
    n = int(np.floor(dur / sample_period_s)) + 1
    times = pass_.t_start_s + sample_period_s * np.arange(n)
    return DopplerCurve(times, doppler(pass_, times))


def path_loss_db(range_m, f_c: float):
    """Free-space path loss 20*log10(4*pi*d*f/c) in dB."""
    range_m = np.asarray(range_m, dtype=float)
    if np.any(range_m <= 0):
        raise ValueError("range must be positive")
    loss = 20.0 * np.log10(4.0 * np.pi * range_m * f_c / C_LIGHT)
    return float(loss) if loss.ndim == 0 else loss


def mean_pass_loss_db(pass_: PassGeometry, n_samples: int = 2001) -> float:
    """Pass-average path loss, averaged over linear received power."""
    t = np.linspace(pass_.t_start_s, pass_.t_start_s + pass_duration(pass_), n_samples)
    loss = path_loss_db(slant_range(pass_, t), pass_.orbit.carrier_hz)
    return float(-10.0 * np.log10(np.mean(10.0 ** (-loss / 10.0))))
