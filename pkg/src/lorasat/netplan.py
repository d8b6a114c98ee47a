"""Ground-network contact planning: where the satellite is over a rotating
Earth, which stations can see it, and how long captured data waits for the
next downlink opportunity.

The ground track uses the same circular-orbit spherical-Earth model as the
pass geometry, but here Earth rotation matters (the track regresses by
about 24 degrees of longitude per orbit) so it is included.  Visibility is
a plain elevation mask over a spherical Earth.  Latency is defined for a
capture instant t as the wait until the next contact interval starts, zero
while inside a contact; capture instants are taken uniform over the
analysis window.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .orbit import OMEGA_EARTH, R_EARTH, OrbitParams, orbit_rate

VALID_NETWORKS = ("ttn", "tinygs", "satnogs", "custom")
DEFAULT_ELEVATION_MASK_DEG = 10.0
MAX_SCHEDULE_STEP_S = 10.0


def _normalize_lon(lon_deg):
    """Wrap longitudes into (-180, 180]."""
    lon = np.mod(np.asarray(lon_deg, dtype=float), 360.0)
    out = np.where(lon > 180.0, lon - 360.0, lon)
    return out if np.ndim(lon_deg) else float(out)


@dataclass(frozen=True)
class GroundStation:
    station_id: str
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0
    network: str = "custom"

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if self.network not in VALID_NETWORKS:
            raise ValueError(f"network {self.network!r} not one of {VALID_NETWORKS}")
        object.__setattr__(self, "lon_deg", _normalize_lon(self.lon_deg))


@dataclass(frozen=True)
class GroundStationCatalog:
    stations: tuple

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate station ids in catalog")

    def __len__(self):
        return len(self.stations)

    def filter_network(self, network: str) -> "GroundStationCatalog":
        return GroundStationCatalog(
            tuple(s for s in self.stations if s.network == network))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "lat_deg", "lon_deg", "alt_m", "network"])
            for s in self.stations:
                w.writerow([s.station_id, s.lat_deg, s.lon_deg, s.alt_m, s.network])

    @classmethod
    def from_csv(cls, path) -> "GroundStationCatalog":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(
            GroundStation(r["id"], float(r["lat_deg"]), float(r["lon_deg"]),
                          float(r["alt_m"]), r["network"]) for r in rows))


def bundled_catalog(network: str) -> GroundStationCatalog:
    """Synthetic-but-plausible station snapshot shipped with the package.

    Densities reflect the relative sizes of typical community networks
    (ttn > tinygs > satnogs), not any live catalog.
    """
    from importlib import resources
    ref = resources.files("lorasat") / "data" / f"{network}_stations.csv"
    with resources.as_file(ref) as path:
        return GroundStationCatalog.from_csv(path)


def ground_track(orbit: OrbitParams, t, node_lon_deg: float = 0.0):
    """Sub-satellite point (lat_deg, lon_deg) at time(s) t.

    The orbit plane's ascending node crosses the equator at node_lon_deg
    at t = 0; absolute phasing beyond that is arbitrary.
    """
    t = np.asarray(t, dtype=float)
    inc = np.radians(orbit.inclination_deg)
    u = orbit_rate(orbit) * t  # argument of latitude from the ascending node
    lat = np.degrees(np.arcsin(np.clip(np.sin(inc) * np.sin(u), -1.0, 1.0)))
    lon_inertial = np.degrees(np.arctan2(np.cos(inc) * np.sin(u), np.cos(u)))
    lon = _normalize_lon(node_lon_deg + lon_inertial - np.degrees(OMEGA_EARTH * t))
    return lat, lon


def elevation_from_geometry(station: GroundStation, sat_lat_deg, sat_lon_deg,
                            sat_alt_m: float):
    """Elevation (deg) of the satellite above the station's local horizon."""
    lat1 = np.radians(station.lat_deg)
    lat2 = np.radians(np.asarray(sat_lat_deg, dtype=float))
    dlon = np.radians(np.asarray(sat_lon_deg, dtype=float) - station.lon_deg)
    cos_psi = np.clip(np.sin(lat1) * np.sin(lat2)
                      + np.cos(lat1) * np.cos(lat2) * np.cos(dlon), -1.0, 1.0)
    sin_psi = np.sqrt(1.0 - cos_psi**2)
    r_ratio = (R_EARTH + station.alt_m) / (R_EARTH + sat_alt_m)
    elev = np.degrees(np.arctan2(cos_psi - r_ratio, sin_psi))
    return elev if np.ndim(sat_lat_deg) else float(elev)


def visibility(station: GroundStation, sat_position,
               min_elevation_deg: float = DEFAULT_ELEVATION_MASK_DEG):
    """sat_position = (lat_deg, lon_deg, alt_m); true iff above the mask."""
    lat, lon, alt = sat_position
    return elevation_from_geometry(station, lat, lon, alt) >= min_elevation_deg


@dataclass(frozen=True)
class ContactSchedule:
    window_s: float
    contacts: tuple = ()  # (station_id, rise_s, set_s), ordered by rise

    def __post_init__(self):
        contacts = tuple(sorted(self.contacts, key=lambda c: (c[1], c[0])))
        per_station = {}
        for sid, rise, set_ in contacts:
            if not 0.0 <= rise < set_ <= self.window_s:
                raise ValueError(f"contact ({sid}, {rise}, {set_}) outside window")
            if per_station.get(sid, -1.0) > rise:
                raise ValueError(f"overlapping contacts for station {sid}")
            per_station[sid] = set_
        object.__setattr__(self, "contacts", contacts)

    def merged_intervals(self) -> list:
        """Union of all contacts as disjoint (start, end) intervals."""
        out = []
        for _, rise, set_ in self.contacts:
            if out and rise <= out[-1][1]:
                out[-1][1] = max(out[-1][1], set_)
            else:
                out.append([rise, set_])
        return [(a, b) for a, b in out]


def contact_schedule(orbit: OrbitParams, catalog: GroundStationCatalog,
                     window_s: float, step_s: float = MAX_SCHEDULE_STEP_S,
                     min_elevation_deg: float = DEFAULT_ELEVATION_MASK_DEG,
                     node_lon_deg: float = 0.0) -> ContactSchedule:
    """Time-stepped visibility per station, merged into contact intervals.

    A contact spans from the first visible step to one step after the last
    visible step (the satellite is above the mask somewhere inside that
    step).  Steps coarser than 10 s would alias minutes-long passes.
    """
    if step_s <= 0 or step_s > MAX_SCHEDULE_STEP_S:
        raise ValueError(f"step must be in (0, {MAX_SCHEDULE_STEP_S}] s")
    if window_s <= 0:
        raise ValueError("window must be positive")
    t = np.arange(0.0, window_s, step_s)
    lat, lon = ground_track(orbit, t, node_lon_deg)
    contacts = []
    for st in catalog.stations:
        vis = elevation_from_geometry(st, lat, lon, orbit.altitude_m) >= min_elevation_deg
        edges = np.flatnonzero(np.diff(np.concatenate(([0], vis.view(np.int8), [0]))))
        for i0, i1 in edges.reshape(-1, 2):
            contacts.append((st.station_id, float(t[i0]),
                             float(min(t[i1 - 1] + step_s, window_s))))
    return ContactSchedule(window_s, tuple(contacts))


@dataclass(frozen=True)
class LatencyStats:
    coverage_fraction: float
    p50_s: float
    p90_s: float
    max_s: float
    no_contact: bool = False

    def to_json(self) -> str:
        return json.dumps({"coverage_fraction": self.coverage_fraction,
                           "p50_s": self.p50_s, "p90_s": self.p90_s,
                           "max_s": self.max_s, "no_contact": self.no_contact})


def latency_series(schedule: ContactSchedule, sample_period_s: float = 1.0):
    """(t, latency) sampled over the window: wait from a capture at t until
    the next contact interval starts, zero inside a contact."""
    t = np.arange(0.0, schedule.window_s, sample_period_s)
    intervals = schedule.merged_intervals()
    if not intervals:
        return t, schedule.window_s - t
    starts = np.array([a for a, _ in intervals])
    ends = np.array([b for _, b in intervals])
    idx = np.searchsorted(ends, t, side="right")  # first interval ending after t
    lat = np.where(idx < len(starts),
                   np.maximum(starts[np.minimum(idx, len(starts) - 1)] - t, 0.0),
                   schedule.window_s - t)  # no further contact before window end
    return t, lat


def latency_stats(schedule: ContactSchedule,
                  sample_period_s: float = 1.0) -> LatencyStats:
    intervals = schedule.merged_intervals()
    covered = sum(b - a for a, b in intervals)
    coverage = covered / schedule.window_s
    if not intervals:
        w = schedule.window_s
        return LatencyStats(0.0, w, w, w, no_contact=True)
    _, lat = latency_series(schedule, sample_period_s)
    return LatencyStats(float(coverage), float(np.percentile(lat, 50)),
                        float(np.percentile(lat, 90)), float(np.max(lat)))


def write_latency_csv(schedule: ContactSchedule, path,
                      sample_period_s: float = 1.0) -> None:
    t, lat = latency_series(schedule, sample_period_s)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t_s,latency_s\n")
        for ti, li in zip(t, lat):
            fh.write(f"{ti:.1f},{li:.1f}\n")
