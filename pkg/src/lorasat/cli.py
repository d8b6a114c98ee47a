"""Command-line front end tying the simulator together.

Subcommands:
  simulate-pass        IQ capture + symbol-error trace per 30 s packet slot
  detect-sweep         detection rate / SNR vs Doppler offset, CSV out
  estimate-trajectory  orbit geometry from a measured Doppler-curve CSV
  latency              ground-network coverage and latency percentiles
  export-masks         bit-flip mask files sampled from error traces

Every run is deterministic given its flags, stochastic subcommands require
--seed.  Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import netplan
from .channel import ChannelConfig, apply_awgn, apply_doppler_track
from .detect import (CorrelatorConfig, detect_narrowband, detect_wideband,
                     narrowband_threshold, wideband_threshold)
from .errmodel import ErrorTrace, sample_bit_masks, simulate_packet_errors
from .orbit import (DopplerCurve, OrbitParams, PassGeometry,
                    emulate_doppler_curve, pass_duration)
from .phy import IqBuffer, LoRaParams, PacketFrame, modulate_packet, packet_airtime_s
from .trajectory import GridResolution, estimate_trajectory

PACKET_PERIOD_S = 30.0
SWEEP_FS_HZ = 500_000.0


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        raise _ConfigError(message)


def _add_orbit_flags(p):
    p.add_argument("--altitude-m", type=float, default=525e3)
    p.add_argument("--inclination-deg", type=float, default=97.52)
    p.add_argument("--carrier-hz", type=float, default=915.6e6)


def _add_phy_flags(p):
    p.add_argument("--sf", type=int, default=8)
    p.add_argument("--bw-hz", type=float, default=62500.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="lorasat", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-pass",
                       help="write IQ + error-trace files for each packet slot")
    _add_orbit_flags(p)
    _add_phy_flags(p)
    p.add_argument("--max-elevation-deg", type=float, default=90.0)
    p.add_argument("--snr-db", type=float, required=True,
                   help="'inf' disables noise")
    p.add_argument("--doppler", choices=("on", "off"), default="on")
    p.add_argument("--payload-bytes", type=int, default=255)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("detect-sweep",
                       help="detection rate and SNR vs Doppler offset")
    _add_phy_flags(p)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--doppler-min-hz", type=float, default=0.0)
    p.add_argument("--doppler-max-hz", type=float, required=True)
    p.add_argument("--doppler-step-hz", type=float, required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("estimate-trajectory",
                       help="fit pass geometry to a Doppler-curve CSV")
    _add_orbit_flags(p)
    p.add_argument("--curve", type=Path, required=True)
    p.add_argument("--theta-res-deg", type=float, default=0.25)
    p.add_argument("--phi-res-deg", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("latency", help="coverage and latency percentiles")
    _add_orbit_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--catalog", type=Path)
    group.add_argument("--network", choices=("ttn", "tinygs", "satnogs"))
    p.add_argument("--window-s", type=float, default=86400.0)
    p.add_argument("--step-s", type=float, default=10.0)
    p.add_argument("--mask-deg", type=float, default=10.0)
    p.add_argument("--node-lon-deg", type=float, default=0.0)
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("export-masks",
                       help="sample bit-flip masks from error-trace CSVs")
    p.add_argument("--trace-csv", type=Path, nargs="+", required=True)
    p.add_argument("--payload-bytes", type=int, default=256)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--json", action="store_true")

    return parser


def _cfg(ctor, *a, **kw):
    """Construct a config object, mapping validation failures to exit 1."""
    try:
        return ctor(*a, **kw)
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc


def _emit(args, summary: dict) -> None:
    if args.json:
        print(json.dumps(summary))


def cmd_simulate_pass(args) -> dict:
    if args.payload_bytes < 1 or args.payload_bytes > 256:
        raise _ConfigError("payload must be 1..256 bytes")
    params = _cfg(LoRaParams, sf=args.sf, bw_hz=args.bw_hz, carrier_hz=args.carrier_hz)
    orbit = _cfg(OrbitParams, args.altitude_m, args.inclination_deg, args.carrier_hz)
    pass_ = _cfg(PassGeometry, orbit, args.max_elevation_deg)
    dur = pass_duration(pass_)
    airtime = packet_airtime_s(params, args.payload_bytes)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    emulate_doppler_curve(pass_, 0.5).to_csv(args.out_dir / "doppler_curve.csv")
    rng = np.random.default_rng(args.seed)
    slots = []
    t = 0.0
    while t + airtime <= dur:
        slots.append(t)
        t += PACKET_PERIOD_S
    records = []
    for i, t0 in enumerate(slots):
        payload = bytes(rng.integers(0, 256, args.payload_bytes).tolist())
        seed = args.seed + 1000 * (i + 1)
        iq = modulate_packet(PacketFrame(payload, params))
        if args.doppler == "on":
            iq = apply_doppler_track(iq, pass_, t0)
            cfg = ChannelConfig(args.snr_db, pass_, t0)
        else:
            cfg = ChannelConfig(args.snr_db)
        iq = apply_awgn(iq, args.snr_db, seed=seed, signal_bw_hz=params.bw_hz)
        iq.to_file(args.out_dir / f"slot{i:03d}.iq")
        trace = simulate_packet_errors(cfg, params, payload, seed=seed)
        trace.to_csv(args.out_dir / f"slot{i:03d}_trace.csv")
        records.append({"slot": i, "t_start_s": t0, "detected": trace.detected,
                        "symbol_errors": int(np.count_nonzero(trace.offset))})
    summary = {"pass_duration_s": dur, "n_slots": len(slots),
               "out_dir": str(args.out_dir), "slots": records}
    (args.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def cmd_detect_sweep(args) -> dict:
    if args.doppler_step_hz <= 0:
        raise _ConfigError("doppler step must be positive")
    params = _cfg(LoRaParams, sf=args.sf, bw_hz=args.bw_hz,
                  sample_rate_hz=SWEEP_FS_HZ)
    cfg = _cfg(CorrelatorConfig, narrow=LoRaParams(sf=args.sf, bw_hz=args.bw_hz))
    thr_n = narrowband_threshold(params)
    thr_w = wideband_threshold(cfg, SWEEP_FS_HZ)
    offsets = np.arange(args.doppler_min_hz,
                        args.doppler_max_hz + args.doppler_step_hz / 2,
                        args.doppler_step_hz)
    iq0 = modulate_packet(PacketFrame(b"\x00", params))
    rows = []
    for off in offsets:
        shift = np.exp(2j * np.pi * off * np.arange(len(iq0)) / SWEEP_FS_HZ)
        clean = IqBuffer(iq0.samples * shift, SWEEP_FS_HZ)
        n_hit = w_hit = 0
        n_snr, w_snr = [], []
        for k in range(args.trials):
            noisy = apply_awgn(clean, args.snr_db, seed=args.seed + k,
                               signal_bw_hz=params.bw_hz)
            rn = detect_narrowband(noisy, params, threshold=thr_n)
            rw = detect_wideband(noisy, cfg, threshold=thr_w)
            n_hit += rn.detected
            w_hit += rw.detected
            n_snr.append(rn.detection_snr_db)
            w_snr.append(rw.detection_snr_db)
        rows.append((float(off), n_hit / args.trials, w_hit / args.trials,
                     float(np.mean(n_snr)), float(np.mean(w_snr))))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("doppler_hz,narrow_rate,wide_rate,narrow_snr_db,wide_snr_db\n")
        for r in rows:
            fh.write(",".join(f"{v:.6g}" for v in r) + "\n")
    return {"n_points": len(rows), "out": str(args.out)}


def cmd_estimate_trajectory(args) -> dict:
    orbit = _cfg(OrbitParams, args.altitude_m, args.inclination_deg, args.carrier_hz)
    if not args.curve.exists():
        raise _ConfigError(f"curve not found: {args.curve}")
    curve = DopplerCurve.from_csv(args.curve)
    grid = _cfg(GridResolution, args.theta_res_deg, args.phi_res_deg)
    est = estimate_trajectory(curve, orbit, grid)
    if args.out is not None:
        args.out.write_text(est.to_json())
    return json.loads(est.to_json())


def cmd_latency(args) -> dict:
    orbit = _cfg(OrbitParams, args.altitude_m, args.inclination_deg, args.carrier_hz)
    if args.catalog is not None:
        if not args.catalog.exists():
            raise _ConfigError(f"catalog not found: {args.catalog}")
        catalog = netplan.GroundStationCatalog.from_csv(args.catalog)
    else:
        catalog = netplan.bundled_catalog(args.network)
    schedule = netplan.contact_schedule(orbit, catalog, args.window_s,
                                        args.step_s, args.mask_deg,
                                        args.node_lon_deg)
    stats = netplan.latency_stats(schedule)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        netplan.write_latency_csv(schedule, args.out_dir / "latency.csv")
        (args.out_dir / "latency_summary.json").write_text(stats.to_json())
    return json.loads(stats.to_json())


def cmd_export_masks(args) -> dict:
    if args.count < 0:
        raise _ConfigError("count must be non-negative")
    if args.payload_bytes < 1:
        raise _ConfigError("payload must be at least one byte")
    traces = [ErrorTrace.from_csv(p) for p in args.trace_csv]
    masks = sample_bit_masks(traces, 8 * args.payload_bytes, args.count,
                             seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(masks):
        m.to_file(args.out_dir / f"mask{i:05d}.bin")
    return {"n_masks": len(masks), "bits_per_mask": 8 * args.payload_bytes,
            "out_dir": str(args.out_dir)}


_COMMANDS = {
    "simulate-pass": cmd_simulate_pass,
    "detect-sweep": cmd_detect_sweep,
    "estimate-trajectory": cmd_estimate_trajectory,
    "latency": cmd_latency,
    "export-masks": cmd_export_masks,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        summary = _COMMANDS[args.command](args)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    _emit(args, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
