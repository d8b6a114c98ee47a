"""Symbol- and bit-level error characterization of the satellite downlink.

Two error mechanisms dominate and behave very differently:

* receiver noise decodes to a uniformly random wrong bin, so every payload
  bit flips with probability ~SER/2 regardless of its position;
* intra-packet Doppler drift (the preamble correction removes the offset
  at the packet start, but the shift keeps accumulating over the ~1 s
  airtime) pushes late symbols a small number of bins off, so the
  magnitude distribution has an exponential-looking tail and, with plain
  binary symbol-to-bit mapping, low-order bits flip far more often than
  high-order ones.

Traces record per-symbol outcomes and can be condensed into bit-flip
masks -- the file contract a channel-aware image codec trains against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channel import ChannelConfig, apply_awgn, apply_doppler_track
from .detect import CorrelatorConfig, estimate_doppler_fine
from .phy import (IqBuffer, LoRaParams, PacketFrame, bin_to_bits,
                  demodulate_symbol, modulate_packet, payload_to_symbols)

MIN_FIT_SYMBOLS = 10_000


def _signed_offset(decoded, true, n_bins: int):
    """(decoded - true) mod n_bins mapped onto [-n_bins/2, n_bins/2)."""
    off = np.mod(np.asarray(decoded) - np.asarray(true), n_bins)
    return np.where(off >= n_bins // 2, off - n_bins, off).astype(int)


@dataclass(frozen=True)
class ErrorTrace:
    sf: int
    bw_hz: float
    snr_db: float
    seed: int
    detected: bool
    packet_start_s: float
    symbol_index: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    true_bin: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    decoded_bin: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    offset: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        n = 1 << self.sf
        for name in ("symbol_index", "true_bin", "decoded_bin", "offset"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        if not (len(self.symbol_index) == len(self.true_bin)
                == len(self.decoded_bin) == len(self.offset)):
            raise ValueError("trace columns must have equal length")
        if len(self.offset) and np.any(
                self.offset != _signed_offset(self.decoded_bin, self.true_bin, n)):
            raise ValueError("offset column inconsistent with decoded/true bins")

    def header(self) -> dict:
        return {"sf": self.sf, "bw_hz": self.bw_hz, "snr_db": self.snr_db,
                "seed": self.seed, "detected": self.detected,
                "packet_start_s": self.packet_start_s}

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("# " + json.dumps(self.header()) + "\n")
            fh.write("symbol_index,true_bin,decoded_bin,offset\n")
            for row in zip(self.symbol_index, self.true_bin,
                           self.decoded_bin, self.offset):
                fh.write(",".join(str(int(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ErrorTrace":
        with open(path, encoding="utf-8") as fh:
            head = json.loads(fh.readline().lstrip("# "))
            names = fh.readline().strip().split(",")
            rows = np.array([line.strip().split(",") for line in fh if line.strip()],
                            dtype=int)
        if rows.size == 0:
            rows = rows.reshape(0, len(names))
        cols = dict(zip(names, rows.T))
        return cls(sf=int(head["sf"]), bw_hz=float(head["bw_hz"]),
                   snr_db=float(head["snr_db"]), seed=int(head["seed"]),
                   detected=bool(head["detected"]),
                   packet_start_s=float(head["packet_start_s"]), **cols)


@dataclass(frozen=True)
class BitMask:
    flips: np.ndarray  # uint8 0/1, one flag per payload bit
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        flips = np.asarray(self.flips, dtype=np.uint8)
        if flips.ndim != 1 or np.any(flips > 1):
            raise ValueError("flips must be a flat array of 0/1 flags")
        object.__setattr__(self, "flips", flips)

    def to_file(self, path) -> None:
        np.packbits(self.flips, bitorder="little").tofile(path)
        sidecar = dict(self.metadata, n_bits=int(len(self.flips)))
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh)

    @classmethod
    def from_file(cls, path) -> "BitMask":
        with open(str(path) + ".json", encoding="utf-8") as fh:
            meta = json.load(fh)
        n_bits = int(meta.pop("n_bits"))
        packed = np.fromfile(path, dtype=np.uint8)
        flips = np.unpackbits(packed, bitorder="little")[:n_bits]
        return cls(flips, meta)


def trace_bit_mask(trace: ErrorTrace) -> BitMask:
    """Expand a trace into its per-bit flip mask (XOR of the bin bit patterns)."""
    flips = [bin_to_bits(int(t), trace.sf) ^ bin_to_bits(int(d), trace.sf)
             for t, d in zip(trace.true_bin, trace.decoded_bin)]
    flat = np.concatenate(flips) if flips else np.array([], dtype=np.uint8)
    return BitMask(flat, {"seed": trace.seed, "snr_db": trace.snr_db})


def simulate_packet_errors(cfg: ChannelConfig, params: LoRaParams,
                           payload: bytes, seed: int) -> ErrorTrace:
    """Full pipeline: modulate, impair, preamble-correct, demodulate.

    The receiver corrects the whole packet by the preamble's fine Doppler
    estimate, so surviving offsets isolate the drift accumulated after the
    preamble.  An undetectable packet yields a flagged (detected=False)
    trace with no symbol records rather than a silent absence.
    """
    frame = PacketFrame(payload, params)
    true_syms = payload_to_symbols(payload, params.sf)
    iq = modulate_packet(frame)
    if cfg.pass_ is not None:
        iq = apply_doppler_track(iq, cfg.pass_, cfg.packet_start_s)
    iq = apply_awgn(iq, cfg.snr_db, seed=seed, signal_bw_hz=params.bw_hz)
    corr = CorrelatorConfig(narrow=params,
                            wide_bw_hz=min(250000.0, iq.sample_rate_hz))
    try:
        f_hat = estimate_doppler_fine(iq, corr)
    except ValueError:
        return ErrorTrace(sf=params.sf, bw_hz=params.bw_hz, snr_db=cfg.snr_db,
                          seed=seed, detected=False,
                          packet_start_s=cfg.packet_start_s)
    n = params.samples_per_symbol
    first = (params.preamble_len + params.sync_len) * n
    decoded = np.empty(len(true_syms), dtype=int)
    for k in range(len(true_syms)):
        chunk = IqBuffer(iq.samples[first + k * n: first + (k + 1) * n],
                         params.sample_rate_hz)
        decoded[k] = demodulate_symbol(chunk, params, freq_correction_hz=f_hat)[0]
    return ErrorTrace(
        sf=params.sf, bw_hz=params.bw_hz, snr_db=cfg.snr_db, seed=seed,
        detected=True, packet_start_s=cfg.packet_start_s,
        symbol_index=np.arange(len(true_syms)),
        true_bin=true_syms.astype(int), decoded_bin=decoded,
        offset=_signed_offset(decoded, true_syms, params.n_bins))


def _pool(traces) -> list:
    if isinstance(traces, ErrorTrace):
        traces = [traces]
    return [t for t in traces if t.detected]


@dataclass(frozen=True)
class OffsetDistribution:
    sf: int
    n_symbols: int
    probs: np.ndarray  # P(|offset| = k) for k = 0 .. len-1
    exp_rate: float  # MLE rate of the exponential tail over |offset| >= 1
    gof_pvalue: float  # chi-square goodness of fit of that tail
    exponential_fit_accepted: bool


def fit_bin_offset_distribution(traces, alpha: float = 0.05) -> OffsetDistribution:
    """Empirical |offset| table plus an exponential-tail ML fit.

    The tail model is P(|offset| = k) proportional to exp(-rate*k) for
    k >= 1 (a geometric law, the discrete exponential); a chi-square test
    at level alpha decides whether the tail is consistent with it.
    """
    pool = _pool(traces)
    if not pool:
        raise ValueError("no detected traces to fit")
    sf = pool[0].sf
    offs = np.concatenate([t.offset for t in pool])
    if len(offs) < MIN_FIT_SYMBOLS:
        raise ValueError(
            f"need at least {MIN_FIT_SYMBOLS} symbol outcomes, got {len(offs)}")
    mags = np.abs(offs)
    kmax = int(mags.max())
    counts = np.bincount(mags, minlength=kmax + 1).astype(float)
    probs = counts / len(mags)
    tail = mags[mags >= 1]
    if len(tail) == 0:
        return OffsetDistribution(sf, len(mags), probs[:1], np.inf, 1.0, True)
    # geometric MLE on k-1 failures before success
    p_hat = 1.0 / float(np.mean(tail))
    rate = -np.log1p(-min(p_hat, 1.0 - 1e-12))
    # chi-square GOF over the tail, pooling sparse high-magnitude bins
    obs = np.bincount(tail, minlength=kmax + 1)[1:].astype(float)
    exp_pmf = p_hat * (1 - p_hat) ** np.arange(kmax)
    exp_pmf[-1] = max((1 - p_hat) ** (kmax - 1), 1e-300)  # fold the tail mass
    expected = exp_pmf * len(tail)
    while len(obs) > 2 and expected[-1] < 5:
        obs[-2] += obs[-1]
        expected[-2] += expected[-1]
        obs, expected = obs[:-1], expected[:-1]
    if len(obs) <= 2:
        pval = 1.0  # too few distinct magnitudes to challenge the fit
    else:
        chi2 = float(np.sum((obs - expected) ** 2 / expected))
        pval = float(stats.chi2.sf(chi2, df=len(obs) - 2))
    return OffsetDistribution(sf, len(mags), probs, float(rate), pval,
                              bool(pval > alpha))


def bit_flip_probabilities(traces) -> np.ndarray:
    """Per-bit-position flip probability, index 0 = MSB .. sf-1 = LSB."""
    pool = _pool(traces)
    if not pool:
        raise ValueError("no detected traces")
    sf = pool[0].sf
    n_sym = sum(len(t.offset) for t in pool)
    if n_sym < MIN_FIT_SYMBOLS:
        raise ValueError(
            f"need at least {MIN_FIT_SYMBOLS} symbol outcomes, got {n_sym}")
    flips = np.zeros(sf)
    for t in pool:
        for tb, db in zip(t.true_bin, t.decoded_bin):
            if tb != db:
                flips += bin_to_bits(int(tb), sf) ^ bin_to_bits(int(db), sf)
    return flips / n_sym


def sample_bit_masks(model, payload_bits: int, count: int, seed: int) -> list:
    """Draw bit-flip masks, either by replaying trace outcomes or by
    sampling a fitted offset distribution.  Deterministic per seed."""
    if payload_bits <= 0:
        raise ValueError("payload_bits must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(model, OffsetDistribution):
        sf = model.sf
        n_bins = 1 << sf
        n_sym = -(-payload_bits // sf)

        def draw_pairs():
            true = rng.integers(0, n_bins, n_sym)
            mag = rng.choice(len(model.probs), size=n_sym, p=model.probs)
            sign = rng.choice((-1, 1), size=n_sym)
            return true, np.mod(true + sign * mag, n_bins)
    else:
        pool = _pool(model)
        if not pool:
            raise ValueError("no detected traces to replay")
        sf = pool[0].sf
        n_sym = -(-payload_bits // sf)
        all_true = np.concatenate([t.true_bin for t in pool])
        all_dec = np.concatenate([t.decoded_bin for t in pool])

        def draw_pairs():
            idx = rng.integers(0, len(all_true), n_sym)
            return all_true[idx], all_dec[idx]

    lut = np.array([[(b >> (sf - 1 - i)) & 1 for i in range(sf)]
                    for b in range(1 << sf)], dtype=np.uint8)
    masks = []
    for i in range(count):
        true, dec = draw_pairs()
        bits = (lut[true] ^ lut[dec]).reshape(-1)[:payload_bits]
        masks.append(BitMask(bits, {"seed": seed, "index": i}))
    return masks
