"""LoRa chirp-spread-spectrum baseband modem.

Symbols are cyclic frequency shifts of a linear upchirp: symbol s starts at
-bw/2 + s*bw/2^sf and wraps at the band edge.  Demodulation multiplies by
the conjugate base upchirp and picks the FFT peak.  Deliberately absent:
Gray coding, interleaving, Hamming FEC and header/CRC - the bit-error
statistics downstream rely on the plain binary bin-to-bit mapping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

VALID_BW_HZ = (62500, 125000, 250000)


@dataclass(frozen=True)
class LoRaParams:
    sf: int = 8
    bw_hz: float = 62500.0
    carrier_hz: float = 915.6e6
    preamble_len: int = 8
    sync_len: int = 2
    sample_rate_hz: float = 0.0  # 0 -> default 4*bw oversampling

    def __post_init__(self):
        if not isinstance(self.sf, int) or not 7 <= self.sf <= 12:
            raise ValueError(f"spreading factor {self.sf} outside 7..12")
        if int(self.bw_hz) not in VALID_BW_HZ:
            raise ValueError(f"bandwidth {self.bw_hz} not one of {VALID_BW_HZ}")
        if self.sample_rate_hz == 0.0:
            object.__setattr__(self, "sample_rate_hz", 4.0 * self.bw_hz)
        ratio = self.sample_rate_hz / self.bw_hz
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("sample rate must be an integer multiple of the bandwidth")
        if self.preamble_len < 1 or self.sync_len < 0:
            raise ValueError("need at least one preamble chirp and sync_len >= 0")

    @property
    def n_bins(self) -> int:
        return 1 << self.sf

    @property
    def oversample(self) -> int:
        return int(round(self.sample_rate_hz / self.bw_hz))

    @property
    def samples_per_symbol(self) -> int:
        return self.n_bins * self.oversample

    @property
    def symbol_period_s(self) -> float:
        return self.n_bins / self.bw_hz

    @property
    def bin_hz(self) -> float:
        return self.bw_hz / self.n_bins

    @property
    def chirp_slope(self) -> float:
        return self.bw_hz**2 / self.n_bins

    @property
    def sync_bins(self) -> tuple:
        # fixed, arbitrary non-zero bins; two distinct values disambiguate
        # timing vs frequency offset downstream
        base = (self.n_bins // 8, self.n_bins // 4)
        return tuple(base[i % 2] for i in range(self.sync_len))


@dataclass(frozen=True)
class IqBuffer:
    samples: np.ndarray
    sample_rate_hz: float
    center_offset_hz: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("samples must be a non-empty 1-d array")
        if not np.all(np.isfinite(s.view(float))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    def to_file(self, path) -> None:
        """Interleaved little-endian float32 I/Q plus a JSON sidecar."""
        path = Path(path)
        inter = np.empty(2 * len(self.samples), dtype="<f4")
        inter[0::2] = self.samples.real
        inter[1::2] = self.samples.imag
        inter.tofile(path)
        meta = {
            "sample_rate_hz": self.sample_rate_hz,
            "center_offset_hz": self.center_offset_hz,
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(meta, indent=2), encoding="utf-8"
        )

    @classmethod
    def from_file(cls, path) -> "IqBuffer":
        path = Path(path)
        inter = np.fromfile(path, dtype="<f4")
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
        samples = inter[0::2].astype(np.float64) + 1j * inter[1::2].astype(np.float64)
        return cls(samples, meta["sample_rate_hz"], meta.get("center_offset_hz", 0.0))


@dataclass(frozen=True)
class PacketFrame:
    payload: bytes
    params: LoRaParams = field(default_factory=LoRaParams)

    def __post_init__(self):
        if len(self.payload) > 256:
            raise ValueError("payload exceeds 256 bytes")


def _chirp(symbol: int, params: LoRaParams) -> np.ndarray:
    """Unit-amplitude upchirp with initial offset symbol*bin_hz, wrapping at
    the band edge.  Phase is the exact quadratic of the continuous-time
    waveform (minus a full-band term after the wrap, keeping it continuous),
    so samplings at different rates agree on the common instants."""
    n = params.samples_per_symbol
    fs = params.sample_rate_hz
    bw = params.bw_hz
    t = np.arange(n) / fs
    f0 = -bw / 2.0 + symbol * params.bin_hz
    t_wrap = (bw / 2.0 - f0) / params.chirp_slope
    phase = f0 * t + 0.5 * params.chirp_slope * t**2
    phase = phase - bw * np.maximum(t - t_wrap, 0.0)
    return np.exp(2j * np.pi * phase)


def modulate_symbol(symbol: int, params: LoRaParams) -> IqBuffer:
    if not 0 <= symbol < params.n_bins:
        raise ValueError(f"symbol {symbol} outside [0, {params.n_bins})")
    return IqBuffer(_chirp(symbol, params), params.sample_rate_hz)


def bin_to_bits(bin_index: int, sf: int) -> np.ndarray:
    """Plain binary big-endian sf-bit representation (deliberately not Gray)."""
    if not 0 <= bin_index < (1 << sf):
        raise ValueError(f"bin {bin_index} outside [0, 2^{sf})")
    return np.array([(bin_index >> (sf - 1 - i)) & 1 for i in range(sf)], dtype=np.uint8)


def bits_to_bin(bits, sf: int) -> int:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != sf or np.any(bits > 1):
        raise ValueError("expected exactly sf bits of 0/1")
    return int(sum(int(b) << (sf - 1 - i) for i, b in enumerate(bits)))


def payload_to_bits(payload: bytes) -> np.ndarray:
    """MSB-first bits, bytes in order."""
    if len(payload) == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))


def payload_to_symbols(payload: bytes, sf: int) -> np.ndarray:
    bits = payload_to_bits(payload)
    n_sym = int(np.ceil(len(bits) / sf))
    padded = np.zeros(n_sym * sf, dtype=np.uint8)
    padded[: len(bits)] = bits
    weights = 1 << np.arange(sf - 1, -1, -1)
    return (padded.reshape(n_sym, sf) * weights).sum(axis=1).astype(np.int64)


def symbols_to_payload(symbols, sf: int, payload_len: int) -> bytes:
    symbols = np.asarray(symbols, dtype=np.int64)
    bits = ((symbols[:, None] >> np.arange(sf - 1, -1, -1)) & 1).astype(np.uint8).ravel()
    bits = bits[: payload_len * 8]
    return np.packbits(bits).tobytes()[:payload_len]


def packet_symbol_count(params: LoRaParams, payload_len: int) -> int:
    return params.preamble_len + params.sync_len + int(np.ceil(8 * payload_len / params.sf))


def packet_airtime_s(params: LoRaParams, payload_len: int) -> float:
    return packet_symbol_count(params, payload_len) * params.symbol_period_s


def modulate_packet(frame: PacketFrame) -> IqBuffer:
    """preamble_len base upchirps, sync_len SYNC symbols, then payload."""
    p = frame.params
    syms = [0] * p.preamble_len + list(p.sync_bins) + list(payload_to_symbols(frame.payload, p.sf))
    out = np.concatenate([_chirp(s, p) for s in syms])
    return IqBuffer(out, p.sample_rate_hz)


def decimate_to_critical(x: np.ndarray, os: int) -> np.ndarray:
    """Ideal low-pass to the output Nyquist band, then downsample by os."""
    if os == 1:
        return x
    spec = np.fft.fft(x)
    n = len(x)
    keep = n // os
    out = np.concatenate([spec[: (keep + 1) // 2], spec[-(keep // 2):]])
    return np.fft.ifft(out) / os


def demodulate_symbol(iq: IqBuffer, params: LoRaParams, freq_correction_hz: float = 0.0):
    """Dechirp-FFT demodulation of exactly one symbol.

    Returns (bin, peak_magnitude).  Oversampled input is brick-wall
    filtered and decimated to the critical rate first, so out-of-band
    noise never reaches the FFT; at the critical rate the post-wrap tone
    segment aliases onto the same bin as the pre-wrap segment.
    """
    n = params.samples_per_symbol
    if len(iq) != n:
        raise ValueError(f"buffer holds {len(iq)} samples, expected exactly {n}")
    x = iq.samples
    if freq_correction_hz or iq.center_offset_hz:
        f = freq_correction_hz + iq.center_offset_hz
        x = x * np.exp(-2j * np.pi * f * np.arange(n) / params.sample_rate_hz)
    x = decimate_to_critical(x, params.oversample)
    crit = params if params.oversample == 1 else replace(params, sample_rate_hz=params.bw_hz)
    dechirped = x * np.conj(_chirp(0, crit))
    spec = np.abs(np.fft.fft(dechirped)) ** 2
    b = int(np.argmax(spec))
    return b, float(np.sqrt(spec[b]))


def demodulate_packet(iq: IqBuffer, params: LoRaParams, payload_len: int,
                      freq_correction_hz: float = 0.0) -> bytes:
    """Symbol-by-symbol demodulation of a packet laid out by modulate_packet."""
    n = params.samples_per_symbol
    n_data = int(np.ceil(8 * payload_len / params.sf))
    first = (params.preamble_len + params.sync_len) * n
    if len(iq) < first + n_data * n:
        raise ValueError("buffer shorter than the expected packet")
    syms = []
    for k in range(n_data):
        chunk = IqBuffer(iq.samples[first + k * n: first + (k + 1) * n],
                         params.sample_rate_hz, iq.center_offset_hz)
        syms.append(demodulate_symbol(chunk, params, freq_correction_hz)[0])
    return symbols_to_payload(syms, params.sf, payload_len)
