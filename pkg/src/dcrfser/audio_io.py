"""WAV decoding, silence trimming and band-limited resampling."""
from __future__ import annotations

import math
import struct
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import i0

from .dsp import frame_signal
from .errors import MalformedHeader, UnsupportedEncoding

CANONICAL_RATE = 22050

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = field(default="")

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("AudioClip needs a non-empty 1-D sample buffer")
        if not np.all(np.isfinite(x)):
            raise ValueError("AudioClip samples must be finite")
        if np.max(np.abs(x)) > 1.0 + 1e-6:
            raise ValueError("AudioClip samples must lie in [-1, 1]")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"invalid sample rate {self.sample_rate!r}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples, sample_rate=None) -> "AudioClip":
        return AudioClip(samples, sample_rate or self.sample_rate, self.source_id)


# -- WAV ---------------------------------------------------------------------

def _read_chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE container")
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise MalformedHeader("truncated chunk header")
        cid = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        yield cid, body
        # chunks are word aligned
        pos += 8 + size + (size & 1)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise MalformedHeader("fmt chunk shorter than 16 bytes")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _EXTENSIBLE:
        if len(body) < 26:
            raise MalformedHeader("truncated WAVE_FORMAT_EXTENSIBLE block")
        (tag,) = struct.unpack("<H", body[24:26])
    if channels < 1 or rate < 1 or bits < 1:
        raise MalformedHeader("fmt chunk has zero channels, rate or bit depth")
    return tag, channels, rate, block_align, bits


def _decode_pcm(raw: bytes, tag: int, bits: int) -> np.ndarray:
    if tag == _PCM:
        if bits == 8:
            return (np.frombuffer(raw, np.uint8).astype(np.float64) - 128.0) / 128.0
        if bits == 16:
            return np.frombuffer(raw, "<i2").astype(np.float64) / 32768.0
        if bits == 24:
            b = np.frombuffer(raw, np.uint8).reshape(-1, 3).astype(np.int32)
            v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            v = np.where(v >= 1 << 23, v - (1 << 24), v)
            return v.astype(np.float64) / float(1 << 23)
        if bits == 32:
            return np.frombuffer(raw, "<i4").astype(np.float64) / float(1 << 31)
    elif tag == _IEEE_FLOAT:
        if bits == 32:
            x = np.frombuffer(raw, "<f4").astype(np.float64)
        elif bits == 64:
            x = np.frombuffer(raw, "<f8").copy()
        else:
            raise UnsupportedEncoding(f"{bits}-bit float samples")
        if not np.all(np.isfinite(x)):
            raise MalformedHeader("float WAV contains non-finite samples")
        return np.clip(x, -1.0, 1.0)
    else:
        raise UnsupportedEncoding(f"format tag 0x{tag:04x} is not PCM or IEEE float")
    raise UnsupportedEncoding(f"{bits}-bit integer PCM")


def decode_wav_bytes(data: bytes, source_id: str = "") -> AudioClip:
    fmt = None
    raw = None
    for cid, body in _read_chunks(data):
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            raw = body
            break
    if fmt is None:
        raise MalformedHeader("missing fmt chunk")
    if raw is None:
        raise MalformedHeader("missing data chunk")
    tag, channels, rate, block_align, bits = fmt
    width = (bits + 7) // 8
    if block_align != width * channels:
        raise MalformedHeader(f"block align {block_align} inconsistent with "
                              f"{channels} x {bits}-bit samples")
    n_frames = len(raw) // block_align
    if n_frames == 0:
        raise MalformedHeader("data chunk holds no complete frames")
    x = _decode_pcm(raw[:n_frames * block_align], tag, bits)
    x = x.reshape(n_frames, channels).mean(axis=1)
    return AudioClip(x, rate, source_id)


def decode_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono clip.

    Integer PCM is scaled by the largest magnitude of its type (128, 2**15,
    2**23, 2**31); float data is clipped to [-1, 1]. Multi-channel audio is
    averaged to mono.

    Raises
    ------
    MalformedHeader
        Truncated or invalid RIFF structure.
    UnsupportedEncoding
        Compressed codecs or unsupported bit depths.
    """
    path = Path(path)
    return decode_wav_bytes(path.read_bytes(), source_id=str(path))


def encode_wav_bytes(clip: AudioClip) -> bytes:
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
                         b"fmt ", 16, _PCM, 1, clip.sample_rate, clip.sample_rate * 2,
                         2, 16, b"data", len(payload))
    return header + payload


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit mono PCM."""
    Path(path).write_bytes(encode_wav_bytes(clip))


# -- resampling --------------------------------------------------------------

def _kaiser(t, half_width, beta):
    r = np.clip(t / half_width, -1.0, 1.0)
    return i0(beta * np.sqrt(1.0 - r * r)) / i0(beta)


def _phase_table(phases, cutoff: float, zero_crossings: int, beta: float):
    half = zero_crossings / cutoff
    reach = int(math.ceil(half))
    taps = np.arange(-reach, reach + 1)
    t = np.asarray(phases, dtype=np.float64)[:, None] - taps[None, :]
    h = cutoff * np.sinc(cutoff * t) * _kaiser(t, half, beta)
    h[np.abs(t) > half] = 0.0
    return taps, h


def resample_poly_sinc(x, up: int, down: int, out_len: int | None = None,
                       zero_crossings: int = 64, beta: float = 14.77) -> np.ndarray:
    """Polyphase windowed-sinc resampling by the exact ratio ``up / down``.

    Output sample ``m`` sits at input position ``m * down / up``; its kernel
    is read from a table holding one row per distinct fractional phase.
    Samples beyond either end of ``x`` count as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    g = math.gcd(up, down)
    up, down = up // g, down // g
    if out_len is None:
        out_len = int(round(x.size * up / down))
    cutoff = min(1.0, up / down)
    m = np.arange(out_len, dtype=np.int64)
    base = m * down // up
    used, phase = np.unique(m * down % up, return_inverse=True)
    taps, table = _phase_table(used / up, cutoff, zero_crossings, beta)
    pad = taps.size
    tail = max(pad, int(base[-1]) + pad + 1 - x.size) if out_len else pad
    xp = np.concatenate([np.zeros(pad), x, np.zeros(tail)])
    out = np.empty(out_len)
    chunk = max(1, 2 ** 20 // taps.size)
    for s in range(0, out_len, chunk):
        idx = base[s:s + chunk, None] + taps[None, :] + pad
        out[s:s + chunk] = np.einsum("ij,ij->i", table[phase[s:s + chunk]], xp[idx])
    return out


def resample_ratio(x, ratio: float, out_len: int | None = None,
                   max_denominator: int = 1000, **kw) -> np.ndarray:
    """Resample a raw buffer by ``ratio`` (target rate / source rate).

    Irrational ratios are replaced by their best rational approximation with
    denominator <= ``max_denominator``.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    frac = Fraction(ratio).limit_denominator(max_denominator)
    return resample_poly_sinc(x, frac.numerator, frac.denominator, out_len, **kw)


def resample(clip: AudioClip, target_rate: int = CANONICAL_RATE,
             zero_crossings: int = 64, beta: float = 14.77) -> AudioClip:
    """Kaiser-windowed sinc resampling to ``target_rate``.

    Output length is ``round(n * target / source)``. Matching rates return
    the clip unchanged.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip
    y = resample_poly_sinc(clip.samples, int(target_rate), clip.sample_rate,
                           zero_crossings=zero_crossings, beta=beta)
    return clip.with_samples(np.clip(y, -1.0, 1.0), target_rate)


# -- silence trimming --------------------------------------------------------

def trim_silence(clip: AudioClip, threshold_db: float = 40.0,
                 min_silence_ms: float = 200.0, keep_fraction: float = 0.30,
                 frame_length: int = 2048, hop: int = 512) -> AudioClip:
    """Shorten long leading/trailing silences to ``keep_fraction`` of their length.

    A frame is silent when its RMS sits more than ``threshold_db`` below the
    loudest frame. Only runs longer than ``min_silence_ms`` are shortened, and
    the retained part is the one adjacent to the audible region. Every sample
    of an audible frame is kept. A clip with no audible frame at all is cut
    to its first ``keep_fraction`` of samples.
    """
    x = clip.samples
    n = x.size
    frames = frame_signal(x, frame_length, hop, pad_end=True)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    peak = rms.max()
    if peak <= 0.0:
        keep = max(1, int(round(keep_fraction * n)))
        return clip.with_samples(x[:keep])
    loud = np.flatnonzero(rms > peak * 10.0 ** (-threshold_db / 20.0))
    lead_end = int(loud[0]) * hop
    trail_start = min(n, int(loud[-1]) * hop + frame_length)
    min_run = min_silence_ms * 1e-3 * clip.sample_rate

    start, stop = 0, n
    if lead_end > min_run:
        start = lead_end - int(round(keep_fraction * lead_end))
    trail_len = n - trail_start
    if trail_len > min_run:
        stop = trail_start + int(round(keep_fraction * trail_len))
    if start == 0 and stop == n:
        return clip
    return clip.with_samples(x[start:stop])


def preprocess(clip: AudioClip, target_rate: int = CANONICAL_RATE, **trim_kw) -> AudioClip:
    """Trim silence, then resample."""
    return resample(trim_silence(clip, **trim_kw), target_rate)
