"""Spectral analysis kernels.

Functions that take a ``clip`` accept anything with ``samples`` and
``sample_rate`` attributes (normally :class:`dcrfser.audio_io.AudioClip`).
All kernels are pure; cached filterbanks and kernels are read-only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LOG_FLOOR = 1e-10
A4_HZ = 440.0
C1_HZ = 32.703195662574764


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def frame_signal(x, frame_length: int, hop: int, pad_end: bool = False) -> np.ndarray:
    """Slice ``x`` into frames of ``frame_length`` every ``hop`` samples (no centering).

    Signals shorter than one frame are zero-padded to a single frame. With
    ``pad_end`` the tail is zero-padded so every sample falls in some frame;
    otherwise only frames lying wholly inside the signal are returned.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < frame_length:
        x = np.pad(x, (0, frame_length - n))
    elif pad_end:
        n_frames = 1 + -(-(n - frame_length) // hop)
        x = np.pad(x, (0, (n_frames - 1) * hop + frame_length - n))
    return sliding_window_view(x, frame_length)[::hop]


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # frames x (n_fft // 2 + 1)
    n_fft: int
    hop: int
    sample_rate: int
    window: str = "hann"

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft

    @property
    def power(self) -> np.ndarray:
        return self.magnitudes ** 2


def stft_complex(x, n_fft: int, hop: int) -> np.ndarray:
    """Centered, Hann-windowed STFT; returns frames x bins complex."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < n_fft:
        x = np.pad(x, (0, n_fft - x.size))
    xp = np.pad(x, n_fft // 2, mode="reflect")
    frames = sliding_window_view(xp, n_fft)[::hop]
    return np.fft.rfft(frames * hann(n_fft), axis=1)


def istft(spec: np.ndarray, hop: int, length: int) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft_complex`, cut to ``length``."""
    n_frames, n_bins = spec.shape
    n_fft = 2 * (n_bins - 1)
    win = hann(n_fft)
    frames = np.fft.irfft(spec, n=n_fft, axis=1) * win
    total = n_fft + hop * (n_frames - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    for j in range(n_frames):
        y[j * hop:j * hop + n_fft] += frames[j]
        wsum[j * hop:j * hop + n_fft] += win ** 2
    nz = wsum > 1e-10
    y[nz] /= wsum[nz]
    y = y[n_fft // 2:]
    if y.size < length:
        y = np.pad(y, (0, length - y.size))
    return y[:length]


def stft(clip, n_fft: int = 512, hop: int = 220) -> Spectrogram:
    """Magnitude STFT with half-frame reflection padding.

    Frame count is ``1 + n // hop`` for a clip of ``n >= n_fft`` samples.
    """
    mags = np.abs(stft_complex(clip.samples, n_fft, hop))
    return Spectrogram(_readonly(mags), n_fft, hop, clip.sample_rate, "hann")


# -- mel machinery -----------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class FilterBank:
    weights: np.ndarray  # filters x bins
    centers_hz: np.ndarray


@lru_cache(maxsize=32)
def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> FilterBank:
    """Triangular filters with centers equally spaced in mel.

    Each triangle is scaled by ``2 / (upper - lower)`` in Hz so filters have
    unit area on the continuous frequency axis.
    """
    if fmax is None:
        fmax = sample_rate / 2.0
    if n_filters < 1 or not 0 <= fmin < fmax <= sample_rate / 2.0:
        raise ValueError("need n_filters >= 1 and 0 <= fmin < fmax <= sr/2")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rise = (freqs - lo) / (mid - lo)
    fall = (hi - freqs) / (hi - mid)
    w = np.maximum(0.0, np.minimum(rise, fall)) * (2.0 / (hi - lo))
    return FilterBank(_readonly(w), _readonly(edges[1:-1]))


@lru_cache(maxsize=8)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; ``dct_matrix(n) @ v`` transforms ``v``."""
    k = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    m = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * t + 1) / (2 * n))
    m[0] /= np.sqrt(2.0)
    return _readonly(m)


def mel_power(spec: Spectrogram, n_mels: int) -> np.ndarray:
    fb = mel_filterbank(n_mels, spec.n_fft, spec.sample_rate)
    return spec.power @ fb.weights.T


def mfcc(clip, n_mfcc: int = 20, n_mels: int = 26, n_fft: int = 512, hop: int = 220,
         spec: Spectrogram | None = None) -> np.ndarray:
    """MFCCs (frames x n_mfcc): orthonormal DCT-II of log mel energies."""
    if spec is None:
        spec = stft(clip, n_fft, hop)
    log_e = np.log(mel_power(spec, n_mels) + LOG_FLOOR)
    return log_e @ dct_matrix(n_mels)[:n_mfcc].T


def delta(feat, width: int = 9, order: int = 1) -> np.ndarray:
    """Local least-squares slope along the frame axis.

    Boundary frames are replicated. ``order=2`` is the delta of the delta.
    """
    if width < 3 or width % 2 == 0:
        raise ValueError("width must be odd and >= 3")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    feat = np.asarray(feat, dtype=np.float64)
    half = width // 2
    weights = np.arange(1, half + 1, dtype=np.float64)
    norm = 2.0 * np.sum(weights ** 2)
    out = feat
    for _ in range(order):
        padded = np.pad(out, ((half, half), (0, 0)), mode="edge")
        n = out.shape[0]
        acc = np.zeros_like(out)
        for w in range(1, half + 1):
            acc += w * (padded[half + w:half + w + n] - padded[half - w:half - w + n])
        out = acc / norm
    return out


# -- chroma ------------------------------------------------------------------

def pitch_class(freq_hz) -> np.ndarray:
    """Nearest equal-tempered pitch class (C=0 ... B=11), A4 = 440 Hz."""
    semis = np.round(12.0 * np.log2(np.asarray(freq_hz, dtype=np.float64) / A4_HZ))
    return ((semis.astype(np.int64) + 9) % 12)


def _fold(energy, classes) -> np.ndarray:
    out = np.zeros((energy.shape[0], 12))
    for c in range(12):
        sel = classes == c
        if np.any(sel):
            out[:, c] = energy[:, sel].sum(axis=1)
    return out


def _max_normalize(chroma) -> np.ndarray:
    peak = chroma.max(axis=1, keepdims=True)
    out = np.full_like(chroma, 1.0 / 12.0)
    live = peak[:, 0] > 0
    out[live] = chroma[live] / peak[live]
    return out


def chroma_stft(spec: Spectrogram) -> np.ndarray:
    """Fold STFT power (DC excluded) onto 12 pitch classes, max-normalized per frame."""
    classes = pitch_class(spec.frequencies[1:])
    return _max_normalize(_fold(spec.power[:, 1:], classes))


@lru_cache(maxsize=8)
def cqt_kernels(sample_rate: int, fmin: float = C1_HZ, n_bins: int = 84,
                bins_per_octave: int = 12):
    """Time-domain constant-Q kernels, one per bin, L1-normalized windows."""
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    freqs = fmin * 2.0 ** (np.arange(n_bins) / bins_per_octave)
    if freqs[-1] >= sample_rate / 2.0:
        raise ValueError("highest CQT bin is above Nyquist")
    kernels = []
    for f in freqs:
        length = int(np.ceil(q * sample_rate / f))
        win = np.hanning(length + 2)[1:-1]
        t = np.arange(length) - length // 2
        k = win / win.sum() * np.exp(-2j * np.pi * f * t / sample_rate)
        kernels.append(_readonly(np.stack([k.real, k.imag], axis=1)))
    return _readonly(freqs), tuple(kernels)


def cqt(clip, hop: int = 512, fmin: float = C1_HZ, n_octaves: int = 7,
        bins_per_octave: int = 12) -> np.ndarray:
    """Constant-Q magnitudes (frames x bins) from direct per-bin kernels.

    Frames are centered at multiples of ``hop``; the signal is zero-extended.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    freqs, kernels = cqt_kernels(clip.sample_rate, fmin, n_octaves * bins_per_octave,
                                 bins_per_octave)
    n_frames = 1 + x.size // hop
    pad = kernels[0].shape[0]
    xp = np.pad(x, (pad, pad + hop))
    out = np.empty((n_frames, len(kernels)))
    for b, k in enumerate(kernels):
        length = k.shape[0]
        s0 = pad - length // 2
        frames = sliding_window_view(xp, length)[s0:s0 + n_frames * hop:hop]
        re_im = frames @ k
        out[:, b] = np.hypot(re_im[:, 0], re_im[:, 1])
    return out


def pseudo_cqt(clip, hop: int = 512, fmin: float = C1_HZ, n_octaves: int = 7,
               bins_per_octave: int = 12, n_fft: int = 4096) -> np.ndarray:
    """Fast approximation: pool large-FFT magnitudes into log-spaced bins."""
    mags = np.abs(stft_complex(clip.samples, n_fft, hop))
    fft_freqs = np.arange(mags.shape[1]) * clip.sample_rate / n_fft
    freqs = fmin * 2.0 ** (np.arange(n_octaves * bins_per_octave) / bins_per_octave)
    half = 2.0 ** (0.5 / bins_per_octave)
    out = np.zeros((mags.shape[0], freqs.size))
    for b, f in enumerate(freqs):
        sel = (fft_freqs >= f / half) & (fft_freqs < f * half)
        if np.any(sel):
            out[:, b] = mags[:, sel].sum(axis=1)
    return out


def cqt_chroma_raw(clip, hop: int = 512, fmin: float = C1_HZ, n_octaves: int = 7,
                   pseudo: bool = False) -> np.ndarray:
    """Unnormalized CQT energy folded onto the 12 pitch classes."""
    fn = pseudo_cqt if pseudo else cqt
    c = fn(clip, hop=hop, fmin=fmin, n_octaves=n_octaves)
    freqs = fmin * 2.0 ** (np.arange(c.shape[1]) / 12.0)
    return _fold(c, pitch_class(freqs))


def chroma_cqt(clip, hop: int = 512, fmin: float = C1_HZ, n_octaves: int = 7,
               pseudo: bool = False, raw=None) -> np.ndarray:
    """Per-frame max-normalized CQT chroma; ``raw`` reuses a
    :func:`cqt_chroma_raw` result computed with the same settings."""
    if raw is None:
        raw = cqt_chroma_raw(clip, hop, fmin, n_octaves, pseudo)
    return _max_normalize(raw)


CENS_THRESHOLDS = (0.05, 0.1, 0.2, 0.4)


def chroma_cens(clip, hop: int = 512, fmin: float = C1_HZ, n_octaves: int = 7,
                smooth: int = 41, pseudo: bool = False, raw=None) -> np.ndarray:
    """Chroma energy normalized statistics.

    L1-normalized CQT chroma is quantized to levels 0-4 by the thresholds in
    ``CENS_THRESHOLDS``, smoothed over ``smooth`` frames with a Hann window
    and L2-normalized per frame.
    """
    if raw is None:
        raw = cqt_chroma_raw(clip, hop, fmin, n_octaves, pseudo)
    total = raw.sum(axis=1, keepdims=True)
    l1 = np.divide(raw, total, out=np.zeros_like(raw), where=total > 0)
    quant = np.zeros_like(l1)
    for thr in CENS_THRESHOLDS:
        quant += l1 > thr
    win = np.hanning(smooth + 2)[1:-1]
    win /= win.sum()
    lag = (win.size - 1) // 2
    n = quant.shape[0]
    smoothed = np.stack([np.convolve(quant[:, c], win)[lag:lag + n] for c in range(12)],
                        axis=1)
    norm = np.linalg.norm(smoothed, axis=1, keepdims=True)
    out = np.full_like(smoothed, 1.0 / 12.0)
    live = norm[:, 0] > 0
    out[live] = smoothed[live] / norm[live]
    return out


# -- other frame features ----------------------------------------------------

def log_mel_spectrogram(clip, n_mels: int = 64, n_fft: int = 512, hop: int = 220,
                        spec: Spectrogram | None = None) -> np.ndarray:
    """Natural-log mel power, frames x n_mels."""
    if spec is None:
        spec = stft(clip, n_fft, hop)
    return np.log(mel_power(spec, n_mels) + LOG_FLOOR)


def contrast_band_edges(sample_rate: int, n_bands: int = 6, fmin: float = 200.0):
    nyq = sample_rate / 2.0
    edges = [0.0] + [min(fmin * 2.0 ** i, nyq) for i in range(n_bands - 1)] + [nyq]
    return np.array(edges)


def spectral_contrast(spec: Spectrogram, n_bands: int = 6, fmin: float = 200.0,
                      quantile: float = 0.02) -> np.ndarray:
    """Peak-minus-valley log magnitude in octave sub-bands.

    Bands are ``[0, fmin)``, then octaves from ``fmin``, the last one running
    to Nyquist. Peak and valley are the means of the top and bottom
    ``quantile`` of bins in the band (at least one bin).
    """
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    edges = contrast_band_edges(spec.sample_rate, n_bands, fmin)
    freqs = spec.frequencies
    mags = spec.magnitudes
    out = np.zeros((mags.shape[0], n_bands))
    for b in range(n_bands):
        lo, hi = edges[b], edges[b + 1]
        sel = (freqs >= lo) & ((freqs < hi) if b < n_bands - 1 else (freqs <= hi))
        n_sel = int(sel.sum())
        if n_sel == 0:
            continue
        band = np.sort(mags[:, sel], axis=1)
        q = max(1, int(round(quantile * n_sel)))
        valley = band[:, :q].mean(axis=1)
        peak = band[:, -q:].mean(axis=1)
        out[:, b] = np.log(peak + LOG_FLOOR) - np.log(valley + LOG_FLOOR)
    return out


def rmse_frames(clip, frame_length: int = 2048, hop: int = 512) -> np.ndarray:
    """Per-frame root mean square amplitude."""
    frames = frame_signal(clip.samples, frame_length, hop)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def zcr_frames(clip, frame_length: int = 2048, hop: int = 512) -> np.ndarray:
    """Fraction of adjacent sample pairs with strictly opposite sign."""
    frames = frame_signal(clip.samples, frame_length, hop)
    crossings = np.count_nonzero(frames[:, :-1] * frames[:, 1:] < 0, axis=1)
    return crossings / (frame_length - 1)
