"""Shared test utilities: finite-difference checks and signal generators."""
import numpy as np

from dcrfser.audio_io import AudioClip


def sample_indices(shape, n, rng):
    """``n`` random multi-indices into an array of ``shape`` (all of them if fewer)."""
    size = int(np.prod(shape))
    flat = np.arange(size) if size <= n else rng.choice(size, n, replace=False)
    return [np.unravel_index(i, shape) for i in flat]


def max_rel_error(f, arrays, grads, rng, n=100, h=1e-6):
    """Largest relative error between ``grads`` and central differences of ``f``.

    ``arrays`` and ``grads`` are parallel lists; ``f`` reads the arrays, which
    are perturbed in place and restored. ``n`` indices are sampled per array.
    Returns (error, number of checked entries).
    """
    worst, checked = 0.0, 0
    for a, g in zip(arrays, grads):
        for idx in sample_indices(a.shape, n, rng):
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            num = (fp - fm) / (2 * h)
            denom = max(abs(num) + abs(g[idx]), 1e-8)
            worst = max(worst, abs(num - g[idx]) / denom)
            checked += 1
    return worst, checked


def tone(freq, seconds=1.0, sr=22050, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), sr)


def peak_frequency(x, sr, pad_factor=8):
    """Frequency of the largest magnitude in a Hann-windowed, zero-padded FFT,
    refined by parabolic interpolation."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size * pad_factor
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size), n))
    k = int(np.argmax(spec[1:-1])) + 1
    a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
    shift = 0.5 * (a - c) / (a - 2 * b + c)
    return (k + shift) * sr / n
