"""Gaussian noise, phase-vocoder time stretch and pitch shift."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .audio_io import AudioClip, resample_ratio
from .dsp import istft, stft_complex
from .harness.manifest import DatasetManifest

PV_FFT = 2048
PV_HOP = 512


@dataclass(frozen=True)
class AugmentationPlan:
    noise_rates: tuple[float, ...] = (0.035, 0.025, 0.015)
    pitch_steps: tuple[float, ...] = (0.70, 0.80, 0.70)
    stretch_rates: tuple[float, ...] = (0.8, 0.9, 0.7)
    seed: int = 0

    def __post_init__(self):
        for name in ("noise_rates", "pitch_steps", "stretch_rates"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if any(r < 0 for r in self.noise_rates):
            raise ValueError("noise rates must be >= 0")
        if any(r <= 0 for r in self.stretch_rates):
            raise ValueError("stretch rates must be > 0")
        if not all(np.isfinite(self.pitch_steps)):
            raise ValueError("pitch steps must be finite")

    @property
    def expansion_factor(self) -> int:
        return 1 + len(self.noise_rates) + len(self.pitch_steps) + len(self.stretch_rates)

    def variants(self):
        """(family, index, parameter) for every variant one entry spawns."""
        for family, params in (("noise", self.noise_rates), ("pitch", self.pitch_steps),
                               ("stretch", self.stretch_rates)):
            for i, p in enumerate(params):
                yield family, i, p


def add_gaussian_noise(clip: AudioClip, rate: float, seed: int) -> AudioClip:
    """Add white Gaussian noise with std ``rate * max|x|``; result clipped to [-1, 1]."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if rate == 0:
        return clip
    x = clip.samples
    noise = np.random.default_rng(seed).normal(0.0, rate * np.max(np.abs(x)), x.size)
    return clip.with_samples(np.clip(x + noise, -1.0, 1.0))


def phase_vocoder(x, rate: float, n_fft: int = PV_FFT, hop: int = PV_HOP) -> np.ndarray:
    """Time-scale ``x`` by ``1 / rate`` keeping its spectral content.

    Magnitudes are interpolated between analysis frames; phases advance by
    the expected bin rotation plus the measured per-bin deviation.
    """
    spec = stft_complex(x, n_fft, hop).T  # bins x frames
    n_bins, n_frames = spec.shape
    steps = np.arange(0.0, n_frames, rate)
    spec = np.pad(spec, ((0, 0), (0, 2)))
    advance = np.linspace(0.0, np.pi * hop, n_bins)
    phase = np.angle(spec[:, 0])
    out = np.empty((n_bins, steps.size), dtype=complex)
    for j, step in enumerate(steps):
        k = int(step)
        c0, c1 = spec[:, k], spec[:, k + 1]
        alpha = step - k
        mag = (1.0 - alpha) * np.abs(c0) + alpha * np.abs(c1)
        out[:, j] = mag * np.exp(1j * phase)
        dphi = np.angle(c1) - np.angle(c0) - advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + advance + dphi
    return istft(out.T, hop, int(round(len(x) / rate)))


def time_stretch(clip: AudioClip, rate: float) -> AudioClip:
    """Change speed by ``rate`` (>1 faster) without changing pitch.

    Output length is ``round(n / rate)``.
    """
    if rate <= 0:
        raise ValueError("rate must be > 0")
    y = phase_vocoder(clip.samples, rate)
    return clip.with_samples(np.clip(y, -1.0, 1.0))


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by ``semitones`` keeping duration.

    Stretches time by ``2**(semitones/12)`` then resamples back to the
    original length.
    """
    if not np.isfinite(semitones):
        raise ValueError("semitones must be finite")
    if semitones == 0:
        return clip
    rate = 2.0 ** (-semitones / 12.0)
    stretched = phase_vocoder(clip.samples, rate)
    y = resample_ratio(stretched, rate, out_len=clip.samples.size)
    return clip.with_samples(np.clip(y, -1.0, 1.0))


def derive_seed(plan_seed: int, entry_id: str) -> int:
    digest = hashlib.sha256(f"{plan_seed}:{entry_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def variant_tag(family: str, index: int, param: float) -> str:
    return f"{family}{index}@{param:g}"


def apply_augmentation(clip: AudioClip, tag: str, seed: int | None) -> AudioClip:
    """Apply a variant described by a tag such as ``"pitch1@0.8"``."""
    head, param = tag.split("@")
    family = head.rstrip("0123456789")
    value = float(param)
    if family == "noise":
        return add_gaussian_noise(clip, value, seed or 0)
    if family == "pitch":
        return pitch_shift(clip, value)
    if family == "stretch":
        return time_stretch(clip, value)
    raise ValueError(f"unknown augmentation tag {tag!r}")


def expand_manifest(manifest: DatasetManifest, plan: AugmentationPlan) -> DatasetManifest:
    """Append one virtual variant per plan parameter after each entry.

    Variants keep path, corpus and label; their ids carry the technique and
    parameter, and their noise seed is derived from ``plan.seed`` and the
    variant id so the result does not depend on processing order. Variants
    already present are not added again, so expansion is idempotent.
    """
    present = {e.source_id for e in manifest}
    out = []
    for entry in manifest:
        out.append(entry)
        if entry.augmentation is not None:
            continue
        for family, i, p in plan.variants():
            tag = variant_tag(family, i, p)
            vid = f"{entry.source_id}~{tag}"
            if vid in present:
                continue
            out.append(replace(entry, source_id=vid, augmentation=tag,
                               seed=derive_seed(plan.seed, vid)))
    return DatasetManifest(out, list(manifest.skipped), manifest.excluded)
