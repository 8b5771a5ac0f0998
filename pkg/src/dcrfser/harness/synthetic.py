"""Generated seven-class tone corpus with RAVDESS-style file names.

Class ``c`` is a harmonic tone at ``base_hz * 1.25**c`` (jittered by a few
percent per clip) with a class-specific harmonic count and noise floor,
padded with near-silence on both ends so trimming has work to do.
"""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from ..audio_io import AudioClip, write_wav
from .manifest import Emotion, build_manifest

RAVDESS_CODES = {Emotion.NEUTRAL: "01", Emotion.HAPPY: "03", Emotion.SAD: "04",
                 Emotion.ANGRY: "05", Emotion.FEAR: "06", Emotion.DISGUST: "07",
                 Emotion.SURPRISE: "08"}


def ravdess_name(emotion: Emotion, index: int) -> tuple[str, str]:
    """(actor directory, file name) for the ``index``-th clip of a class."""
    actor = index // 8 + 1
    intensity, statement, repetition = (index >> 2) & 1, (index >> 1) & 1, index & 1
    name = (f"03-01-{RAVDESS_CODES[emotion]}-{intensity + 1:02d}-{statement + 1:02d}-"
            f"{repetition + 1:02d}-{actor:02d}.wav")
    return f"Actor_{actor:02d}", name


def synth_tone(label: int, rng, sample_rate: int = 16000, base_hz: float = 140.0) -> np.ndarray:
    f0 = base_hz * 1.25 ** label * rng.uniform(0.97, 1.03)
    n_harm = 1 + label % 3
    noise = 0.01 + 0.03 * (label % 4)
    dur = rng.uniform(0.7, 1.1)
    t = np.arange(int(dur * sample_rate)) / sample_rate
    tone = sum(np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h
               for h in range(1, n_harm + 1))
    tone = tone / np.max(np.abs(tone))
    env = np.minimum(1.0, np.minimum(t, t[-1] - t) / 0.05)
    voiced = rng.uniform(0.3, 0.6) * env * tone + noise * rng.standard_normal(t.size)
    pad = [1e-4 * rng.standard_normal(int(rng.uniform(0.25, 0.5) * sample_rate))
           for _ in range(2)]
    return np.clip(np.concatenate([pad[0], voiced, pad[1]]), -1.0, 1.0)


def generate_corpus(root, clips_per_class: int = 35, seed: int = 0,
                    sample_rate: int = 16000) -> list[Path]:
    """Write ``7 * clips_per_class`` WAV files under ``root``; returns their paths."""
    if not 1 <= clips_per_class <= 192:
        raise ValueError("clips_per_class must be in [1, 192]")
    rng = np.random.default_rng(seed)
    root = Path(root)
    paths = []
    for emotion in Emotion:
        for i in range(clips_per_class):
            sub, name = ravdess_name(emotion, i)
            path = root / sub / name
            path.parent.mkdir(parents=True, exist_ok=True)
            write_wav(path, AudioClip(synth_tone(int(emotion), rng, sample_rate), sample_rate))
            paths.append(path)
    return paths


def mark_preprocess(entry):
    return replace(entry, preprocess=True)


def run_end_to_end(root, config, clips_per_class: int = 35, seed: int = 0,
                   workers: int | None = None):
    """Generate a corpus under ``root`` and run it through every stage.

    The stages are manifest, trimming and resampling, augmentation, feature
    extraction and a held-out training run with ``config`` (an
    ``ExperimentConfig``). Returns the extracted table and the run result.
    """
    # imported here so corpus generation stays light for the CLI's synth command
    from ..augment import expand_manifest
    from .experiment import run_holdout
    from .pipeline import extract_table

    generate_corpus(root, clips_per_class, seed)
    manifest = build_manifest({"ravdess": root}).map(mark_preprocess)
    manifest = expand_manifest(manifest, config.augment)
    table = extract_table(manifest, config.dsp, config.trim, workers)
    result = run_holdout(table, config.model, config.train, config.pca, config.split)
    return table, result
