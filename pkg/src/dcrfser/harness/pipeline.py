"""Turn manifest entries into clips and clips into a feature table."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..audio_io import AudioClip, decode_wav, preprocess, resample, trim_silence, write_wav
from ..augment import apply_augmentation
from ..errors import SERError
from ..features import N_FEATURES, DSPConfig, FeatureTable, extract_feature_vector
from .manifest import DatasetManifest, ManifestEntry

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrimConfig:
    threshold_db: float = 40.0
    min_silence_ms: float = 200.0
    keep_fraction: float = 0.30


def base_clip(entry: ManifestEntry, dsp: DSPConfig = DSPConfig(),
              trim: TrimConfig = TrimConfig()) -> AudioClip:
    """Decoded audio at the analysis rate, before any augmentation.

    Entries flagged for preprocessing are trimmed before resampling; others
    are only resampled.
    """
    clip = decode_wav(entry.path)
    clip = AudioClip(clip.samples, clip.sample_rate, entry.origin)
    if entry.preprocess:
        return preprocess(clip, dsp.sample_rate, threshold_db=trim.threshold_db,
                          min_silence_ms=trim.min_silence_ms,
                          keep_fraction=trim.keep_fraction)
    return resample(clip, dsp.sample_rate)


def materialize(entry: ManifestEntry, dsp: DSPConfig = DSPConfig(),
                trim: TrimConfig = TrimConfig(), base: AudioClip | None = None) -> AudioClip:
    """The clip an entry describes; ``base`` skips decoding when already known."""
    clip = base if base is not None else base_clip(entry, dsp, trim)
    if entry.augmentation:
        clip = apply_augmentation(clip, entry.augmentation, entry.seed)
    return clip


def _with_entry(exc: Exception, entry: ManifestEntry) -> Exception:
    """Same exception class, message prefixed by the failing entry id."""
    try:
        out = type(exc)(f"{entry.source_id}: {exc}")
    except TypeError:
        return exc
    out.__cause__ = exc
    return out


def entry_features(entry: ManifestEntry, dsp: DSPConfig = DSPConfig(),
                   trim: TrimConfig = TrimConfig(), base: AudioClip | None = None) -> np.ndarray:
    try:
        return extract_feature_vector(materialize(entry, dsp, trim, base), dsp)
    except (SERError, ValueError, OSError) as exc:
        raise _with_entry(exc, entry) from exc


def _group_job(args):
    """Features for entries sharing one source file; the file is decoded once."""
    entries, dsp, trim = args
    try:
        base = base_clip(entries[0], dsp, trim)
    except (SERError, ValueError, OSError) as exc:
        raise _with_entry(exc, entries[0]) from exc
    return [entry_features(e, dsp, trim, base) for e in entries]


def extract_table(manifest: DatasetManifest, dsp: DSPConfig = DSPConfig(),
                  trim: TrimConfig = TrimConfig(), workers: int | None = None) -> FeatureTable:
    """Feature vectors for every entry, in manifest order.

    Entries reading the same file with the same preprocessing flag are
    handled together. ``workers`` > 1 spreads those groups over a process
    pool; ``None`` uses the CPU count and 1 runs in-process. Results do not
    depend on the count.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    groups: dict = {}
    for i, e in enumerate(manifest):
        groups.setdefault((e.path, e.preprocess), []).append(i)
    order = list(groups.values())
    jobs = [([manifest[i] for i in idx], dsp, trim) for idx in order]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(jobs) // (4 * workers))
            results = list(pool.map(_group_job, jobs, chunksize=chunk))
    else:
        results = [_group_job(j) for j in jobs]
    X = np.empty((len(manifest), N_FEATURES))
    for idx, rows in zip(order, results):
        X[idx] = rows
    return FeatureTable([e.source_id for e in manifest], manifest.labels, X)


def trim_entry_to_file(entry: ManifestEntry, out_path, dsp: DSPConfig = DSPConfig(),
                       trim: TrimConfig = TrimConfig()) -> ManifestEntry:
    """Write the trimmed, resampled audio of ``entry`` and point a copy of it there."""
    clip = decode_wav(entry.path)
    clip = trim_silence(clip, trim.threshold_db, trim.min_silence_ms, trim.keep_fraction)
    write_wav(out_path, resample(clip, dsp.sample_rate))
    return replace(entry, path=str(out_path), preprocess=False)
