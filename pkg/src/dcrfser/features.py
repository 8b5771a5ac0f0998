"""Fixed 190-slot clip descriptor, standardization, PCA and the feature store."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .errors import ClipTooShort, DataError, FeatureStoreMissing, NonFiniteInput

# name -> width, in storage order
SEGMENTS = (
    ("mfcc_mean", 20),
    ("mfcc_delta_mean", 20),
    ("mfcc_delta2_mean", 20),
    ("mfcc_std", 20),
    ("chroma_stft_mean", 12),
    ("chroma_cqt_mean", 12),
    ("chroma_cens_mean", 12),
    ("logmel_mean", 64),
    ("spectral_contrast_mean", 6),
    ("rmse_stats", 3),
    ("zcr_mean", 1),
)


def _offsets(segments):
    out, pos = {}, 0
    for name, width in segments:
        out[name] = slice(pos, pos + width)
        pos += width
    return out, pos


LAYOUT, N_FEATURES = _offsets(SEGMENTS)
# family totals: MFCC 80, chroma 36, log-mel 64, contrast 6, energy 3, ZCR 1
FAMILY_WIDTHS = (80, 36, 64, 6, 3, 1)
assert N_FEATURES == sum(FAMILY_WIDTHS) == 190


def segment(vector, name: str) -> np.ndarray:
    return np.asarray(vector)[..., LAYOUT[name]]


@dataclass(frozen=True)
class DSPConfig:
    sample_rate: int = 22050
    n_fft: int = 512
    hop: int = 220
    n_mfcc: int = 20
    n_mfcc_mels: int = 26
    n_logmel: int = 64
    delta_width: int = 9
    rms_frame: int = 2048
    rms_hop: int = 512
    cqt_hop: int = 512
    cqt_fmin: float = dsp.C1_HZ
    cqt_octaves: int = 7
    cens_smooth: int = 41
    pseudo_cqt: bool = False
    contrast_bands: int = 6
    contrast_fmin: float = 200.0
    contrast_quantile: float = 0.02


def extract_feature_vector(clip, config: DSPConfig = DSPConfig()) -> np.ndarray:
    """Summarize a preprocessed clip as a 190-vector laid out per ``SEGMENTS``.

    Frame-level features are averaged over time; the MFCC block also gets a
    per-coefficient standard deviation and frame RMS contributes its mean,
    standard deviation and maximum.
    """
    if clip.sample_rate != config.sample_rate:
        raise ValueError(f"clip is at {clip.sample_rate} Hz; resample to "
                         f"{config.sample_rate} Hz before extraction")
    spec = dsp.stft(clip, config.n_fft, config.hop)
    if spec.magnitudes.shape[0] < 1:
        raise ClipTooShort(f"{clip.source_id}: no analysis frame")
    mf = dsp.mfcc(clip, config.n_mfcc, config.n_mfcc_mels, spec=spec)
    d1 = dsp.delta(mf, config.delta_width, order=1)
    d2 = dsp.delta(mf, config.delta_width, order=2)
    cqt_kw = dict(hop=config.cqt_hop, fmin=config.cqt_fmin, n_octaves=config.cqt_octaves,
                  pseudo=config.pseudo_cqt)
    raw_chroma = dsp.cqt_chroma_raw(clip, **cqt_kw)
    rms = dsp.rmse_frames(clip, config.rms_frame, config.rms_hop)
    zcr = dsp.zcr_frames(clip, config.rms_frame, config.rms_hop)
    parts = [
        mf.mean(axis=0),
        d1.mean(axis=0),
        d2.mean(axis=0),
        mf.std(axis=0),
        dsp.chroma_stft(spec).mean(axis=0),
        dsp.chroma_cqt(clip, raw=raw_chroma).mean(axis=0),
        dsp.chroma_cens(clip, smooth=config.cens_smooth, raw=raw_chroma).mean(axis=0),
        dsp.log_mel_spectrogram(clip, config.n_logmel, spec=spec).mean(axis=0),
        dsp.spectral_contrast(spec, config.contrast_bands, config.contrast_fmin,
                              config.contrast_quantile).mean(axis=0),
        np.array([rms.mean(), rms.std(), rms.max()]),
        np.array([zcr.mean()]),
    ]
    vec = np.concatenate(parts)
    if vec.size != N_FEATURES:
        raise ValueError(f"configuration produces {vec.size} features, expected {N_FEATURES}")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteInput(f"{clip.source_id}: non-finite feature values")
    return vec


# -- standardization ---------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds


def fit_standardizer(X) -> Standardizer:
    """Per-column mean and population std; zero-variance columns get std 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two rows to fit a standardizer")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("standardizer input contains NaN or inf")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds > 1e-12 * np.maximum(1.0, np.abs(means)), stds, 1.0)
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    return s.transform(X)


# -- PCA ---------------------------------------------------------------------

@dataclass(frozen=True)
class PCAModel:
    components: np.ndarray  # k x d, orthonormal rows
    explained_variance: np.ndarray  # k, non-increasing
    mean: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.components + self.mean


def pca_fit(X, variance_threshold: float = 0.99, n_components: int | None = None) -> PCAModel:
    """Principal axes of the sample covariance (ddof=1) of ``X``.

    Keeps ``n_components`` axes when given, otherwise the fewest whose
    cumulative explained variance reaches ``variance_threshold``. Each axis
    is signed so that its largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two rows to fit PCA")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("PCA input contains NaN or inf")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T
    total = float(evals.sum())
    if n_components is None:
        if not 0 < variance_threshold <= 1:
            raise ValueError("variance_threshold must be in (0, 1]")
        if total <= 0:
            k = 1
        else:
            cum = np.cumsum(evals) / total
            k = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
            k = min(k, evals.size)
    else:
        k = int(n_components)
        if not 1 <= k <= evals.size:
            raise ValueError(f"n_components must be in [1, {evals.size}]")
    comps = evecs[:k]
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps = comps * np.where(flip == 0, 1.0, flip)[:, None]
    return PCAModel(comps, evals[:k], mean, total)


def pca_transform(model: PCAModel, X) -> np.ndarray:
    return model.transform(X)


# -- feature store -----------------------------------------------------------

@dataclass
class FeatureTable:
    ids: list[str]
    labels: np.ndarray  # int64, -1 when unknown
    X: np.ndarray  # n x d

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.X = np.asarray(self.X)
        if self.X.ndim != 2 or not len(self.ids) == self.X.shape[0] == self.labels.size:
            raise ValueError("ids, labels and rows disagree in length")

    def __len__(self):
        return len(self.ids)

    def subset(self, idx) -> "FeatureTable":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureTable([self.ids[i] for i in idx], self.labels[idx], self.X[idx])


SERF_MAGIC = b"SERF"
SERF_VERSION = 1


def column_names(d: int) -> list[str]:
    return [f"f{i:03d}" for i in range(d)]


def save_csv(table: FeatureTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["source_id", "label"] + column_names(table.X.shape[1]))
        values = table.X.astype(np.float32)
        for sid, lab, row in zip(table.ids, table.labels, values):
            w.writerow([sid, int(lab)] + [format(float(v), ".9g") for v in row])


def load_csv(path) -> FeatureTable:
    path = Path(path)
    if not path.exists():
        raise FeatureStoreMissing(f"no feature store at {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["source_id", "label"]:
        raise DataError(f"{path}: missing source_id,label header")
    header = rows[0]
    if header[2:] != column_names(len(header) - 2):
        raise DataError(f"{path}: feature columns must be f000..f{len(header) - 3:03d}")
    body = rows[1:]
    X = np.array([[np.float32(v) for v in r[2:]] for r in body], dtype=np.float32)
    return FeatureTable([r[0] for r in body], [int(r[1]) for r in body],
                        X.reshape(len(body), len(header) - 2))


def save_serf(table: FeatureTable, path) -> None:
    """Binary layout: magic, version byte, u32 rows, u32 dims, then per row a
    u16-prefixed UTF-8 id, an i16 label and ``dims`` little-endian float32."""
    n, d = table.X.shape
    with open(path, "wb") as fh:
        fh.write(SERF_MAGIC + struct.pack("<BII", SERF_VERSION, n, d))
        values = table.X.astype("<f4")
        for sid, lab, row in zip(table.ids, table.labels, values):
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)) + raw + struct.pack("<h", int(lab)))
            fh.write(row.tobytes())


def load_serf(path) -> FeatureTable:
    path = Path(path)
    if not path.exists():
        raise FeatureStoreMissing(f"no feature store at {path}")
    data = path.read_bytes()
    if data[:4] != SERF_MAGIC or len(data) < 13:
        raise DataError(f"{path}: not a SERF feature store")
    version, n, d = struct.unpack_from("<BII", data, 4)
    if version != SERF_VERSION:
        raise DataError(f"{path}: unsupported SERF version {version}")
    pos = 13
    ids, labels = [], np.empty(n, dtype=np.int64)
    X = np.empty((n, d), dtype=np.float32)
    try:
        for i in range(n):
            (ln,) = struct.unpack_from("<H", data, pos)
            ids.append(data[pos + 2:pos + 2 + ln].decode("utf-8"))
            pos += 2 + ln
            (labels[i],) = struct.unpack_from("<h", data, pos)
            pos += 2
            X[i] = np.frombuffer(data, "<f4", count=d, offset=pos)
            pos += 4 * d
    except (struct.error, ValueError) as exc:
        raise DataError(f"{path}: truncated SERF store") from exc
    return FeatureTable(ids, labels, X)


def save_features(table: FeatureTable, path) -> None:
    (save_csv if str(path).endswith(".csv") else save_serf)(table, path)


def load_features(path) -> FeatureTable:
    return (load_csv if str(path).endswith(".csv") else load_serf)(path)
