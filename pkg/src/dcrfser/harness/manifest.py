"""Labelled clip inventories and per-corpus filename grammars."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from ..errors import DataError, EmptyCorpus

log = logging.getLogger(__name__)


class Emotion(IntEnum):
    NEUTRAL = 0
    HAPPY = 1
    SAD = 2
    ANGRY = 3
    FEAR = 4
    DISGUST = 5
    SURPRISE = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "Emotion":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown emotion label {name!r}") from None


EMOTIONS = tuple(e.label for e in Emotion)
CORPORA = ("RAVDESS", "TESS", "SAVEE", "EMODB", "CREMAD")

# Per-corpus class counts of the reference subsets (neutral ... surprise).
REFERENCE_COUNTS = {
    "RAVDESS": (96, 192, 192, 192, 192, 192, 192),
    "TESS": (400, 400, 400, 400, 400, 400, 400),
    "SAVEE": (120, 60, 60, 60, 60, 60, 60),
    "EMODB": (79, 71, 62, 127, 69, 46, 0),
    "CREMAD": (1087, 1271, 1271, 1271, 1271, 1271, 0),
    "R+T+S": (616, 652, 652, 652, 652, 652, 652),
    "R+T+S+E+C": (1782, 1994, 1985, 2050, 1992, 1969, 652),
}


@dataclass(frozen=True)
class ManifestEntry:
    source_id: str
    path: str
    corpus: str
    label: str
    augmentation: str | None = None
    preprocess: bool = False
    seed: int | None = None

    @property
    def label_index(self) -> int:
        return int(Emotion.parse(self.label))

    @property
    def origin(self) -> str:
        """Id of the unaugmented clip this entry derives from."""
        return self.source_id.split("~", 1)[0]


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    excluded: int = 0

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.label not in EMOTIONS:
                raise ValueError(f"{e.source_id}: label {e.label!r} outside the label set")
            if e.source_id in seen:
                raise ValueError(f"duplicate source_id {e.source_id!r}")
            seen.add(e.source_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label_index for e in self.entries], dtype=np.int64)

    def class_counts(self) -> dict[str, int]:
        c = Counter(e.label for e in self.entries)
        return {name: c.get(name, 0) for name in EMOTIONS}

    def subset(self, indices) -> "DatasetManifest":
        return DatasetManifest([self.entries[i] for i in indices])

    def map(self, fn) -> "DatasetManifest":
        return DatasetManifest([fn(e) for e in self.entries])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(asdict(e), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    entries.append(ManifestEntry(**json.loads(line)))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise DataError(f"{path}:{lineno}: bad manifest row ({exc})") from exc
        return cls(entries)

    def concat(self, other: "DatasetManifest") -> "DatasetManifest":
        return DatasetManifest(self.entries + other.entries,
                               self.skipped + other.skipped,
                               self.excluded + other.excluded)


# -- filename grammars -------------------------------------------------------
# Each parser returns an emotion label, None for an excluded class, or raises
# ValueError for a name it cannot read.

_RAVDESS = re.compile(r"^(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})$")
_RAVDESS_EMO = {"01": "neutral", "02": None, "03": "happy", "04": "sad", "05": "angry",
                "06": "fear", "07": "disgust", "08": "surprise"}

_TESS_EMO = {"angry": "angry", "disgust": "disgust", "fear": "fear", "happy": "happy",
             "neutral": "neutral", "ps": "surprise", "sad": "sad"}

_SAVEE = re.compile(r"^(?:[A-Za-z]{2}_)?(sa|su|a|d|f|h|n)(\d+)$")
_SAVEE_EMO = {"a": "angry", "d": "disgust", "f": "fear", "h": "happy", "n": "neutral",
              "sa": "sad", "su": "surprise"}

_EMODB = re.compile(r"^(\d{2})([a-z]\d{2})([A-Z])([a-z])$")
_EMODB_EMO = {"W": "angry", "E": "disgust", "A": "fear", "F": "happy", "T": "sad",
              "N": "neutral", "L": None}

_CREMAD = re.compile(r"^(\d{4})_([A-Z]{3})_([A-Z]{3})_([A-Z]{2})$")
_CREMAD_EMO = {"ANG": "angry", "DIS": "disgust", "FEA": "fear", "HAP": "happy",
               "NEU": "neutral", "SAD": "sad"}


def _lookup(table, key, stem):
    if key not in table:
        raise ValueError(f"unknown emotion code {key!r} in {stem!r}")
    return table[key]


def parse_ravdess(stem: str):
    m = _RAVDESS.match(stem)
    if not m:
        raise ValueError(f"not a RAVDESS name: {stem!r}")
    if m.group(2) != "01":
        raise ValueError(f"not a speech recording: {stem!r}")
    return _lookup(_RAVDESS_EMO, m.group(3), stem)


def parse_tess(stem: str):
    return _lookup(_TESS_EMO, stem.rsplit("_", 1)[-1].lower(), stem)


def parse_savee(stem: str):
    m = _SAVEE.match(stem)
    if not m:
        raise ValueError(f"not a SAVEE name: {stem!r}")
    return _SAVEE_EMO[m.group(1)]


def parse_emodb(stem: str):
    m = _EMODB.match(stem)
    if not m:
        raise ValueError(f"not an EmoDB name: {stem!r}")
    return _lookup(_EMODB_EMO, m.group(3), stem)


def parse_cremad(stem: str):
    m = _CREMAD.match(stem)
    if not m:
        raise ValueError(f"not a CREMA-D name: {stem!r}")
    return _lookup(_CREMAD_EMO, m.group(3), stem)


PARSERS = {"RAVDESS": parse_ravdess, "TESS": parse_tess, "SAVEE": parse_savee,
           "EMODB": parse_emodb, "CREMAD": parse_cremad}


def normalize_corpus(name: str) -> str:
    key = name.upper().replace("-", "").replace("_", "")
    if key in PARSERS:
        return key
    raise ValueError(f"unknown corpus {name!r}; expected one of {', '.join(CORPORA)}")


def build_manifest(corpus_roots: dict) -> DatasetManifest:
    """Scan corpus directories and label every WAV by its filename.

    Calm (RAVDESS) and boredom (EmoDB) recordings are dropped and counted in
    ``excluded``. Files whose names do not parse are listed in ``skipped``.

    Raises
    ------
    EmptyCorpus
        A root yielded no parseable file.
    """
    manifest = DatasetManifest()
    for corpus, root in corpus_roots.items():
        corpus = normalize_corpus(corpus)
        parse = PARSERS[corpus]
        root = Path(root)
        if not root.is_dir():
            raise DataError(f"{corpus} root {root} is not a directory")
        entries, skipped, excluded = [], [], 0
        for path in sorted(root.rglob("*")):
            if not path.is_file() or path.suffix.lower() != ".wav":
                continue
            rel = path.relative_to(root).with_suffix("").as_posix()
            try:
                label = parse(path.stem)
            except ValueError as exc:
                skipped.append((str(path), str(exc)))
                log.warning("skipping %s: %s", path, exc)
                continue
            if label is None:
                excluded += 1
                continue
            entries.append(ManifestEntry(f"{corpus}/{rel}", str(path), corpus, label))
        if not entries:
            raise EmptyCorpus(f"no parseable recordings under {root} for {corpus}")
        manifest = manifest.concat(DatasetManifest(entries, skipped, excluded))
    return manifest


def reference_deviations(manifest: DatasetManifest, reference: str) -> dict[str, int]:
    """Per-class count minus the reference subset count; empty when matching."""
    expected = dict(zip(EMOTIONS, REFERENCE_COUNTS[reference]))
    actual = manifest.class_counts()
    return {k: actual[k] - expected[k] for k in EMOTIONS if actual[k] != expected[k]}
