"""Label-stratified holdout splits and k-fold partitions.

Both work on an integer label array and, optionally, a parallel array of
group keys. Members of one group always land on the same side; a group's
label is the label of its first member.
"""
from __future__ import annotations

import numpy as np

from ..errors import ClassTooSmall, TooFewEntries


def _units(labels, groups):
    """Collapse entries into groups; returns (unit labels, list of member index arrays)."""
    labels = np.asarray(labels, dtype=np.int64)
    if groups is None:
        return labels, [np.array([i]) for i in range(labels.size)]
    keys, first, inverse = np.unique(np.asarray(groups), return_index=True, return_inverse=True)
    order = np.argsort(first)  # keep first-appearance order for determinism
    members = [np.flatnonzero(inverse == j) for j in order]
    return labels[first[order]], members


def _expand(members, unit_idx):
    if len(unit_idx) == 0:
        return np.array([], dtype=np.int64)
    return np.sort(np.concatenate([members[u] for u in unit_idx]))


def stratified_split(labels, train_fraction: float = 0.8, seed: int = 0, groups=None,
                     stratified: bool = True):
    """Indices ``(train, test)`` with each class split at ``train_fraction``.

    Per-class train counts are ``round(train_fraction * n_c)`` clamped so
    both sides get at least one unit of every class.

    Raises
    ------
    ClassTooSmall
        A class has fewer than two units when stratifying.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    unit_labels, members = _units(labels, groups)
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(unit_labels.size)
        n_train = int(round(train_fraction * perm.size))
        return _expand(members, perm[:n_train]), _expand(members, perm[n_train:])
    train, test = [], []
    for c in np.unique(unit_labels):
        idx = np.flatnonzero(unit_labels == c)
        if idx.size < 2:
            raise ClassTooSmall(f"class {int(c)} has {idx.size} entry; stratified split needs 2")
        idx = rng.permutation(idx)
        n_train = min(max(int(round(train_fraction * idx.size)), 1), idx.size - 1)
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return _expand(members, train), _expand(members, test)


def stratified_kfold(labels, k: int = 5, seed: int = 0, groups=None):
    """List of ``(train, validation)`` index pairs.

    Each class is shuffled and dealt round-robin over the folds, starting
    where the previous class stopped, so fold sizes differ by at most one
    and per-class fold counts differ by at most one.

    Raises
    ------
    TooFewEntries
        Fewer units than folds.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    unit_labels, members = _units(labels, groups)
    if unit_labels.size < k:
        raise TooFewEntries(f"{unit_labels.size} entries cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(unit_labels):
        idx = rng.permutation(np.flatnonzero(unit_labels == c))
        for i, u in enumerate(idx):
            folds[(offset + i) % k].append(u)
        offset = (offset + idx.size) % k
    out = []
    for f in range(k):
        val = _expand(members, folds[f])
        train = _expand(members, [u for g in range(k) if g != f for u in folds[g]])
        out.append((train, val))
    return out
