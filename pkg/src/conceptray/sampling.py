"""Class-imbalance undersampling via one-sided selection.

Keeps every non-majority record, then prunes the majority class in two
stages: a one-pass 1-NN condensation (seeded with all minority points plus
one random majority point) followed by removal of majority members of
Tomek links inside the condensed set. Deterministic given the seed.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Callable

import numpy as np

from ._kernels import condense_1nn, nearest_neighbor_indices
from .corpus import CaseRecord, preprocess_image

Featurizer = Callable[[CaseRecord], np.ndarray]


def oss_keep_mask(features: np.ndarray, is_majority: np.ndarray, seed: int = 0) -> np.ndarray:
    """Array-level one-sided selection; returns the boolean keep mask.

    ``features`` is (n, d); ``is_majority`` marks majority-class rows. All
    minority rows are kept unconditionally.
    """
    features = np.asarray(features, dtype=np.float64)
    is_majority = np.asarray(is_majority, dtype=bool)
    n = features.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    if not is_majority.any():
        return np.ones(n, dtype=bool)
    if is_majority.all():
        warnings.warn("one-sided selection: single-class input returned unchanged")
        return np.ones(n, dtype=bool)

    rng = np.random.default_rng(seed)
    majority_idx = np.flatnonzero(is_majority)
    seed_pick = int(majority_idx[rng.integers(len(majority_idx))])

    store = ~is_majority
    store[seed_pick] = True
    candidates = np.array([i for i in majority_idx if i != seed_pick], dtype=np.int64)
    labels = is_majority.astype(np.int64)
    store = condense_1nn(features, labels, store, candidates)

    # Tomek links inside the condensed store: mutual nearest neighbors with
    # different classes; drop the majority member of each link.
    rows = np.flatnonzero(store)
    keep = store.copy()
    if len(rows) >= 2:
        nn_local = nearest_neighbor_indices(features[rows])
        for a_local, b_local in enumerate(nn_local):
            b_local = int(b_local)
            a, b = int(rows[a_local]), int(rows[b_local])
            if nn_local[b_local] == a_local and labels[a] != labels[b]:
                if is_majority[a]:
                    keep[a] = False
                if is_majority[b]:
                    keep[b] = False
    return keep


def one_sided_selection(
    records: list[CaseRecord],
    featurize: Featurizer,
    majority_label: str,
    seed: int = 0,
) -> list[CaseRecord]:
    """Undersample the majority class; returns a subset in original order."""
    if not records:
        return []
    labels = [rec.label for rec in records]
    if len(set(labels)) < 2:
        warnings.warn("one-sided selection: fewer than 2 classes, input returned unchanged")
        return list(records)
    is_majority = np.array([lab == majority_label for lab in labels], dtype=bool)
    if not is_majority.any():
        return list(records)
    features = np.stack([np.asarray(featurize(rec), dtype=np.float64).ravel() for rec in records])
    keep = oss_keep_mask(features, is_majority, seed)
    return [rec for rec, k in zip(records, keep) if k]


def default_image_featurizer(base_dir: str | Path | None = None, size: int = 32) -> Featurizer:
    """Default OSS feature space: flattened ``size``x``size`` downsample of the preprocessed image."""
    base = Path(base_dir) if base_dir is not None else None

    def featurize(rec: CaseRecord) -> np.ndarray:
        path = Path(rec.image_path)
        if base is not None and not path.is_absolute():
            path = base / path
        return preprocess_image(path, target_size=size).pixels.astype(np.float64).ravel()

    return featurize
