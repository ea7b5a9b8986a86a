"""Hot numeric kernels: numba-jitted implementations with a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``CONCEPTRAY_DISABLE_NUMBA`` is unset/empty; set it to any
non-empty value to force the numpy path. Both paths perform the same
arithmetic in the same per-element order, so results agree bit-for-bit on
the resize kernel and index-for-index on the neighbor kernels.
``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled() -> bool:
    return _HAVE_NUMBA and not os.environ.get("CONCEPTRAY_DISABLE_NUMBA")


# ---------------------------------------------------------------------------
# Bilinear resize (half-pixel-center convention; exact identity at scale 1)
# ---------------------------------------------------------------------------


def bilinear_resize_numpy(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    sy = h / out_h
    sx = w / out_w
    ys = np.clip((np.arange(out_h) + 0.5) * sy - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * sx - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = ys - y0
    wx = xs - x0
    top = img[y0][:, x0] * (1.0 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1.0 - wx) + img[y1][:, x1] * wx
    return top * (1.0 - wy)[:, None] + bot * wy[:, None]


@njit(cache=True)
def _bilinear_resize_jit(img, out_h, out_w):  # pragma: no cover - exercised via dispatch
    h, w = img.shape
    sy = h / out_h
    sx = w / out_w
    out = np.empty((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        y = (i + 0.5) * sy - 0.5
        if y < 0.0:
            y = 0.0
        if y > h - 1.0:
            y = h - 1.0
        y0 = int(np.floor(y))
        y1 = min(y0 + 1, h - 1)
        wy = y - y0
        for j in range(out_w):
            x = (j + 0.5) * sx - 0.5
            if x < 0.0:
                x = 0.0
            if x > w - 1.0:
                x = w - 1.0
            x0 = int(np.floor(x))
            x1 = min(x0 + 1, w - 1)
            wx = x - x0
            top = img[y0, x0] * (1.0 - wx) + img[y0, x1] * wx
            bot = img[y1, x0] * (1.0 - wx) + img[y1, x1] * wx
            out[i, j] = top * (1.0 - wy) + bot * wy
    return out


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-D float grid with bilinear interpolation."""
    if numba_enabled():
        return _bilinear_resize_jit(np.ascontiguousarray(img, dtype=np.float64), out_h, out_w)
    return bilinear_resize_numpy(img, out_h, out_w)


# ---------------------------------------------------------------------------
# Nearest neighbors over a point set (squared euclidean, lowest-index ties)
# ---------------------------------------------------------------------------


def nearest_neighbor_indices_numpy(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        d = np.sum((x - x[i]) ** 2, axis=1)
        d[i] = np.inf
        out[i] = int(np.argmin(d))
    return out


@njit(cache=True)
def _nearest_neighbor_indices_jit(x):  # pragma: no cover - exercised via dispatch
    n, m = x.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = -1
        best_d = np.inf
        for j in range(n):
            if j == i:
                continue
            d = 0.0
            for k in range(m):
                diff = x[i, k] - x[j, k]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = j
        out[i] = best
    return out


def nearest_neighbor_indices(x: np.ndarray) -> np.ndarray:
    """For each row, the index of its nearest other row."""
    if x.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if numba_enabled():
        return _nearest_neighbor_indices_jit(np.ascontiguousarray(x, dtype=np.float64))
    return nearest_neighbor_indices_numpy(x)


# ---------------------------------------------------------------------------
# One-pass 1-NN condensation (store grows as misclassified points are added)
# ---------------------------------------------------------------------------


def condense_1nn_numpy(
    x: np.ndarray, labels: np.ndarray, store: np.ndarray, candidates: np.ndarray
) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    store = store.astype(bool).copy()
    for idx in candidates:
        rows = np.flatnonzero(store)
        d = np.sum((x[rows] - x[idx]) ** 2, axis=1)
        j = rows[int(np.argmin(d))]
        if labels[j] != labels[idx]:
            store[idx] = True
    return store


@njit(cache=True)
def _condense_1nn_jit(x, labels, store, candidates):  # pragma: no cover - via dispatch
    n, m = x.shape
    out = store.copy()
    for c in range(candidates.shape[0]):
        idx = candidates[c]
        best = -1
        best_d = np.inf
        for j in range(n):
            if not out[j]:
                continue
            d = 0.0
            for k in range(m):
                diff = x[idx, k] - x[j, k]
                d += diff * diff
            if d < best_d:
                best_d = d
                best = j
        if labels[best] != labels[idx]:
            out[idx] = True
    return out


def condense_1nn(
    x: np.ndarray, labels: np.ndarray, store: np.ndarray, candidates: np.ndarray
) -> np.ndarray:
    """Grow ``store`` by one sequential 1-NN pass over ``candidates``.

    Each candidate is classified against the current store; a misclassified
    candidate joins the store. Returns the final store mask.
    """
    if not store.any():
        raise ValueError("initial store must be non-empty")
    if numba_enabled():
        return _condense_1nn_jit(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(labels, dtype=np.int64),
            store.astype(np.bool_),
            np.ascontiguousarray(candidates, dtype=np.int64),
        )
    return condense_1nn_numpy(x, labels, store, candidates)
