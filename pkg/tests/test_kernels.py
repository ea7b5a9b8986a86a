import numpy as np
import pytest

from conceptray import _kernels as K


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(1234)


def test_resize_identity_same_size(rng):
    img = rng.uniform(0, 1, (40, 40))
    out = K.bilinear_resize_numpy(img, 40, 40)
    np.testing.assert_array_equal(out, img)


def test_resize_constant_preserved(rng):
    img = np.full((30, 50), 0.37)
    out = K.bilinear_resize_numpy(img, 17, 23)
    np.testing.assert_allclose(out, 0.37, rtol=0, atol=1e-15)


def test_resize_linear_ramp_exact_in_interior():
    """Bilinear interpolation reproduces affine images away from clamped edges."""
    h = w = 32
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = 0.3 * xx + 0.1 * yy + 2.0
    out = K.bilinear_resize_numpy(img, 64, 64)
    ys = np.clip((np.arange(64) + 0.5) * (h / 64) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(64) + 0.5) * (w / 64) - 0.5, 0, w - 1)
    expected = 0.3 * xs[None, :] + 0.1 * ys[:, None] + 2.0
    interior = (slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(out[interior], expected[interior], atol=1e-12)


def test_resize_numba_matches_numpy_bitwise(rng):
    if not K.numba_enabled():
        pytest.skip("numba disabled in this environment")
    for shape, target in [((17, 31), (64, 8)), ((64, 64), (32, 32)), ((9, 9), (27, 5))]:
        img = rng.uniform(0, 1, shape)
        a = K.bilinear_resize_numpy(img, *target)
        b = K._bilinear_resize_jit(np.ascontiguousarray(img), *target)
        np.testing.assert_array_equal(a, b)


def test_nearest_neighbor_matches_bruteforce(rng):
    x = rng.normal(size=(40, 6))
    got = K.nearest_neighbor_indices_numpy(x)
    for i in range(40):
        d = [np.inf if j == i else float(np.sum((x[i] - x[j]) ** 2)) for j in range(40)]
        assert got[i] == int(np.argmin(d))


def test_nearest_neighbor_numba_matches_numpy(rng):
    if not K.numba_enabled():
        pytest.skip("numba disabled in this environment")
    x = rng.normal(size=(60, 8))
    np.testing.assert_array_equal(
        K.nearest_neighbor_indices_numpy(x), K._nearest_neighbor_indices_jit(x)
    )


def test_condense_matches_between_paths(rng):
    if not K.numba_enabled():
        pytest.skip("numba disabled in this environment")
    x = rng.normal(size=(50, 4))
    labels = (rng.random(50) < 0.7).astype(np.int64)
    store = labels == 0
    if not store.any():
        store[0] = True
    candidates = np.flatnonzero(labels == 1).astype(np.int64)
    a = K.condense_1nn_numpy(x, labels, store, candidates)
    b = K._condense_1nn_jit(x, labels.astype(np.int64), store.astype(np.bool_), candidates)
    np.testing.assert_array_equal(a, b)


def test_condense_requires_store():
    x = np.zeros((3, 2))
    with pytest.raises(ValueError):
        K.condense_1nn(x, np.zeros(3, dtype=np.int64), np.zeros(3, dtype=bool), np.array([0]))


def test_env_flag_switches_path(monkeypatch):
    monkeypatch.setenv("CONCEPTRAY_DISABLE_NUMBA", "1")
    assert not K.numba_enabled()
    monkeypatch.delenv("CONCEPTRAY_DISABLE_NUMBA")
    assert K.numba_enabled() == K._HAVE_NUMBA
