import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqnet.tensor import TensorShapeError
from freqnet.transforms import (
    TransformKind,
    apply,
    dct2_naive,
    dct2_ortho,
    dct2_via_fft,
    dct_2d,
    dct_matrix,
    dft_naive,
    fft,
    fft2d_magnitude,
    hadamard_matrix,
    idct_2d,
    ifft,
    iwht2d,
    iwht2d_unnormalized,
    normalize,
    wht2d,
)


def walsh_oracle(n):
    """H[i, j] = (-1)^popcount(i & j), independent of the recursive build."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    bits = np.vectorize(lambda v: bin(v).count("1"))(i & j)
    return (-1) ** bits


def dense_wht_oracle(slab):
    h, w = slab.shape
    return (walsh_oracle(h) / np.sqrt(h)) @ slab @ (walsh_oracle(w) / np.sqrt(w))


def dft2_oracle(slab):
    def fmat(n):
        k = np.arange(n)
        return np.exp(-2j * np.pi * np.outer(k, k) / n)

    h, w = slab.shape
    return fmat(h) @ slab @ fmat(w)


def slab(x):
    return np.asarray(x, dtype=np.float64)[None, :, :, None]


# --- Hadamard ---------------------------------------------------------------


def test_hadamard_small_cases():
    np.testing.assert_array_equal(hadamard_matrix(1), [[1]])
    np.testing.assert_array_equal(hadamard_matrix(2), [[1, 1], [1, -1]])
    np.testing.assert_array_equal(hadamard_matrix(4), [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]])
    h = hadamard_matrix(4)
    np.testing.assert_array_equal(h @ h.T, 4 * np.eye(4, dtype=np.int64))


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64])
def test_hadamard_properties(n):
    h = hadamard_matrix(n)
    assert h.dtype.kind == "i"
    np.testing.assert_array_equal(h, walsh_oracle(n))
    np.testing.assert_array_equal(h, h.T)
    np.testing.assert_array_equal(h @ h.T, n * np.eye(n, dtype=np.int64))
    hn = normalize(h)
    np.testing.assert_allclose(hn @ hn.T, np.eye(n), atol=1e-12)


@pytest.mark.parametrize("n", [0, 3, 6, 12, -4])
def test_hadamard_rejects_non_power_of_two(n):
    with pytest.raises(ValueError):
        hadamard_matrix(n)


def test_normalize_values():
    np.testing.assert_allclose(np.abs(normalize(hadamard_matrix(2))), 1 / np.sqrt(2))
    np.testing.assert_allclose(np.abs(normalize(hadamard_matrix(4))), 0.5)
    hn = normalize(hadamard_matrix(8))
    np.testing.assert_allclose(hn @ hn, np.eye(8), atol=1e-12)


def test_normalize_rejects_normalized_input():
    with pytest.raises(ValueError):
        normalize(normalize(hadamard_matrix(4)))


# --- WHT --------------------------------------------------------------------


def test_wht_all_ones():
    out = wht2d(slab(np.ones((4, 4))))[0, :, :, 0]
    expected = np.zeros((4, 4))
    expected[0, 0] = 4.0
    np.testing.assert_allclose(out, expected, atol=1e-12)
    np.testing.assert_allclose(out, dense_wht_oracle(np.ones((4, 4))), atol=1e-12)


def test_wht_delta():
    e = np.zeros((4, 4))
    e[0, 0] = 1
    np.testing.assert_allclose(wht2d(slab(e))[0, :, :, 0], np.full((4, 4), 0.25), atol=1e-12)


def test_wht_zeros():
    assert np.all(wht2d(np.zeros((2, 4, 8, 3))) == 0)
    assert np.all(iwht2d(np.zeros((2, 4, 8, 3))) == 0)


def test_wht_matches_dense_oracle_rectangular(rng):
    x = rng.standard_normal((2, 4, 16, 3))
    out = wht2d(x)
    for b in range(2):
        for c in range(3):
            np.testing.assert_allclose(out[b, :, :, c], dense_wht_oracle(x[b, :, :, c]), atol=1e-12)


def test_wht_roundtrip_double_and_single(rng):
    x = rng.standard_normal((1, 8, 8, 1))
    np.testing.assert_allclose(iwht2d(wht2d(x)), x, atol=1e-12)
    x32 = x.astype(np.float32)
    y = iwht2d(wht2d(x32))
    assert y.dtype == np.float32
    np.testing.assert_allclose(y, x32, atol=1e-6)


def test_wht_unnormalized_inverse_agrees(rng):
    x = rng.standard_normal((4, 4))
    h = hadamard_matrix(4)
    forward_unnorm = h @ x @ h
    np.testing.assert_allclose(iwht2d_unnormalized(forward_unnorm), x, atol=1e-12)
    y = rng.standard_normal((4, 4))
    # same map up to the normalization: H Y H^T / n^2 == iwht2d(Y) / n
    np.testing.assert_allclose(iwht2d_unnormalized(y) * 4, iwht2d(slab(y))[0, :, :, 0], atol=1e-12)
    np.testing.assert_allclose(iwht2d_unnormalized(h @ x @ h), iwht2d(wht2d(slab(x)))[0, :, :, 0], atol=1e-12)


def test_wht_rejects_non_power_of_two():
    with pytest.raises(TensorShapeError):
        wht2d(np.zeros((1, 6, 8, 1)))


def test_wht_involution_single_precision(rng):
    x = rng.standard_normal((2, 32, 32, 3)).astype(np.float32)
    y = wht2d(wht2d(x))
    assert y.dtype == np.float32
    assert np.max(np.abs(y - x)) < 1e-6


# --- DCT --------------------------------------------------------------------


def test_dct_naive_examples():
    np.testing.assert_allclose(dct2_naive([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-12)
    np.testing.assert_array_equal(dct2_naive([0, 0]), [0, 0])
    np.testing.assert_allclose(dct2_naive([3.5]), [3.5])


@pytest.mark.parametrize("fn", [dct2_naive, dct2_ortho, dct2_via_fft, dft_naive])
def test_empty_input_rejected(fn):
    with pytest.raises(ValueError):
        fn([])


def test_dct_ortho_examples(rng):
    np.testing.assert_allclose(dct2_ortho([1, 1, 1, 1]), [2, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dct2_ortho([1, 0]), [1 / np.sqrt(2), np.cos(np.pi / 4)], atol=1e-12)
    np.testing.assert_allclose(dct2_ortho([1, 0]), [0.70711, 0.70711], atol=1e-5)
    x = rng.standard_normal(16)
    assert abs(np.linalg.norm(dct2_ortho(x)) - np.linalg.norm(x)) < 1e-12


def test_dct_via_fft_examples(rng):
    np.testing.assert_allclose(dct2_via_fft([1, 1, 1, 1]), [2, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dct2_via_fft([2.5]), [2.5], atol=1e-12)
    x = rng.standard_normal(8)
    assert np.max(np.abs(dct2_via_fft(x) - dct2_ortho(x))) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8, 12, 16, 64])
def test_dct_routes_agree(n, rng):
    x = rng.standard_normal(n)
    scale = np.full(n, np.sqrt(2 / n))
    scale[0] = np.sqrt(1 / n)
    ref = scale * dct2_naive(x)
    assert np.max(np.abs(dct2_ortho(x) - ref)) < 1e-10
    assert np.max(np.abs(dct2_via_fft(x) - ref)) < 1e-10
    assert np.max(np.abs(dct_matrix(n) @ x - ref)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 7, 16, 33, 64])
def test_dct_matrix_orthogonal(n):
    # columns are dct2_ortho of the unit vectors, so this checks the kernel itself
    g = np.stack([dct2_ortho(e) for e in np.eye(n)], axis=1)
    np.testing.assert_allclose(g.T @ g, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(dct_matrix(n), g, atol=1e-12)


def test_dct_2d_examples(rng):
    out = dct_2d(slab(np.ones((4, 4))))[0, :, :, 0]
    expected = np.zeros((4, 4))
    expected[0, 0] = 4.0
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert np.all(dct_2d(np.zeros((1, 3, 5, 2))) == 0)
    x = rng.standard_normal((1, 64, 64, 1)).astype(np.float32)
    y = dct_2d(x)
    assert abs(np.sum(y.astype(np.float64) ** 2) / np.sum(x.astype(np.float64) ** 2) - 1) < 1e-5


def test_dct_2d_separable_oracle(rng):
    x = rng.standard_normal((2, 5, 6, 3))
    out = dct_2d(x)
    for b in range(2):
        for c in range(3):
            s = x[b, :, :, c]
            rows = np.stack([dct2_naive(r) for r in s])
            both = np.stack([dct2_naive(col) for col in rows.T]).T
            sh = np.full(5, np.sqrt(2 / 5)); sh[0] = np.sqrt(1 / 5)
            sw = np.full(6, np.sqrt(2 / 6)); sw[0] = np.sqrt(1 / 6)
            np.testing.assert_allclose(out[b, :, :, c], sh[:, None] * both * sw[None, :], atol=1e-12)
    np.testing.assert_allclose(idct_2d(out), x, atol=1e-12)


# --- Fourier ----------------------------------------------------------------


def test_dft_examples():
    np.testing.assert_allclose(dft_naive([1, 0, 0, 0]), np.ones(4), atol=1e-15)
    np.testing.assert_allclose(dft_naive(np.full(6, 2.5)), [15, 0, 0, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dft_naive([1, -1]), [0, 2], atol=1e-15)


def test_fft_examples(rng):
    np.testing.assert_allclose(fft([1, 0, 0, 0, 0, 0, 0, 0]), np.ones(8), atol=1e-15)
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert np.max(np.abs(fft(x) - dft_naive(x))) < 1e-12
    np.testing.assert_allclose(ifft(fft(x)), x, atol=1e-12)


@pytest.mark.parametrize("n", [3, 6, 12, 0])
def test_fft_rejects_non_power_of_two(n):
    with pytest.raises(ValueError):
        fft(np.ones(n))


def test_fft_parseval(rng):
    for n in (1, 2, 64, 1024):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ex, eX = np.sum(np.abs(x) ** 2), np.sum(np.abs(fft(x)) ** 2)
        assert abs(eX - n * ex) / (n * ex) < 1e-9


def test_fft_along_axis(rng):
    x = rng.standard_normal((3, 8, 5))
    out = fft(x, axis=1)
    for i in range(3):
        for j in range(5):
            np.testing.assert_allclose(out[i, :, j], dft_naive(x[i, :, j]), atol=1e-12)


def test_fft2d_magnitude_examples(rng):
    out = fft2d_magnitude(slab(np.ones((8, 8))))[0, :, :, 0]
    expected = np.zeros((8, 8))
    expected[0, 0] = 64.0
    np.testing.assert_allclose(out, expected, atol=1e-12)
    np.testing.assert_allclose(out, np.abs(dft2_oracle(np.ones((8, 8)))), atol=1e-12)
    assert np.all(fft2d_magnitude(np.zeros((1, 4, 4, 2))) == 0)
    x = rng.standard_normal((8, 8))
    ref = fft2d_magnitude(slab(x))[0, :, :, 0]
    np.testing.assert_allclose(ref, np.abs(dft2_oracle(x)), atol=1e-12)
    for dy in range(8):
        for dx in (0, 3, 5):
            shifted = np.roll(x, (dy, dx), axis=(0, 1))
            np.testing.assert_allclose(fft2d_magnitude(slab(shifted))[0, :, :, 0], ref, atol=1e-11)


def test_fft2d_magnitude_precision():
    assert fft2d_magnitude(np.ones((1, 4, 4, 1), np.float32)).dtype == np.float32
    assert fft2d_magnitude(np.ones((1, 4, 4, 1))).dtype == np.float64
    with pytest.raises(TensorShapeError):
        fft2d_magnitude(np.ones((1, 5, 4, 1)))


# --- properties ---------------------------------------------------------------

dims = st.sampled_from([1, 2, 4, 8])


@settings(max_examples=40, deadline=None)
@given(h=dims, w=dims, a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10_000))
def test_linearity(h, w, a, b, seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal((2, 2, h, w, 2))
    for fn in (wht2d, dct_2d):
        np.testing.assert_allclose(fn(a * x + b * y), a * fn(x) + b * fn(y), atol=1e-10)
    v, u = r.standard_normal((2, h * w))
    np.testing.assert_allclose(fft(a * v + b * u), a * fft(v) + b * fft(u), atol=1e-10)
    np.testing.assert_allclose(dct2_via_fft(a * v + b * u), a * dct2_via_fft(v) + b * dct2_via_fft(u), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(h=dims, w=dims, a=st.floats(0, 5), seed=st.integers(0, 10_000))
def test_fft_magnitude_positively_homogeneous(h, w, a, seed):
    x = np.random.default_rng(seed).standard_normal((1, h, w, 2))
    np.testing.assert_allclose(fft2d_magnitude(a * x), a * fft2d_magnitude(x), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(b=st.integers(1, 2), h=st.sampled_from([1, 2, 4, 8, 16, 32]), w=st.sampled_from([1, 2, 4, 8, 16, 32]),
       c=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_wht_involution_property(b, h, w, c, seed):
    x = np.random.default_rng(seed).standard_normal((b, h, w, c)).astype(np.float32)
    np.testing.assert_allclose(wht2d(wht2d(x)), x, atol=1e-6)


def test_transform_kind_parse():
    assert TransformKind.parse("WHT") is TransformKind.WHT
    assert TransformKind.parse("dct2_ortho") is TransformKind.DCT2_ORTHO
    with pytest.raises(ValueError):
        TransformKind.parse("haar")
    np.testing.assert_allclose(apply("dct", slab(np.ones((4, 4))))[0, 0, 0, 0], 4.0)
