"""Transform kernels: Walsh-Hadamard, orthonormal DCT-II and radix-2 FFT.

Each fast path has a slow, direct counterpart (``dft_naive``,
``dct2_naive``, ``iwht2d_unnormalized``) that the tests use as an oracle.
"""
from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np

from freqnet.tensor import (
    TensorShapeError,
    check_tensor4,
    is_power_of_two,
    merge_batch_channels,
    permute,
    split_batch_channels,
)


class TransformKind(str, enum.Enum):
    FFT_MAGNITUDE = "fft"
    DCT2_ORTHO = "dct"
    WHT = "wht"

    @classmethod
    def parse(cls, value) -> "TransformKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown transform kind {value!r}; expected one of fft, dct, wht")


# ---------------------------------------------------------------------------
# Walsh-Hadamard


@lru_cache(maxsize=None)
def _sylvester(n: int) -> np.ndarray:
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    h.setflags(write=False)
    return h


def hadamard_matrix(n: int) -> np.ndarray:
    """Unnormalized Sylvester-Hadamard matrix of order ``n`` (entries +-1)."""
    n = int(n)
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    return _sylvester(n).copy()


def normalize(h: np.ndarray) -> np.ndarray:
    """Scale a +-1 Hadamard matrix by 1/sqrt(n), making it orthogonal."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.abs(h) == 1):
        raise ValueError("normalize expects an unnormalized (+-1) Hadamard matrix")
    return h / np.sqrt(h.shape[0])


@lru_cache(maxsize=None)
def _normalized_hadamard(n: int, dtype: str) -> np.ndarray:
    m = normalize(hadamard_matrix(n)).astype(dtype)
    m.setflags(write=False)
    return m


def _require_pow2_spatial(x: np.ndarray, op: str) -> None:
    _, h, w, _ = x.shape
    if not (is_power_of_two(h) and is_power_of_two(w)):
        raise TensorShapeError(f"{op}: height and width must be powers of two, got {h}x{w}; pad first")


def _float_dtype(x: np.ndarray):
    return x.dtype if x.dtype in (np.float32, np.float64) else np.float64


def wht2d(x: np.ndarray) -> np.ndarray:
    """Normalized 2-D Walsh-Hadamard transform of every (batch, channel) slab.

    Per slab ``S`` the result is ``H_h @ S @ H_w`` with normalized matrices.
    """
    x = check_tensor4(x)
    _require_pow2_spatial(x, "wht2d")
    out_dtype = _float_dtype(x)
    b, h, w, c = x.shape
    # accumulate in double, round once to the input precision
    hh = _normalized_hadamard(h, "float64")
    hw = _normalized_hadamard(w, "float64")
    slabs = merge_batch_channels(x.astype(np.float64, copy=False))
    slabs = np.matmul(slabs, hw)  # along width
    slabs = np.matmul(hh, slabs)  # along height
    return split_batch_channels(slabs, b, c).astype(out_dtype, copy=False)


def iwht2d(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`wht2d`; the normalized transform is its own inverse."""
    return wht2d(y)


def iwht2d_unnormalized(x: np.ndarray) -> np.ndarray:
    """``H X H^T / n^2`` with the +-1 matrix, for a square 2-D array.

    This inverts the unnormalized forward map ``H X H`` and serves as an
    independent check of :func:`iwht2d`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square 2-D array, got shape {x.shape}")
    n = x.shape[0]
    h = hadamard_matrix(n).astype(np.float64)
    return (h @ x @ h.T) / n**2


# ---------------------------------------------------------------------------
# DCT-II


def _as_vector(x, op: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{op}: expected a 1-D vector, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{op}: empty input")
    return x


def dct2_naive(x) -> np.ndarray:
    """Unnormalized DCT-II by direct O(N^2) summation."""
    x = _as_vector(x, "dct2_naive")
    n = x.size
    out = np.empty(n)
    for k in range(n):
        out[k] = sum(x[i] * np.cos(np.pi / n * (i + 0.5) * k) for i in range(n))
    return out


def _ortho_scale(n: int) -> np.ndarray:
    scale = np.full(n, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    return scale


def dct2_ortho(x) -> np.ndarray:
    """Orthonormal DCT-II: direct sums scaled by sqrt(1/N) at k=0, sqrt(2/N) otherwise."""
    x = _as_vector(x, "dct2_ortho")
    return _ortho_scale(x.size) * dct2_naive(x)


def dct2_via_fft(x) -> np.ndarray:
    """Orthonormal DCT-II computed from the DFT of the 2N-point even extension."""
    x = _as_vector(x, "dct2_via_fft")
    n = x.size
    y = np.concatenate([x, x[::-1]])
    spectrum = fft(y) if is_power_of_two(2 * n) else dft_naive(y)
    k = np.arange(n)
    # Re{e^{-i pi k / 2N} Y[k]} equals twice the direct cosine sum
    raw = np.real(np.exp(-1j * np.pi * k / (2 * n)) * spectrum[:n]) / 2.0
    return _ortho_scale(n) * raw


@lru_cache(maxsize=None)
def _dct_matrix(n: int, dtype: str) -> np.ndarray:
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    g = _ortho_scale(n)[:, None] * np.cos(np.pi / n * (i + 0.5) * k)
    g = g.astype(dtype)
    g.setflags(write=False)
    return g


def dct_matrix(n: int, dtype=np.float64) -> np.ndarray:
    """Orthonormal DCT-II matrix ``G`` with ``G @ x == dct2_ortho(x)``."""
    if n < 1:
        raise ValueError(f"DCT size must be >= 1, got {n}")
    return _dct_matrix(int(n), np.dtype(dtype).name)


def dct_last_axis(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    g = dct_matrix(x.shape[-1], x.dtype)
    return x @ g if inverse else x @ g.T


def dct_2d(x: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II of every (batch, channel) slab.

    Width first, then height, each by moving the axis last, transforming and
    moving it back.
    """
    return _dct_2d(x, inverse=False)


def idct_2d(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct_2d` (transpose of the orthonormal matrices)."""
    return _dct_2d(y, inverse=True)


def _dct_2d(x, inverse):
    x = check_tensor4(x)
    x = x.astype(_float_dtype(x), copy=False)
    t = permute(x, (0, 1, 3, 2))  # (b, h, c, w)
    t = permute(dct_last_axis(t, inverse), (0, 1, 3, 2))
    t = permute(t, (0, 2, 3, 1))  # (b, w, c, h)
    return permute(dct_last_axis(t, inverse), (0, 3, 1, 2))


# ---------------------------------------------------------------------------
# Fourier


def _complex_dtype(x: np.ndarray):
    return np.complex64 if x.dtype in (np.float32, np.complex64) else np.complex128


def dft_naive(x) -> np.ndarray:
    """Direct evaluation of ``F @ x`` with ``F[k, n] = exp(-2 pi i k n / N)``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"dft_naive: expected a non-empty 1-D vector, got shape {x.shape}")
    n = x.size
    kn = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * kn / n) @ x


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size: int, dtype: str) -> np.ndarray:
    tw = np.exp(-2j * np.pi * np.arange(size // 2) / size).astype(dtype)
    tw.setflags(write=False)
    return tw


def fft(x, axis: int = -1) -> np.ndarray:
    """Radix-2 decimation-in-time FFT along ``axis`` (unnormalized forward).

    Vectorized over all other axes. The length must be a power of two.
    """
    x = np.asarray(x)
    x = x.astype(_complex_dtype(x), copy=False)
    if x.ndim == 0:
        raise ValueError("fft: expected at least one axis")
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"fft: length must be a power of two, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        y = y.reshape(*lead, n // size, size)
        even = y[..., :half]
        odd = y[..., half:] * _twiddles(size, y.dtype.name)
        y = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    y = y.reshape(*lead, n)
    return np.moveaxis(y, -1, axis)


def ifft(x, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`fft`: ``conj(fft(conj(x))) / N``."""
    x = np.asarray(x)
    n = x.shape[axis]
    return np.conj(fft(np.conj(x), axis=axis)) / n


def fft2(a: np.ndarray, axes=(-2, -1)) -> np.ndarray:
    """2-D FFT over ``axes``: rows along the last axis first, then columns."""
    return fft(fft(a, axis=axes[1]), axis=axes[0])


def ifft2(a: np.ndarray, axes=(-2, -1)) -> np.ndarray:
    return ifft(ifft(a, axis=axes[1]), axis=axes[0])


def fft2d(x: np.ndarray) -> np.ndarray:
    """Complex 2-D DFT of every (batch, channel) slab of a NHWC tensor."""
    x = check_tensor4(x)
    _require_pow2_spatial(x, "fft2d")
    return fft2(x, axes=(1, 2))


def fft2d_magnitude(x: np.ndarray) -> np.ndarray:
    """``|FFT2(slab)|`` per slab. Single-precision input gives single-precision output."""
    x = check_tensor4(x)
    out = np.abs(fft2d(x))
    return out.astype(np.float32) if x.dtype == np.float32 else out.astype(np.float64)


def apply(kind, x: np.ndarray) -> np.ndarray:
    """Forward 2-D transform of the given kind on a NHWC tensor."""
    kind = TransformKind.parse(kind)
    if kind is TransformKind.WHT:
        return wht2d(x)
    if kind is TransformKind.DCT2_ORTHO:
        return dct_2d(x)
    return fft2d_magnitude(x)
