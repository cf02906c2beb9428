"""Image-domain demonstrations: grayscale, FFT band filtering, DCT spectrum
views, the Parseval energy check, and binary PGM/PPM I/O.

Images are numpy arrays: ``(height, width)`` for gray, ``(height, width, 3)``
for RGB. ``uint8`` arrays hold 0..255 values; float arrays are accepted
wherever a computation happens and are returned unclamped.
"""
from __future__ import annotations

import os
import re

import numpy as np

from freqnet.tensor import next_power_of_two
from freqnet.transforms import dct_2d, fft2, ifft2

BT601 = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Malformed PGM/PPM data. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma. ``uint8`` input gives rounded ``uint8`` output."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"to_grayscale expects an RGB image (h, w, 3), got shape {img.shape}")
    luma = img.astype(np.float64) @ np.array(BT601)
    if img.dtype == np.uint8:
        return np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    return luma


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Round and clamp to 0..255 for writing."""
    return np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


def _as_gray(img, op: str) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim != 2:
        raise ValueError(f"{op} expects a single-channel image, got shape {img.shape}")
    return img.astype(np.float64)


def radial_mask(shape: tuple[int, int], kind: str, cutoff: float) -> np.ndarray:
    """Boolean mask over an *unshifted* spectrum of ``shape``.

    Distances are measured on the center-shifted grid; ``low`` keeps
    radius <= cutoff * max_radius, ``high`` keeps the complement.
    """
    h, w = shape
    # signed offset of each unshifted bin from DC, i.e. its position after fftshift
    fy = np.where(np.arange(h) < (h + 1) // 2, np.arange(h), np.arange(h) - h)
    fx = np.where(np.arange(w) < (w + 1) // 2, np.arange(w), np.arange(w) - w)
    radius = np.hypot(fy[:, None], fx[None, :])
    max_radius = np.hypot(h / 2, w / 2)
    low = radius <= cutoff * max_radius
    if kind == "low":
        return low
    if kind == "high":
        return ~low
    raise ValueError(f"filter kind must be 'low' or 'high', got {kind!r}")


def bandpass_filter(img, kind: str, cutoff: float) -> np.ndarray:
    """Circular low/high-pass filter in the 2-D Fourier domain.

    The image is edge-padded to power-of-two dims, transformed, masked,
    inverse transformed and cropped back. The real part is returned as
    float64, unclamped, so the low and high outputs sum to the input.
    """
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError(f"cutoff must lie in [0, 1], got {cutoff}")
    if kind not in ("low", "high"):
        raise ValueError(f"filter kind must be 'low' or 'high', got {kind!r}")
    gray = _as_gray(img, "bandpass_filter")
    h, w = gray.shape
    padded = np.pad(gray, ((0, next_power_of_two(h) - h), (0, next_power_of_two(w) - w)), mode="edge")
    spectrum = fft2(padded)
    spectrum = np.where(radial_mask(padded.shape, kind, cutoff), spectrum, 0)
    return np.real(ifft2(spectrum))[:h, :w]


def log_view(coeffs: np.ndarray) -> np.ndarray:
    """log(1 + |c|) min-max scaled to 0..255 (float). Constant input maps to zeros."""
    v = np.log1p(np.abs(coeffs))
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo) * 255.0


def dct2_image(img) -> np.ndarray:
    """Orthonormal 2-D DCT of a gray image (float64)."""
    gray = _as_gray(img, "dct2_image")
    return dct_2d(gray[None, :, :, None])[0, :, :, 0]


def dct_spectrum_view(img, crop: int) -> tuple[np.ndarray, np.ndarray]:
    """Full log-scaled DCT view and the top-left ``crop x crop`` block rendered the same way."""
    crop = int(crop)
    gray = _as_gray(img, "dct_spectrum_view")
    if crop < 1:
        raise ValueError(f"crop must be >= 1, got {crop}")
    if crop > min(gray.shape):
        raise ValueError(f"crop {crop} exceeds image size {gray.shape}")
    coeffs = dct2_image(gray)
    return log_view(coeffs), log_view(coeffs[:crop, :crop])


def low_frequency_energy_fraction(img, crop: int) -> float:
    coeffs = dct2_image(img)
    total = float(np.sum(coeffs**2))
    return float(np.sum(coeffs[:crop, :crop] ** 2)) / total if total else 0.0


def parseval_check(img, dtype=np.float64) -> tuple[float, float, float]:
    """(spatial energy, DCT-domain energy, relative difference).

    ``dtype`` selects the working precision of the transform.
    """
    gray = _as_gray(img, "parseval_check").astype(dtype)
    coeffs = dct_2d(gray[None, :, :, None])
    spatial = float(np.sum(gray.astype(np.float64) ** 2))
    freq = float(np.sum(coeffs.astype(np.float64) ** 2))
    rel = abs(freq - spatial) / spatial if spatial else abs(freq - spatial)
    return spatial, freq, rel


# ---------------------------------------------------------------------------
# PGM (P5) / PPM (P6)

_HEADER = re.compile(rb"(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s")


def decode_pnm(data: bytes) -> np.ndarray:
    """Decode binary 8-bit PGM/PPM bytes to a ``uint8`` array."""
    if data[:2] not in (b"P5", b"P6"):
        raise ImageFormatError(f"bad magic number {data[:2]!r}, expected b'P5' or b'P6'", 0)
    m = _HEADER.match(data)
    if m is None:
        raise ImageFormatError("malformed header", 2)
    magic, width, height, maxval = m.group(1), *(int(g) for g in m.groups()[1:])
    if maxval != 255:
        raise ImageFormatError(f"maxval must be 255, got {maxval}", m.start(4))
    channels = 3 if magic == b"P6" else 1
    start = m.end()
    expected = width * height * channels
    actual = len(data) - start
    if actual < expected:
        raise ImageFormatError(f"truncated pixel data: expected {expected} bytes, got {actual}", start + actual)
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=start)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape).copy()


def encode_pnm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"encode_pnm expects uint8 pixels, got {img.dtype}; use to_uint8 first")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {img.shape}")
    header = b"%s %d %d 255\n" % (magic, img.shape[1], img.shape[0])
    return header + np.ascontiguousarray(img).tobytes()


def read_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def write_image(img: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(encode_pnm(img))
