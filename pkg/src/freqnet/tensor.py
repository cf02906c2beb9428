"""NHWC tensor helpers.

Tensors are plain ``numpy.ndarray`` objects of shape (batch, height, width,
channels). The helpers here are the layout plumbing the transform kernels
share: explicit axis permutations, folding batch and channels into one slab
axis, and power-of-two padding.
"""
from __future__ import annotations

import numpy as np

# (b, h, w, c) -> (b, c, h, w)
NHWC_TO_NCHW = (0, 3, 1, 2)
NCHW_TO_NHWC = (0, 2, 3, 1)


class TensorShapeError(ValueError):
    pass


def check_tensor4(t, checked: bool = False, name: str = "tensor") -> np.ndarray:
    """Return ``t`` as an array after validating it is 4-D.

    With ``checked=True`` every element must also be finite.
    """
    t = np.asarray(t)
    if t.ndim != 4:
        raise TensorShapeError(f"{name}: expected 4 axes (batch, height, width, channels), got shape {t.shape}")
    if checked and not np.all(np.isfinite(t)):
        raise TensorShapeError(f"{name}: contains non-finite values")
    return t


def inverse_order(order) -> tuple[int, ...]:
    inv = [0] * len(order)
    for i, o in enumerate(order):
        inv[o] = i
    return tuple(inv)


def permute(t: np.ndarray, order) -> np.ndarray:
    """Permute the four axes of ``t`` and return a contiguous copy."""
    t = check_tensor4(t)
    order = tuple(int(o) for o in order)
    if sorted(order) != [0, 1, 2, 3]:
        raise ValueError(f"invalid axis permutation {order!r}")
    return np.ascontiguousarray(np.transpose(t, order))


def merge_batch_channels(t: np.ndarray) -> np.ndarray:
    """(b, h, w, c) -> (b*c, h, w); slab ``g`` is channel ``g % c`` of item ``g // c``."""
    t = check_tensor4(t)
    b, h, w, c = t.shape
    return permute(t, NHWC_TO_NCHW).reshape(b * c, h, w)


def split_batch_channels(slabs: np.ndarray, batch: int, channels: int) -> np.ndarray:
    """Inverse of :func:`merge_batch_channels`."""
    slabs = np.asarray(slabs)
    if slabs.ndim != 3 or slabs.shape[0] != batch * channels:
        raise TensorShapeError(f"cannot split slabs of shape {slabs.shape} into batch={batch}, channels={channels}")
    _, h, w = slabs.shape
    return permute(slabs.reshape(batch, channels, h, w), NCHW_TO_NHWC)


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ValueError(f"size must be >= 1, got {n}")
    return 1 << (n - 1).bit_length()


def pad_to_pow2(t: np.ndarray, mode: str = "constant") -> tuple[np.ndarray, tuple[int, int]]:
    """Pad height and width (bottom/right) up to the next power of two.

    Returns the padded tensor and the original ``(height, width)`` for
    :func:`crop`. Zero padding by default; any ``numpy.pad`` mode is accepted.
    """
    t = check_tensor4(t)
    _, h, w, _ = t.shape
    if h < 1 or w < 1:
        raise TensorShapeError(f"height and width must be >= 1, got {h}x{w}")
    ph, pw = next_power_of_two(h) - h, next_power_of_two(w) - w
    if ph == 0 and pw == 0:
        return t, (h, w)
    return np.pad(t, ((0, 0), (0, ph), (0, pw), (0, 0)), mode=mode), (h, w)


def crop(t: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    h, w = dims
    return t[:, :h, :w, :]
