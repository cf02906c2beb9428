"""Layers with hand-written forward and backward passes (NHWC).

Each layer caches what its backward pass needs during ``forward`` and
writes parameter gradients into ``self.grads`` during ``backward``.
"""
from __future__ import annotations

import numpy as np

from freqnet import transforms
from freqnet.tensor import crop, next_power_of_two, pad_to_pow2
from freqnet.transforms import TransformKind


class DimensionError(ValueError):
    pass


class Layer:
    """Base class. Subclasses fill ``params`` and implement forward/backward."""

    kind = "layer"

    def __init__(self, name: str | None = None):
        self.name = name or self.kind
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.l2: dict[str, float] = {}

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def macs(self, in_shape: tuple) -> int:
        """Multiply-accumulates per sample for the trainable arithmetic."""
        return 0

    def transform_macs(self, in_shape: tuple) -> int:
        return 0

    def children(self) -> list["Layer"]:
        return []

    def zero_grads(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def _check_channels(self, x: np.ndarray, expected: int) -> None:
        if x.ndim != 4 or x.shape[-1] != expected:
            raise DimensionError(f"{self.name}: expected NHWC input with {expected} channels, got shape {x.shape}")


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """k x k convolution, 'same' padding for odd k, optional stride, no bias.

    Kernel layout is (k, k, in_channels, out_channels).
    """

    kind = "conv"

    def __init__(self, in_ch: int, out_ch: int, k: int = 3, stride: int = 1, *,
                 rng: np.random.Generator, dtype=np.float32, name: str | None = None):
        super().__init__(name)
        self.in_ch, self.out_ch, self.k, self.stride = in_ch, out_ch, k, stride
        self.pad = k // 2
        self.params["kernel"] = he_normal(rng, (k, k, in_ch, out_ch), k * k * in_ch, dtype)
        self.zero_grads()

    def output_shape(self, in_shape):
        h, w, _ = in_shape
        return (-(-h // self.stride), -(-w // self.stride), self.out_ch)

    def macs(self, in_shape):
        oh, ow, oc = self.output_shape(in_shape)
        return oh * ow * oc * self.in_ch * self.k * self.k

    def forward(self, x, training=False):
        self._check_channels(x, self.in_ch)
        n, h, w, c = x.shape
        k, s, p = self.k, self.stride, self.pad
        oh, ow, _ = self.output_shape((h, w, c))
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        cols = np.empty((n, oh, ow, k, k, c), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                cols[:, :, :, i, j, :] = xp[:, i:i + s * oh:s, j:j + s * ow:s, :]
        cols = cols.reshape(n * oh * ow, k * k * c)
        kernel = self.params["kernel"].reshape(k * k * c, self.out_ch)
        self._cache = (x.shape, xp.shape, cols)
        return (cols @ kernel).reshape(n, oh, ow, self.out_ch)

    def backward(self, dout):
        x_shape, xp_shape, cols = self._cache
        n, h, w, c = x_shape
        k, s, p = self.k, self.stride, self.pad
        _, oh, ow, oc = dout.shape
        d2 = dout.reshape(-1, oc)
        self.grads["kernel"] = (cols.T @ d2).reshape(k, k, c, oc)
        dcols = (d2 @ self.params["kernel"].reshape(k * k * c, oc).T).reshape(n, oh, ow, k, k, c)
        dxp = np.zeros(xp_shape, dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + s * oh:s, j:j + s * ow:s, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p:p + h, p:p + w, :] if p else dxp


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, *, l2: float = 0.0,
                 rng: np.random.Generator, dtype=np.float32, name: str | None = None):
        super().__init__(name)
        self.in_features, self.out_features = in_features, out_features
        self.params["weight"] = glorot_uniform(rng, (in_features, out_features), in_features, out_features, dtype)
        self.params["bias"] = np.zeros(out_features, dtype=dtype)
        if l2:
            self.l2["weight"] = l2
        self.zero_grads()

    def output_shape(self, in_shape):
        return (self.out_features,)

    def macs(self, in_shape):
        return self.in_features * self.out_features

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(f"{self.name}: expected (batch, {self.in_features}) input, got shape {x.shape}")
        self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, dout):
        self.grads["weight"] = self._x.T @ dout
        self.grads["bias"] = dout.sum(axis=0)
        return dout @ self.params["weight"].T


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class GlobalAvgPool(Layer):
    kind = "avgpool_global"

    def output_shape(self, in_shape):
        return (in_shape[-1],)

    def forward(self, x, training=False):
        if x.ndim != 4:
            raise DimensionError(f"{self.name}: expected NHWC input, got shape {x.shape}")
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dout):
        n, h, w, c = self._shape
        return np.broadcast_to(dout[:, None, None, :] / (h * w), self._shape).astype(dout.dtype)


class Dropout(Layer):
    """Inverted dropout. The mask stream is keyed by (seed, step, layer id),
    so it does not depend on any global RNG state."""

    kind = "dropout"

    def __init__(self, rate: float, seed: int = 0, layer_id: int = 0, name: str | None = None):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate, self.seed, self.layer_id = rate, seed, layer_id
        self.step = 0

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        gen = np.random.Generator(np.random.Philox(key=self.seed, counter=[self.step, self.layer_id, 0, 0]))
        keep = 1.0 - self.rate
        self._mask = (gen.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask


class BatchNorm(Layer):
    """Per-channel batch norm over (batch, height, width).

    Training uses batch statistics and updates running averages with
    ``momentum``; evaluation uses the running averages.
    """

    kind = "batchnorm"

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float32, name: str | None = None):
        super().__init__(name)
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.zero_grads()

    def forward(self, x, training=False):
        self._check_channels(x, self.channels)
        gamma, beta = self.params["gamma"], self.params["beta"]
        if training:
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1 - m) * mean).astype(self.running_mean.dtype)
            self.running_var = (m * self.running_var + (1 - m) * var).astype(self.running_var.dtype)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, training)
        return (gamma * xhat + beta).astype(x.dtype, copy=False)

    def backward(self, dout):
        xhat, inv_std, training = self._cache
        gamma = self.params["gamma"]
        self.grads["gamma"] = np.sum(dout * xhat, axis=(0, 1, 2))
        self.grads["beta"] = dout.sum(axis=(0, 1, 2))
        if not training:
            return dout * gamma * inv_std
        m = dout.shape[0] * dout.shape[1] * dout.shape[2]
        dxhat = dout * gamma
        return (inv_std / m) * (m * dxhat - dxhat.sum(axis=(0, 1, 2)) - xhat * np.sum(dxhat * xhat, axis=(0, 1, 2)))


class ResidualBlock(Layer):
    """conv-bn-relu-conv-bn plus shortcut, then relu.

    The shortcut is a 1x1 strided conv + bn when the shape changes.
    """

    kind = "residual"

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, *,
                 rng: np.random.Generator, dtype=np.float32, name: str | None = None):
        super().__init__(name)
        self.in_ch, self.out_ch, self.stride = in_ch, out_ch, stride
        self.conv1 = Conv2D(in_ch, out_ch, 3, stride, rng=rng, dtype=dtype, name="conv1")
        self.bn1 = BatchNorm(out_ch, dtype=dtype, name="bn1")
        self.relu1 = ReLU("relu1")
        self.conv2 = Conv2D(out_ch, out_ch, 3, 1, rng=rng, dtype=dtype, name="conv2")
        self.bn2 = BatchNorm(out_ch, dtype=dtype, name="bn2")
        self.relu2 = ReLU("relu2")
        if stride != 1 or in_ch != out_ch:
            self.proj = Conv2D(in_ch, out_ch, 1, stride, rng=rng, dtype=dtype, name="proj")
            self.proj_bn = BatchNorm(out_ch, dtype=dtype, name="proj_bn")
        else:
            self.proj = self.proj_bn = None

    def children(self):
        layers = [self.conv1, self.bn1, self.relu1, self.conv2, self.bn2, self.relu2]
        if self.proj is not None:
            layers += [self.proj, self.proj_bn]
        return layers

    def output_shape(self, in_shape):
        return self.conv1.output_shape(in_shape)

    def macs(self, in_shape):
        mid = self.conv1.output_shape(in_shape)
        total = self.conv1.macs(in_shape) + self.conv2.macs(mid)
        if self.proj is not None:
            total += self.proj.macs(in_shape)
        return total

    def forward(self, x, training=False):
        self._check_channels(x, self.in_ch)
        out = self.relu1.forward(self.bn1.forward(self.conv1.forward(x, training), training), training)
        out = self.bn2.forward(self.conv2.forward(out, training), training)
        short = x if self.proj is None else self.proj_bn.forward(self.proj.forward(x, training), training)
        return self.relu2.forward(out + short, training)

    def backward(self, dout):
        d = self.relu2.backward(dout)
        dshort = d if self.proj is None else self.proj.backward(self.proj_bn.backward(d))
        dmain = self.conv1.backward(self.bn1.backward(self.relu1.backward(self.conv2.backward(self.bn2.backward(d)))))
        return dmain + dshort


class TransformLayer(Layer):
    """Fixed 2-D transform applied per channel; no trainable parameters.

    Spatial dims that are not powers of two are zero-padded for WHT and FFT
    and the result cropped back, so the output shape always equals the input
    shape.
    """

    kind = "transform"

    def __init__(self, transform, name: str | None = None):
        self.transform = TransformKind.parse(transform)
        super().__init__(name or f"{self.transform.value}2d")

    def _padded(self, x):
        if self.transform is TransformKind.DCT2_ORTHO:
            return x, x.shape[1:3]
        return pad_to_pow2(x)

    def transform_macs(self, in_shape):
        h, w, c = in_shape
        if self.transform is TransformKind.DCT2_ORTHO:
            return c * (h * h * w + h * w * w)
        ph, pw = next_power_of_two(h), next_power_of_two(w)
        if self.transform is TransformKind.WHT:
            return c * (ph * ph * pw + ph * pw * pw)
        # radix-2 butterflies: one complex multiply (4 real MACs) each
        return 4 * c * (ph * (pw // 2) * (pw.bit_length() - 1) + pw * (ph // 2) * (ph.bit_length() - 1))

    def forward(self, x, training=False):
        if x.ndim != 4:
            raise DimensionError(f"{self.name}: expected NHWC input, got shape {x.shape}")
        xp, dims = self._padded(x)
        if self.transform is TransformKind.WHT:
            y = transforms.wht2d(xp)
        elif self.transform is TransformKind.DCT2_ORTHO:
            y = transforms.dct_2d(xp)
        else:
            z = transforms.fft2d(xp)
            mag = np.abs(z)
            self._phase = np.divide(z, mag, out=np.zeros_like(z), where=mag > 0)
            y = mag
        self._dims = dims
        return crop(y, dims).astype(x.dtype, copy=False)

    def backward(self, dout):
        gp, dims = self._padded(dout)
        if self.transform is TransformKind.WHT:
            dx = transforms.wht2d(gp)  # symmetric orthogonal: adjoint = itself
        elif self.transform is TransformKind.DCT2_ORTHO:
            dx = transforms.idct_2d(gp)
        else:
            # y = |F x F|; dL/dx = Re(F conj(g * z/|z|) F), F symmetric
            gz = gp * self._phase
            dx = np.real(transforms.fft2(np.conj(gz), axes=(1, 2)))
        return crop(dx, dims).astype(dout.dtype, copy=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean sparse categorical cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"softmax_cross_entropy: labels shape {labels.shape} does not match batch {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        bad = int(np.flatnonzero((labels < 0) | (labels >= c))[0])
        raise ValueError(f"label {labels[bad]} at index {bad} outside [0, {c})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.mean(log_p[np.arange(n), labels]))
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1
    return loss, grad / n
