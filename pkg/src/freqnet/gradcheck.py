"""Central finite-difference checks for every layer's analytic backward pass.

Each check builds a layer in float64, forms the scalar ``sum(forward(x) * R)``
for a fixed random ``R``, and compares analytic gradients (input and
parameters) with central differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from freqnet.nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    GlobalAvgPool,
    ReLU,
    ResidualBlock,
    TransformLayer,
    softmax_cross_entropy,
)
from freqnet.nn.model import ModelSpec, build_model

STEP = 1e-5
TOLERANCE = 1e-4
SEEDS = (0, 1, 2)


@dataclass
class GradCheckResult:
    name: str
    seed: int
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOLERANCE


def numerical_gradient(f, x: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to ``x`` (mutated in place, then restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))) if a.size else 0.0


def check_layer(layer, x: np.ndarray, rng: np.random.Generator, training: bool = True) -> float:
    """Max relative error over the input gradient and every parameter gradient."""
    out = layer.forward(x, training)
    proj = rng.standard_normal(out.shape)

    def f():
        return float(np.sum(layer.forward(x, training) * proj))

    layer.forward(x, training)
    dx = layer.backward(proj)
    analytic = {"x": dx, **{k: g.copy() for k, g in _all_grads(layer).items()}}
    errors = [rel_error(analytic["x"], numerical_gradient(f, x))]
    for key, p in _all_params(layer).items():
        errors.append(rel_error(analytic[key], numerical_gradient(f, p)))
    return max(errors)


def _all_params(layer, prefix=""):
    out = {f"{prefix}{k}": v for k, v in layer.params.items()}
    for child in layer.children():
        out.update(_all_params(child, f"{prefix}{child.name}/"))
    return out


def _all_grads(layer, prefix=""):
    out = {f"{prefix}{k}": v for k, v in layer.grads.items()}
    for child in layer.children():
        out.update(_all_grads(child, f"{prefix}{child.name}/"))
    return out


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


def _softmax_xent_check(rng):
    logits = rng.standard_normal((4, 5))
    labels = rng.integers(0, 5, size=4)
    _, analytic = softmax_cross_entropy(logits, labels)
    numeric = numerical_gradient(lambda: softmax_cross_entropy(logits, labels)[0], logits)
    return rel_error(analytic, numeric)


def _network_check(rng, transform, placement):
    spec = ModelSpec(transform=transform, placement=placement, num_classes=3, widths=(2, 3, 4),
                     blocks_per_stage=1, dropout=0.5, l2=1e-2, seed=int(rng.integers(1 << 30)),
                     input_shape=(8, 8, 2))
    net = build_model(spec, dtype=np.float64)
    x = rng.standard_normal((2, 8, 8, 2))
    labels = rng.integers(0, 3, size=2)
    net.set_step(0)

    def f():
        logits = net.forward(x, training=True)
        return softmax_cross_entropy(logits, labels)[0] + net.l2_penalty()

    net.loss_and_grad(x, labels, training=True)
    analytic = {name: g.copy() for name, _, g in net.params.items()}
    errors = []
    for name, p, _ in net.params.items():
        errors.append(rel_error(analytic[name], numerical_gradient(f, p)))
    return max(errors)


def _cases():
    f64 = np.float64
    return {
        "conv3x3": lambda r: check_layer(Conv2D(3, 4, 3, 1, rng=r, dtype=f64), r.standard_normal((2, 5, 5, 3)), r),
        "conv3x3_stride2": lambda r: check_layer(Conv2D(2, 3, 3, 2, rng=r, dtype=f64), r.standard_normal((2, 6, 5, 2)), r),
        "conv1x1_stride2": lambda r: check_layer(Conv2D(3, 2, 1, 2, rng=r, dtype=f64), r.standard_normal((2, 4, 4, 3)), r),
        "dense": lambda r: check_layer(Dense(6, 4, rng=r, dtype=f64), r.standard_normal((3, 6)), r),
        "relu": lambda r: check_layer(ReLU(), _away_from_zero(r, (2, 3, 3, 2)), r),
        "avgpool_global": lambda r: check_layer(GlobalAvgPool(), r.standard_normal((2, 3, 4, 3)), r),
        "dropout": lambda r: check_layer(Dropout(0.5, seed=3), r.standard_normal((4, 6)), r),
        "batchnorm_train": lambda r: check_layer(_bn(r), r.standard_normal((3, 3, 3, 4)), r, training=True),
        "batchnorm_eval": lambda r: check_layer(_bn(r), r.standard_normal((3, 3, 3, 4)), r, training=False),
        "residual_block": lambda r: check_layer(ResidualBlock(2, 3, 2, rng=r, dtype=f64), r.standard_normal((3, 4, 4, 2)), r),
        "softmax_xent": _softmax_xent_check,
        "wht_layer": lambda r: check_layer(TransformLayer("wht"), r.standard_normal((2, 4, 8, 2)), r),
        "wht_layer_padded": lambda r: check_layer(TransformLayer("wht"), r.standard_normal((2, 3, 5, 2)), r),
        "dct_layer": lambda r: check_layer(TransformLayer("dct"), r.standard_normal((2, 3, 5, 2)), r),
        "fft_magnitude_layer": lambda r: check_layer(TransformLayer("fft"), r.standard_normal((2, 4, 8, 2)), r),
        "fft_magnitude_layer_padded": lambda r: check_layer(TransformLayer("fft"), r.standard_normal((2, 3, 5, 2)), r),
        "network_baseline": lambda r: _network_check(r, None, "none"),
        "network_wht_early_late": lambda r: _network_check(r, "wht", "early_and_late"),
        "network_dct_input": lambda r: _network_check(r, "dct", "input"),
        "network_fft_early": lambda r: _network_check(r, "fft", "early"),
    }


def _bn(rng):
    bn = BatchNorm(4, dtype=np.float64)
    bn.params["gamma"][:] = rng.uniform(0.5, 1.5, 4)
    bn.params["beta"][:] = rng.standard_normal(4)
    bn.running_mean = rng.standard_normal(4)
    bn.running_var = rng.uniform(0.5, 2.0, 4)
    return bn


CHECKS = tuple(_cases())


def run_check(name: str, seed: int) -> GradCheckResult:
    rng = np.random.default_rng(seed)
    return GradCheckResult(name, seed, _cases()[name](rng))


def run_all(seeds=SEEDS, names=None) -> list[GradCheckResult]:
    return [run_check(name, s) for name in (names or CHECKS) for s in seeds]
