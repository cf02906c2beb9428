"""TinyResNet with optional transform layers at the input / early / late positions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from freqnet.nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    GlobalAvgPool,
    Layer,
    ReLU,
    ResidualBlock,
    TransformLayer,
    softmax,
    softmax_cross_entropy,
)
from freqnet.transforms import TransformKind


class SpecError(ValueError):
    pass


class Placement(str, enum.Enum):
    NONE = "none"
    INPUT = "input"  # before the stem
    EARLY = "early"  # after stage1 block1 (conv2_block1 in ResNet-50)
    EARLY_AND_LATE = "early_and_late"  # plus after stage3 block2 (conv4_block6)

    @classmethod
    def parse(cls, value) -> "Placement":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("+", "_and_").replace("-", "_")
        for p in cls:
            if key in (p.value, p.name.lower()):
                return p
        raise ValueError(f"unknown placement {value!r}; expected one of none, input, early, early_and_late")


@dataclass
class ModelSpec:
    transform: TransformKind | None = None
    placement: Placement = Placement.NONE
    num_classes: int = 10
    widths: tuple[int, int, int] = (16, 32, 64)
    blocks_per_stage: int = 2
    dropout: float = 0.5
    l2: float = 1e-4
    seed: int = 0
    input_shape: tuple[int, int, int] = (32, 32, 3)

    def __post_init__(self):
        if self.transform is not None:
            self.transform = TransformKind.parse(self.transform)
        self.placement = Placement.parse(self.placement)
        self.widths = tuple(int(w) for w in self.widths)
        self.input_shape = tuple(int(d) for d in self.input_shape)

    def validate(self) -> None:
        if self.placement is not Placement.NONE and self.transform is None:
            raise SpecError(f"placement {self.placement.value!r} requires a transform kind")
        if len(self.widths) != 3 or any(w <= 0 for w in self.widths):
            raise SpecError(f"widths must be three positive channel counts, got {self.widths}")
        if self.num_classes < 2:
            raise SpecError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.blocks_per_stage < 1:
            raise SpecError(f"blocks_per_stage must be >= 1, got {self.blocks_per_stage}")
        if not 0.0 <= self.dropout < 1.0:
            raise SpecError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.l2 < 0:
            raise SpecError(f"l2 must be >= 0, got {self.l2}")


class ParamStore:
    """Flat, name-addressed view of every trainable array and its gradient."""

    def __init__(self, layers: list[tuple[str, Layer]]):
        self._slots = []
        for prefix, layer in layers:
            for key in layer.params:
                self._slots.append((f"{prefix}/{key}", layer, key))

    def names(self) -> list[str]:
        return [name for name, _, _ in self._slots]

    def items(self):
        for name, layer, key in self._slots:
            yield name, layer.params[key], layer.grads[key]

    def param(self, name: str) -> np.ndarray:
        for n, layer, key in self._slots:
            if n == name:
                return layer.params[key]
        raise KeyError(name)

    def count(self) -> int:
        return int(sum(layer.params[key].size for _, layer, key in self._slots))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p, _ in self.items()}


class Network:
    """A sequence of layers ending in logits; ``predict`` adds the softmax."""

    def __init__(self, spec: ModelSpec, layers: list[Layer], dtype):
        self.spec = spec
        self.layers = layers
        self.dtype = np.dtype(dtype)
        self.params = ParamStore(self._named_leaves())

    def _named_leaves(self):
        out = []

        def walk(prefix, layer):
            if layer.params:
                out.append((prefix, layer))
            for child in layer.children():
                walk(f"{prefix}/{child.name}", child)

        for layer in self.layers:
            walk(layer.name, layer)
        return out

    def leaves(self) -> list[Layer]:
        out = []

        def walk(layer):
            out.append(layer)
            for child in layer.children():
                walk(child)

        for layer in self.layers:
            walk(layer)
        return out

    def set_step(self, step: int) -> None:
        for layer in self.leaves():
            if isinstance(layer, Dropout):
                layer.step = step

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        expected = self.spec.input_shape
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ValueError(f"model input must have shape (batch, {', '.join(map(str, expected))}), got {x.shape}")
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            out = layer.forward(out, training)
        return out

    def backward(self, dlogits: np.ndarray) -> None:
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        for layer in self.leaves():
            for key, coef in layer.l2.items():
                layer.grads[key] = layer.grads[key] + 2 * coef * layer.params[key]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x, training=False))

    def l2_penalty(self) -> float:
        return float(sum(coef * np.sum(layer.params[key].astype(np.float64) ** 2)
                         for layer in self.leaves() for key, coef in layer.l2.items()))

    def loss_and_grad(self, x, labels, training: bool = True) -> tuple[float, float, np.ndarray]:
        """Forward + backward. Returns (loss incl. L2, accuracy, logits)."""
        logits = self.forward(x, training)
        xent, dlogits = softmax_cross_entropy(logits, labels)
        self.backward(dlogits.astype(self.dtype, copy=False))
        acc = float(np.mean(np.argmax(logits, axis=1) == labels))
        return xent + self.l2_penalty(), acc, logits

    def shapes(self) -> list[tuple[Layer, tuple, tuple]]:
        """(layer, input shape, output shape) per top-level layer, per sample."""
        out, shape = [], self.spec.input_shape
        for layer in self.layers:
            nxt = layer.output_shape(shape)
            out.append((layer, shape, nxt))
            shape = nxt
        return out

    def macs_per_sample(self) -> int:
        return sum(layer.macs(i) for layer, i, _ in self.shapes())

    def transform_macs_per_sample(self) -> int:
        return sum(layer.transform_macs(i) for layer, i, _ in self.shapes())

    def transform_layers(self) -> list[TransformLayer]:
        return [layer for layer in self.layers if isinstance(layer, TransformLayer)]

    def topology(self) -> str:
        """One line per top-level layer: ``index name output_shape param_count``."""
        lines = []
        for idx, (layer, _, out_shape) in enumerate(self.shapes()):
            count = sum(p.size for leaf in [layer, *_descendants(layer)] for p in leaf.params.values())
            shape = "x".join(str(d) for d in out_shape)
            lines.append(f"{idx} {layer.name} {shape} {count}")
        return "\n".join(lines) + "\n"


def _descendants(layer):
    for child in layer.children():
        yield child
        yield from _descendants(child)


class Softmax(Layer):
    """Marker for the topology dump; the network returns logits and the
    loss applies the softmax, so this layer passes values through."""

    kind = "softmax"

    def forward(self, x, training=False):
        return x

    def backward(self, dout):
        return dout


def build_model(spec: ModelSpec, dtype=np.float32) -> Network:
    """Stem conv -> 3 residual stages -> global average pool -> dropout -> dense.

    Transform layers are inserted between blocks and add no parameters.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    w1, w2, w3 = spec.widths
    in_ch = spec.input_shape[2]
    layers: list[Layer] = []

    def transform(tag):
        layers.append(TransformLayer(spec.transform, name=f"{spec.transform.value}2d_{tag}"))

    if spec.placement is Placement.INPUT:
        transform("input")
    layers += [Conv2D(in_ch, w1, 3, rng=rng, dtype=dtype, name="stem_conv"),
               BatchNorm(w1, dtype=dtype, name="stem_bn"),
               ReLU("stem_relu")]
    prev = w1
    for stage, width in enumerate((w1, w2, w3), start=1):
        for b in range(1, spec.blocks_per_stage + 1):
            stride = 2 if (b == 1 and stage > 1) else 1
            layers.append(ResidualBlock(prev, width, stride, rng=rng, dtype=dtype, name=f"stage{stage}_block{b}"))
            prev = width
            if stage == 1 and b == 1 and spec.placement in (Placement.EARLY, Placement.EARLY_AND_LATE):
                transform("early")
        if stage == 3 and spec.placement is Placement.EARLY_AND_LATE:
            transform("late")
    layers += [GlobalAvgPool("avgpool"),
               Dropout(spec.dropout, seed=spec.seed, layer_id=len(layers), name="dropout"),
               Dense(prev, spec.num_classes, l2=spec.l2, rng=rng, dtype=dtype, name="dense"),
               Softmax("softmax")]
    return Network(spec, layers, dtype)
