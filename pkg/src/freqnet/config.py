"""Experiment configuration: ``key = value`` lines, ``#`` comments, unknown keys rejected."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from freqnet.data import CIFAR_PIXELS, CIFAR_VARIANTS, spectral_frequencies
from freqnet.nn.model import ModelSpec, Placement
from freqnet.nn.train import TrainConfig
from freqnet.transforms import TransformKind

OUTPUT_DIR_ENV = "FREQNET_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, "runs/latest")


@dataclass
class ExperimentConfig:
    source: str = "synthetic"  # synthetic | cifar10 | cifar100
    data_dir: str = ""
    subset: int = 5000
    test_subset: int = 1000
    classes: int = 4  # synthetic only
    noise: float = 0.05  # synthetic only
    transform: str = "none"
    placement: str = "none"
    widths: tuple = (16, 32, 64)
    blocks_per_stage: int = 2
    dropout: float = 0.5
    l2: float = 1e-4
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    target_accuracy: float | None = None
    seed: int = 0
    deterministic: bool = True
    output_dir: str = field(default_factory=_default_output_dir)

    @property
    def num_classes(self) -> int:
        if self.source == "synthetic":
            return self.classes
        return CIFAR_VARIANTS[self.source][1]

    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            transform=None if self.transform == "none" else TransformKind.parse(self.transform),
            placement=Placement.parse(self.placement), num_classes=self.num_classes,
            widths=tuple(self.widths), blocks_per_stage=self.blocks_per_stage,
            dropout=self.dropout, l2=self.l2, seed=self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, epochs=self.epochs, batch_size=self.batch_size, beta1=self.beta1,
                           beta2=self.beta2, eps=self.eps, seed=self.seed, deterministic=self.deterministic,
                           target_accuracy=self.target_accuracy)

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first invalid field."""
        if self.source not in ("synthetic", *CIFAR_VARIANTS):
            raise ConfigError("source", f"must be synthetic, cifar10 or cifar100, got {self.source!r}")
        if self.transform != "none":
            try:
                TransformKind.parse(self.transform)
            except ValueError as e:
                raise ConfigError("transform", str(e)) from None
        try:
            placement = Placement.parse(self.placement)
        except ValueError as e:
            raise ConfigError("placement", str(e)) from None
        if placement is not Placement.NONE and self.transform == "none":
            raise ConfigError("transform", f"placement {placement.value!r} requires a transform (fft, dct or wht)")
        if placement is Placement.NONE and self.transform != "none":
            raise ConfigError("placement", f"transform {self.transform!r} given but placement is 'none'")
        if len(self.widths) != 3 or any(w <= 0 for w in self.widths):
            raise ConfigError("widths", f"need three positive channel counts, got {self.widths}")
        for name, lo in (("blocks_per_stage", 1), ("batch_size", 1), ("epochs", 0), ("subset", 1), ("test_subset", 1)):
            if getattr(self, name) < lo:
                raise ConfigError(name, f"must be >= {lo}, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout", f"must lie in [0, 1), got {self.dropout}")
        for name in ("l2", "noise"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ConfigError("lr", f"must be > 0, got {self.lr}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(name, f"must lie in [0, 1), got {getattr(self, name)}")
        if self.eps <= 0:
            raise ConfigError("eps", f"must be > 0, got {self.eps}")
        if self.target_accuracy is not None and not 0.0 < self.target_accuracy <= 1.0:
            raise ConfigError("target_accuracy", f"must lie in (0, 1], got {self.target_accuracy}")
        if not self.output_dir:
            raise ConfigError("output_dir", "must not be empty")
        if self.source == "synthetic":
            if not 2 <= self.classes <= len(spectral_frequencies()):
                raise ConfigError("classes", f"must lie in [2, {len(spectral_frequencies())}], got {self.classes}")
            if self.subset < 10 * self.classes:
                raise ConfigError("subset", f"synthetic data needs at least 10 samples per class, got {self.subset}")
        else:
            self._validate_cifar()

    def _validate_cifar(self) -> None:
        if not self.data_dir:
            raise ConfigError("data_dir", f"required for source {self.source!r}")
        label_bytes, _, train_files, test_files = CIFAR_VARIANTS[self.source]
        record = label_bytes + CIFAR_PIXELS
        for name, files, wanted in (("subset", train_files, self.subset), ("test_subset", test_files, self.test_subset)):
            available = 0
            for fname in files:
                path = Path(self.data_dir) / fname
                if not path.is_file():
                    raise ConfigError("data_dir", f"missing CIFAR file {path}")
                available += path.stat().st_size // record
            if wanted > available:
                raise ConfigError(name, f"{wanted} requested but only {available} records available")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    default = getattr(ExperimentConfig(), key)
    raw = raw.strip()
    try:
        if key == "widths":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if key == "target_accuracy":
            return None if raw.lower() in ("", "none") else float(raw)
        if isinstance(default, bool):
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.lower() if key in ("source", "transform", "placement") else raw
    except ValueError as e:
        raise ConfigError(key, str(e)) from None


def apply_overrides(config: ExperimentConfig, pairs: dict[str, str]) -> ExperimentConfig:
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(key, f"unknown key; valid keys are {', '.join(_FIELDS)}")
        setattr(config, key, _convert(key, raw))
    return config


def parse_config(text: str, validate: bool = True) -> ExperimentConfig:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        pairs[key] = value
    config = apply_overrides(ExperimentConfig(), pairs)
    if validate:
        config.validate()
    return config


def load_config(path, validate: bool = True) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), validate)


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "widths":
            v = ",".join(str(w) for w in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"
