"""End-to-end runs: data -> model -> training -> evaluation -> files."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from freqnet.config import ExperimentConfig
from freqnet.data import load_cifar_dir, split_fractions, synth_spectral_dataset
from freqnet.metrics import ResourceMonitor, confusion_matrix, mean_classwise_accuracy, records_to_csv
from freqnet.nn.model import build_model
from freqnet.nn.train import evaluate, train

log = logging.getLogger(__name__)

OUTPUT_FILES = ("metrics.csv", "confusion.csv", "topology.txt", "summary.txt")


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"experiment failed during {stage}: {cause}")
        self.stage = stage


@dataclass
class ExperimentResult:
    test_accuracy: float
    test_loss: float
    files: list[Path]
    records: list


def load_splits(config: ExperimentConfig):
    """(train, val, test). Synthetic data is cut 80/10/10; CIFAR train batches
    are cut 90/10 into train/val and the test batch gives the test split."""
    if config.source == "synthetic":
        ds = synth_spectral_dataset(config.subset // config.classes, config.classes, config.noise, config.seed)
        return split_fractions(ds, (0.8, 0.1, 0.1), seed=config.seed)
    full = load_cifar_dir(config.data_dir, config.source, "train", config.subset)
    train_split, val_split = split_fractions(full, (0.9, 0.1), seed=config.seed)
    test_split = load_cifar_dir(config.data_dir, config.source, "test", config.test_subset)
    test_split.name = "test"
    return train_split, val_split, test_split


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Train one model per ``config`` and write metrics.csv, confusion.csv,
    topology.txt and summary.txt (plus timing.csv when deterministic) into
    ``config.output_dir``. Files written by a failed run are removed."""
    stage = "config"
    written: list[Path] = []
    try:
        config.validate()
        stage = "data"
        train_split, val_split, test_split = load_splits(config)
        stage = "model"
        model = build_model(config.model_spec())
        stage = "train"
        monitor = ResourceMonitor()
        _, records = train(model, train_split, config.train_config(), val_split, monitor)
        stage = "evaluate"
        test_loss, test_acc, preds = evaluate(model, test_split)
        last_epoch = records[-1].epoch if records else -1
        records.append(monitor.on_epoch(last_epoch, "test", test_loss, test_acc, len(test_split)))
        cm = confusion_matrix(preds, test_split.labels, model.spec.num_classes)

        stage = "write"
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)

        def emit(name, text):
            path = out / name
            written.append(path)
            path.write_text(text)

        emit("metrics.csv", records_to_csv(records, wall_clock=not config.deterministic))
        if config.deterministic:
            emit("timing.csv", "epoch,split,wall_ms\n" + "".join(
                f"{r.epoch},{r.split},{r.wall_ms:.3f}\n" for r in records))
        emit("confusion.csv", cm.to_csv())
        emit("topology.txt", model.topology())
        total_macs = sum(r.macs for r in records)
        total_tmacs = sum(r.transform_macs for r in records)
        summary = {
            "test_accuracy": f"{test_acc:.6f}",
            "test_loss": f"{test_loss:.6f}",
            "mean_classwise_accuracy": f"{mean_classwise_accuracy(cm):.6f}",
            "total_wall_ms": f"{records[-1].wall_ms:.1f}",
            "total_macs": str(total_macs),
            "total_transform_macs": str(total_tmacs),
            "params": str(model.params.count()),
            "epochs_run": str(last_epoch + 1),
            "source": config.source,
            "transform": config.transform,
            "placement": config.placement,
            "split": (f"train={len(train_split)} val={len(val_split)} test={len(test_split)}"
                      + (" (80/10/10 of the generated set)" if config.source == "synthetic"
                         else " (90/10 of the train batches; test batch)")),
            "macs_note": "forward-pass multiply-accumulates; transform cost counted separately",
        }
        emit("summary.txt", "".join(f"{k} = {v}\n" for k, v in summary.items()))
        np.savez(out / "params.npz", **{k.replace("/", "."): v for k, v in model.params.snapshot().items()})
        written.append(out / "params.npz")
        return ExperimentResult(test_acc, test_loss, written, records)
    except Exception as e:
        for path in written:
            path.unlink(missing_ok=True)
        raise ExperimentError(stage, e) from e
