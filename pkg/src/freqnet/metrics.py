"""Classification metrics from an N x N confusion matrix and a portable
resource monitor (wall clock + multiply-accumulate counts)."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

ORIENTATION = "# rows = predicted class, columns = actual class"


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # counts[predicted, actual]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, k: int) -> tuple[int, int, int, int]:
        """(TP, TN, FP, FN) for class ``k``."""
        if not 0 <= k < self.n_classes:
            raise ValueError(f"class index {k} outside [0, {self.n_classes})")
        c = self.counts
        tp = int(c[k, k])
        fp = int(c[k, :].sum()) - tp
        fn = int(c[:, k].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, tn, fp, fn

    def accuracy(self) -> float:
        """Micro-averaged accuracy: trace / total."""
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(ORIENTATION + "\n")
        for row in self.counts:
            buf.write(",".join(str(int(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = [line for line in text.splitlines() if line and not line.startswith("#")]
        return cls(np.array([[int(v) for v in r.split(",")] for r in rows], dtype=np.int64))


def confusion_matrix(predictions, actuals, n_classes: int) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    actuals = np.asarray(actuals, dtype=np.int64).ravel()
    if predictions.shape != actuals.shape:
        raise ValueError(f"predictions ({predictions.size}) and actuals ({actuals.size}) differ in length")
    for label, arr in (("prediction", predictions), ("actual", actuals)):
        bad = np.flatnonzero((arr < 0) | (arr >= n_classes))
        if bad.size:
            raise ValueError(f"{label} label {arr[bad[0]]} at index {bad[0]} outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (predictions, actuals), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    degenerate: frozenset = frozenset()  # names of metrics with a zero denominator


def _ratio(num, den, name, degenerate):
    if den == 0:
        degenerate.add(name)
        return 0.0
    return num / den


def metrics_from_counts(tp: int, tn: int, fp: int, fn: int) -> ClassMetrics:
    deg: set[str] = set()
    accuracy = _ratio(tp + tn, tp + tn + fp + fn, "accuracy", deg)
    precision = _ratio(tp, tp + fp, "precision", deg)
    recall = _ratio(tp, tp + fn, "recall", deg)
    if "precision" in deg or "recall" in deg:
        deg.add("f1")
        f1 = 0.0
    else:
        f1 = _ratio(2 * precision * recall, precision + recall, "f1", deg)
    specificity = _ratio(tn, tn + fp, "specificity", deg)
    return ClassMetrics(accuracy, precision, recall, f1, specificity, frozenset(deg))


def derive_metrics(cm: ConfusionMatrix, k: int) -> ClassMetrics:
    """Accuracy, precision, recall, F1 and specificity of class ``k`` versus the rest."""
    return metrics_from_counts(*cm.one_vs_rest(k))


def classwise_accuracy(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-class recall and a mask of classes with no samples (excluded from means)."""
    col = cm.counts.sum(axis=0)
    empty = col == 0
    diag = np.diag(cm.counts).astype(np.float64)
    acc = np.divide(diag, col, out=np.zeros_like(diag), where=~empty)
    return acc, empty


def mean_classwise_accuracy(cm: ConfusionMatrix) -> float:
    acc, empty = classwise_accuracy(cm)
    return float(acc[~empty].mean()) if (~empty).any() else 0.0


# ---------------------------------------------------------------------------
# Resource accounting


def conv_macs(out_h: int, out_w: int, out_c: int, in_c: int, k: int) -> int:
    return out_h * out_w * out_c * in_c * k * k


def dense_macs(n_in: int, n_out: int) -> int:
    return n_in * n_out


@dataclass
class EpochRecord:
    epoch: int
    split: str
    loss: float
    accuracy: float
    wall_ms: float
    params: int
    macs: int
    transform_macs: int


CSV_HEADER = [f.name for f in fields(EpochRecord)]


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def records_to_csv(records: list[EpochRecord], wall_clock: bool = True) -> str:
    """Metrics CSV. ``wall_clock=False`` writes 0 for ``wall_ms`` so the file is
    reproducible byte for byte."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "split", "loss", "accuracy", "wall_ms", "params", "macs", "transform_macs"])
    for r in records:
        row = asdict(r)
        if not wall_clock:
            row["wall_ms"] = 0.0
        writer.writerow([_fmt(row[name]) for name in CSV_HEADER])
    return buf.getvalue()


def records_from_csv(text: str) -> list[EpochRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [EpochRecord(int(r["epoch"]), r["split"], float(r["loss"]), float(r["accuracy"]),
                        float(r["wall_ms"]), int(r["params"]), int(r["macs"]), int(r["transform_macs"]))
            for r in rows]


class MonitorStateError(RuntimeError):
    pass


class ResourceMonitor:
    """Per-epoch log of loss/accuracy, elapsed wall time and arithmetic cost.

    Stands in for GPU telemetry: ``begin`` fixes the per-sample MAC counts
    from the model topology, ``on_epoch`` stamps elapsed time, ``finish``
    returns the log.
    """

    def __init__(self, clock=time.perf_counter):
        self._clock = clock
        self._start = None
        self.records: list[EpochRecord] = []

    def begin(self, params: int, macs_per_sample: int, transform_macs_per_sample: int) -> None:
        self.params = params
        self.macs_per_sample = macs_per_sample
        self.transform_macs_per_sample = transform_macs_per_sample
        self.records = []
        self._start = self._clock()

    def elapsed_ms(self) -> float:
        if self._start is None:
            raise MonitorStateError("on_epoch called before begin")
        return (self._clock() - self._start) * 1000.0

    def on_epoch(self, epoch: int, split: str, loss: float, accuracy: float, n_samples: int) -> EpochRecord:
        """Record one epoch; MACs are forward-pass counts for ``n_samples`` samples."""
        wall = self.elapsed_ms()
        rec = EpochRecord(epoch, split, float(loss), float(accuracy), wall, self.params,
                          self.macs_per_sample * n_samples, self.transform_macs_per_sample * n_samples)
        self.records.append(rec)
        return rec

    def finish(self) -> list[EpochRecord]:
        if self._start is None:
            raise MonitorStateError("finish called before begin")
        return list(self.records)
