"""Detection metrics: binary and one-vs-rest multi-class."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .flow import TrafficLabel


class MetricsMode(enum.Enum):
    BINARY = "binary"
    MULTI = "multi"


@dataclass
class ClassMetrics:
    name: str
    support: int
    tp: int
    fp: int
    tn: int
    fn: int

    @staticmethod
    def _ratio(num: int, den: int) -> float:
        return num / den if den else 0.0

    @property
    def accuracy(self) -> float:
        return self._ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn)

    @property
    def recall(self) -> float:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def precision(self) -> float:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def fpr(self) -> float:
        return self._ratio(self.fp, self.fp + self.tn)

    @property
    def fnr(self) -> float:
        return self._ratio(self.fn, self.fn + self.tp)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict[str, float]:
        return {"support": self.support, "accuracy": self.accuracy, "recall": self.recall,
                "precision": self.precision, "fpr": self.fpr, "fnr": self.fnr, "f1": self.f1}


@dataclass
class MetricsTable:
    mode: MetricsMode
    classes: list[str]
    confusion: np.ndarray  # rows = truth, columns = prediction
    per_class: dict[str, ClassMetrics]

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    @property
    def positive(self) -> ClassMetrics:
        """The MALICIOUS row in binary mode."""
        return self.per_class["MALICIOUS"]

    def to_text(self) -> str:
        lines = [f"mode={self.mode.value}", f"accuracy={self.accuracy:.6f}", f"samples={int(self.confusion.sum())}"]
        if self.mode is MetricsMode.BINARY:
            pos = self.positive
            lines += [f"recall={pos.recall:.6f}", f"fpr={pos.fpr:.6f}", f"fnr={pos.fnr:.6f}", f"f1={pos.f1:.6f}"]
        lines.append("")
        lines.append("class\tsupport\taccuracy\trecall\tprecision\tfpr\tfnr\tf1")
        for name in self.classes:
            m = self.per_class[name]
            lines.append(f"{name}\t{m.support}\t{m.accuracy:.6f}\t{m.recall:.6f}\t{m.precision:.6f}"
                         f"\t{m.fpr:.6f}\t{m.fnr:.6f}\t{m.f1:.6f}")
        lines.append("")
        lines.append("confusion\t" + "\t".join(self.classes))
        for name, row in zip(self.classes, self.confusion):
            lines.append(name + "\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def _label(x) -> TrafficLabel:
    x = getattr(x, "label", x)
    if isinstance(x, TrafficLabel):
        return x
    if isinstance(x, str):
        return TrafficLabel[x]
    return TrafficLabel.from_code(int(x))


def compute_metrics(verdicts: Sequence, truth: Sequence, mode: MetricsMode | str = MetricsMode.BINARY) -> MetricsTable:
    """Metrics of predicted labels (Verdicts or labels) against ground truth."""
    mode = MetricsMode(mode)
    if len(verdicts) != len(truth):
        raise ValueError(f"length mismatch: {len(verdicts)} verdicts vs {len(truth)} truth labels")
    if not truth:
        raise ValueError("no samples")
    pred = [_label(v) for v in verdicts]
    true = [_label(t) for t in truth]
    if mode is MetricsMode.BINARY:
        classes = ["BENIGN", "MALICIOUS"]
        p_idx = np.array([int(p.is_malicious) for p in pred])
        t_idx = np.array([int(t.is_malicious) for t in true])
    else:
        classes = [lab.name for lab in TrafficLabel]
        p_idx = np.array([p.code for p in pred])
        t_idx = np.array([t.code for t in true])
    k = len(classes)
    conf = np.zeros((k, k), dtype=int)
    np.add.at(conf, (t_idx, p_idx), 1)
    total = int(conf.sum())
    per = {}
    for i, name in enumerate(classes):
        tp = int(conf[i, i])
        fn = int(conf[i].sum() - tp)
        fp = int(conf[:, i].sum() - tp)
        per[name] = ClassMetrics(name, int(conf[i].sum()), tp, fp, total - tp - fn - fp, fn)
    return MetricsTable(mode, classes, conf, per)


def feature_histograms(values: np.ndarray, names: Sequence[str], groups: Sequence[str],
                       bins: int = 20) -> list[tuple[str, str, float, float, int, float]]:
    """Per-feature, per-group histogram rows: (feature, group, lo, hi, count, cdf).

    Bin edges are shared across groups of one feature so the columns line up
    for external plotting.
    """
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    rows = []
    for j, name in enumerate(names):
        col = values[:, j]
        lo, hi = float(col.min()), float(col.max())
        edges = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
        for g in sorted(set(groups.tolist())):
            counts, _ = np.histogram(col[groups == g], bins=edges)
            cdf = np.cumsum(counts) / max(counts.sum(), 1)
            for b in range(bins):
                rows.append((name, str(g), float(edges[b]), float(edges[b + 1]), int(counts[b]), float(cdf[b])))
    return rows
