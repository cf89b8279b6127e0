"""Trace datasets: loading recorded traces and splitting them by window."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .features import Window, WindowConfig, window_flows
from .flow import DeviceLogEvent, FlowRecord, TrafficLabel
from .traceio import read_flows, read_labels, read_logs


class TraceFormat(enum.Enum):
    RECORDS = "records"
    LOGS = "logs"


@dataclass
class TraceDataset:
    flows: list[FlowRecord]
    logs: list[DeviceLogEvent] = field(default_factory=list)
    # explicit ground truth per window id; evaluation only
    labels: dict[str, TrafficLabel] = field(default_factory=dict)
    # device -> (label, onset timestamp); windows after onset inherit the label
    device_labels: dict[str, tuple[TrafficLabel, float]] = field(default_factory=dict)
    # fixed windowing, set by split() so parts never re-window across the cut
    windows: list[Window] | None = None
    window_config: WindowConfig | None = None

    def get_windows(self, config: WindowConfig | None = None) -> list[Window]:
        config = config or WindowConfig()
        if self.windows is not None and (self.window_config or WindowConfig()) == config:
            return self.windows
        return window_flows(self.flows, self.logs, config)

    @property
    def has_truth(self) -> bool:
        return bool(self.labels or self.device_labels)

    def truth_for(self, windows: Sequence[Window]) -> list[TrafficLabel] | None:
        """Ground-truth label per window, or None when the dataset has none."""
        if not self.has_truth:
            return None
        return [self.labels.get(w.window_id) or label_window(w, self.device_labels) for w in windows]


def label_window(window: Window, device_labels: dict[str, tuple[TrafficLabel, float]]) -> TrafficLabel:
    """Scenario label when at least half of the window's new flows follow the onset."""
    entry = device_labels.get(window.device)
    if entry is None:
        return TrafficLabel.BENIGN
    label, onset = entry
    new = window.new_flows
    after = sum(1 for f in new if f.timestamp >= onset)
    return label if new and 2 * after >= len(new) else TrafficLabel.BENIGN


def window_labels(windows: Sequence[Window], device_labels) -> dict[str, TrafficLabel]:
    return {w.window_id: label_window(w, device_labels) for w in windows}


def load_trace(path, format: TraceFormat | str = TraceFormat.RECORDS, *, log_offset: float = 0.0):
    """Read one trace file; flows or log events come back time-sorted."""
    fmt = TraceFormat(format) if not isinstance(format, TraceFormat) else format
    if fmt is TraceFormat.RECORDS:
        return read_flows(path)
    return read_logs(path, offset=log_offset)


def load_dataset(flow_path, log_path=None, label_path=None, *, log_offset: float = 0.0) -> TraceDataset:
    flows = read_flows(flow_path)
    logs = read_logs(log_path, offset=log_offset) if log_path else []
    labels, devices = read_labels(label_path) if label_path else ({}, {})
    return TraceDataset(flows, logs, labels, devices)


def split(dataset: TraceDataset, train_fraction: float, seed: int,
          config: WindowConfig | None = None) -> tuple[TraceDataset, TraceDataset]:
    """Partition device windows into (train, test) parts.

    Every flow belongs to the window in which it was first seen, so each
    flow lands on exactly one side; each part keeps its windows fixed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    config = config or dataset.window_config or WindowConfig()
    windows = dataset.get_windows(config)
    n = len(windows)
    if n < 2:
        raise ValueError("insufficient data to split")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    chosen = set(order[:n_train].tolist())
    parts = ([w for i, w in enumerate(windows) if i in chosen],
             [w for i, w in enumerate(windows) if i not in chosen])
    return tuple(_subset(dataset, part, config) for part in parts)  # type: ignore[return-value]


def _subset(dataset: TraceDataset, windows: list[Window], config: WindowConfig) -> TraceDataset:
    flows = sorted((f for w in windows for f in w.new_flows), key=lambda f: f.timestamp)
    spans: dict[str, list[tuple[float, float]]] = {}
    for w in windows:
        spans.setdefault(w.device, []).append((w.start, w.end))
    logs = [e for e in dataset.logs
            if any(a <= e.timestamp <= b for a, b in spans.get(e.device_mac, ()))]
    ids = {w.window_id for w in windows}
    labels = {k: v for k, v in dataset.labels.items() if k in ids}
    if dataset.device_labels:
        for w in windows:
            labels.setdefault(w.window_id, label_window(w, dataset.device_labels))
    return replace(dataset, flows=flows, logs=logs, labels=labels,
                   device_labels=dict(dataset.device_labels), windows=windows, window_config=config)
