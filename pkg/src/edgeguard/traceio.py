"""Line-record file formats for flows (.fw), device logs (.fwl) and labels.

All files are UTF-8 with LF endings. Fields are tab separated; lines starting
with ``#`` are comments, the first of which names the format and version.
Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable

from .flow import (
    FLOW_FIELDS, DeviceLogEvent, FlowError, FlowRecord, LogKind, Protocol, TcpFlag,
    TrafficLabel, normalize_mac,
)

FLOW_MAGIC = "edgeguard-flows v1"
LOG_MAGIC = "edgeguard-logs v1"
LABEL_MAGIC = "edgeguard-labels v1"
LOG_FIELDS = ("timestamp", "device_mac", "kind", "success")


class TraceParseError(ValueError):
    def __init__(self, path: str | os.PathLike, line_no: int, msg: str):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.path = str(path)
        self.line_no = line_no


def _flags_to_text(flags: TcpFlag | FlowError, none: str) -> str:
    names = [m.name for m in type(flags) if m.value and m in flags]
    return "|".join(names) if names else none


def _text_to_flags(text: str, cls, none: str):
    out = cls(0)
    if text == none:
        return out
    for name in text.split("|"):
        out |= cls[name]
    return out


def format_flow(f: FlowRecord) -> str:
    return "\t".join((
        repr(float(f.timestamp)), f.src_mac, f.dst_mac, f.src_ip or "-", f.dst_ip or "-",
        str(f.src_port), str(f.dst_port), f.protocol.value,
        _flags_to_text(f.tcp_flags, "-"),
        str(f.bytes_src2dst), str(f.bytes_dst2src), str(f.packets), repr(float(f.duration)),
        _flags_to_text(f.errors, "NONE"),
        "1" if f.router_alert else "0", "1" if f.padding else "0", "1" if f.urgent else "0",
    ))


def _bool(text: str) -> bool:
    if text not in ("0", "1"):
        raise ValueError(f"expected 0 or 1, got {text!r}")
    return text == "1"


def parse_flow(line: str) -> FlowRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != len(FLOW_FIELDS):
        raise ValueError(f"expected {len(FLOW_FIELDS)} fields, got {len(parts)}")
    return FlowRecord(
        timestamp=float(parts[0]),
        src_mac=normalize_mac(parts[1]),
        dst_mac=normalize_mac(parts[2]),
        src_ip="" if parts[3] == "-" else parts[3],
        dst_ip="" if parts[4] == "-" else parts[4],
        src_port=int(parts[5]),
        dst_port=int(parts[6]),
        protocol=Protocol(parts[7]),
        tcp_flags=_text_to_flags(parts[8], TcpFlag, "-"),
        bytes_src2dst=int(parts[9]),
        bytes_dst2src=int(parts[10]),
        packets=int(parts[11]),
        duration=float(parts[12]),
        errors=_text_to_flags(parts[13], FlowError, "NONE"),
        router_alert=_bool(parts[14]),
        padding=_bool(parts[15]),
        urgent=_bool(parts[16]),
    )


def format_log(ev: DeviceLogEvent) -> str:
    return "\t".join((repr(float(ev.timestamp)), ev.device_mac, ev.kind.value, "1" if ev.success else "0"))


def parse_log(line: str) -> DeviceLogEvent:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != len(LOG_FIELDS):
        raise ValueError(f"expected {len(LOG_FIELDS)} fields, got {len(parts)}")
    return DeviceLogEvent(float(parts[0]), normalize_mac(parts[1]), LogKind(parts[2]), _bool(parts[3]))


def _write_lines(path, magic: str, columns: Iterable[str], lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {magic}\n# " + "\t".join(columns) + "\n")
        for line in lines:
            fh.write(line + "\n")


def _read_records(path, parse):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                out.append(parse(line))
            except (ValueError, KeyError) as exc:
                raise TraceParseError(path, line_no, str(exc)) from None
    return out


def write_flows(path, flows: Iterable[FlowRecord]) -> None:
    _write_lines(path, FLOW_MAGIC, FLOW_FIELDS, (format_flow(f) for f in flows))


def read_flows(path) -> list[FlowRecord]:
    """Parse a flow file; records come back sorted by timestamp (stable)."""
    flows = _read_records(path, parse_flow)
    flows.sort(key=lambda f: f.timestamp)
    return flows


def write_logs(path, logs: Iterable[DeviceLogEvent]) -> None:
    _write_lines(path, LOG_MAGIC, LOG_FIELDS, (format_log(e) for e in logs))


def read_logs(path, offset: float = 0.0) -> list[DeviceLogEvent]:
    """Parse a device-log file, shifting every timestamp by ``offset`` seconds."""
    logs = _read_records(path, parse_log)
    if offset:
        logs = [DeviceLogEvent(e.timestamp + offset, e.device_mac, e.kind, e.success) for e in logs]
    logs.sort(key=lambda e: e.timestamp)
    return logs


def write_labels(path, window_labels: dict[str, TrafficLabel],
                 device_labels: dict[str, tuple[TrafficLabel, float]] | None = None) -> None:
    lines = []
    for mac, (label, onset) in sorted((device_labels or {}).items()):
        lines.append(f"device\t{mac}\t{label.name}\t{onset!r}")
    for wid, label in window_labels.items():
        lines.append(f"window\t{wid}\t{label.name}")
    _write_lines(path, LABEL_MAGIC, ("kind", "key", "label", "onset"), lines)


def read_labels(path) -> tuple[dict[str, TrafficLabel], dict[str, tuple[TrafficLabel, float]]]:
    windows: dict[str, TrafficLabel] = {}
    devices: dict[str, tuple[TrafficLabel, float]] = {}

    def parse(line: str):
        parts = line.rstrip("\n").split("\t")
        if parts[0] == "window" and len(parts) == 3:
            windows[parts[1]] = TrafficLabel[parts[2]]
        elif parts[0] == "device" and len(parts) == 4:
            devices[normalize_mac(parts[1])] = (TrafficLabel[parts[2]], float(parts[3]))
        else:
            raise ValueError("expected 'window <id> <label>' or 'device <mac> <label> <onset>'")
        return None

    _read_records(path, parse)
    return windows, devices


def sibling(path, suffix: str) -> Path:
    """``trace.fw`` -> ``trace<suffix>``."""
    p = Path(path)
    return p.with_suffix(suffix)


VERDICT_MAGIC = "edgeguard-verdicts v1"
VERDICT_FIELDS = ("window_id", "o_star", "label", "confidence")


def format_verdict(window_id: str, o_star: float, label: TrafficLabel, confidence: float) -> str:
    return f"{window_id}\t{o_star!r}\t{label.name}\t{confidence!r}"


def write_verdicts(path, rows: Iterable[tuple[str, float, TrafficLabel, float]]) -> None:
    _write_lines(path, VERDICT_MAGIC, VERDICT_FIELDS, (format_verdict(*r) for r in rows))


def read_verdicts(path) -> list[tuple[str, float, TrafficLabel, float]]:
    def parse(line: str):
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(VERDICT_FIELDS):
            raise ValueError(f"expected {len(VERDICT_FIELDS)} fields, got {len(parts)}")
        return parts[0], float(parts[1]), TrafficLabel[parts[2]], float(parts[3])

    return _read_records(path, parse)
