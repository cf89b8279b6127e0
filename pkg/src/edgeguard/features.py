"""Per-device feature extraction over connection-count windows.

Each attribute turns every connection in a window into an observation (or
skips it); the observations are folded into running (N, sum, sum of squares)
accumulators from which mean, standard deviation and count are read off.
"""

from __future__ import annotations

import bisect
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .flow import DeviceLogEvent, FlowError, FlowRecord, LogKind, Protocol

STATS = ("mean", "std", "count")

DURATION_EDGES = (1.0, 10.0, 60.0)
PACKET_SIZE_EDGES = (128.0, 512.0, 1500.0)

AUTH_ATTRIBUTES = {
    (LogKind.SSH_LOGIN, True): "ssh_login_ok",
    (LogKind.SSH_LOGIN, False): "ssh_login_fail",
    (LogKind.SERVICE_LOGIN, True): "service_login_ok",
    (LogKind.SERVICE_LOGIN, False): "service_login_fail",
    (LogKind.DEVICE_LOGIN, True): "device_login_ok",
    (LogKind.DEVICE_LOGIN, False): "device_login_fail",
}

# packet counters: attribute -> protocols whose connections it observes
PACKET_COUNTERS = {
    "pkt_arp": {Protocol.ARP},
    "pkt_llc": {Protocol.LLC},
    "pkt_ip": None,  # any IP-carried connection
    "pkt_icmp": {Protocol.ICMP, Protocol.ICMPV6},
    "pkt_eapol": {Protocol.EAPOL},
    "pkt_tcp": None,
    "pkt_udp": None,
    "pkt_http": {Protocol.HTTP},
    "pkt_ftp": {Protocol.FTP},
    "pkt_https": {Protocol.HTTPS},
    "pkt_dhcp": {Protocol.DHCP},
    "pkt_dns": {Protocol.DNS, Protocol.MDNS},
    "pkt_ntp": {Protocol.NTP},
}

ATTRIBUTES: tuple[str, ...] = (
    "dst_ips_total", "dst_ips_unique",
    "src_ports_total", "src_ports_unique",
    "dst_ports_total", "dst_ports_unique",
    "connections_total", "same_source", "same_destination", "same_service",
    "duration_lt1", "duration_1_10", "duration_10_60", "duration_gt60",
    *PACKET_COUNTERS,
    "router_alert", "syn_error", "rej_error", "urgent", "padding",
    "data_total", "data_src2dst", "data_dst2src",
    "size_lt128", "size_128_512", "size_512_1500", "size_gt1500",
    *AUTH_ATTRIBUTES.values(),
)

_NON_IP = frozenset({Protocol.ARP, Protocol.LLC, Protocol.EAPOL})


class StatsAccumulator:
    """Running count, sum and sum of squares of a stream of observations."""

    __slots__ = ("n_obs", "sum_obs", "sum_sq")

    def __init__(self, n_obs: int = 0, sum_obs: float = 0.0, sum_sq: float = 0.0):
        self.n_obs = n_obs
        self.sum_obs = sum_obs
        self.sum_sq = sum_sq

    def add(self, x: float) -> None:
        if not math.isfinite(x):
            raise ValueError(f"non-finite observation: {x!r}")
        self.n_obs += 1
        self.sum_obs += x
        self.sum_sq += x * x

    def remove(self, x: float) -> None:
        """Drop one earlier observation (sliding-window support)."""
        if self.n_obs <= 0:
            raise ValueError("cannot remove from an empty accumulator")
        self.n_obs -= 1
        self.sum_obs -= x
        self.sum_sq -= x * x

    def copy(self) -> StatsAccumulator:
        return StatsAccumulator(self.n_obs, self.sum_obs, self.sum_sq)

    def as_tuple(self) -> tuple[int, float, float]:
        return (self.n_obs, self.sum_obs, self.sum_sq)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StatsAccumulator):
            return NotImplemented
        return self.as_tuple() == other.as_tuple()

    def __repr__(self) -> str:
        return f"StatsAccumulator(n_obs={self.n_obs}, sum_obs={self.sum_obs}, sum_sq={self.sum_sq})"


def accumulate(acc: StatsAccumulator, x: float) -> StatsAccumulator:
    """Return a new accumulator with ``x`` folded in."""
    out = acc.copy()
    out.add(x)
    return out


def finalize_stats(acc: StatsAccumulator) -> tuple[float, float, int]:
    """(mean, std, count); an empty accumulator reads as (0, 0, 0)."""
    n = acc.n_obs
    if n == 0:
        return (0.0, 0.0, 0)
    mean = acc.sum_obs / n
    std = math.sqrt(abs(acc.sum_sq / n - mean * mean))
    return (mean, std, n)


class AttributeSet:
    """One accumulator per attribute for a single device window."""

    def __init__(self, accumulators: dict[str, StatsAccumulator] | None = None):
        self.accumulators = accumulators if accumulators is not None else {
            name: StatsAccumulator() for name in ATTRIBUTES
        }

    def __getitem__(self, name: str) -> StatsAccumulator:
        return self.accumulators[name]

    def __contains__(self, name: str) -> bool:
        return name in self.accumulators

    def value(self, name: str) -> float:
        """Summed observations, i.e. the attribute read as a window count."""
        return self.accumulators[name].sum_obs

    def stats(self, name: str) -> tuple[float, float, int]:
        return finalize_stats(self.accumulators[name])

    def raw_vector(self, features: Sequence[tuple[str, str]]) -> np.ndarray:
        out = np.empty(len(features))
        cache: dict[str, tuple[float, float, int]] = {}
        for k, (attr, stat) in enumerate(features):
            if attr not in self.accumulators:
                raise KeyError(f"attribute {attr!r} missing from attribute set")
            if attr not in cache:
                cache[attr] = self.stats(attr)
            out[k] = cache[attr][STATS.index(stat)]
        return out


@dataclass(frozen=True)
class WindowConfig:
    n_conn: int = 50
    stride: int | None = None  # connections between window emissions; None = n_conn
    flush_interval: float = 60.0

    def __post_init__(self) -> None:
        if self.n_conn < 1:
            raise ValueError("n_conn must be >= 1")
        if self.stride is not None and not 1 <= self.stride <= self.n_conn:
            raise ValueError("stride must lie in [1, n_conn]")
        if self.flush_interval <= 0:
            raise ValueError("flush_interval must be positive")

    @property
    def step(self) -> int:
        return self.stride or self.n_conn


@dataclass
class Window:
    device: str
    index: int
    attrs: AttributeSet
    flows: tuple[FlowRecord, ...]
    n_new: int  # trailing flows first seen in this window
    partial: bool
    start: float
    end: float

    @property
    def window_id(self) -> str:
        return window_id(self.device, self.index)

    @property
    def new_flows(self) -> tuple[FlowRecord, ...]:
        return self.flows[len(self.flows) - self.n_new:]


def window_id(device: str, index: int) -> str:
    return f"{device}#{index}"


def parse_window_id(wid: str) -> tuple[str, int]:
    device, _, idx = wid.rpartition("#")
    return device, int(idx)


def _bin_index(x: float, edges: Sequence[float]) -> int:
    return bisect.bisect_right(edges, x)


def connection_attributes(
    flows: Sequence[FlowRecord], events: Iterable[DeviceLogEvent] = ()
) -> AttributeSet:
    """Fold a window's connections (oldest first) into an AttributeSet."""
    attrs = AttributeSet()
    acc = attrs.accumulators
    if flows:
        last = flows[-1]
        last_dst = last.dst_ip or last.dst_mac
        last_service = (last_dst, last.dst_port, last.protocol)
    seen_ips: set[str] = set()
    seen_sports: set[int] = set()
    seen_dports: set[int] = set()
    for f in flows:
        dst = f.dst_ip or f.dst_mac
        acc["dst_ips_total"].add(1.0 if f.dst_ip else 0.0)
        acc["dst_ips_unique"].add(1.0 if f.dst_ip and f.dst_ip not in seen_ips else 0.0)
        if f.dst_ip:
            seen_ips.add(f.dst_ip)
        acc["src_ports_total"].add(1.0 if f.src_port else 0.0)
        acc["src_ports_unique"].add(1.0 if f.src_port and f.src_port not in seen_sports else 0.0)
        if f.src_port:
            seen_sports.add(f.src_port)
        acc["dst_ports_total"].add(1.0 if f.dst_port else 0.0)
        acc["dst_ports_unique"].add(1.0 if f.dst_port and f.dst_port not in seen_dports else 0.0)
        if f.dst_port:
            seen_dports.add(f.dst_port)
        acc["connections_total"].add(1.0)
        acc["same_source"].add(1.0 if f.src_ip == last.src_ip else 0.0)
        acc["same_destination"].add(1.0 if dst == last_dst else 0.0)
        acc["same_service"].add(1.0 if (dst, f.dst_port, f.protocol) == last_service else 0.0)

        dbin = _bin_index(f.duration, DURATION_EDGES)
        for k, name in enumerate(("duration_lt1", "duration_1_10", "duration_10_60", "duration_gt60")):
            acc[name].add(1.0 if k == dbin else 0.0)

        pk = float(f.packets)
        proto = f.protocol
        transport = proto.transport
        is_ip = proto not in _NON_IP
        for name, protos in PACKET_COUNTERS.items():
            if name == "pkt_ip":
                hit = is_ip
            elif name == "pkt_tcp":
                hit = transport is Protocol.TCP
            elif name == "pkt_udp":
                hit = transport is Protocol.UDP
            else:
                hit = proto in protos
            if hit:
                acc[name].add(pk)

        acc["router_alert"].add(1.0 if f.router_alert else 0.0)
        acc["syn_error"].add(1.0 if f.errors & FlowError.SYN_ERROR else 0.0)
        acc["rej_error"].add(1.0 if f.errors & FlowError.REJ_ERROR else 0.0)
        acc["urgent"].add(1.0 if f.urgent else 0.0)
        acc["padding"].add(1.0 if f.padding else 0.0)

        acc["data_total"].add(float(f.total_bytes))
        acc["data_src2dst"].add(float(f.bytes_src2dst))
        acc["data_dst2src"].add(float(f.bytes_dst2src))
        sbin = _bin_index(f.total_bytes / f.packets, PACKET_SIZE_EDGES)
        for k, name in enumerate(("size_lt128", "size_128_512", "size_512_1500", "size_gt1500")):
            acc[name].add(1.0 if k == sbin else 0.0)

    for ev in events:
        acc[AUTH_ATTRIBUTES[(ev.kind, ev.success)]].add(1.0)
    return attrs


class _LogIndex:
    def __init__(self, logs: Iterable[DeviceLogEvent]):
        self._by_device: dict[str, tuple[list[float], list[DeviceLogEvent]]] = {}
        for ev in logs:
            ts, evs = self._by_device.setdefault(ev.device_mac, ([], []))
            ts.append(ev.timestamp)
            evs.append(ev)
        for ts, evs in self._by_device.values():
            order = sorted(range(len(ts)), key=ts.__getitem__)
            ts[:] = [ts[i] for i in order]
            evs[:] = [evs[i] for i in order]

    def span(self, device: str, start: float, end: float) -> list[DeviceLogEvent]:
        entry = self._by_device.get(device)
        if entry is None:
            return []
        ts, evs = entry
        return evs[bisect.bisect_left(ts, start):bisect.bisect_right(ts, end)]


@dataclass
class _DeviceState:
    recent: deque
    pending: int = 0
    pending_start: float = 0.0
    index: int = 0
    seen: int = 0


def window_flows(
    flows: Sequence[FlowRecord],
    logs: Sequence[DeviceLogEvent] = (),
    config: WindowConfig | None = None,
) -> list[Window]:
    """Aggregate flows per source device over the latest ``n_conn`` connections.

    A device's window closes every ``config.step`` new connections, when its
    oldest pending connection is ``flush_interval`` seconds old (checked
    against the replay clock), or at the end of the input. Windows are
    returned in closing order.
    """
    config = config or WindowConfig()
    logs_idx = _LogIndex(logs)
    states: dict[str, _DeviceState] = {}
    heap: list[tuple[float, str]] = []
    out: list[Window] = []

    def emit(dev: str, st: _DeviceState) -> None:
        content = tuple(st.recent)
        start, end = content[0].timestamp, content[-1].timestamp
        attrs = connection_attributes(content, logs_idx.span(dev, start, end))
        out.append(Window(dev, st.index, attrs, content, st.pending,
                          partial=st.seen < config.n_conn, start=start, end=end))
        st.index += 1
        st.pending = 0

    for f in flows:
        t = f.timestamp
        while heap and heap[0][0] + config.flush_interval <= t:
            started, dev = heapq.heappop(heap)
            st = states[dev]
            if st.pending and st.pending_start == started:
                emit(dev, st)
        st = states.get(f.src_mac)
        if st is None:
            st = states[f.src_mac] = _DeviceState(deque(maxlen=config.n_conn))
        st.recent.append(f)
        st.seen += 1
        if st.pending == 0:
            st.pending_start = t
            heapq.heappush(heap, (t, f.src_mac))
        st.pending += 1
        if st.pending >= config.step:
            emit(f.src_mac, st)

    for dev, st in sorted(states.items(), key=lambda kv: kv[1].pending_start):
        if st.pending:
            emit(dev, st)
    return out


@dataclass
class FeatureSchema:
    """Active (attribute, statistic) pairs with min-max bounds."""

    features: tuple[tuple[str, str], ...]
    lo: np.ndarray = field(default=None)  # type: ignore[assignment]
    hi: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        h = len(self.features)
        self.lo = np.zeros(h) if self.lo is None else np.asarray(self.lo, dtype=float)
        self.hi = np.ones(h) if self.hi is None else np.asarray(self.hi, dtype=float)
        if self.lo.shape != (h,) or self.hi.shape != (h,):
            raise ValueError("bounds must have one entry per feature")
        if np.any(self.lo > self.hi):
            raise ValueError("normalization bounds need min <= max")

    @classmethod
    def full(cls) -> FeatureSchema:
        return cls(tuple((a, s) for a in ATTRIBUTES for s in STATS))

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f"{a}.{s}" for a, s in self.features]

    def fit(self, raw: np.ndarray) -> FeatureSchema:
        """Learn bounds from a raw (n, h) training matrix."""
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != len(self) or raw.shape[0] == 0:
            raise ValueError("raw matrix does not match schema")
        return FeatureSchema(self.features, raw.min(axis=0), raw.max(axis=0))

    def select(self, keep: Sequence[int]) -> FeatureSchema:
        keep = list(keep)
        return FeatureSchema(tuple(self.features[k] for k in keep), self.lo[keep], self.hi[keep])

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Min-max scale and clamp to [0, 1]; constant features map to 0."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape[-1] != len(self):
            raise ValueError(f"expected {len(self)} features, got {raw.shape[-1]}")
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (raw - self.lo) / safe, 0.0)
        return np.clip(scaled, 0.0, 1.0)


@dataclass
class FeatureVector:
    device_mac: str
    window_id: str
    values: np.ndarray


def raw_matrix(windows: Sequence[Window], schema: FeatureSchema) -> np.ndarray:
    if not windows:
        return np.empty((0, len(schema)))
    return np.vstack([w.attrs.raw_vector(schema.features) for w in windows])


def vectorize(attrs: AttributeSet, schema: FeatureSchema, *, device: str = "", wid: str = "") -> FeatureVector:
    return FeatureVector(device, wid, schema.transform(attrs.raw_vector(schema.features)))


def vectorize_windows(windows: Sequence[Window], schema: FeatureSchema) -> np.ndarray:
    """Normalized (n, h) matrix for a batch of windows."""
    return schema.transform(raw_matrix(windows, schema))


def as_matrix(vectors) -> np.ndarray:
    """Accept an (n, h) array or a sequence of FeatureVector."""
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(vectors).astype(float, copy=False)
    vectors = list(vectors)
    if vectors and isinstance(vectors[0], FeatureVector):
        return np.vstack([v.values for v in vectors])
    return np.atleast_2d(np.asarray(vectors, dtype=float))

