"""Synthetic benign and attack traffic for desk-scale evaluation.

Benign devices talk mostly to a handful of cloud endpoints (heartbeats and
HTTPS), plus DNS/NTP/DHCP/mDNS housekeeping. Each attack scenario adds one
attacker device whose flows follow that attack's signature; attack rates
are configurable through a ``key=value`` scenario file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .features import WindowConfig, window_flows
from .flow import (
    DeviceLogEvent, FlowError, FlowRecord, LogKind, Protocol, TcpFlag, TrafficLabel,
)
from .ingest import TraceDataset, window_labels

GATEWAY_MAC = "02:00:00:00:00:01"
GATEWAY_IP = "192.168.1.1"
BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"
MDNS_MAC = "01:00:5e:00:00:fb"
MDNS_IP = "224.0.0.251"
NTP_IP = "162.159.200.1"

_SYN = TcpFlag.SYN
_HANDSHAKE = TcpFlag.SYN | TcpFlag.ACK | TcpFlag.FIN | TcpFlag.PSH


@dataclass
class GeneratorConfig:
    """Rates are attack flows per second for the attacker device."""

    port_scan_rate: float = 2.0
    port_sweep_rate: float = 2.0
    address_sweep_rate: float = 2.0
    botnet_rate: float = 2.0
    mitm_rate: float = 1.5
    fuzzing_rate: float = 2.0
    data_theft_rate: float = 0.8
    malware_injection_rate: float = 0.8
    syn_flood_rate: float = 3.0
    ssl_reneg_rate: float = 1.5
    benign_rate_scale: float = 1.0
    attacker_background_rate: float = 0.05
    onset: float = 0.0  # fraction of the duration before attacks begin
    start_time: float = 1_700_000_000.0

    def rate_for(self, label: TrafficLabel) -> float:
        return getattr(self, f"{label.name.lower()}_rate")


def parse_scenario_config(text: str, base: GeneratorConfig | None = None) -> GeneratorConfig:
    """Apply ``key=value`` lines (``#`` comments allowed) over ``base``."""
    cfg = base or GeneratorConfig()
    known = {f.name for f in fields(GeneratorConfig)}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace(".", "_").replace("-", "_")
        if not sep or key not in known:
            raise ValueError(f"line {line_no}: unknown setting {raw.strip()!r}")
        setattr(cfg, key, float(value))
    return cfg


@dataclass
class _Device:
    mac: str
    ip: str
    profile: str
    clouds: list[tuple[str, int]] = field(default_factory=list)


class _Builder:
    def __init__(self, rng: np.random.Generator, t0: float, duration: float):
        self.rng = rng
        self.t0 = t0
        self.duration = duration
        self.flows: list[tuple[float, int, FlowRecord]] = []
        self.logs: list[tuple[float, int, DeviceLogEvent]] = []
        self._seq = 0

    def times(self, rate: float, start: float = 0.0, jitter: float = 1.0) -> np.ndarray:
        """Event offsets in [start, duration); jitter=0 gives a strict period."""
        if rate <= 0:
            return np.empty(0)
        n_max = int((self.duration - start) * rate * 2) + 10
        gaps = (1.0 - jitter) / rate + jitter * self.rng.exponential(1.0 / rate, n_max)
        ts = start + self.rng.uniform(0, 1.0 / rate) + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
        return ts[ts < self.duration]

    def flow(self, offset: float, **kw) -> None:
        t = round(self.t0 + offset, 6)
        self.flows.append((t, self._seq, FlowRecord(timestamp=t, **kw)))
        self._seq += 1

    def log(self, offset: float, mac: str, kind: LogKind, success: bool) -> None:
        t = round(self.t0 + offset, 6)
        self.logs.append((t, self._seq, DeviceLogEvent(t, mac, kind, success)))
        self._seq += 1

    def eport(self) -> int:
        return int(self.rng.integers(32768, 61000))


def _public_ip(rng: np.random.Generator) -> str:
    first = int(rng.choice([13, 23, 34, 35, 52, 54, 104, 142, 151, 172]))
    return f"{first}.{int(rng.integers(0, 256))}.{int(rng.integers(0, 256))}.{int(rng.integers(1, 255))}"


def _mac(rng: np.random.Generator) -> str:
    b = rng.integers(0, 256, 5)
    return "02:" + ":".join(f"{int(x):02x}" for x in b)


_PROFILES = ("plug", "camera", "hub", "phone")


def _make_devices(rng: np.random.Generator, n: int, first_host: int = 10) -> list[_Device]:
    devices = []
    used: set[str] = {GATEWAY_MAC}
    for i in range(n):
        mac = _mac(rng)
        while mac in used:
            mac = _mac(rng)
        used.add(mac)
        profile = _PROFILES[i % len(_PROFILES)]
        n_clouds = {"plug": 2, "camera": 2, "hub": 3, "phone": 3}[profile]
        clouds = [(_public_ip(rng), 443) for _ in range(n_clouds)]
        devices.append(_Device(mac, f"192.168.1.{first_host + i}", profile, clouds))
    return devices


def _https(b: _Builder, t: float, dev: _Device, ip: str, port: int, up: float, down: float, dur: float) -> None:
    rng = b.rng
    up_b = int(max(60, rng.normal(up, up * 0.2)))
    down_b = int(max(60, rng.normal(down, down * 0.2)))
    pk = max(2, int((up_b + down_b) / 700) + int(rng.integers(2, 8)))
    b.flow(t, src_mac=dev.mac, dst_mac=GATEWAY_MAC, src_ip=dev.ip, dst_ip=ip,
           src_port=b.eport(), dst_port=port, protocol=Protocol.HTTPS if port == 443 else Protocol.HTTP,
           tcp_flags=_HANDSHAKE, bytes_src2dst=up_b, bytes_dst2src=down_b, packets=pk,
           duration=float(abs(rng.normal(dur, dur * 0.3))))


def _housekeeping(b: _Builder, dev: _Device, scale: float) -> None:
    rng = b.rng
    for t in b.times(scale / 45.0):
        b.flow(t, src_mac=dev.mac, dst_mac=GATEWAY_MAC, src_ip=dev.ip, dst_ip=GATEWAY_IP,
               src_port=b.eport(), dst_port=53, protocol=Protocol.DNS,
               bytes_src2dst=int(rng.integers(60, 90)), bytes_dst2src=int(rng.integers(90, 300)),
               packets=2, duration=float(rng.uniform(0.005, 0.05)))
    for t in b.times(scale / 300.0, jitter=0.2):
        b.flow(t, src_mac=dev.mac, dst_mac=GATEWAY_MAC, src_ip=dev.ip, dst_ip=NTP_IP,
               src_port=123, dst_port=123, protocol=Protocol.NTP,
               bytes_src2dst=76, bytes_dst2src=76, packets=2, duration=float(rng.uniform(0.01, 0.08)))
    for t in b.times(scale / 240.0):
        b.flow(t, src_mac=dev.mac, dst_mac=BROADCAST_MAC, src_ip=dev.ip, dst_ip=GATEWAY_IP,
               src_port=0, dst_port=0, protocol=Protocol.ARP,
               bytes_src2dst=42, bytes_dst2src=42, packets=2, duration=0.001)
    for t in b.times(scale / 900.0):
        b.flow(t, src_mac=dev.mac, dst_mac=BROADCAST_MAC, src_ip=dev.ip, dst_ip=GATEWAY_IP,
               src_port=68, dst_port=67, protocol=Protocol.DHCP,
               bytes_src2dst=342, bytes_dst2src=342, packets=4, duration=float(rng.uniform(0.01, 0.2)))


def _benign(b: _Builder, dev: _Device, peers: list[_Device], scale: float) -> None:
    rng = b.rng
    _housekeeping(b, dev, scale)
    if dev.profile == "plug":
        for t in b.times(scale / 15.0, jitter=0.3):
            ip, port = dev.clouds[int(rng.integers(0, len(dev.clouds)))]
            _https(b, t, dev, ip, port, 450, 600, 0.4)
    elif dev.profile == "camera":
        for t in b.times(scale / 8.0, jitter=0.4):
            _https(b, t, dev, *dev.clouds[0], 120_000, 2_000, 3.0)
        for t in b.times(scale / 30.0):
            _https(b, t, dev, *dev.clouds[1], 500, 900, 0.5)
    elif dev.profile == "hub":
        for t in b.times(scale / 10.0, jitter=0.5):
            ip, port = dev.clouds[int(rng.integers(0, len(dev.clouds)))]
            _https(b, t, dev, ip, port, 900, 2_500, 0.8)
        for t in b.times(scale / 30.0, jitter=0.2):
            b.flow(t, src_mac=dev.mac, dst_mac=MDNS_MAC, src_ip=dev.ip, dst_ip=MDNS_IP,
                   src_port=5353, dst_port=5353, protocol=Protocol.MDNS,
                   bytes_src2dst=int(rng.integers(100, 400)), bytes_dst2src=0, packets=1, duration=0.0)
    else:  # phone
        sites = dev.clouds + [(_public_ip(rng), 443) for _ in range(12)]
        for t in b.times(scale / 6.0):
            ip, port = sites[int(rng.integers(0, len(sites)))] if rng.random() < 0.8 else dev.clouds[0]
            _https(b, t, dev, ip, port, 1_500, 40_000, 1.5)
        local = [p for p in peers if p.profile == "hub"]
        for t in b.times(scale / 60.0):
            if local:
                hub = local[int(rng.integers(0, len(local)))]
                b.flow(t, src_mac=dev.mac, dst_mac=hub.mac, src_ip=dev.ip, dst_ip=hub.ip,
                       src_port=b.eport(), dst_port=8080, protocol=Protocol.HTTP, tcp_flags=_HANDSHAKE,
                       bytes_src2dst=int(rng.integers(300, 900)), bytes_dst2src=int(rng.integers(300, 2000)),
                       packets=int(rng.integers(6, 14)), duration=float(rng.uniform(0.05, 0.4)))
    for t in b.times(scale / 1200.0):
        b.log(t, dev.mac, LogKind.DEVICE_LOGIN, True)


# ---- attack signatures --------------------------------------------------

def _tcp_probe(b: _Builder, t: float, atk: _Device, dst_mac: str, ip: str, port: int, refused: float) -> None:
    rng = b.rng
    closed = rng.random() < refused
    b.flow(t, src_mac=atk.mac, dst_mac=dst_mac, src_ip=atk.ip, dst_ip=ip,
           src_port=b.eport(), dst_port=port, protocol=Protocol.TCP,
           tcp_flags=TcpFlag.SYN | (TcpFlag.RST if closed else TcpFlag.ACK),
           bytes_src2dst=int(rng.integers(40, 60)), bytes_dst2src=40 if closed else int(rng.integers(44, 60)),
           packets=2, duration=float(rng.uniform(0.0, 0.01)),
           errors=FlowError.REJ_ERROR if closed else FlowError.NONE)


def _port_scan(b, atk, victims, ts):
    rng = b.rng
    targets = victims[: max(1, min(4, len(victims)))]
    ports = rng.permutation(np.arange(1, 65536))
    for k, t in enumerate(ts):
        v = targets[k % len(targets)]
        _tcp_probe(b, t, atk, v.mac, v.ip, int(ports[k % len(ports)]), 0.9)


def _port_sweep(b, atk, victims, ts):
    rng = b.rng
    v = victims[0]
    start = int(rng.integers(1, 1024))
    for k, t in enumerate(ts):
        port = (start + k) % 65535 + 1
        if rng.random() < 0.3:
            b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
                   src_port=b.eport(), dst_port=port, protocol=Protocol.UDP,
                   bytes_src2dst=int(rng.integers(28, 60)), bytes_dst2src=56, packets=2,
                   duration=float(rng.uniform(0.0, 0.02)), errors=FlowError.REJ_ERROR)
        else:
            _tcp_probe(b, t, atk, v.mac, v.ip, port, 0.95)


def _address_sweep(b, atk, victims, ts):
    rng = b.rng
    host = int(rng.integers(2, 254))
    for k, t in enumerate(ts):
        ip = f"192.168.1.{(host + k) % 253 + 2}"
        if rng.random() < 0.75:
            b.flow(t, src_mac=atk.mac, dst_mac=BROADCAST_MAC, src_ip=atk.ip, dst_ip=ip,
                   src_port=0, dst_port=0, protocol=Protocol.ARP,
                   bytes_src2dst=42, bytes_dst2src=int(rng.choice([0, 42], p=[0.8, 0.2])),
                   packets=1, duration=0.0)
        else:
            b.flow(t, src_mac=atk.mac, dst_mac=GATEWAY_MAC, src_ip=atk.ip, dst_ip=ip,
                   src_port=0, dst_port=0, protocol=Protocol.ICMP,
                   bytes_src2dst=84, bytes_dst2src=int(rng.choice([0, 84], p=[0.7, 0.3])),
                   packets=1, duration=float(rng.uniform(0.0, 0.005)))


def _botnet(b, atk, victims, ts):
    rng = b.rng
    cnc = _public_ip(rng)
    for t in ts:
        if rng.random() < 0.1:
            b.flow(t, src_mac=atk.mac, dst_mac=GATEWAY_MAC, src_ip=atk.ip, dst_ip=cnc,
                   src_port=b.eport(), dst_port=23, protocol=Protocol.TCP, tcp_flags=_HANDSHAKE | TcpFlag.PSH,
                   bytes_src2dst=int(rng.integers(60, 200)), bytes_dst2src=int(rng.integers(60, 400)),
                   packets=int(rng.integers(4, 10)), duration=float(rng.uniform(1, 20)))
            continue
        ip = _public_ip(rng) if rng.random() < 0.85 else victims[int(rng.integers(0, len(victims)))].ip
        b.flow(t, src_mac=atk.mac, dst_mac=GATEWAY_MAC, src_ip=atk.ip, dst_ip=ip,
               src_port=b.eport(), dst_port=23 if rng.random() < 0.8 else 2323, protocol=Protocol.TCP,
               tcp_flags=_SYN, bytes_src2dst=60, bytes_dst2src=0, packets=1,
               duration=0.0, errors=FlowError.SYN_ERROR)
        if rng.random() < 0.05:
            v = victims[int(rng.integers(0, len(victims)))]
            b.log(t, v.mac, LogKind.DEVICE_LOGIN, False)


def _mitm(b, atk, victims, ts):
    rng = b.rng
    targets = victims[:2] if len(victims) >= 2 else victims
    for t in ts:
        r = rng.random()
        v = targets[int(rng.integers(0, len(targets)))]
        if r < 0.65:
            # forged ARP replies to the victim and the gateway
            dst_mac, dst_ip = (v.mac, v.ip) if rng.random() < 0.5 else (GATEWAY_MAC, GATEWAY_IP)
            b.flow(t, src_mac=atk.mac, dst_mac=dst_mac, src_ip=v.ip if dst_mac == GATEWAY_MAC else GATEWAY_IP,
                   dst_ip=dst_ip, src_port=0, dst_port=0, protocol=Protocol.ARP,
                   bytes_src2dst=42, bytes_dst2src=0, packets=int(rng.integers(1, 4)), duration=0.0)
        else:
            # relayed victim traffic
            ip, port = v.clouds[int(rng.integers(0, len(v.clouds)))] if v.clouds else (_public_ip(rng), 443)
            b.flow(t, src_mac=atk.mac, dst_mac=GATEWAY_MAC, src_ip=v.ip, dst_ip=ip,
                   src_port=b.eport(), dst_port=port, protocol=Protocol.HTTPS, tcp_flags=_HANDSHAKE,
                   bytes_src2dst=int(rng.integers(300, 1500)), bytes_dst2src=int(rng.integers(500, 5000)),
                   packets=int(rng.integers(4, 12)), duration=float(rng.uniform(0.1, 1.0)),
                   padding=bool(rng.random() < 0.3))


def _fuzzing(b, atk, victims, ts):
    rng = b.rng
    v = victims[0]
    for t in ts:
        b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
               src_port=b.eport(), dst_port=8080, protocol=Protocol.HTTP, tcp_flags=_HANDSHAKE,
               bytes_src2dst=int(rng.integers(400, 4000)), bytes_dst2src=int(rng.integers(150, 500)),
               packets=int(rng.integers(5, 10)), duration=float(rng.uniform(0.02, 0.3)),
               urgent=bool(rng.random() < 0.1))
        if rng.random() < 0.6:
            b.log(t + 0.01, v.mac, LogKind.SERVICE_LOGIN, False)


def _data_theft(b, atk, victims, ts):
    rng = b.rng
    v = victims[0]
    for k, t in enumerate(ts):
        if k % 8 == 0:
            b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
                   src_port=b.eport(), dst_port=23, protocol=Protocol.TCP, tcp_flags=_HANDSHAKE,
                   bytes_src2dst=int(rng.integers(200, 900)), bytes_dst2src=int(rng.integers(2_000, 20_000)),
                   packets=int(rng.integers(20, 60)), duration=float(rng.uniform(5, 30)))
            b.log(t, v.mac, LogKind.DEVICE_LOGIN, True)
        else:
            down = int(rng.uniform(1e6, 1e7))
            b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
                   src_port=b.eport(), dst_port=int(rng.choice([20, 21])), protocol=Protocol.FTP,
                   tcp_flags=_HANDSHAKE, bytes_src2dst=int(rng.integers(300, 2_000)), bytes_dst2src=down,
                   packets=down // 1400 + 10, duration=float(rng.uniform(10, 90)))


def _malware_injection(b, atk, victims, ts):
    rng = b.rng
    targets = victims[: max(1, min(3, len(victims)))]
    for k, t in enumerate(ts):
        v = targets[k % len(targets)]
        if k % 6 == 0:
            b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
                   src_port=b.eport(), dst_port=23, protocol=Protocol.TCP, tcp_flags=_HANDSHAKE,
                   bytes_src2dst=int(rng.integers(500, 3_000)), bytes_dst2src=int(rng.integers(200, 1_000)),
                   packets=int(rng.integers(15, 40)), duration=float(rng.uniform(2, 10)))
            b.log(t, v.mac, LogKind.SSH_LOGIN, True)
        else:
            up = int(rng.uniform(2e5, 2e6))
            b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
                   src_port=b.eport(), dst_port=21, protocol=Protocol.FTP, tcp_flags=_HANDSHAKE,
                   bytes_src2dst=up, bytes_dst2src=int(rng.integers(200, 1_500)),
                   packets=up // 1400 + 6, duration=float(rng.uniform(2, 15)))


def _syn_flood(b, atk, victims, ts):
    rng = b.rng
    v = victims[0]
    for t in ts:
        b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
               src_port=int(rng.integers(1024, 65536)), dst_port=80, protocol=Protocol.TCP,
               tcp_flags=_SYN, bytes_src2dst=60, bytes_dst2src=0, packets=1,
               duration=0.0, errors=FlowError.SYN_ERROR)


def _ssl_reneg(b, atk, victims, ts):
    rng = b.rng
    v = victims[0]
    for t in ts:
        pk = int(rng.integers(150, 400))
        b.flow(t, src_mac=atk.mac, dst_mac=v.mac, src_ip=atk.ip, dst_ip=v.ip,
               src_port=b.eport(), dst_port=443, protocol=Protocol.HTTPS,
               tcp_flags=TcpFlag.SYN | TcpFlag.ACK | TcpFlag.PSH,
               bytes_src2dst=pk * int(rng.integers(60, 110)), bytes_dst2src=pk * int(rng.integers(40, 90)),
               packets=pk, duration=float(rng.uniform(3, 12)))


_ATTACKS: dict[TrafficLabel, Callable] = {
    TrafficLabel.PORT_SCAN: _port_scan,
    TrafficLabel.PORT_SWEEP: _port_sweep,
    TrafficLabel.ADDRESS_SWEEP: _address_sweep,
    TrafficLabel.BOTNET: _botnet,
    TrafficLabel.MITM: _mitm,
    TrafficLabel.FUZZING: _fuzzing,
    TrafficLabel.DATA_THEFT: _data_theft,
    TrafficLabel.MALWARE_INJECTION: _malware_injection,
    TrafficLabel.SYN_FLOOD: _syn_flood,
    TrafficLabel.SSL_RENEG: _ssl_reneg,
}

ATTACK_SCENARIOS = tuple(_ATTACKS)


def _finish(b: _Builder, device_labels, window_config: WindowConfig | None) -> TraceDataset:
    b.flows.sort(key=lambda x: (x[0], x[1]))
    b.logs.sort(key=lambda x: (x[0], x[1]))
    ds = TraceDataset([f for _, _, f in b.flows], [e for _, _, e in b.logs], device_labels=device_labels)
    ds.labels = window_labels(window_flows(ds.flows, ds.logs, window_config), device_labels)
    return ds


def generate_mixed(scenarios, benign_devices: int, duration: float, seed: int,
                   config: GeneratorConfig | None = None,
                   window_config: WindowConfig | None = None) -> TraceDataset:
    """Benign population plus one dedicated attacker per scenario."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    scenarios = [TrafficLabel(s) if not isinstance(s, TrafficLabel) else s for s in scenarios]
    scenarios = [s for s in scenarios if s is not TrafficLabel.BENIGN]
    if benign_devices < 1:
        raise ValueError("need at least one benign device")
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(seed)
    b = _Builder(rng, cfg.start_time, float(duration))
    devices = _make_devices(rng, benign_devices + len(scenarios))
    attackers, benign = devices[: len(scenarios)], devices[len(scenarios):]
    for dev in benign:
        _benign(b, dev, benign, cfg.benign_rate_scale)
    onset = cfg.onset * duration
    device_labels: dict[str, tuple[TrafficLabel, float]] = {}
    for scenario, atk in zip(scenarios, attackers):
        atk.profile = "plug"
        if cfg.onset > 0:
            _benign(b, atk, benign, cfg.benign_rate_scale)
        else:
            for t in b.times(cfg.attacker_background_rate):
                _https(b, t, atk, *atk.clouds[0], 450, 600, 0.4)
        victims = list(rng.permutation(np.array(benign, dtype=object)))
        _ATTACKS[scenario](b, atk, victims, b.times(cfg.rate_for(scenario), start=onset))
        device_labels[atk.mac] = (scenario, round(cfg.start_time + onset, 6))
    return _finish(b, device_labels, window_config)


def generate_synthetic(scenario: TrafficLabel, device_count: int, duration: float, seed: int,
                       config: GeneratorConfig | None = None) -> TraceDataset:
    """One scenario over ``device_count`` devices; device 0 attacks unless BENIGN."""
    if device_count < 1:
        raise ValueError("device_count must be >= 1")
    if scenario is TrafficLabel.BENIGN:
        return generate_mixed([], device_count, duration, seed, config)
    if device_count < 2:
        raise ValueError("an attack scenario needs an attacker and at least one benign device")
    return generate_mixed([scenario], device_count - 1, duration, seed, config)


def generate_concentrated(n_devices: int, n_keys: int, coverage: float, duration: float,
                          rate: float, seed: int) -> TraceDataset:
    """Benign replay where ``n_keys`` (device, dst, port, proto) keys carry ``coverage`` of flows.

    The remaining flows go to one-off destinations never seen twice.
    """
    rng = np.random.default_rng(seed)
    b = _Builder(rng, GeneratorConfig.start_time, float(duration))
    devices = _make_devices(rng, n_devices)
    per_dev = np.full(n_devices, n_keys // n_devices)
    per_dev[: n_keys % n_devices] += 1
    for dev, k in zip(devices, per_dev):
        keys = [(_public_ip(rng), int(rng.choice([443, 8883, 80]))) for _ in range(int(k))]
        weights = 1.0 / np.arange(1, len(keys) + 1)
        weights /= weights.sum()
        for t in b.times(rate):
            if rng.random() < coverage:
                ip, port = keys[int(rng.choice(len(keys), p=weights))]
            else:
                ip, port = _public_ip(rng), int(rng.integers(1024, 65536))
            _https(b, t, dev, ip, port, 500, 900, 0.3)
    return _finish(b, {}, None)
