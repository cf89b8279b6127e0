"""Core flow-level domain types shared by every pipeline stage."""

from __future__ import annotations

import enum
import ipaddress
import math
import re
from dataclasses import dataclass, field, fields

_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")


class Protocol(enum.Enum):
    ARP = "ARP"
    LLC = "LLC"
    IPV4 = "IPv4"
    IPV6 = "IPv6"
    ICMP = "ICMP"
    ICMPV6 = "ICMPv6"
    EAPOL = "EAPOL"
    TCP = "TCP"
    UDP = "UDP"
    HTTP = "HTTP"
    FTP = "FTP"
    HTTPS = "HTTPS"
    DHCP = "DHCP"
    DNS = "DNS"
    MDNS = "MDNS"
    NTP = "NTP"
    OTHER = "OTHER"

    @property
    def has_ports(self) -> bool:
        return self in _PORTED

    @property
    def transport(self) -> Protocol | None:
        """TCP or UDP for protocols that ride on a transport, else None."""
        if self in (Protocol.TCP, Protocol.HTTP, Protocol.HTTPS, Protocol.FTP):
            return Protocol.TCP
        if self in (Protocol.UDP, Protocol.DHCP, Protocol.DNS, Protocol.MDNS, Protocol.NTP):
            return Protocol.UDP
        return None


_PORTED = frozenset({
    Protocol.TCP, Protocol.UDP, Protocol.HTTP, Protocol.HTTPS, Protocol.FTP,
    Protocol.DHCP, Protocol.DNS, Protocol.MDNS, Protocol.NTP,
})

# layer-2 protocols never carry an IP address
_NO_IP = frozenset({Protocol.LLC, Protocol.EAPOL})


class TcpFlag(enum.Flag):
    NONE = 0
    SYN = enum.auto()
    ACK = enum.auto()
    FIN = enum.auto()
    RST = enum.auto()
    URG = enum.auto()
    PSH = enum.auto()


class FlowError(enum.Flag):
    NONE = 0
    SYN_ERROR = enum.auto()
    REJ_ERROR = enum.auto()


class TrafficLabel(enum.Enum):
    """Traffic classes; the integer value is the consequent class code."""

    BENIGN = 0
    PORT_SCAN = 1
    PORT_SWEEP = 2
    ADDRESS_SWEEP = 3
    BOTNET = 4
    MITM = 5
    FUZZING = 6
    DATA_THEFT = 7
    MALWARE_INJECTION = 8
    SYN_FLOOD = 9
    SSL_RENEG = 10

    @property
    def code(self) -> int:
        return self.value

    @classmethod
    def from_code(cls, code: int) -> TrafficLabel:
        return cls(int(code))

    @property
    def is_malicious(self) -> bool:
        return self is not TrafficLabel.BENIGN


SCANNING_FAMILY = frozenset({
    TrafficLabel.PORT_SCAN, TrafficLabel.PORT_SWEEP, TrafficLabel.ADDRESS_SWEEP,
})


class LogKind(enum.Enum):
    SSH_LOGIN = "SSH_LOGIN"
    SERVICE_LOGIN = "SERVICE_LOGIN"
    DEVICE_LOGIN = "DEVICE_LOGIN"


def normalize_mac(mac: str) -> str:
    mac = mac.strip().lower().replace("-", ":")
    if not _MAC_RE.match(mac):
        raise ValueError(f"invalid MAC address: {mac!r}")
    return mac


@dataclass(frozen=True)
class FlowRecord:
    """One observed connection.

    ``src_ip``/``dst_ip`` are empty strings for layer-2 traffic without an
    IP header. Ports are 0 for protocols with no port concept.
    """

    timestamp: float
    src_mac: str
    dst_mac: str
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: Protocol
    tcp_flags: TcpFlag = TcpFlag.NONE
    bytes_src2dst: int = 0
    bytes_dst2src: int = 0
    packets: int = 1
    duration: float = 0.0
    errors: FlowError = FlowError.NONE
    router_alert: bool = False
    padding: bool = False
    urgent: bool = False

    @property
    def total_bytes(self) -> int:
        return self.bytes_src2dst + self.bytes_dst2src

    @property
    def service(self) -> tuple[str, int, Protocol]:
        return (self.dst_ip, self.dst_port, self.protocol)


FLOW_FIELDS = tuple(f.name for f in fields(FlowRecord))


@dataclass(frozen=True)
class DeviceLogEvent:
    timestamp: float
    device_mac: str
    kind: LogKind
    success: bool


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_ip(value: str, name: str, out: list[str]) -> None:
    if not value:
        return
    try:
        ipaddress.ip_address(value)
    except ValueError:
        out.append(f"invalid {name}")


def validate_flow(record: FlowRecord) -> ValidationResult:
    """Check a record against the FlowRecord invariants.

    Never raises; every violated invariant is reported.
    """
    out: list[str] = []
    if not math.isfinite(record.timestamp):
        out.append("non-finite timestamp")
    for name in ("src_mac", "dst_mac"):
        if not _MAC_RE.match(getattr(record, name)):
            out.append(f"invalid {name}")
    _check_ip(record.src_ip, "src_ip", out)
    _check_ip(record.dst_ip, "dst_ip", out)
    if record.protocol in _NO_IP and (record.src_ip or record.dst_ip):
        out.append("IP address set on layer-2 protocol")
    for name in ("src_port", "dst_port"):
        port = getattr(record, name)
        if not 0 <= port <= 65535:
            out.append(f"{name} out of range")
    if not record.protocol.has_ports and (record.src_port or record.dst_port):
        out.append("port set on portless protocol")
    if record.bytes_src2dst < 0 or record.bytes_dst2src < 0:
        out.append("negative byte count")
    if record.packets < 1:
        out.append("packet count below 1")
    if not math.isfinite(record.duration) or record.duration < 0:
        out.append("negative duration")
    if record.tcp_flags and record.protocol.transport is not Protocol.TCP:
        out.append("TCP flags set on non-TCP protocol")
    return ValidationResult(out)
