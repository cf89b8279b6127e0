"""Security-policy cache, per-device zones and compiled flow rules."""

from __future__ import annotations

import enum
import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .flow import FlowRecord, Protocol, TrafficLabel

DEFAULT_TTL = 300.0
DEFAULT_K = 3
SNAPSHOT_MAGIC = "edgeguard-policies v1"
RULES_MAGIC = "edgeguard-flowrules v1"


class Action(enum.Enum):
    ALLOW = "ALLOW"
    RESTRICT_TO_CLOUD = "RESTRICT_TO_CLOUD"
    ISOLATE = "ISOLATE"


MatchKey = tuple[str, "str | None", "int | None", "Protocol | None"]


@dataclass
class SecurityPolicy:
    device_mac: str
    dst_ip: str | None
    dst_port: int | None
    protocol: Protocol | None
    action: Action
    verdict_label: TrafficLabel
    created_at: float
    expires_at: float

    def __post_init__(self) -> None:
        if not self.expires_at > self.created_at:
            raise ValueError("expires_at must be later than created_at")

    @property
    def key(self) -> MatchKey:
        return (self.device_mac, self.dst_ip, self.dst_port, self.protocol)

    @property
    def specificity(self) -> int:
        return sum(v is not None for v in (self.dst_ip, self.dst_port, self.protocol))

    def matches(self, flow: FlowRecord) -> bool:
        return (flow.src_mac == self.device_mac
                and self.dst_ip in (None, flow.dst_ip)
                and self.dst_port in (None, flow.dst_port)
                and self.protocol in (None, flow.protocol))


@dataclass
class EvictionReport:
    inserted: MatchKey
    replaced: bool = False
    evicted: list[SecurityPolicy] = field(default_factory=list)


def _candidate_matches(flow: FlowRecord) -> list[tuple]:
    """(dst_ip, dst_port, protocol) with every wildcard combination."""
    return [(ip, port, proto)
            for ip in (flow.dst_ip, None)
            for port in (flow.dst_port, None)
            for proto in (flow.protocol, None)]


class PolicyCache:
    """Expiring policies keyed by their match tuple.

    Policies are partitioned per device. Lookup probes the eight wildcard
    combinations of a flow in its device's table, so its cost does not depend
    on how many policies are resident. Eviction removes the entry
    that expires first, found through a lazily cleaned heap; a refresh only
    updates the entry, and its heap slot is re-queued when it surfaces.
    """

    def __init__(self, ttl: float = DEFAULT_TTL, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.ttl = float(ttl)
        self.capacity = capacity
        self._entries: dict[MatchKey, SecurityPolicy] = {}
        # device -> (dst_ip, dst_port, protocol) -> (policy, insertion sequence for recency ties)
        self._devices: dict[str, dict[tuple, tuple[SecurityPolicy, int]]] = {}
        self._heap: list[tuple[float, int, MatchKey]] = []
        self._slot: dict[MatchKey, int] = {}  # sequence number of each key's live heap entry
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(list(self._entries.values()))

    def get(self, key: MatchKey) -> SecurityPolicy | None:
        return self._entries.get(key)

    def _push(self, policy: SecurityPolicy) -> None:
        seq = next(self._seq)
        self._slot[policy.key] = seq
        heapq.heappush(self._heap, (policy.expires_at, seq, policy.key))
        if len(self._heap) > 4 * len(self._entries) + 64:
            self._heap = []
            for k, p in self._entries.items():
                self._slot[k] = seq = next(self._seq)
                self._heap.append((p.expires_at, seq, k))
            heapq.heapify(self._heap)

    def _drop(self, key: MatchKey) -> SecurityPolicy | None:
        self._slot.pop(key, None)
        table = self._devices.get(key[0])
        if table is not None:
            table.pop(key[1:], None)
            if not table:
                del self._devices[key[0]]
        return self._entries.pop(key, None)

    def _sequence(self, key: MatchKey) -> int:
        return self._devices[key[0]][key[1:]][1]

    def lookup(self, flow: FlowRecord, now: float) -> SecurityPolicy | None:
        table = self._devices.get(flow.src_mac)
        if table is None:
            return None
        best: SecurityPolicy | None = None
        best_rank = (-1, -1.0, -1)
        for match in _candidate_matches(flow):
            entry = table.get(match)
            if entry is None:
                continue
            p, order = entry
            if now >= p.expires_at:
                self._drop(p.key)
                continue
            rank = (p.specificity, p.created_at, order)
            if rank > best_rank:
                best, best_rank = p, rank
        if best is not None and self.ttl > 0:
            best.expires_at = max(best.expires_at, now + self.ttl)
        return best

    def insert(self, policy: SecurityPolicy) -> EvictionReport:
        key = policy.key
        report = EvictionReport(key)
        if key in self._entries:
            report.replaced = True
            self._drop(key)
        while len(self._entries) >= self.capacity:
            victim = self._pop_earliest()
            if victim is None:
                break
            report.evicted.append(victim)
        self._entries[key] = policy
        self._devices.setdefault(key[0], {})[key[1:]] = (policy, next(self._seq))
        self._push(policy)
        return report

    def _pop_earliest(self) -> SecurityPolicy | None:
        while self._heap:
            expires, seq, key = heapq.heappop(self._heap)
            if self._slot.get(key) != seq:
                continue
            p = self._entries[key]
            if p.expires_at != expires:  # refreshed since it was queued
                self._slot[key] = seq = next(self._seq)
                heapq.heappush(self._heap, (p.expires_at, seq, key))
                continue
            return self._drop(key)
        return None

    def purge_expired(self, now: float) -> int:
        dead = [k for k, p in self._entries.items() if now >= p.expires_at]
        for k in dead:
            self._drop(k)
        return len(dead)

    def remove_device(self, device_mac: str) -> int:
        keys = [p.key for p, _ in self._devices.get(device_mac, {}).values()]
        for k in keys:
            self._drop(k)
        return len(keys)

    def live_count(self, now: float) -> int:
        return sum(1 for p in self._entries.values() if now < p.expires_at)


def cache_lookup(cache: PolicyCache, flow: FlowRecord, now: float) -> SecurityPolicy | None:
    """Most specific live policy for ``flow``; a hit pushes its expiry to now + TTL."""
    return cache.lookup(flow, now)


def cache_insert(cache: PolicyCache, policy: SecurityPolicy, capacity: int | None = None) -> EvictionReport:
    if capacity is not None:
        cache.capacity = capacity
    return cache.insert(policy)


def _opt(value) -> str:
    if value is None:
        return "*"
    return value.value if isinstance(value, Protocol) else str(value)


def dumps_cache(cache: PolicyCache) -> str:
    lines = [f"# {SNAPSHOT_MAGIC}", f"ttl\t{cache.ttl!r}\tcapacity\t{cache.capacity}"]
    ordered = sorted(cache._entries.items(), key=lambda kv: cache._sequence(kv[0]))
    for _, p in ordered:
        lines.append("\t".join((p.device_mac, _opt(p.dst_ip), _opt(p.dst_port), _opt(p.protocol),
                                p.action.value, p.verdict_label.name, repr(p.created_at), repr(p.expires_at))))
    return "\n".join(lines) + "\n"


def loads_cache(text: str) -> PolicyCache:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {SNAPSHOT_MAGIC}":
        raise ValueError("not a policy snapshot")
    head = lines[1].split("\t")
    cache = PolicyCache(float(head[1]), int(head[3]))
    for ln in lines[2:]:
        if not ln:
            continue
        f = ln.split("\t")
        cache.insert(SecurityPolicy(
            f[0], None if f[1] == "*" else f[1], None if f[2] == "*" else int(f[2]),
            None if f[3] == "*" else Protocol(f[3]), Action(f[4]), TrafficLabel[f[5]],
            float(f[6]), float(f[7])))
    return cache


# ---- zones -----------------------------------------------------------------

class Zone(enum.Enum):
    SAFE = "SAFE"
    SUSPICIOUS = "SUSPICIOUS"
    ISOLATED = "ISOLATED"

    @property
    def severity(self) -> int:
        return {"SAFE": 0, "SUSPICIOUS": 1, "ISOLATED": 2}[self.value]


ISOLATING_LABELS = frozenset({TrafficLabel.DATA_THEFT})


def zone_for(label: TrafficLabel) -> Zone:
    if label is TrafficLabel.BENIGN:
        return Zone.SAFE
    return Zone.ISOLATED if label in ISOLATING_LABELS else Zone.SUSPICIOUS


@dataclass(frozen=True)
class AonAssignment:
    device_mac: str
    zone: Zone
    allowed_destinations: frozenset = frozenset()
    label: TrafficLabel = TrafficLabel.BENIGN  # verdict that set the zone
    benign_streak: int = 0

    def __post_init__(self) -> None:
        if self.zone is not Zone.SUSPICIOUS and self.allowed_destinations:
            raise ValueError(f"{self.zone.value} assignment cannot carry allowed destinations")


def assign_zone(verdict, device: str, history: Sequence[AonAssignment] | AonAssignment | None = None,
                cloud_endpoints: Iterable[tuple[str, int]] = (), k: int = DEFAULT_K) -> AonAssignment:
    """Zone for ``device`` after ``verdict`` (a Verdict or a TrafficLabel).

    A restricted device stays in its zone until ``k`` consecutive benign
    verdicts; a new malicious verdict never lowers the current severity.
    """
    label = getattr(verdict, "label", verdict)
    if isinstance(history, AonAssignment):
        prev = history
    else:
        prev = history[-1] if history else None
    target = zone_for(label)
    if prev is None or prev.zone is Zone.SAFE:
        if target is Zone.SAFE:
            return AonAssignment(device, Zone.SAFE, label=label)
        allowed = frozenset(cloud_endpoints) if target is Zone.SUSPICIOUS else frozenset()
        return AonAssignment(device, target, allowed, label)
    if target is Zone.SAFE:
        streak = prev.benign_streak + 1
        if streak >= k:
            return AonAssignment(device, Zone.SAFE, label=label)
        return replace(prev, benign_streak=streak)
    if target.severity > prev.zone.severity:
        return AonAssignment(device, target, frozenset(), label)
    return replace(prev, benign_streak=0)


class EndpointTracker:
    """Per-device flow counts to (dst_ip, dst_port) in benign traffic."""

    def __init__(self, top: int = 3):
        self.top = top
        self._counts: dict[str, Counter] = {}

    def observe(self, flows: Iterable[FlowRecord]) -> None:
        for f in flows:
            if f.dst_ip:
                self._counts.setdefault(f.src_mac, Counter())[(f.dst_ip, f.dst_port)] += 1

    def endpoints(self, device: str) -> list[tuple[str, int]]:
        counts = self._counts.get(device)
        if not counts:
            return []
        # ties broken by endpoint so the result is deterministic
        return [ep for ep, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: self.top]]


# ---- flow rules ---------------------------------------------------------------

class RuleAction(enum.Enum):
    FORWARD = "FORWARD"
    DROP = "DROP"


class Direction(enum.Enum):
    OUT = "OUT"  # device is the source
    IN = "IN"  # device is the destination
    BOTH = "BOTH"


@dataclass(frozen=True)
class FlowRule:
    device_mac: str
    peer_ip: str | None
    peer_port: int | None
    protocol: Protocol | None
    action: RuleAction
    direction: Direction = Direction.BOTH
    idle_timeout: float = DEFAULT_TTL

    @property
    def specificity(self) -> int:
        return sum(v is not None for v in (self.peer_ip, self.peer_port, self.protocol))

    @property
    def priority(self) -> int:
        return self.specificity * 10

    def matches(self, flow: FlowRecord) -> bool:
        if self.direction in (Direction.OUT, Direction.BOTH) and flow.src_mac == self.device_mac:
            peer = (flow.dst_ip, flow.dst_port)
        elif self.direction in (Direction.IN, Direction.BOTH) and flow.dst_mac == self.device_mac:
            peer = (flow.src_ip, flow.src_port)
        else:
            return False
        return (self.peer_ip in (None, peer[0]) and self.peer_port in (None, peer[1])
                and self.protocol in (None, flow.protocol))


def emit_rules(assignment: AonAssignment, policy: SecurityPolicy | None = None) -> list[FlowRule]:
    """Compile a zone assignment into the device's flow rules."""
    mac = assignment.device_mac
    if policy is not None and policy.device_mac != mac:
        raise ValueError("policy and assignment name different devices")
    timeout = (policy.expires_at - policy.created_at) if policy is not None else DEFAULT_TTL
    if assignment.zone is Zone.SAFE:
        return [FlowRule(mac, None, None, None, RuleAction.FORWARD, idle_timeout=timeout)]
    if assignment.zone is Zone.ISOLATED:
        return [FlowRule(mac, None, None, None, RuleAction.DROP, idle_timeout=timeout)]
    rules = [FlowRule(mac, ip, port, None, RuleAction.FORWARD, idle_timeout=timeout)
             for ip, port in sorted(assignment.allowed_destinations)]
    rules.append(FlowRule(mac, None, None, None, RuleAction.DROP, idle_timeout=timeout))
    return rules


class FlowTable:
    """Installed rules per device; unknown devices forward by default."""

    def __init__(self):
        self._rules: dict[str, list[FlowRule]] = {}

    def install(self, device: str, rules: Sequence[FlowRule]) -> None:
        seen: dict[tuple, FlowRule] = {}
        for r in rules:
            key = (r.peer_ip, r.peer_port, r.protocol, r.direction, r.priority)
            if key in seen:
                raise ValueError(f"duplicate rule for match {key}")
            seen[key] = r
        self._rules[device] = sorted(rules, key=lambda r: -r.priority)

    def rules(self, device: str) -> list[FlowRule]:
        return list(self._rules.get(device, ()))

    def devices(self) -> list[str]:
        return sorted(self._rules)

    def _table_action(self, device: str, flow: FlowRecord) -> RuleAction:
        for r in self._rules.get(device, ()):
            if r.matches(flow):
                return r.action
        return RuleAction.FORWARD

    def decide(self, flow: FlowRecord) -> RuleAction:
        """Forward only when neither endpoint's table drops the flow."""
        if self._table_action(flow.src_mac, flow) is RuleAction.DROP:
            return RuleAction.DROP
        if flow.dst_mac != flow.src_mac and self._table_action(flow.dst_mac, flow) is RuleAction.DROP:
            return RuleAction.DROP
        return RuleAction.FORWARD


def format_rules(rules: Iterable[FlowRule]) -> str:
    lines = [f"# {RULES_MAGIC}", "# device\tdirection\tpeer_ip\tpeer_port\tprotocol\tpriority\taction\tidle_timeout"]
    for r in rules:
        lines.append("\t".join((r.device_mac, r.direction.value, _opt(r.peer_ip), _opt(r.peer_port),
                                _opt(r.protocol), str(r.priority), r.action.value, repr(r.idle_timeout))))
    return "\n".join(lines) + "\n"


def parse_rules(text: str) -> list[FlowRule]:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {RULES_MAGIC}":
        raise ValueError("not a flow-rule export")
    out = []
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        f = ln.split("\t")
        rule = FlowRule(f[0], None if f[2] == "*" else f[2], None if f[3] == "*" else int(f[3]),
                        None if f[4] == "*" else Protocol(f[4]), RuleAction(f[6]), Direction(f[1]),
                        float(f[7]))
        if rule.priority != int(f[5]):
            raise ValueError(f"priority {f[5]} inconsistent with match fields")
        out.append(rule)
    return out
