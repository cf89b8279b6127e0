"""End-to-end training and gateway replay."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fcm import FcmConfig, FcmModel, fcm_fit
from .features import FeatureSchema, Window, WindowConfig, raw_matrix, vectorize_windows
from .fis import RuleBase, Verdict, build_rulebase, infer, infer_many
from .flow import FlowRecord, TrafficLabel
from .ingest import TraceDataset
from .labeling import signature_labels
from .metrics import MetricsMode, MetricsTable, compute_metrics
from .policy import (
    DEFAULT_K, DEFAULT_TTL, Action, AonAssignment, EndpointTracker, FlowTable, PolicyCache,
    RuleAction, SecurityPolicy, Zone, assign_zone, emit_rules,
)
from .reduction import cfs_prune, deviation_prune, pearson_matrix, score_prune
from .selection import SelectionResult, score_candidates


# ---- training ------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    window: WindowConfig = WindowConfig()
    seed: int = 0
    candidates: tuple[int, ...] = tuple(range(2, 17))
    clusters: int | None = None  # skip selection when set
    min_clusters_from_labels: bool = True
    m: float = 2.0
    n_init: int = 3
    b_refs: int = 10
    cfs_threshold: float = 0.9
    min_support: float = 0.05
    deviation_tolerance: float = 0.05
    score_tolerance: float = 0.02
    use_labels: bool = True
    support: str = "members"
    label_init: bool = True  # seed the final FCM fit from class labels when they are known


@dataclass
class TrainingReport:
    n_windows: int
    dropped: list[tuple[str, str]] = field(default_factory=list)  # (feature, reason)
    retained: list[str] = field(default_factory=list)
    selection: SelectionResult | None = None
    chosen_clusters: int = 0
    objective_trace: list[float] = field(default_factory=list)
    rule_summaries: list[str] = field(default_factory=list)
    labeled_by: str = "ground-truth"
    correlation: np.ndarray | None = None
    correlation_names: list[str] = field(default_factory=list)
    raw_full: np.ndarray | None = None

    def to_text(self) -> str:
        lines = [f"windows={self.n_windows}", f"features_retained={len(self.retained)}",
                 f"features_dropped={len(self.dropped)}", f"clusters={self.chosen_clusters}",
                 f"labeled_by={self.labeled_by}",
                 f"fcm_iterations={len(self.objective_trace)}",
                 f"fcm_objective={self.objective_trace[-1]:.17g}" if self.objective_trace else "fcm_objective=nan",
                 ""]
        lines.append("feature\tstatus\treason")
        for name in self.retained:
            lines.append(f"{name}\tkept\t-")
        for name, reason in self.dropped:
            lines.append(f"{name}\tdropped\t{reason}")
        if self.selection is not None:
            lines += ["", "i\twcsd\tsilhouette\tgap\tgap_se\tcalinski_harabasz\tdavies_bouldin\tvotes\tvoters"]
            for s in self.selection.scores:
                lines.append(f"{s.i}\t{s.wcsd:.6f}\t{s.mean_silhouette:.6f}\t{s.gap:.6f}\t{s.gap_se:.6f}"
                             f"\t{s.calinski_harabasz:.6f}\t{s.davies_bouldin:.6f}\t{s.votes}"
                             f"\t{','.join(s.voters) or '-'}")
        lines += ["", "objective_iteration\tJ"]
        lines += [f"{k}\t{j:.17g}" for k, j in enumerate(self.objective_trace, 1)]
        lines += ["", "rule\tlabel\toutput\tevidence"]
        lines += self.rule_summaries
        return "\n".join(lines) + "\n"


def _fit(x: np.ndarray, c: int, cfg: TrainConfig, eps: float = 1e-6, classes=None) -> FcmModel:
    fcm = FcmConfig(c=c, m=cfg.m, epsilon=eps, seed=cfg.seed, n_init=cfg.n_init)
    if classes is not None:
        return fcm_fit(x, fcm, init_memberships=label_memberships(classes, c, cfg.seed))
    return fcm_fit(x, fcm)


def label_memberships(classes: Sequence[int], c: int, seed: int = 0) -> np.ndarray:
    """Initial (n, c) memberships that start each class in its own cluster.

    Classes claim columns largest first; spare columns go to whichever class
    has the most members per column, and its members are spread over them at
    random. With fewer columns than classes the smallest classes share.
    """
    classes = np.asarray(classes)
    uniq, counts = np.unique(classes, return_counts=True)
    size = dict(zip(uniq.tolist(), counts.tolist()))
    order = [uniq[k].item() for k in np.argsort(-counts, kind="stable")]
    cols: dict = {u: [] for u in order}
    for j in range(c):
        if j < len(order):
            cols[order[j]].append(j)
        else:
            cols[max(order, key=lambda u: size[u] / len(cols[u]))].append(j)
    for rank, u in enumerate(order[c:]):
        cols[u].append(rank % c)
    rng = np.random.default_rng(seed)
    u0 = np.full((len(classes), c), 0.01)
    for q, cl in enumerate(classes.tolist()):
        opts = cols[cl]
        u0[q, opts[int(rng.integers(len(opts)))]] = 1.0
    return u0 / u0.sum(axis=1, keepdims=True)


def train_pipeline(dataset: TraceDataset, config: TrainConfig | None = None) -> tuple[RuleBase, TrainingReport]:
    """Featurize, reduce, select the cluster count, cluster and compile rules."""
    cfg = config or TrainConfig()
    windows = dataset.get_windows(cfg.window)
    if not windows:
        raise ValueError("dataset produced no windows")
    smallest = cfg.clusters or min(cfg.candidates)
    if len(windows) < max(smallest, 2):
        raise ValueError(f"{len(windows)} windows is fewer than the smallest candidate ({smallest})")
    report = TrainingReport(len(windows))
    full = FeatureSchema.full()
    raw_full = raw_matrix(windows, full)
    report.raw_full = raw_full
    schema = full.fit(raw_full)
    x = schema.transform(raw_full)
    names = schema.names

    constant = [k for k in range(len(schema)) if schema.hi[k] == schema.lo[k]]
    for k in constant:
        report.dropped.append((names[k], "constant"))
    keep = [k for k in range(len(schema)) if k not in set(constant)]

    corr = pearson_matrix(x[:, keep])
    report.correlation, report.correlation_names = corr.matrix, [names[k] for k in keep]
    cfs = set(cfs_prune(corr, cfg.cfs_threshold))
    for j, partner in corr.dropped:
        report.dropped.append((names[keep[j]], f"correlated with {names[keep[partner]]}"))
    keep = [k for pos, k in enumerate(keep) if pos not in cfs]

    truth = dataset.truth_for(windows) if cfg.use_labels else None
    if truth is not None:
        classes = [t.code for t in truth]
    else:
        pseudo_c = max(2, min(cfg.candidates))
        classes = _fit(x[:, keep], min(pseudo_c, len(windows)), cfg, 1e-4).hard_assignments().tolist()
    if len(set(classes)) >= 2:
        dev = set(deviation_prune(x[:, keep], classes, cfg.min_support, cfg.deviation_tolerance))
        for pos in sorted(dev):
            report.dropped.append((names[keep[pos]], "same deviation range in every class"))
        remaining = [k for pos, k in enumerate(keep) if pos not in dev]
        keep = remaining if remaining else keep

    xr = x[:, keep]
    if cfg.clusters is not None:
        c = cfg.clusters
    else:
        cands = list(cfg.candidates)
        if truth is not None and cfg.min_clusters_from_labels:
            floor = len(set(classes))
            cands = [k for k in cands if k >= floor] or [max(cands)]
            if len(cands) < 2:
                cands = [cands[0], cands[0] + 1]
        report.selection = score_candidates(xr, cands, seed=cfg.seed, b_refs=cfg.b_refs,
                                            fcm=FcmConfig(m=cfg.m, epsilon=1e-4, n_init=1))
        c = report.selection.chosen
    if c > len(windows):
        raise ValueError(f"{len(windows)} windows is fewer than the cluster count {c}")
    seeded = classes if (truth is not None and cfg.label_init) else None
    model = _fit(xr, c, cfg, classes=seeded)

    sub = schema.select(keep)
    drops = set(score_prune(model, sub, cfg.score_tolerance))
    if drops and len(drops) < len(keep):
        for pos in sorted(drops):
            report.dropped.append((names[keep[pos]], "same score in every cluster"))
        keep = [k for pos, k in enumerate(keep) if pos not in drops]
        xr = x[:, keep]
        sub = schema.select(keep)
        model = _fit(xr, c, cfg, classes=seeded)

    report.chosen_clusters = c
    report.objective_trace = list(model.objective_trace)
    report.retained = sub.names
    if truth is not None:
        outputs = classes
        report.labeled_by = "ground-truth"
        notes = None
    else:
        sig = signature_labels(model.memberships, raw_full)
        hard = model.hard_assignments()
        outputs = [sig[h][0].code for h in hard]
        report.labeled_by = "signatures"
        notes = {i: f"signature: {d}" for i, (_, d) in enumerate(sig)}
    rb = build_rulebase(model, xr, outputs, sub, support=cfg.support)
    if notes:
        rb.label_evidence.update(notes)
    for i, rule in enumerate(rb.rules):
        report.rule_summaries.append(f"{i}\t{rule.label.name}\t{rule.output:.6f}\t{rb.label_evidence.get(i, '-')}")
    return rb, report


# ---- classification ----------------------------------------------------------------

def check_schema(rulebase: RuleBase) -> None:
    valid = set(FeatureSchema.full().features)
    bad = [f for f in rulebase.schema.features if f not in valid]
    if bad:
        raise ValueError(f"model schema names unknown features: {bad[:3]}")


def classify_windows(rulebase: RuleBase, windows: Sequence[Window]) -> list[Verdict]:
    check_schema(rulebase)
    return infer_many(rulebase, vectorize_windows(windows, rulebase.schema))


# ---- gateway replay ----------------------------------------------------------------

@dataclass(frozen=True)
class PolicyConfig:
    ttl: float = DEFAULT_TTL
    capacity: int = 10_000
    k: int = DEFAULT_K
    hit_coverage: float = 0.5
    top_endpoints: int = 3


@dataclass
class WindowOutcome:
    window_id: str
    device: str
    time: float
    source: str  # "classified" or "cache"
    label: TrafficLabel
    o_star: float
    confidence: float
    zone: Zone
    truth: TrafficLabel | None = None


@dataclass
class DeviceCounts:
    forwarded: int = 0
    dropped: int = 0


@dataclass
class SimReport:
    outcomes: list[WindowOutcome]
    lookups: int
    hits: int
    classification_invocations: int
    policies_resident: list[tuple[float, int]]
    devices: dict[str, DeviceCounts]
    binary: MetricsTable | None = None
    multi: MetricsTable | None = None
    first_malicious: dict[str, float] = field(default_factory=dict)
    forwarded_after_verdict: dict[str, list[FlowRecord]] = field(default_factory=dict)
    flow_table: FlowTable | None = None

    @property
    def misses(self) -> int:
        return self.lookups - self.hits

    @property
    def cache_hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def classified(self) -> list[WindowOutcome]:
        return [o for o in self.outcomes if o.source == "classified"]

    def to_text(self) -> str:
        lines = [f"windows={len(self.outcomes)}", f"lookups={self.lookups}", f"hits={self.hits}",
                 f"misses={self.misses}", f"cache_hit_rate={self.cache_hit_rate:.6f}",
                 f"classification_invocations={self.classification_invocations}",
                 f"policies_resident_max={max((n for _, n in self.policies_resident), default=0)}"]
        for name, table in (("binary", self.binary), ("multi", self.multi)):
            if table is not None:
                lines.append(f"{name}_accuracy={table.accuracy:.6f}")
                if name == "binary":
                    lines += [f"binary_fpr={table.positive.fpr:.6f}", f"binary_fnr={table.positive.fnr:.6f}"]
        lines += ["", "device\tforwarded\tdropped\tfirst_malicious"]
        for dev in sorted(self.devices):
            d = self.devices[dev]
            fm = self.first_malicious.get(dev)
            lines.append(f"{dev}\t{d.forwarded}\t{d.dropped}\t{'-' if fm is None else repr(fm)}")
        lines += ["", "window_id\ttime\tsource\tlabel\to_star\tconfidence\tzone\ttruth"]
        for o in self.outcomes:
            lines.append(f"{o.window_id}\t{o.time!r}\t{o.source}\t{o.label.name}\t{o.o_star:.17g}"
                         f"\t{o.confidence:.17g}\t{o.zone.value}\t{o.truth.name if o.truth else '-'}")
        lines += ["", "time\tpolicies_resident"]
        lines += [f"{t!r}\t{n}" for t, n in self.policies_resident]
        return "\n".join(lines) + "\n"


def run_pipeline(dataset: TraceDataset, rulebase: RuleBase, config: PolicyConfig | None = None,
                 window: WindowConfig | None = None, warm_cache: PolicyCache | None = None,
                 endpoints: EndpointTracker | None = None) -> SimReport:
    """Replay a trace through monitoring, detection and enforcement.

    Each flow is checked against the flow table and the policy cache. When a
    device window closes it counts as a cache hit if enough of its new flows
    matched live policies and the device is unrestricted; otherwise it is
    classified and the verdict becomes policy, zone and flow rules.

    ``warm_cache`` and ``endpoints`` carry state from earlier operation: live
    policies, and per-device benign destinations used as the allowed cloud
    endpoints of restricted devices.
    """
    cfg = config or PolicyConfig()
    check_schema(rulebase)
    windows = dataset.get_windows(window or WindowConfig())
    truth = dataset.truth_for(windows)
    cache = warm_cache if warm_cache is not None else PolicyCache(cfg.ttl, cfg.capacity)
    table = FlowTable()
    endpoints = endpoints if endpoints is not None else EndpointTracker(cfg.top_endpoints)
    zones: dict[str, AonAssignment] = {}
    devices: dict[str, DeviceCounts] = {}
    hit_flows: set[int] = set()  # id() of flows that matched a live policy
    outcomes: list[WindowOutcome] = []
    resident: list[tuple[float, int]] = []
    first_bad: dict[str, float] = {}
    after: dict[str, list[FlowRecord]] = {}
    lookups = hits = invocations = 0

    # flows (kind 0) before window closings (kind 1) at equal timestamps
    events: list[tuple[float, int, int]] = [(f.timestamp, 0, i) for i, f in enumerate(dataset.flows)]
    events += [(w.end, 1, i) for i, w in enumerate(windows)]
    events.sort()

    for t, kind, i in events:
        if kind == 0:
            f = dataset.flows[i]
            counts = devices.setdefault(f.src_mac, DeviceCounts())
            if table.decide(f) is RuleAction.DROP:
                counts.dropped += 1
            else:
                counts.forwarded += 1
                if f.src_mac in first_bad:
                    after.setdefault(f.src_mac, []).append(f)
            if cache.lookup(f, t) is not None:
                hit_flows.add(id(f))
            continue

        w = windows[i]
        dev = w.device
        lookups += 1
        new = w.new_flows
        covered = sum(1 for f in new if id(f) in hit_flows)
        zone = zones.get(dev)
        unrestricted = zone is None or zone.zone is Zone.SAFE
        if new and unrestricted and covered >= cfg.hit_coverage * len(new) and covered > 0:
            hits += 1
            outcomes.append(WindowOutcome(w.window_id, dev, t, "cache", TrafficLabel.BENIGN, 0.0, 1.0,
                                          Zone.SAFE, truth[i] if truth else None))
            resident.append((t, len(cache)))
            continue

        invocations += 1
        verdict = infer(rulebase, rulebase.schema.transform(w.attrs.raw_vector(rulebase.schema.features)))
        label = verdict.label
        if label is TrafficLabel.BENIGN:
            endpoints.observe(new)
        else:
            first_bad.setdefault(dev, t)
        assignment = assign_zone(verdict, dev, zone, endpoints.endpoints(dev), cfg.k)
        policy = _install(cache, cfg, dev, label, assignment, new, t)
        if zone is None or assignment.zone is not zone.zone or assignment.allowed_destinations != zone.allowed_destinations:
            table.install(dev, emit_rules(assignment, policy))
        zones[dev] = assignment
        outcomes.append(WindowOutcome(w.window_id, dev, t, "classified", label, verdict.o_star,
                                      verdict.confidence, assignment.zone, truth[i] if truth else None))
        resident.append((t, len(cache)))

    report = SimReport(outcomes, lookups, hits, invocations, resident, devices,
                       first_malicious=first_bad, forwarded_after_verdict=after, flow_table=table)
    classified = report.classified()
    if classified and classified[0].truth is not None:
        pred = [o.label for o in classified]
        tru = [o.truth for o in classified]
        report.binary = compute_metrics(pred, tru, MetricsMode.BINARY)
        report.multi = compute_metrics(pred, tru, MetricsMode.MULTI)
    return report


def _install(cache: PolicyCache, cfg: PolicyConfig, dev: str, label: TrafficLabel,
             assignment: AonAssignment, new: Sequence[FlowRecord], t: float) -> SecurityPolicy | None:
    """Cache the verdict; returns the device-level policy used for rule timeouts."""
    if cfg.ttl <= 0:
        return None
    expires = t + cfg.ttl
    if label.is_malicious:
        cache.remove_device(dev)
        action = Action.ISOLATE if assignment.zone is Zone.ISOLATED else Action.RESTRICT_TO_CLOUD
        policy = SecurityPolicy(dev, None, None, None, action, label, t, expires)
        cache.insert(policy)
        return policy
    if assignment.zone is not Zone.SAFE:
        return None
    services = sorted({f.service for f in new}, key=lambda s: (s[0], s[1], s[2].value))
    for ip, port, proto in services:
        cache.insert(SecurityPolicy(dev, ip, port, proto, Action.ALLOW, label, t, expires))
    return SecurityPolicy(dev, None, None, None, Action.ALLOW, label, t, expires)


def evaluate(rulebase: RuleBase, dataset: TraceDataset, window: WindowConfig | None = None):
    """(verdicts, truth, binary table, multi table) for every window of ``dataset``."""
    windows = dataset.get_windows(window or WindowConfig())
    verdicts = classify_windows(rulebase, windows)
    truth = dataset.truth_for(windows)
    if truth is None:
        return verdicts, None, None, None
    return (verdicts, truth, compute_metrics(verdicts, truth, MetricsMode.BINARY),
            compute_metrics(verdicts, truth, MetricsMode.MULTI))


def label_coverage(rulebase: RuleBase) -> Counter:
    return Counter(r.label for r in rulebase.rules)
