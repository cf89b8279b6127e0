"""Cluster labels without ground truth, from attack signatures evaluated on
each cluster's membership-weighted attribute profile."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .features import FeatureSchema
from .flow import TrafficLabel


def _frac(p: dict[str, float], attr: str) -> float:
    n = p["connections_total.count"]
    return p[f"{attr}.count"] / n if n > 0 else 0.0


@dataclass(frozen=True)
class Signature:
    label: TrafficLabel
    description: str
    test: Callable[[dict[str, float]], bool]


# evaluated in order; the first signature that fires names the cluster
SIGNATURES: tuple[Signature, ...] = (
    Signature(TrafficLabel.DATA_THEFT, "ftp share > 0.4 and inbound bytes/conn > 1e5",
              lambda p: _frac(p, "pkt_ftp") > 0.4 and p["data_dst2src.mean"] > 1e5),
    Signature(TrafficLabel.MALWARE_INJECTION, "ftp share > 0.4 and outbound bytes/conn > 5e4",
              lambda p: _frac(p, "pkt_ftp") > 0.4 and p["data_src2dst.mean"] > 5e4),
    Signature(TrafficLabel.SYN_FLOOD, "syn errors > 0.5 and same destination > 0.8",
              lambda p: p["syn_error.mean"] > 0.5 and p["same_destination.mean"] > 0.8),
    Signature(TrafficLabel.BOTNET, "syn errors > 0.5",
              lambda p: p["syn_error.mean"] > 0.5),
    Signature(TrafficLabel.PORT_SWEEP, "unique dst ports > 0.8 and same destination > 0.8",
              lambda p: p["dst_ports_unique.mean"] > 0.8 and p["same_destination.mean"] > 0.8),
    Signature(TrafficLabel.PORT_SCAN, "unique dst ports > 0.8",
              lambda p: p["dst_ports_unique.mean"] > 0.8),
    Signature(TrafficLabel.ADDRESS_SWEEP, "unique dst ips > 0.6 and arp+icmp share > 0.5",
              lambda p: p["dst_ips_unique.mean"] > 0.6 and _frac(p, "pkt_arp") + _frac(p, "pkt_icmp") > 0.5),
    Signature(TrafficLabel.MITM, "arp share > 0.3 and unique dst ips < 0.3",
              lambda p: _frac(p, "pkt_arp") > 0.3 and p["dst_ips_unique.mean"] < 0.3),
    Signature(TrafficLabel.FUZZING, "failed service logins > 5 per window",
              lambda p: p["service_login_fail.count"] > 5),
    Signature(TrafficLabel.SSL_RENEG, "packets per https connection > 100",
              lambda p: p["pkt_https.mean"] > 100),
)


def cluster_profiles(memberships: np.ndarray, raw_full: np.ndarray) -> list[dict[str, float]]:
    """Membership-weighted raw attribute statistics over each cluster's members."""
    names = FeatureSchema.full().names
    u = np.asarray(memberships, dtype=float)
    hard = np.argmax(u, axis=1)
    out = []
    for i in range(u.shape[1]):
        rows = hard == i
        w = u[rows, i]
        if w.sum() <= 0:
            out.append({n: 0.0 for n in names})
            continue
        mean = (w[:, None] * raw_full[rows]).sum(axis=0) / w.sum()
        out.append(dict(zip(names, mean.tolist())))
    return out


def signature_label(profile: dict[str, float]) -> tuple[TrafficLabel, str]:
    for sig in SIGNATURES:
        if sig.test(profile):
            return sig.label, sig.description
    return TrafficLabel.BENIGN, "no signature fired"


def signature_labels(memberships: np.ndarray, raw_full: np.ndarray) -> list[tuple[TrafficLabel, str]]:
    return [signature_label(p) for p in cluster_profiles(memberships, raw_full)]
