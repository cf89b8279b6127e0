from __future__ import annotations

import numpy as np
import pytest

from edgeguard.flow import FlowRecord, Protocol, TcpFlag
from edgeguard.gateway import TrainConfig, train_pipeline
from edgeguard.synthetic import ATTACK_SCENARIOS, generate_mixed

DEV_A = "02:00:00:00:00:0a"
DEV_B = "02:00:00:00:00:0b"
GW = "02:00:00:00:00:01"


def make_flow(t: float = 0.0, src_mac: str = DEV_A, dst_mac: str = GW, src_ip: str = "192.168.1.10",
              dst_ip: str = "52.1.2.3", src_port: int = 40000, dst_port: int = 443,
              protocol: Protocol = Protocol.HTTPS, **kw) -> FlowRecord:
    kw.setdefault("tcp_flags", TcpFlag.SYN | TcpFlag.ACK)
    kw.setdefault("bytes_src2dst", 300)
    kw.setdefault("bytes_dst2src", 900)
    kw.setdefault("packets", 8)
    kw.setdefault("duration", 0.5)
    return FlowRecord(t, src_mac, dst_mac, src_ip, dst_ip, src_port, dst_port, protocol, **kw)


def definitional_fcm(x: np.ndarray, u0: np.ndarray, m: float, eps: float, max_iters: int):
    """Plain-loop fixed-point iteration of the FCM update equations.

    Returns (centers, memberships) with memberships evaluated against the
    final centers, clusters ordered lexicographically by center.
    """
    n, h = x.shape
    c = u0.shape[1]
    u = u0 / u0.sum(axis=1, keepdims=True)
    centers = np.zeros((c, h))
    for _ in range(max_iters):
        for i in range(c):
            w = [u[j, i] ** m for j in range(n)]
            for k in range(h):
                centers[i, k] = sum(w[j] * x[j, k] for j in range(n)) / sum(w)
        new = np.zeros_like(u)
        for j in range(n):
            d = [float(np.sqrt(sum((x[j, k] - centers[i, k]) ** 2 for k in range(h)))) for i in range(c)]
            for i in range(c):
                new[j, i] = 1.0 / sum((d[i] / d[q]) ** (2.0 / (m - 1.0)) for q in range(c))
        delta = np.abs(new - u).max()
        u = new
        if delta < eps:
            break
    order = np.lexsort(centers.T[::-1])
    return centers[order], u[:, order]


@pytest.fixture(scope="session")
def small_mixed():
    """A small labeled trace with every attack scenario."""
    return generate_mixed(ATTACK_SCENARIOS, 4, 400, seed=3)


@pytest.fixture(scope="session")
def small_model(small_mixed):
    rb, report = train_pipeline(small_mixed, TrainConfig(seed=5, clusters=12, n_init=1))
    return rb, report
