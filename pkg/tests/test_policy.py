import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeguard.flow import Protocol, TrafficLabel
from edgeguard.policy import (
    Action, AonAssignment, Direction, EndpointTracker, FlowRule, FlowTable, PolicyCache, RuleAction,
    SecurityPolicy, Zone, assign_zone, cache_insert, cache_lookup, dumps_cache, emit_rules, format_rules,
    loads_cache, parse_rules, zone_for,
)

from conftest import DEV_A, DEV_B, GW, make_flow


def pol(ip=None, port=None, proto=None, *, dev=DEV_A, action=Action.ALLOW, t=0.0, ttl=300.0,
        label=TrafficLabel.BENIGN):
    return SecurityPolicy(dev, ip, port, proto, action, label, t, t + ttl)


# ---- cache -------------------------------------------------------------------

def test_most_specific_policy_wins():
    cache = PolicyCache(ttl=300)
    cache_insert(cache, pol(action=Action.ISOLATE))
    cache_insert(cache, pol("52.1.2.3", 443, action=Action.RESTRICT_TO_CLOUD))
    hit = cache_lookup(cache, make_flow(t=1.0), 1.0)
    assert hit.action is Action.RESTRICT_TO_CLOUD and hit.specificity == 2
    other = cache_lookup(cache, make_flow(t=1.0, dst_ip="8.8.8.8"), 1.0)
    assert other.action is Action.ISOLATE


def test_specificity_ties_go_to_most_recent():
    cache = PolicyCache()
    cache_insert(cache, pol("52.1.2.3", action=Action.ISOLATE, t=0.0))
    cache_insert(cache, pol(port=443, action=Action.RESTRICT_TO_CLOUD, t=5.0))
    assert cache_lookup(cache, make_flow(), 6.0).action is Action.RESTRICT_TO_CLOUD


def test_other_devices_do_not_match():
    cache = PolicyCache()
    cache_insert(cache, pol(dev=DEV_B))
    assert cache_lookup(cache, make_flow(), 1.0) is None


def test_expired_policy_misses():
    cache = PolicyCache(ttl=10)
    cache_insert(cache, pol(ttl=10))
    assert cache_lookup(cache, make_flow(), 10.0) is None
    assert len(cache) == 0


def test_hit_refreshes_expiry_to_now_plus_ttl():
    cache = PolicyCache(ttl=300)
    cache_insert(cache, pol(ttl=300))
    hit = cache_lookup(cache, make_flow(), 120.0)
    assert hit.expires_at == 420.0
    # refresh never shortens a longer expiry
    cache_insert(cache, pol("52.1.2.3", ttl=1000))
    assert cache_lookup(cache, make_flow(), 130.0).expires_at == 1000.0


def test_zero_ttl_cache_never_hits():
    cache = PolicyCache(ttl=0)
    with pytest.raises(ValueError):
        pol(ttl=0)
    assert cache_lookup(cache, make_flow(), 0.0) is None


def test_capacity_evicts_earliest_expiry():
    cache = PolicyCache(ttl=100, capacity=3)
    cache_insert(cache, pol("1.1.1.1", ttl=50))
    cache_insert(cache, pol("2.2.2.2", ttl=10))
    cache_insert(cache, pol("3.3.3.3", ttl=70))
    report = cache_insert(cache, pol("4.4.4.4", ttl=90))
    assert [p.dst_ip for p in report.evicted] == ["2.2.2.2"]
    assert len(cache) == 3
    # capacity override through the insert helper
    report = cache_insert(cache, pol("5.5.5.5", ttl=90), capacity=2)
    assert [p.dst_ip for p in report.evicted] == ["1.1.1.1", "3.3.3.3"]


def test_refresh_protects_against_eviction():
    cache = PolicyCache(ttl=100, capacity=2)
    cache_insert(cache, pol("1.1.1.1", 443, ttl=20))
    cache_insert(cache, pol("2.2.2.2", 443, ttl=40))
    cache_lookup(cache, make_flow(dst_ip="1.1.1.1"), 5.0)  # now expires at 105
    report = cache_insert(cache, pol("3.3.3.3", ttl=90))
    assert [p.dst_ip for p in report.evicted] == ["2.2.2.2"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.floats(1, 50), st.floats(0, 100)), min_size=1, max_size=40))
def test_lookup_never_returns_expired(ops):
    cache = PolicyCache(ttl=20, capacity=3)
    now = 0.0
    for ip, ttl, dt in ops:
        now += dt / 10
        cache_insert(cache, pol(f"10.0.0.{ip}", 443, t=now, ttl=ttl))
        probe = now + dt
        hit = cache_lookup(cache, make_flow(dst_ip=f"10.0.0.{(ip + 1) % 5}"), probe)
        if hit is not None:
            assert hit.expires_at > probe
        assert len(cache) <= 3


def test_snapshot_round_trip():
    cache = PolicyCache(ttl=42.5, capacity=7)
    cache_insert(cache, pol(action=Action.ISOLATE, label=TrafficLabel.DATA_THEFT, t=1.25))
    cache_insert(cache, pol("52.1.2.3", 443, Protocol.HTTPS, action=Action.RESTRICT_TO_CLOUD, t=0.1))
    text = dumps_cache(cache)
    again = loads_cache(text)
    assert dumps_cache(again) == text
    assert (again.ttl, again.capacity) == (42.5, 7)
    assert [p for p in again] == [p for p in cache]
    with pytest.raises(ValueError):
        loads_cache("garbage\n")


def test_purge_and_remove_device():
    cache = PolicyCache()
    cache_insert(cache, pol("1.1.1.1", ttl=5))
    cache_insert(cache, pol("2.2.2.2", ttl=50))
    cache_insert(cache, pol(dev=DEV_B, ttl=50))
    assert cache.live_count(10.0) == 2
    assert cache.purge_expired(10.0) == 1
    assert cache.remove_device(DEV_A) == 1
    assert len(cache) == 1


# ---- zones -------------------------------------------------------------------

@pytest.mark.parametrize("label, zone", [(TrafficLabel.BENIGN, Zone.SAFE), (TrafficLabel.PORT_SCAN, Zone.SUSPICIOUS),
                                         (TrafficLabel.SYN_FLOOD, Zone.SUSPICIOUS),
                                         (TrafficLabel.DATA_THEFT, Zone.ISOLATED)])
def test_zone_for(label, zone):
    assert zone_for(label) is zone


def test_suspicious_carries_cloud_endpoints():
    eps = [("52.1.2.3", 443), ("52.9.9.9", 8883)]
    a = assign_zone(TrafficLabel.PORT_SCAN, DEV_A, None, eps)
    assert a.zone is Zone.SUSPICIOUS and a.allowed_destinations == frozenset(eps)
    with pytest.raises(ValueError):
        AonAssignment(DEV_A, Zone.ISOLATED, frozenset(eps))


def test_hysteresis_needs_k_benign():
    a = assign_zone(TrafficLabel.DATA_THEFT, DEV_A)
    for _ in range(2):
        a = assign_zone(TrafficLabel.BENIGN, DEV_A, a, k=3)
        assert a.zone is Zone.ISOLATED
    a = assign_zone(TrafficLabel.BENIGN, DEV_A, a, k=3)
    assert a.zone is Zone.SAFE


def test_malicious_verdict_resets_streak_and_escalates():
    a = assign_zone(TrafficLabel.PORT_SCAN, DEV_A, None, [("1.1.1.1", 443)])
    a = assign_zone(TrafficLabel.BENIGN, DEV_A, a)
    a = assign_zone(TrafficLabel.BOTNET, DEV_A, a)
    assert a.zone is Zone.SUSPICIOUS and a.benign_streak == 0
    a = assign_zone(TrafficLabel.DATA_THEFT, DEV_A, a)
    assert a.zone is Zone.ISOLATED
    a = assign_zone(TrafficLabel.PORT_SCAN, DEV_A, a)
    assert a.zone is Zone.ISOLATED


label_st = st.sampled_from(list(TrafficLabel))


@settings(max_examples=200, deadline=None)
@given(st.lists(label_st, min_size=1, max_size=30), st.integers(1, 5))
def test_zone_transitions_follow_hysteresis(labels, k):
    hist: list[AonAssignment] = []
    for lab in labels:
        prev = hist[-1] if hist else None
        a = assign_zone(lab, DEV_A, hist, [("52.1.2.3", 443)], k=k)
        if prev is not None and prev.zone is not Zone.SAFE and a.zone is Zone.SAFE:
            assert len(hist) >= k - 1
            assert all(x is TrafficLabel.BENIGN for x in labels[len(hist) - k + 1: len(hist) + 1])
        if lab.is_malicious:
            assert a.zone is not Zone.SAFE
            if prev is not None:
                assert a.zone.severity >= prev.zone.severity
        hist.append(a)


def test_endpoint_tracker_top_three():
    tr = EndpointTracker(top=3)
    flows = ([make_flow(dst_ip="1.1.1.1")] * 5 + [make_flow(dst_ip="2.2.2.2")] * 3 +
             [make_flow(dst_ip="3.3.3.3")] * 3 + [make_flow(dst_ip="4.4.4.4")])
    tr.observe(flows)
    assert tr.endpoints(DEV_A) == [("1.1.1.1", 443), ("2.2.2.2", 443), ("3.3.3.3", 443)]
    assert tr.endpoints(DEV_B) == []


# ---- flow rules ----------------------------------------------------------------

def test_emit_safe_single_forward():
    rules = emit_rules(AonAssignment(DEV_A, Zone.SAFE))
    assert rules == [FlowRule(DEV_A, None, None, None, RuleAction.FORWARD)]


def test_emit_suspicious_two_endpoints():
    a = AonAssignment(DEV_A, Zone.SUSPICIOUS, frozenset({("52.1.2.3", 443), ("52.9.9.9", 8883)}))
    rules = emit_rules(a)
    assert [r.action for r in rules] == [RuleAction.FORWARD, RuleAction.FORWARD, RuleAction.DROP]
    assert rules[-1].priority == min(r.priority for r in rules) == 0
    assert all(r.priority == 20 for r in rules[:2])


def test_emit_isolated_drops_everything():
    table = FlowTable()
    table.install(DEV_A, emit_rules(AonAssignment(DEV_A, Zone.ISOLATED)))
    assert table.decide(make_flow()) is RuleAction.DROP
    inbound = make_flow(src_mac=DEV_B, dst_mac=DEV_A, dst_ip="192.168.1.10")
    assert table.decide(inbound) is RuleAction.DROP
    assert table.decide(make_flow(src_mac=DEV_B)) is RuleAction.FORWARD


def test_emit_uses_policy_lifetime():
    policy = pol(action=Action.ISOLATE, ttl=60, t=10)
    rules = emit_rules(AonAssignment(DEV_A, Zone.ISOLATED), policy)
    assert rules[0].idle_timeout == 60
    with pytest.raises(ValueError):
        emit_rules(AonAssignment(DEV_B, Zone.ISOLATED), policy)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["52.1.2.3", "52.9.9.9", "8.8.8.8"]), st.sampled_from([443, 8883, 53])),
                max_size=3, unique=True),
       st.sampled_from(["52.1.2.3", "52.9.9.9", "8.8.8.8", "1.2.3.4"]), st.sampled_from([443, 8883, 53, 80]))
def test_suspicious_table_is_sound(allowed, ip, port):
    table = FlowTable()
    table.install(DEV_A, emit_rules(AonAssignment(DEV_A, Zone.SUSPICIOUS, frozenset(allowed))))
    action = table.decide(make_flow(dst_ip=ip, dst_port=port))
    expect = RuleAction.FORWARD if (ip, port) in allowed else RuleAction.DROP
    assert action is expect


def test_duplicate_rules_rejected():
    r = FlowRule(DEV_A, None, None, None, RuleAction.DROP)
    with pytest.raises(ValueError):
        FlowTable().install(DEV_A, [r, r])


def test_rules_export_round_trip():
    rules = emit_rules(AonAssignment(DEV_A, Zone.SUSPICIOUS, frozenset({("52.1.2.3", 443)})))
    rules.append(FlowRule(DEV_B, "10.0.0.1", None, Protocol.TCP, RuleAction.DROP, Direction.IN, 12.5))
    text = format_rules(rules)
    assert parse_rules(text) == rules
    bad = text.replace("\t20\tFORWARD", "\t30\tFORWARD")
    with pytest.raises(ValueError, match="priority"):
        parse_rules(bad)
