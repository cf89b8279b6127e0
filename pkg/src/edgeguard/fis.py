"""Sparse triangular fuzzy rule base built from FCM clusters, and inference
by inverse-square-distance rule interpolation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fcm import FcmModel
from .features import FeatureSchema, as_matrix
from .flow import TrafficLabel

CLASS_CODES = tuple(label.code for label in TrafficLabel)


@dataclass(frozen=True)
class TriangularSet:
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not self.a <= self.b <= self.c:
            raise ValueError(f"triangular set needs a <= b <= c, got {(self.a, self.b, self.c)}")

    def membership(self, x: float) -> float:
        return float(triangular_membership(np.array([[self.a, self.b, self.c]]), np.array([x]))[0])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


def triangular_membership(abc: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Elementwise membership of ``x[..., k]`` in the sets ``abc[k] = (a, b, c)``."""
    a, b, c = abc[..., 0], abc[..., 1], abc[..., 2]
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        left = np.where(b > a, (x - a) / np.where(b > a, b - a, 1.0), 0.0)
        right = np.where(c > b, (c - x) / np.where(c > b, c - b, 1.0), 0.0)
    out = np.where(x < b, left, right)
    out = np.where(x == b, 1.0, out)
    out = np.where((x <= a) & (a < b), 0.0, out)
    out = np.where((x >= c) & (c > b), 0.0, out)
    out = np.where((x < a) | (x > c), 0.0, out)
    return np.clip(out, 0.0, 1.0)


def defuzzify(s: TriangularSet | Sequence[float]) -> float:
    a, b, c = s.as_tuple() if isinstance(s, TriangularSet) else s
    return (a + 2.0 * b + c) / 4.0


def label_map(o_star: float, codes: Sequence[int] = CLASS_CODES) -> TrafficLabel:
    """Nearest of ``codes`` to ``o_star``; exact midpoints go to the higher code.

    A rule base passes the codes its rules carry, so a base built from
    classes {0, 10} only ever answers 0 or 10.
    """
    best = None
    for code in sorted(set(int(c) for c in codes)):
        d = abs(o_star - code)
        if best is None or d <= best[0]:
            best = (d, code)
    if best is None:
        raise ValueError("no class codes to map onto")
    return TrafficLabel.from_code(best[1])


class RuleFlag(enum.Enum):
    OK = "OK"
    DEGENERATE = "DEGENERATE"


@dataclass
class FuzzyRule:
    antecedents: list[TriangularSet]
    consequent: TriangularSet
    label: TrafficLabel
    flag: RuleFlag = RuleFlag.OK
    # majority class by membership mass, kept as labeling evidence
    evidence: TrafficLabel | None = None

    @property
    def r(self) -> np.ndarray:
        return np.array([defuzzify(s) for s in self.antecedents])

    @property
    def output(self) -> float:
        return defuzzify(self.consequent)


class Binary(enum.Enum):
    BENIGN = "BENIGN"
    MALICIOUS = "MALICIOUS"


@dataclass
class Verdict:
    o_star: float
    label: TrafficLabel
    activated_rules: list[tuple[int, float]]
    activation_output: float = float("nan")  # membership-weighted output, diagnostic only
    fallback: bool = False  # no rule activated; weights span every rule

    @property
    def binary(self) -> Binary:
        return Binary.MALICIOUS if self.label.is_malicious else Binary.BENIGN

    @property
    def confidence(self) -> float:
        return max((w for _, w in self.activated_rules), default=0.0)


@dataclass
class RuleBase:
    rules: list[FuzzyRule]
    schema: FeatureSchema
    fcm: FcmModel | None = None
    label_evidence: dict[int, str] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.rules) < 2:
            raise ValueError("a rule base needs at least 2 rules")
        for rule in self.rules:
            if len(rule.antecedents) != len(self.schema):
                raise ValueError("rule antecedent count differs from schema length")

    def _arrays(self):
        if not self._cache:
            live = [i for i, r in enumerate(self.rules) if r.flag is RuleFlag.OK]
            if not live:
                raise ValueError("rule base has no usable rules")
            self._cache["idx"] = np.array(live)
            self._cache["abc"] = np.array([[s.as_tuple() for s in self.rules[i].antecedents] for i in live])
            self._cache["r"] = np.array([self.rules[i].r for i in live])
            self._cache["out"] = np.array([self.rules[i].output for i in live])
            self._cache["codes"] = sorted({self.rules[i].label.code for i in live})
        return self._cache["idx"], self._cache["abc"], self._cache["r"], self._cache["out"]

    @property
    def codes(self) -> list[int]:
        """Class codes carried by the usable rules."""
        self._arrays()
        return self._cache["codes"]

    def cluster_labels(self) -> list[TrafficLabel]:
        return [r.label for r in self.rules]


def _triangle(values: np.ndarray, weights: np.ndarray, center: float) -> TriangularSet:
    lo = values <= center
    hi = values >= center
    wl, wh = weights[lo].sum(), weights[hi].sum()
    # offsets from the center keep an all-equal side exactly at the center
    a = center + float((weights[lo] * (values[lo] - center)).sum() / wl) if wl > 0 else center
    c = center + float((weights[hi] * (values[hi] - center)).sum() / wh) if wh > 0 else center
    return TriangularSet(min(a, center), center, max(c, center))


def build_rule(values: np.ndarray, weights: np.ndarray, outputs: np.ndarray) -> FuzzyRule:
    """One rule from a cluster's points, their memberships and output codes.

    The point with the highest membership fixes every set's center; the left
    and right points are membership-weighted means of the values on either
    side of it.
    """
    q = int(np.argmax(weights))
    antecedents = [_triangle(values[:, k], weights, float(values[q, k])) for k in range(values.shape[1])]
    consequent = _triangle(outputs.astype(float), weights, float(outputs[q]))
    mass = np.bincount(outputs.astype(int), weights=weights, minlength=len(CLASS_CODES))
    return FuzzyRule(antecedents, consequent, label_map(defuzzify(consequent)),
                     evidence=TrafficLabel.from_code(int(np.argmax(mass))))


def build_rulebase(model: FcmModel, vectors, outputs: Sequence[int], schema: FeatureSchema,
                   support: str = "members") -> RuleBase:
    """Compile one rule per cluster.

    ``support="members"`` builds each rule from the points whose strongest
    membership is in that cluster (weighted by that membership);
    ``support="all"`` weighs every training point.
    """
    x = as_matrix(vectors)
    y = np.asarray([int(getattr(o, "code", o)) for o in outputs])
    u = model.memberships
    if u.shape[0] != x.shape[0] or y.shape[0] != x.shape[0]:
        raise ValueError("vectors, outputs and memberships must align")
    if x.shape[1] != len(schema):
        raise ValueError("vector dimension differs from schema length")
    if support not in ("members", "all"):
        raise ValueError("support must be 'members' or 'all'")
    hard = np.argmax(u, axis=1)
    rules = []
    for i in range(model.c):
        rows = np.flatnonzero(hard == i) if support == "members" else np.arange(x.shape[0])
        w = u[rows, i]
        if rows.size == 0 or w.sum() <= 0:
            center = model.centers[i]
            rules.append(FuzzyRule([TriangularSet(v, v, v) for v in center], TriangularSet(0, 0, 0),
                                   TrafficLabel.BENIGN, RuleFlag.DEGENERATE))
            continue
        rules.append(build_rule(x[rows], w, y[rows]))
    evidence = {i: f"majority={r.evidence.name}" if r.evidence else "none" for i, r in enumerate(rules)}
    return RuleBase(rules, schema, model, evidence)


def _weights(r: np.ndarray, x: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d2 = ((r[candidates] - x) ** 2).sum(axis=1)
    zero = d2 == 0.0
    if zero.any():
        return zero / zero.sum()
    inv = 1.0 / d2
    return inv / inv.sum()


def _verdict(rb_idx, r, out, codes, x, act_row) -> Verdict:
    strengths = act_row
    active = np.flatnonzero(strengths > 0)
    fallback = active.size == 0
    cand = np.arange(r.shape[0]) if fallback else active
    w = _weights(r, x, cand)
    o_star = float(w @ out[cand])
    eq14 = float(strengths[active] @ out[active] / strengths[active].sum()) if active.size else float("nan")
    pairs = [(int(rb_idx[k]), float(wk)) for k, wk in zip(cand, w)]
    return Verdict(o_star, label_map(o_star, codes), pairs, eq14, fallback)


def _check(rulebase: RuleBase, x: np.ndarray) -> None:
    if x.shape[-1] != len(rulebase.schema):
        raise ValueError(f"expected {len(rulebase.schema)} features, got {x.shape[-1]}")


def infer(rulebase: RuleBase, x) -> Verdict:
    """Classify one normalized feature vector."""
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    _check(rulebase, arr)
    idx, abc, r, out = rulebase._arrays()
    act = triangular_membership(abc, arr[None, :]).min(axis=1)
    return _verdict(idx, r, out, rulebase.codes, arr, act)


def infer_many(rulebase: RuleBase, vectors, chunk: int = 2048) -> list[Verdict]:
    x = as_matrix(vectors)
    if x.size == 0:
        return []
    _check(rulebase, x)
    idx, abc, r, out = rulebase._arrays()
    codes = rulebase.codes
    verdicts: list[Verdict] = []
    for start in range(0, x.shape[0], chunk):
        block = x[start:start + chunk]
        act = triangular_membership(abc[None, :, :, :], block[:, None, :]).min(axis=2)
        verdicts.extend(_verdict(idx, r, out, codes, row, a) for row, a in zip(block, act))
    return verdicts
