"""Rule-base model files (.fwm): line-oriented, tab separated, self-describing.

Numbers are written with 17 significant digits so a save/load cycle is
bit-exact.
"""

from __future__ import annotations

import numpy as np

from .fcm import FcmConfig, FcmModel
from .features import FeatureSchema, WindowConfig
from .fis import FuzzyRule, RuleBase, RuleFlag, TriangularSet
from .flow import TrafficLabel

MODEL_MAGIC = "edgeguard-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _f(x: float) -> str:
    return format(float(x), ".17g")


def dumps_model(rulebase: RuleBase, window: WindowConfig | None = None) -> str:
    window = window or WindowConfig()
    schema = rulebase.schema
    lines = [f"# {MODEL_MAGIC} v{MODEL_VERSION}"]
    lines.append("labels\t" + "\t".join(f"{lab.name}={lab.code}" for lab in TrafficLabel))
    lines.append(f"window\t{window.n_conn}\t{window.stride or 0}\t{_f(window.flush_interval)}")
    if rulebase.fcm is not None:
        cfg = rulebase.fcm.config
        lines.append(f"fcm\t{cfg.c}\t{_f(cfg.m)}\t{cfg.max_iters}\t{_f(cfg.epsilon)}\t{cfg.seed}"
                     f"\t{cfg.n_init}\t{int(cfg.literal_exponent)}")
        for i, center in enumerate(rulebase.fcm.centers):
            lines.append(f"center\t{i}\t" + "\t".join(_f(v) for v in center))
    lines.append(f"features\t{len(schema)}")
    for (attr, stat), lo, hi in zip(schema.features, schema.lo, schema.hi):
        lines.append(f"feature\t{attr}\t{stat}\t{_f(lo)}\t{_f(hi)}")
    lines.append(f"rules\t{len(rulebase.rules)}")
    for i, rule in enumerate(rulebase.rules):
        evidence = rule.evidence.name if rule.evidence else "-"
        note = rulebase.label_evidence.get(i, "-").replace("\t", " ")
        lines.append(f"rule\t{i}\t{rule.label.name}\t{rule.flag.value}\t{evidence}\t"
                     + "\t".join(_f(v) for v in rule.consequent.as_tuple()) + f"\t{note}")
        lines.append(f"ante\t{i}\t" + "\t".join(_f(v) for s in rule.antecedents for v in s.as_tuple()))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(path, rulebase: RuleBase, window: WindowConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(rulebase, window))


def loads_model(text: str) -> tuple[RuleBase, WindowConfig]:
    rows = [ln.split("\t") for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = text.split("\n", 1)[0]
    if header != f"# {MODEL_MAGIC} v{MODEL_VERSION}":
        raise ModelFormatError(f"not a v{MODEL_VERSION} model file")
    if not rows or rows[-1] != ["end"]:
        raise ModelFormatError("model file truncated")
    window = WindowConfig()
    cfg: FcmConfig | None = None
    centers: list[np.ndarray] = []
    features, lo, hi = [], [], []
    rules: list[FuzzyRule] = []
    notes: dict[int, str] = {}
    pending: dict | None = None
    try:
        for row in rows[:-1]:
            kind = row[0]
            if kind == "labels":
                codes = dict(item.split("=") for item in row[1:])
                if any(int(codes.get(lab.name, -1)) != lab.code for lab in TrafficLabel):
                    raise ModelFormatError("label codes differ from this build")
            elif kind == "window":
                window = WindowConfig(int(row[1]), int(row[2]) or None, float(row[3]))
            elif kind == "fcm":
                cfg = FcmConfig(int(row[1]), float(row[2]), int(row[3]), float(row[4]), int(row[5]),
                                int(row[6]), bool(int(row[7])))
            elif kind == "center":
                centers.append(np.array([float(v) for v in row[2:]]))
            elif kind == "feature":
                features.append((row[1], row[2]))
                lo.append(float(row[3]))
                hi.append(float(row[4]))
            elif kind == "rule":
                out = TriangularSet(float(row[5]), float(row[6]), float(row[7]))
                pending = dict(label=TrafficLabel[row[2]], flag=RuleFlag(row[3]),
                               evidence=None if row[4] == "-" else TrafficLabel[row[4]], consequent=out)
                notes[int(row[1])] = row[8] if len(row) > 8 else "-"
            elif kind == "ante":
                if pending is None:
                    raise ModelFormatError("antecedent line without a rule")
                vals = [float(v) for v in row[2:]]
                sets = [TriangularSet(*vals[k:k + 3]) for k in range(0, len(vals), 3)]
                rules.append(FuzzyRule(sets, **pending))
                pending = None
            elif kind not in ("features", "rules"):
                raise ModelFormatError(f"unknown record {kind!r}")
    except (IndexError, KeyError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from None
    schema = FeatureSchema(tuple(features), np.array(lo), np.array(hi))
    fcm = None
    if cfg is not None and centers:
        c = np.vstack(centers)
        fcm = FcmModel(c, np.empty((0, c.shape[0])), [], cfg)
    return RuleBase(rules, schema, fcm, notes), window


def load_model(path) -> tuple[RuleBase, WindowConfig]:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
