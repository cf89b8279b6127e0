"""Gateway-side IoT traffic classification with fuzzy clustering and rule interpolation."""

from .fcm import FcmConfig, FcmModel, fcm_fit, fcm_membership, fcm_objective
from .features import FeatureSchema, FeatureVector, WindowConfig, window_flows
from .fis import RuleBase, Verdict, build_rulebase, defuzzify, infer, label_map
from .flow import FlowRecord, TrafficLabel
from .gateway import PolicyConfig, TrainConfig, run_pipeline, train_pipeline
from .ingest import TraceDataset, load_dataset, split
from .metrics import MetricsMode, compute_metrics
from .policy import PolicyCache, SecurityPolicy, Zone, assign_zone, emit_rules

__version__ = "0.1.0"

__all__ = [
    "FcmConfig", "FcmModel", "fcm_fit", "fcm_membership", "fcm_objective",
    "FeatureSchema", "FeatureVector", "WindowConfig", "window_flows",
    "RuleBase", "Verdict", "build_rulebase", "defuzzify", "infer", "label_map",
    "FlowRecord", "TrafficLabel", "PolicyConfig", "TrainConfig", "run_pipeline", "train_pipeline",
    "TraceDataset", "load_dataset", "split", "MetricsMode", "compute_metrics",
    "PolicyCache", "SecurityPolicy", "Zone", "assign_zone", "emit_rules",
]
