"""Command-line entry point: generate, train, classify, simulate, report.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureSchema, WindowConfig, raw_matrix
from .flow import TrafficLabel
from .gateway import PolicyConfig, TrainConfig, classify_windows, run_pipeline, train_pipeline
from .ingest import TraceDataset, load_dataset
from .metrics import MetricsMode, compute_metrics, feature_histograms
from .modelio import ModelFormatError, load_model, save_model
from .policy import PolicyCache, dumps_cache, format_rules, loads_cache
from .synthetic import ATTACK_SCENARIOS, GeneratorConfig, generate_mixed, parse_scenario_config
from .traceio import (
    TraceParseError, read_labels, read_verdicts, sibling, write_flows, write_labels, write_logs,
    write_verdicts,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _kv(pairs) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs)


def _candidates(text: str) -> tuple[int, ...]:
    try:
        if "-" in text:
            lo, hi = (int(v) for v in text.split("-", 1))
            out = tuple(range(lo, hi + 1))
        else:
            out = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad candidate list {text!r}; use '2-16' or '3,4,5'") from None
    if len(out) < 2 or min(out) < 2:
        raise argparse.ArgumentTypeError("need at least two candidates, each >= 2")
    return out


def _scenarios(text: str) -> list[TrafficLabel]:
    if text == "all":
        return list(ATTACK_SCENARIOS)
    if text == "none":
        return []
    try:
        return [TrafficLabel[s.strip().upper()] for s in text.split(",") if s.strip()]
    except KeyError as exc:
        raise argparse.ArgumentTypeError(f"unknown scenario {exc.args[0]}") from None


def _load(args, labels: bool = True) -> TraceDataset:
    """Flows from --in; logs and labels from flags or sibling files."""
    flows = Path(args.input)
    logs = args.logs or (sibling(flows, ".fwl") if sibling(flows, ".fwl").exists() else None)
    label_path = None
    if labels:
        label_path = getattr(args, "labels", None) or (
            sibling(flows, ".labels") if sibling(flows, ".labels").exists() else None)
    return load_dataset(flows, logs, label_path)


# ---- commands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = GeneratorConfig()
    if args.config:
        cfg = parse_scenario_config(Path(args.config).read_text(encoding="utf-8"), cfg)
    ds = generate_mixed(args.scenarios, args.devices, args.duration, args.seed, cfg)
    out = Path(args.out)
    write_flows(out, ds.flows)
    write_logs(sibling(out, ".fwl"), ds.logs)
    write_labels(sibling(out, ".labels"), ds.labels, ds.device_labels)
    counts = {lab: 0 for lab in TrafficLabel}
    for lab in ds.labels.values():
        counts[lab] += 1
    pairs = [("flows", len(ds.flows)), ("logs", len(ds.logs)), ("windows", len(ds.labels)),
             ("devices", args.devices + len(args.scenarios))]
    pairs += [(f"windows_{lab.name}", n) for lab, n in counts.items() if n]
    sys.stdout.write(_kv(pairs))
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load(args, labels=not args.unlabeled)
    window = WindowConfig(args.window)
    cfg = TrainConfig(window=window, seed=args.seed, candidates=args.candidates, clusters=args.clusters,
                      use_labels=not args.unlabeled)
    rulebase, report = train_pipeline(ds, cfg)
    save_model(args.out, rulebase, window)
    _emit(report.to_text(), args.report)
    if args.figures:
        from . import plotting

        fig_dir = Path(args.figures)
        if report.selection is not None:
            plotting.plot_selection(report.selection, fig_dir)
        plotting.plot_objective(report.objective_trace, fig_dir)
        if report.correlation is not None:
            plotting.plot_correlation(report.correlation, report.correlation_names, fig_dir)
    if args.report:
        sys.stdout.write(_kv([("model", args.out), ("clusters", report.chosen_clusters),
                              ("features", len(report.retained)), ("rules", len(rulebase.rules))]))
    return EXIT_OK


def cmd_classify(args) -> int:
    rulebase, window = load_model(args.model)
    ds = _load(args, labels=False)
    windows = ds.get_windows(window)
    verdicts = classify_windows(rulebase, windows)
    rows = [(w.window_id, v.o_star, v.label, v.confidence) for w, v in zip(windows, verdicts)]
    if args.out:
        write_verdicts(args.out, rows)
        malicious = sum(v.label.is_malicious for v in verdicts)
        sys.stdout.write(_kv([("windows", len(rows)), ("malicious", malicious), ("verdicts", args.out)]))
    else:
        sys.stdout.write("".join(f"{w}\t{o!r}\t{lab.name}\t{c!r}\n" for w, o, lab, c in rows))
    return EXIT_OK


def cmd_simulate(args) -> int:
    rulebase, window = load_model(args.model)
    ds = _load(args)
    cfg = PolicyConfig(ttl=args.cache_ttl, capacity=args.capacity, k=args.k)
    warm = None
    if args.cache_in:
        warm = loads_cache(Path(args.cache_in).read_text(encoding="utf-8"))
        warm.ttl, warm.capacity = cfg.ttl, cfg.capacity
    cache = warm if warm is not None else PolicyCache(cfg.ttl, cfg.capacity)
    report = run_pipeline(ds, rulebase, cfg, window, warm_cache=cache)
    if args.cache_out:
        Path(args.cache_out).write_text(dumps_cache(cache), encoding="utf-8")
    _emit(report.to_text(), args.report)
    if args.rules and report.flow_table is not None:
        rules = [r for dev in report.flow_table.devices() for r in report.flow_table.rules(dev)]
        Path(args.rules).write_text(format_rules(rules), encoding="utf-8")
    if args.figures:
        from . import plotting

        fig_dir = Path(args.figures)
        plotting.plot_cache_series([t for t, _ in report.policies_resident],
                                   [n for _, n in report.policies_resident],
                                   [o.source for o in report.outcomes], fig_dir)
        for table in (report.binary, report.multi):
            if table is not None:
                plotting.plot_confusion(table, fig_dir)
    if args.report:
        sys.stdout.write(_kv([("windows", len(report.outcomes)), ("cache_hit_rate", f"{report.cache_hit_rate:.6f}"),
                              ("classification_invocations", report.classification_invocations)]))
    return EXIT_OK


def _cache_dump(args) -> int:
    cache = loads_cache(Path(args.cache_in).read_text(encoding="utf-8"))
    sys.stdout.write(dumps_cache(cache))
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.verdicts and not args.histograms:
        raise UsageError("report needs --verdicts and/or --histograms")
    if args.verdicts:
        if not args.truth:
            raise UsageError("--verdicts requires --truth")
        rows = read_verdicts(args.verdicts)
        window_truth, device_truth = read_labels(args.truth)
        missing = [wid for wid, *_ in rows if wid not in window_truth]
        if missing and device_truth and args.input:
            ds = _load(args, labels=False)
            ds.device_labels = device_truth
            windows = ds.get_windows(WindowConfig(args.window))
            for w, lab in zip(windows, ds.truth_for(windows)):
                window_truth.setdefault(w.window_id, lab)
            missing = [wid for wid, *_ in rows if wid not in window_truth]
        if missing:
            raise ValueError(f"{len(missing)} verdict windows have no truth label (first: {missing[0]})")
        pred = [lab for _, _, lab, _ in rows]
        truth = [window_truth[wid] for wid, *_ in rows]
        modes = [MetricsMode.BINARY, MetricsMode.MULTI] if args.mode == "both" else [MetricsMode(args.mode)]
        tables = [compute_metrics(pred, truth, m) for m in modes]
        _emit("\n".join(t.to_text() for t in tables), args.out)
        if args.figures:
            from . import plotting

            for t in tables:
                plotting.plot_confusion(t, Path(args.figures))
    if args.histograms:
        if not args.input:
            raise UsageError("--histograms requires --in (a flow trace)")
        ds = _load(args)
        windows = ds.get_windows(WindowConfig(args.window))
        full = FeatureSchema.full()
        raw = raw_matrix(windows, full)
        truth = ds.truth_for(windows)
        groups = np.array(["MALICIOUS" if t.is_malicious else "BENIGN" for t in truth]
                          if truth else ["ALL"] * len(windows))
        rows = feature_histograms(raw, full.names, groups, bins=args.bins)
        lines = ["feature\tgroup\tbin_lo\tbin_hi\tcount\tcdf"]
        lines += [f"{f}\t{g}\t{lo!r}\t{hi!r}\t{n}\t{c:.6f}" for f, g, lo, hi, n, c in rows]
        Path(args.histograms).write_text("\n".join(lines) + "\n", encoding="utf-8")
        if args.figures:
            from . import plotting

            plotting.plot_feature_cdfs(raw, full.names, groups, Path(args.figures))
    return EXIT_OK


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgeguard", description="Gateway traffic classification and policy simulation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic labeled trace")
    g.add_argument("--scenarios", type=_scenarios, default=list(ATTACK_SCENARIOS),
                   help="comma-separated attack labels, 'all' or 'none' (default all)")
    g.add_argument("--devices", type=int, default=8, help="benign devices")
    g.add_argument("--duration", type=float, default=1000.0, help="seconds")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config", help="key=value scenario rate file")
    g.add_argument("--out", required=True, help="flow file; .fwl and .labels are written alongside")
    g.set_defaults(func=cmd_generate)

    def trace_args(sp, labels=True):
        sp.add_argument("--in", dest="input", required=True, help="flow trace (.fw)")
        sp.add_argument("--logs", help="device log file (default: sibling .fwl)")
        if labels:
            sp.add_argument("--labels", help="label file (default: sibling .labels)")

    t = sub.add_parser("train", help="train a rule-base model from a trace")
    trace_args(t)
    t.add_argument("--out", required=True, help="model file (.fwm)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--clusters", type=int, help="fixed cluster count (skips selection)")
    t.add_argument("--candidates", type=_candidates, default=tuple(range(2, 17)), help="e.g. 2-16")
    t.add_argument("--window", type=int, default=WindowConfig().n_conn, help="connections per window")
    t.add_argument("--unlabeled", action="store_true", help="ignore labels; name clusters by signatures")
    t.add_argument("--report", help="training report path (default stdout)")
    t.add_argument("--figures", help="directory for PNG figures")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="classify every window of a trace")
    c.add_argument("--model", required=True)
    trace_args(c, labels=False)
    c.add_argument("--out", help="verdicts file (default stdout)")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simulate", help="replay a trace through cache, classifier and enforcement")
    s.add_argument("--model", required=True)
    trace_args(s)
    s.add_argument("--cache-ttl", type=float, default=PolicyConfig().ttl)
    s.add_argument("--capacity", type=int, default=PolicyConfig().capacity)
    s.add_argument("--k", type=int, default=PolicyConfig().k, help="benign windows before de-escalation")
    s.add_argument("--cache-in", help="policy cache snapshot to start from")
    s.add_argument("--cache-out", help="write the final policy cache snapshot here")
    s.add_argument("--rules", help="write the final flow rules here")
    s.add_argument("--report", help="simulation report path (default stdout)")
    s.add_argument("--figures", help="directory for PNG figures")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="metrics from verdicts and truth; feature histograms")
    r.add_argument("--verdicts")
    r.add_argument("--truth", help="label file")
    r.add_argument("--mode", choices=["binary", "multi", "both"], default="both")
    r.add_argument("--in", dest="input", help="flow trace, for histograms or device-level truth")
    r.add_argument("--logs")
    r.add_argument("--labels")
    r.add_argument("--window", type=int, default=WindowConfig().n_conn)
    r.add_argument("--histograms", help="write per-feature histogram/CDF columns here")
    r.add_argument("--bins", type=int, default=20)
    r.add_argument("--out", help="metrics output (default stdout)")
    r.add_argument("--figures", help="directory for PNG figures")
    r.set_defaults(func=cmd_report)

    d = sub.add_parser("cache", help="validate and print a policy cache snapshot")
    d.add_argument("--cache-in", required=True)
    d.set_defaults(func=_cache_dump)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"edgeguard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceParseError, ModelFormatError, ValueError, KeyError, OSError) as exc:
        print(f"edgeguard: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
