import subprocess
import sys

import pytest

from edgeguard.cli import main
from edgeguard.flow import TrafficLabel
from edgeguard.traceio import read_verdicts, write_labels, write_verdicts


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--scenarios", "port_scan,data_theft,botnet", "--devices", "3",
                 "--duration", "300", "--seed", "4", "--out", str(d / "train.fw")]) == 0
    assert main(["generate", "--scenarios", "port_scan,data_theft,botnet", "--devices", "3",
                 "--duration", "300", "--seed", "5", "--out", str(d / "test.fw")]) == 0
    assert main(["train", "--in", str(d / "train.fw"), "--out", str(d / "m.fwm"), "--clusters", "6",
                 "--seed", "1", "--report", str(d / "train.txt")]) == 0
    return d


def test_generate_writes_all_three_files(workspace, capsys):
    for suffix in (".fw", ".fwl", ".labels"):
        assert (workspace / f"train{suffix}").stat().st_size > 0
    out = workspace / "none.fw"
    assert main(["generate", "--scenarios", "none", "--devices", "2", "--duration", "60", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "windows_BENIGN=" in text and "windows_PORT_SCAN" not in text


def test_train_is_reproducible(workspace):
    again = workspace / "again.fwm"
    assert main(["train", "--in", str(workspace / "train.fw"), "--out", str(again), "--clusters", "6",
                 "--seed", "1", "--report", str(workspace / "again.txt")]) == 0
    assert again.read_bytes() == (workspace / "m.fwm").read_bytes()
    assert (workspace / "again.txt").read_text() == (workspace / "train.txt").read_text()


def test_train_with_selection_and_figures(workspace):
    figs = workspace / "figs_train"
    assert main(["train", "--in", str(workspace / "train.fw"), "--out", str(workspace / "sel.fwm"),
                 "--candidates", "4,5", "--report", str(workspace / "sel.txt"), "--figures", str(figs)]) == 0
    assert {p.name for p in figs.iterdir()} >= {"selection.png", "objective.png", "correlation.png"}
    assert "votes" in (workspace / "sel.txt").read_text()


def test_classify_then_report(workspace, capsys):
    verdicts = workspace / "v.txt"
    assert main(["classify", "--model", str(workspace / "m.fwm"), "--in", str(workspace / "test.fw"),
                 "--out", str(verdicts)]) == 0
    rows = read_verdicts(verdicts)
    assert rows and all(isinstance(r[2], TrafficLabel) for r in rows)
    capsys.readouterr()
    assert main(["report", "--verdicts", str(verdicts), "--truth", str(workspace / "test.labels"),
                 "--mode", "binary", "--figures", str(workspace / "figs_report")]) == 0
    out = capsys.readouterr().out
    assert f"samples={len(rows)}" in out
    assert (workspace / "figs_report" / "confusion_binary.png").exists()


def test_report_hand_fixture(tmp_path, capsys):
    P, B = TrafficLabel.PORT_SCAN, TrafficLabel.BENIGN
    truth = [P] * 8 + [B] * 2
    pred = [P] * 7 + [B] + [P, B]
    write_verdicts(tmp_path / "v.txt", [(f"w{i}", float(p.code), p, 1.0) for i, p in enumerate(pred)])
    write_labels(tmp_path / "t.labels", {f"w{i}": t for i, t in enumerate(truth)})
    assert main(["report", "--verdicts", str(tmp_path / "v.txt"), "--truth", str(tmp_path / "t.labels"),
                 "--mode", "binary"]) == 0
    out = capsys.readouterr().out
    assert "accuracy=0.800000" in out and "recall=0.875000" in out and "fpr=0.500000" in out


def test_report_histograms(workspace):
    hist = workspace / "hist.tsv"
    assert main(["report", "--in", str(workspace / "test.fw"), "--histograms", str(hist), "--bins", "5",
                 "--figures", str(workspace / "figs_hist")]) == 0
    lines = hist.read_text().splitlines()
    assert lines[0].startswith("feature\tgroup")
    assert len(lines) == 1 + 135 * 2 * 5
    assert (workspace / "figs_hist" / "feature_cdfs.png").exists()


def test_simulate_and_cache_snapshot(workspace, capsys):
    snap, rules, figs = workspace / "cache.txt", workspace / "rules.txt", workspace / "figs_sim"
    assert main(["simulate", "--model", str(workspace / "m.fwm"), "--in", str(workspace / "test.fw"),
                 "--cache-out", str(snap), "--rules", str(rules), "--report", str(workspace / "sim.txt"),
                 "--figures", str(figs)]) == 0
    assert "cache_hit_rate=" in (workspace / "sim.txt").read_text()
    assert rules.read_text().startswith("# edgeguard-flowrules v1")
    assert {"cache.png", "confusion_binary.png", "confusion_multi.png"} <= {p.name for p in figs.iterdir()}
    capsys.readouterr()
    assert main(["cache", "--cache-in", str(snap)]) == 0
    assert capsys.readouterr().out == snap.read_text()
    assert main(["simulate", "--model", str(workspace / "m.fwm"), "--in", str(workspace / "test.fw"),
                 "--cache-in", str(snap), "--report", str(workspace / "warm.txt")]) == 0


def test_simulate_zero_ttl(workspace):
    out = workspace / "ttl0.txt"
    assert main(["simulate", "--model", str(workspace / "m.fwm"), "--in", str(workspace / "test.fw"),
                 "--cache-ttl", "0", "--report", str(out)]) == 0
    text = out.read_text()
    assert "hits=0\n" in text and "cache_hit_rate=0.000000" in text


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["train", "--in", "x.fw"],
                                  ["train", "--in", "x.fw", "--out", "m", "--candidates", "1-3"],
                                  ["report", "--mode", "binary"], ["generate", "--scenarios", "nope", "--out", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_data_errors_exit_2(workspace, tmp_path):
    bad = tmp_path / "bad.fw"
    bad.write_text("# edgeguard-flows v1\nnot a flow\n")
    assert main(["classify", "--model", str(workspace / "m.fwm"), "--in", str(bad)]) == 2
    assert main(["classify", "--model", str(tmp_path / "missing.fwm"), "--in", str(workspace / "test.fw")]) == 2
    junk = tmp_path / "junk.fwm"
    junk.write_text("hello\n")
    assert main(["classify", "--model", str(junk), "--in", str(workspace / "test.fw")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "edgeguard", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("generate", "train", "classify", "simulate", "report"):
        assert cmd in proc.stdout
