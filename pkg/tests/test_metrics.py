import numpy as np
import pytest

from edgeguard.flow import TrafficLabel
from edgeguard.metrics import compute_metrics, feature_histograms

B, P, D, S = TrafficLabel.BENIGN, TrafficLabel.PORT_SCAN, TrafficLabel.DATA_THEFT, TrafficLabel.SYN_FLOOD


def recount(pred, true, positive):
    """Independent one-vs-rest tally."""
    tp = sum(p == positive and t == positive for p, t in zip(pred, true))
    fp = sum(p == positive and t != positive for p, t in zip(pred, true))
    fn = sum(p != positive and t == positive for p, t in zip(pred, true))
    tn = len(pred) - tp - fp - fn
    return tp, fp, tn, fn


def test_binary_hand_case():
    truth = [P] * 8 + [B] * 2
    pred = [P] * 7 + [B] + [P, B]
    m = compute_metrics(pred, truth, "binary").positive
    assert (m.tp, m.fp, m.tn, m.fn) == (7, 1, 1, 1)
    assert m.accuracy == 0.8
    assert m.recall == 0.875
    assert m.fpr == 0.5
    assert m.precision == 0.875
    assert m.fnr == 0.125


FIXTURES = [
    ([B, B, P, D, S, S], [B, P, P, D, B, S]),
    ([D] * 5 + [B] * 5, [D, D, B, B, B, B, B, D, P, B]),
    ([TrafficLabel.from_code(i % 11) for i in range(33)], [TrafficLabel.from_code((i * 7) % 11) for i in range(33)]),
]


@pytest.mark.parametrize("truth, pred", FIXTURES)
def test_multi_matches_recount(truth, pred):
    table = compute_metrics(pred, truth, "multi")
    assert table.confusion.sum() == len(truth)
    assert table.accuracy == pytest.approx(sum(p == t for p, t in zip(pred, truth)) / len(truth))
    for lab in TrafficLabel:
        m = table.per_class[lab.name]
        assert (m.tp, m.fp, m.tn, m.fn) == recount(pred, truth, lab)
        assert m.support == truth.count(lab)


@pytest.mark.parametrize("truth, pred", FIXTURES)
def test_binary_matches_recount(truth, pred):
    table = compute_metrics(pred, truth, "binary")
    bp = [p.is_malicious for p in pred]
    bt = [t.is_malicious for t in truth]
    m = table.positive
    assert (m.tp, m.fp, m.tn, m.fn) == recount(bp, bt, True)


def test_all_benign_predictor():
    truth = [B] * 5 + [P] * 5
    m = compute_metrics([B] * 10, truth)
    assert m.accuracy == 0.5
    assert m.positive.recall == 0.0 and m.positive.fpr == 0.0


def test_accepts_codes_and_names():
    a = compute_metrics([0, "PORT_SCAN", P], [B, 1, "BENIGN"], "multi")
    assert a.accuracy == pytest.approx(2 / 3)


def test_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        compute_metrics([B], [B, P])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([B], [B], "ternary")


def test_report_text_lists_every_class():
    text = compute_metrics([B, P], [B, B], "multi").to_text()
    for lab in TrafficLabel:
        assert lab.name in text
    assert "accuracy=0.500000" in text


def test_feature_histograms_cdf():
    values = np.column_stack([np.r_[np.zeros(5), np.ones(5)], np.arange(10.0)])
    rows = feature_histograms(values, ["f0", "f1"], ["a"] * 5 + ["b"] * 5, bins=4)
    for feat in ("f0", "f1"):
        for grp in ("a", "b"):
            sub = [r for r in rows if r[0] == feat and r[1] == grp]
            assert len(sub) == 4
            assert sum(r[4] for r in sub) == 5
            assert sub[-1][5] == pytest.approx(1.0)
            assert all(x[5] <= y[5] for x, y in zip(sub, sub[1:]))
    # shared edges
    assert [r[2] for r in rows if r[:2] == ("f1", "a")] == [r[2] for r in rows if r[:2] == ("f1", "b")]
