import numpy as np
import pytest

from edgeguard.fcm import FcmConfig, FcmModel, fcm_fit
from edgeguard.selection import (
    SelectionScores, elbow_choice, gap_statistic, silhouette, tally_votes, vote, wcsd,
)


def _model(centers, u):
    centers = np.asarray(centers, dtype=float)
    return FcmModel(centers, np.asarray(u, dtype=float), [], FcmConfig(c=centers.shape[0]))


def test_wcsd_examples():
    assert wcsd(_model([[1.0]], [[1.0], [1.0]]), np.array([[0.0], [2.0]])) == 2.0
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert wcsd(_model(x, np.eye(2)), x) == 0.0


def test_wcsd_definitional_oracle():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(25, 3))
    model = fcm_fit(x, FcmConfig(c=3, seed=1))
    hard = model.memberships.argmax(axis=1)
    expect = sum(abs(x[j, k] - model.centers[hard[j], k]) for j in range(25) for k in range(3))
    assert wcsd(model, x) == pytest.approx(expect, rel=1e-12)


def test_wcsd_non_increasing_on_nested_refinements():
    x = np.random.default_rng(0).uniform(size=(60, 2))
    # nested partitions: split one cluster at a time, centers = cluster medians
    labels = np.zeros(60, int)
    prev = np.inf
    for k in range(1, 6):
        centers = np.array([np.median(x[labels == c], axis=0) for c in range(k)])
        u = np.eye(k)[labels]
        w = wcsd(_model(centers, u), x)
        assert w <= prev + 1e-12
        prev = w
        big = np.bincount(labels).argmax()
        rows = np.flatnonzero(labels == big)
        split = rows[x[rows, 0] > np.median(x[rows, 0])]
        labels[split] = k


def test_silhouette_tight_blobs():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 0.02, (20, 2)), rng.normal(5, 0.02, (20, 2))])
    s, mean = silhouette([0] * 20 + [1] * 20, x)
    assert mean > 0.9
    assert np.all((s >= -1) & (s <= 1))


def test_silhouette_hand_cases():
    # point 0 sits with an identical neighbour: a = 0, b > 0 -> 1
    s, _ = silhouette([0, 0, 1], np.array([[0.0], [0.0], [3.0]]))
    assert s[0] == 1.0 and s[1] == 1.0
    # point at 2: a = |2-0| = 2, b = mean(|2-3|, |2-5|) = 2 -> 0
    s, _ = silhouette([0, 0, 1, 1], np.array([[0.0], [2.0], [3.0], [5.0]]))
    assert s[1] == 0.0
    # singleton cluster scores 0
    s, _ = silhouette([0, 0, 1], np.array([[0.0], [0.1], [5.0]]))
    assert s[2] == 0.0


def test_silhouette_errors():
    with pytest.raises(ValueError):
        silhouette([0, 0, 0], np.zeros((3, 1)))
    with pytest.raises(ValueError):
        silhouette([0, 1], np.zeros((3, 1)))


def test_gap_uniform_data_picks_smallest():
    hits = 0
    for seed in range(10):
        x = np.random.default_rng(100 + seed).uniform(size=(60, 2))
        hits += gap_statistic(x, [2, 3, 4, 5], b_refs=10, seed=seed).chosen == 2
    assert hits >= 8


def test_gap_deterministic_and_validated():
    x = np.random.default_rng(0).uniform(size=(30, 2))
    a = gap_statistic(x, [2, 3, 4], b_refs=10, seed=4)
    b = gap_statistic(x, [2, 3, 4], b_refs=10, seed=4)
    assert a.chosen == b.chosen and np.array_equal(a.gap, b.gap) and np.array_equal(a.se, b.se)
    with pytest.raises(ValueError):
        gap_statistic(x, [4, 3], b_refs=10)


def test_elbow_second_difference():
    assert elbow_choice([2, 3, 4, 5, 6], [100, 60, 20, 18, 17]) == 4


def _scores(**cols):
    n = len(cols["i"])
    return [SelectionScores(cols["i"][k], cols["wcsd"][k], cols["sil"][k], gap=cols["gap"][k], gap_se=0.01,
                            calinski_harabasz=cols["ch"][k], davies_bouldin=cols["db"][k]) for k in range(n)]


def test_vote_unanimous():
    s = _scores(i=[2, 3, 4, 5], wcsd=[100, 30, 25, 22], sil=[0.4, 0.8, 0.5, 0.4],
                gap=[0.5, 1.2, 1.1, 1.0], ch=[10, 50, 40, 30], db=[1.0, 0.3, 0.6, 0.7])
    assert vote(s) == 3
    assert s[1].votes == 5


def test_vote_tie_goes_to_smaller():
    assert tally_votes({"a": 3, "b": 3, "c": 5, "d": 5}) == 3
    assert tally_votes({"a": 5, "b": 3, "c": 5, "d": 3, "e": 7}) == 3


def test_vote_deterministic_and_needs_two():
    s = _scores(i=[2, 3, 4], wcsd=[10, 9, 1], sil=[0.4, 0.3, 0.6], gap=[1.0, 0.5, 0.4], ch=[5, 6, 7], db=[1, 2, 3])
    assert vote(s) == vote(_scores(i=[2, 3, 4], wcsd=[10, 9, 1], sil=[0.4, 0.3, 0.6], gap=[1.0, 0.5, 0.4],
                                   ch=[5, 6, 7], db=[1, 2, 3]))
    with pytest.raises(ValueError):
        vote(s[:1])
