import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeguard.fcm import FcmConfig, fcm_fit, fcm_membership, fcm_objective, memberships_for

from conftest import definitional_fcm


def _blobs(seed, n_per=15, dims=2, k=3):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, 1, size=(k, dims))
    return np.vstack([c + 0.05 * rng.standard_normal((n_per, dims)) for c in centers])


def test_matches_definitional_iteration():
    rng = np.random.default_rng(11)
    x = rng.uniform(size=(30, 3))
    u0 = rng.uniform(size=(30, 3))
    cfg = FcmConfig(c=3, epsilon=1e-11, max_iters=2000)
    model = fcm_fit(x, cfg, init_memberships=u0)
    centers, u = definitional_fcm(x, u0, 2.0, 1e-11, 2000)
    np.testing.assert_allclose(model.centers, centers, atol=1e-8)
    np.testing.assert_allclose(model.memberships, u, atol=1e-8)


def test_point_mass_cluster_gets_full_membership():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    model = fcm_fit(x, FcmConfig(c=2, seed=1))
    np.testing.assert_allclose(np.sort(model.memberships, axis=1)[:, 1], 1.0, atol=1e-9)
    np.testing.assert_allclose(model.centers, [[0, 0], [1, 1]], atol=1e-9)


def test_zero_distance_membership_is_one():
    centers = np.array([[0.0], [1.0]])
    u = memberships_for(centers, np.array([[1.0], [0.25]]))
    np.testing.assert_allclose(u[0], [0.0, 1.0])
    # 1-D, m=2: u_1 = 1 / (1 + (0.25/0.75)^2) = 0.9
    np.testing.assert_allclose(u[1], [0.9, 0.1], atol=1e-12)


def test_deterministic_for_fixed_seed():
    x = _blobs(4)
    a = fcm_fit(x, FcmConfig(c=3, seed=9, n_init=2))
    b = fcm_fit(x, FcmConfig(c=3, seed=9, n_init=2))
    assert np.array_equal(a.centers, b.centers)
    assert np.array_equal(a.memberships, b.memberships)
    assert a.objective_trace == b.objective_trace


def test_clusters_are_canonically_ordered():
    x = _blobs(5)
    model = fcm_fit(x, FcmConfig(c=3, seed=2))
    order = np.lexsort(model.centers.T[::-1])
    assert list(order) == [0, 1, 2]


def test_membership_replays_stored_rows():
    x = _blobs(6)
    model = fcm_fit(x, FcmConfig(c=3, seed=0))
    np.testing.assert_allclose(fcm_membership(model, x), model.memberships, atol=1e-12)
    np.testing.assert_allclose(fcm_membership(model, x[0]), model.memberships[0], atol=1e-12)


def test_objective_matches_definition():
    x = _blobs(7)
    model = fcm_fit(x, FcmConfig(c=3, seed=0))
    u = model.memberships
    expect = sum(u[j, i] ** 2 * np.sum((x[j] - model.centers[i]) ** 2)
                 for i in range(3) for j in range(len(x)))
    assert fcm_objective(model, x) == pytest.approx(expect, rel=1e-10)


def test_literal_exponent_changes_softness():
    x = _blobs(8)
    base = fcm_fit(x, FcmConfig(c=3, m=3.0, seed=0))
    literal = fcm_fit(x, FcmConfig(c=3, m=3.0, seed=0, literal_exponent=True))
    assert FcmConfig(m=3.0).exponent == pytest.approx(1.0)
    assert FcmConfig(m=3.0, literal_exponent=True).exponent == pytest.approx(4.0)
    # larger exponent, crisper memberships
    assert literal.memberships.max(axis=1).mean() > base.memberships.max(axis=1).mean()


@pytest.mark.parametrize("kwargs", [dict(c=0), dict(m=1.0), dict(epsilon=0), dict(n_init=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FcmConfig(**kwargs)


def test_errors():
    with pytest.raises(ValueError, match="at least"):
        fcm_fit(np.zeros((2, 2)), FcmConfig(c=3))
    with pytest.raises(ValueError, match="non-finite"):
        fcm_fit(np.array([[0.0], [np.nan], [1.0]]), FcmConfig(c=2))
    model = fcm_fit(_blobs(1), FcmConfig(c=2))
    with pytest.raises(ValueError, match="dimension"):
        fcm_membership(model, np.zeros(5))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.integers(2, 4), n=st.integers(8, 40), dims=st.integers(1, 4))
def test_iteration_invariants(seed, c, n, dims):
    x = np.random.default_rng(seed).uniform(size=(n, dims))
    rows = []
    model = fcm_fit(x, FcmConfig(c=c, seed=seed, max_iters=200), callback=lambda it, u, v: rows.append(u.sum(axis=1)))
    for r in rows:
        np.testing.assert_allclose(r, 1.0, atol=1e-9)
    trace = np.array(model.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * max(1.0, trace[0]))
    assert np.all((model.memberships >= 0) & (model.memberships <= 1))
