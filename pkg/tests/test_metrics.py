import math

import numpy as np
import pytest

from morpd.metrics import (
    MetricReport,
    build_reference_front,
    gd,
    igd,
    metric_report,
    nondominated_filter,
    spread,
)


# --- hand-computed cases -------------------------------------------------------

def test_gd_subset_is_zero():
    ref = np.array([[0, 0], [1, 1], [2, 0.5]])
    assert gd(ref[:2], ref) == 0.0


def test_gd_single_pair():
    assert gd([[1.0, 0.0]], [[0.0, 0.0]]) == pytest.approx(1.0)


def test_gd_hand_average():
    assert gd([[0.0, 0.0], [3.0, 4.0]], [[0.0, 0.0]]) == pytest.approx(2.5)


def test_igd_subset_is_zero():
    approx_front = np.array([[0, 0], [1, 1], [5, 5]])
    assert igd(approx_front, approx_front[:2]) == 0.0


def test_igd_hand_average():
    assert igd([[1.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]) == pytest.approx(1.0)


def test_gd_igd_asymmetry():
    a = [[1.0, 0.0]]
    r = [[0.0, 0.0], [2.0, 0.0]]
    assert igd(a, r) == pytest.approx(1.0)
    assert gd(r, a) == pytest.approx(1.0)
    assert gd(a, r) == pytest.approx(1.0)
    # asymmetric on an uneven pairing
    a2 = [[0.0, 0.0], [3.0, 4.0]]
    r2 = [[0.0, 0.0]]
    assert gd(a2, r2) != igd(a2, r2)


def test_spread_uniform_zero():
    front = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    assert spread(front, front) == pytest.approx(0.0)


def test_spread_hand_perturbation():
    front = np.array([[0.0, 2.0], [1.5, 0.5], [2.0, 0.0]])
    ref = np.array([[0.0, 2.0], [2.0, 0.0]])
    g1 = math.hypot(1.5, 1.5)
    g2 = math.hypot(0.5, 0.5)
    mean = (g1 + g2) / 2
    expected = (abs(g1 - mean) + abs(g2 - mean)) / (2 * mean)
    assert spread(front, ref) == pytest.approx(expected)
    assert spread(front, ref) > 0


def test_spread_needs_two_points():
    with pytest.raises(ValueError):
        spread([[1.0, 1.0]], [[0.0, 0.0]])


def test_identity_metrics_zero():
    rng = np.random.default_rng(0)
    for _ in range(5):
        front = rng.uniform(0, 10, (12, 2))
        assert gd(front, front) == 0.0
        assert igd(front, front) == 0.0


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 5, (15, 2))
    r = rng.uniform(0, 5, (20, 2))
    p = rng.permutation(15)
    q = rng.permutation(20)
    assert gd(a, r) == pytest.approx(gd(a[p], r[q]), rel=1e-15)
    assert igd(a, r) == pytest.approx(igd(a[p], r[q]), rel=1e-15)


def test_duplicate_reference_point_never_increases_gd():
    rng = np.random.default_rng(2)
    a = rng.uniform(0, 5, (10, 2))
    r = rng.uniform(0, 5, (10, 2))
    base = gd(a, r)
    assert gd(a, np.vstack([r, r[0]])) <= base + 1e-15


# --- brute-force oracle --------------------------------------------------------

def brute_gd(a, r):
    total = 0.0
    for p in a:
        best = math.inf
        for q in r:
            best = min(best, math.hypot(p[0] - q[0], p[1] - q[1]))
        total += best
    return total / len(a)


def brute_igd(a, r):
    return brute_gd(r, a)


def brute_spread(front, ref):
    pts = sorted(map(tuple, front))
    gaps = [math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    mean = sum(gaps) / len(gaps)
    e1 = min(ref, key=lambda p: p[0])
    e2 = min(ref, key=lambda p: p[1])
    d_f = math.dist(pts[0], e1)
    d_l = math.dist(pts[-1], e2)
    num = d_f + d_l + sum(abs(g - mean) for g in gaps)
    den = d_f + d_l + len(gaps) * mean
    return num / den if den else 0.0


@pytest.mark.parametrize("seed", range(50))
def test_metrics_match_bruteforce(seed):
    rng = np.random.default_rng(seed)
    na, nr = int(rng.integers(2, 40)), int(rng.integers(1, 40))
    a = rng.uniform(0, 30, (na, 2))
    r = rng.uniform(0, 30, (max(nr, 2), 2))
    assert gd(a, r) == pytest.approx(brute_gd(a, r), rel=1e-12)
    assert igd(a, r) == pytest.approx(brute_igd(a, r), rel=1e-12)
    assert spread(a, r) == pytest.approx(brute_spread(a, r), rel=1e-12)


def test_larger_bruteforce_instance():
    rng = np.random.default_rng(123)
    a = rng.uniform(0, 100, (200, 2))
    r = rng.uniform(0, 100, (200, 2))
    assert gd(a, r) == pytest.approx(brute_gd(a, r), rel=1e-12)
    assert igd(a, r) == pytest.approx(brute_igd(a, r), rel=1e-12)


# --- non-dominated filter --------------------------------------------------------

def test_filter_removes_dominated_and_duplicates():
    pts = np.array([[1, 1], [2, 2], [1, 1], [0.5, 3], [3, 0.5]])
    out = nondominated_filter(pts)
    assert sorted(map(tuple, out)) == [(0.5, 3.0), (1.0, 1.0), (3.0, 0.5)]


def test_metric_report_normalized_mode():
    a = np.array([[16.0, 4.0], [17.0, 2.0]])
    r = np.array([[16.0, 4.0], [17.0, 2.0]])
    rep = metric_report(a, r, normalized=True)
    assert rep.gd == 0.0 and rep.igd == 0.0
    assert rep.normalized


def test_front_validation():
    with pytest.raises(ValueError):
        gd([], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        gd([[math.nan, 0.0]], [[0.0, 0.0]])


# --- reference front construction -------------------------------------------------

@pytest.fixture(scope="module")
def anchors_front(ieee30):
    return build_reference_front(ieee30, n_weights=2, per_run_budget=300,
                                 pop_size=15, seed=2)


def test_reference_anchors_only(anchors_front):
    assert anchors_front.shape[0] <= 2
    assert np.all(np.isfinite(anchors_front))


def test_reference_is_nondominated(ieee30):
    front = build_reference_front(ieee30, n_weights=4, per_run_budget=240,
                                  pop_size=12, seed=4)
    assert front.shape[0] >= 1
    again = nondominated_filter(front)
    assert np.array_equal(np.sort(front, axis=0), np.sort(again, axis=0))


def test_reference_deterministic(ieee30):
    a = build_reference_front(ieee30, n_weights=2, per_run_budget=200,
                              pop_size=10, seed=11)
    b = build_reference_front(ieee30, n_weights=2, per_run_budget=200,
                              pop_size=10, seed=11)
    assert np.array_equal(a, b)


def test_reference_loss_anchor_minimizes_loss(anchors_front):
    # the pure-loss anchor must sit at the low-loss end
    assert anchors_front[0, 0] == anchors_front[:, 0].min()
