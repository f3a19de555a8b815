import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cedl.encoder import EncoderModel, LayerSpec
from cedl.evaluation import aupr, auroc, best_f1, evaluate, mean_report, score
from cedl.exceptions import DimensionError, UndefinedMetricError
from cedl.objective import ObjectiveConfig


# ---------------------------------------------------------------- oracles


def brute_auroc(s, y):
    pos = [a for a, t in zip(s, y) if t == 1]
    neg = [a for a, t in zip(s, y) if t == 0]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def brute_aupr(s, y):
    order = sorted(range(len(s)), key=lambda i: (-s[i], i))
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if y[i] == 1:
            hits += 1
            total += hits / rank
    return total / sum(y)


def f1_at(s, y, thr):
    tp = sum(1 for a, t in zip(s, y) if a > thr and t == 1)
    fp = sum(1 for a, t in zip(s, y) if a > thr and t == 0)
    fn = sum(y) - tp
    return 2 * tp / (2 * tp + fp + fn)


def brute_best_f1(s, y):
    # every distinct score used as a cut (score > cut) plus -inf
    best = f1_at(s, y, -math.inf)
    for thr in sorted(set(s)):
        best = max(best, f1_at(s, y, thr))
    return best


def _random_set(rng, n_max=50):
    n = int(rng.integers(2, n_max + 1))
    s = rng.integers(0, max(2, n // 2), n).astype(float) / 7.0  # plenty of ties
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    return s.tolist(), y.tolist()


# ---------------------------------------------------------------- auroc


def test_auroc_examples():
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auroc([0.1, 0.2, 0.9, 1.0], [0, 0, 1, 1]) == 1.0
    assert auroc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])


def test_auroc_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s, y = _random_set(rng)
        assert auroc(s, y) == pytest.approx(brute_auroc(s, y), abs=1e-12)


def test_auroc_invariant_under_monotone_transforms(rng):
    s = rng.standard_normal(40)
    y = rng.integers(0, 2, 40)
    y[:2] = [0, 1]
    base = auroc(s, y)
    assert abs(auroc(np.exp(s), y) - base) <= 1e-12
    assert abs(auroc(3.0 * s - 7.0, y) - base) <= 1e-12


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30, unique=True),
       st.randoms())
def test_auroc_complement_without_ties(s, rnd):
    y = [rnd.randint(0, 1) for _ in s]
    y[0], y[1] = 0, 1
    s = np.array(s)
    assert abs(auroc(s, y) + auroc(-s, y) - 1.0) <= 1e-12


# ---------------------------------------------------------------- aupr


def test_aupr_examples():
    assert aupr([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert aupr([0.9, 0.8, 0.7, 0.1], [0, 0, 0, 1]) == 0.25
    assert aupr([0.2, 0.9], [1, 0]) == 0.5
    with pytest.raises(UndefinedMetricError):
        aupr([0.1, 0.2], [0, 0])


def test_aupr_tie_order_is_index_stable():
    # tied block: the earlier index is walked first
    assert aupr([0.5, 0.5], [1, 0]) == 1.0
    assert aupr([0.5, 0.5], [0, 1]) == 0.5


def test_aupr_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        s, y = _random_set(rng)
        assert abs(aupr(s, y) - brute_aupr(s, y)) <= 1e-12


# ---------------------------------------------------------------- best f1


def test_best_f1_examples():
    f1, thr = best_f1([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    assert f1 == 1.0 and thr == pytest.approx(0.5)
    f1, thr = best_f1([0.5, 0.5, 0.5], [1, 0, 1])
    assert f1 == pytest.approx(2 * 2 / (2 * 2 + 1)) and thr == -math.inf
    with pytest.raises(UndefinedMetricError):
        best_f1([0.1], [0])


def test_best_f1_matches_exhaustive_scan():
    rng = np.random.default_rng(2)
    for _ in range(200):
        s, y = _random_set(rng, 30)
        f1, thr = best_f1(s, y)
        assert f1 == pytest.approx(brute_best_f1(s, y), abs=1e-12)
        assert f1 == pytest.approx(f1_at(s, y, thr), abs=1e-12)


def test_best_f1_beats_fixed_thresholds():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s, y = _random_set(rng, 30)
        f1, _ = best_f1(s, y)
        P, N = sum(y), len(y) - sum(y)
        assert f1 >= 2 * P / (2 * P + N) - 1e-15
        for thr in rng.uniform(min(s) - 1, max(s) + 1, 100):
            assert f1 >= f1_at(s, y, thr) - 1e-15


def test_best_f1_lowest_threshold_on_ties():
    # cutting below 0.2 or between 0.2 and 0.3 yields the same F1
    f1, thr = best_f1([0.1, 0.2, 0.3], [0, 1, 1])
    assert f1 == 1.0 and thr == pytest.approx(0.15)


def test_best_f1_adjacent_floats():
    lo = 1.0
    hi = np.nextafter(lo, 2.0)
    f1, thr = best_f1([lo, hi], [0, 1])
    assert f1 == 1.0 and lo <= thr < hi


# ---------------------------------------------------------------- score & reports


def test_score_examples():
    model = EncoderModel([LayerSpec(2, 2, "identity")], [np.eye(2)], [np.zeros(2)])
    cfg = ObjectiveConfig(alpha=1.0, centre=np.zeros(2))
    dist, prob = score(model, cfg, np.array([[0.0, 0.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(dist, [0.0, 5.0])
    assert prob[0] == 0.5
    assert prob[1] == pytest.approx(1 / (1 + math.exp(-5 / math.sqrt(2))), rel=1e-15)
    with pytest.raises(DimensionError):
        score(model, ObjectiveConfig(centre=np.zeros(3)), np.zeros((1, 2)))


def test_score_distance_and_probability_rank_identically(rng):
    model = EncoderModel([LayerSpec(3, 2, "tanh")], [rng.standard_normal((2, 3))], [np.zeros(2)])
    cfg = ObjectiveConfig(alpha=2.0, centre=np.array([0.1, -0.2]))
    dist, prob = score(model, cfg, rng.standard_normal((30, 3)))
    np.testing.assert_array_equal(np.argsort(dist, kind="stable"), np.argsort(prob, kind="stable"))


def test_evaluate_and_mean_report():
    r = evaluate([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert (r.auroc, r.n_positive, r.n_negative) == (0.75, 2, 2)
    assert set(r.to_dict()) == {"auroc", "aupr", "best_f1", "best_threshold", "n_positive", "n_negative"}
    big = evaluate(np.arange(100.0), [0] * 50 + [1] * 50)
    m = mean_report([r, big])
    assert m.auroc == pytest.approx((0.75 + 1.0) / 2)
    assert m.n_positive == 52
    with pytest.raises(ValueError):
        mean_report([])
