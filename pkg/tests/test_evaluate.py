import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_pa_k, monte_carlo_affiliation
from triad.evaluate import (affiliation, evaluate, f1_pointwise, pa_k_auc, pa_k_curve,
                            pa_percent_k, point_adjust, precision_survival, recall_survival,
                            truth_from_span)


def test_f1_examples():
    t = truth_from_span(50, 10, 19)
    assert f1_pointwise(t, t) == (1.0, 1.0, 1.0)
    assert f1_pointwise(np.zeros(50), t) == (0.0, 0.0, 0.0)
    p = np.zeros(50)
    p[10:15] = 1
    p[30:35] = 1
    assert f1_pointwise(p, t) == (0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        f1_pointwise(np.zeros(3), np.zeros(4))


def test_point_adjust_examples():
    t = truth_from_span(20, 5, 9)
    p = np.zeros(20, int)
    p[7] = 1
    p[15] = 1
    adj = point_adjust(p, t)
    np.testing.assert_array_equal(adj[5:10], 1)
    assert adj[15] == 1 and adj.sum() == 6
    p2 = np.zeros(20, int)
    p2[1] = 1
    np.testing.assert_array_equal(point_adjust(p2, t), p2)


def test_pa_k_boundaries():
    t = truth_from_span(20, 0, 9)
    p = np.zeros(20, int)
    p[:5] = 1
    assert pa_percent_k(p, t, 49)[:10].all()
    assert not pa_percent_k(p, t, 50)[5:10].any()
    np.testing.assert_array_equal(pa_percent_k(p, t, 100), p)


def test_pa_k_one_of_27_step():
    n = 200
    t = truth_from_span(n, 100, 126)
    p = np.zeros(n, int)
    p[110] = 1
    p[10] = 1
    rows = pa_k_curve(p, t)
    filled = [k for k, _, r, _ in rows if r == 1.0]
    assert filled == [1, 2, 3]  # 1/27 = 3.7% > K% only for K < 3.71
    # closed form: 3 filled rows (tp=27, fp=1) and 97 raw rows (tp=1, fp=1)
    f_fill = 2 * (27 / 28) * 1 / (27 / 28 + 1)
    f_raw = 2 * 0.5 * (1 / 27) / (0.5 + 1 / 27)
    assert pa_k_auc(p, t)[2] == pytest.approx((3 * f_fill + 97 * f_raw) / 100, abs=1e-12)


def test_pa_k_auc_extremes():
    t = truth_from_span(60, 20, 29)
    assert pa_k_auc(t, t) == (1.0, 1.0, 1.0)
    assert pa_k_auc(np.zeros(60), t) == (0.0, 0.0, 0.0)


def test_pa_k_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(10, 80))
        b = int(rng.integers(0, n - 1))
        e = int(rng.integers(b, n))
        t = truth_from_span(n, b, e)
        p = (rng.random(n) < rng.random()).astype(int)
        for k in (1, 7, 33, 50, 99, 100):
            np.testing.assert_array_equal(pa_percent_k(p, t, k), brute_pa_k(p, t, k))


@settings(max_examples=300, deadline=None)
@given(st.integers(5, 100).flatmap(lambda n: st.tuples(
    arrays(np.int8, n, elements=st.integers(0, 1)), st.integers(0, n - 1), st.integers(0, n - 1))))
def test_pw_never_exceeds_pa(args):
    p, a, b = args
    t = truth_from_span(p.size, min(a, b), max(a, b))
    assert f1_pointwise(p, t)[2] <= f1_pointwise(point_adjust(p, t), t)[2] + 1e-15
    m = evaluate(p, t).to_dict()
    for k, v in m.items():
        if k != "empty_prediction":
            assert 0.0 <= v <= 1.0


def test_pa_small_k_equals_point_adjust_when_ratio_large():
    t = truth_from_span(40, 10, 29)
    p = np.zeros(40, int)
    p[12] = p[15] = 1  # ratio 0.1 > 0.01
    np.testing.assert_array_equal(pa_percent_k(p, t, 1), point_adjust(p, t))


def test_affiliation_examples():
    t = truth_from_span(100, 40, 59)
    p, r, f, empty = affiliation(t, t)
    assert (p, r) == (1.0, 1.0) and not empty
    single = np.zeros(100, int)
    single[50] = 1
    p, r, _, _ = affiliation(single, t)
    assert p == 1.0 and r < 1.0
    assert affiliation(np.zeros(100), t) == (0.0, 0.0, 0.0, True)
    with pytest.raises(ValueError):
        affiliation(t, np.zeros(100))


def test_affiliation_precision_decays_with_distance():
    n = 300
    t = truth_from_span(n, 100, 119)
    prev = 2.0
    for pos in range(119, 300, 10):
        p = np.zeros(n, int)
        p[pos] = 1
        cur = affiliation(p, t)[0]
        assert cur <= prev
        prev = cur
    assert prev < 0.2


def test_survival_functions_by_counting():
    n, b, e = 30, 10, 14
    for d in range(0, 20):
        xs = np.arange(n)
        dist = np.where(xs < b, b - xs, np.where(xs > e, xs - e, 0))
        assert precision_survival(d, n, b, e) == pytest.approx(np.mean(dist >= d))
        assert recall_survival(d, n, 20) == pytest.approx(np.mean(np.abs(xs - 20) >= d))


def test_affiliation_monte_carlo():
    rng = np.random.default_rng(1)
    n, span = 200, 20
    t = truth_from_span(n, 90, 90 + span - 1)
    p = np.zeros(n, int)
    p[rng.choice(n, 12, replace=False)] = 1
    prec, rec, _, _ = affiliation(p, t)
    mp, mr = monte_carlo_affiliation(p, t, 10**6, rng)
    assert abs(prec - mp) < 0.01 and abs(rec - mr) < 0.01
