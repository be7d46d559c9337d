import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedwatch.metrics import (
    ConfusionCounts,
    MetricsError,
    confusion,
    f_beta,
    precision,
    recall,
)


def test_worked_confusion_example():
    # 22 workers, 12 truly malicious, 8 excluded of which 5 are malicious
    workers = set(range(22))
    truth = set(range(12))
    excluded = {0, 1, 2, 3, 4, 12, 13, 14}
    counts = confusion(excluded, truth, workers)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (5, 3, 7, 7)
    assert precision(counts) == 5 / 8 == 0.625
    assert abs(recall(counts) - 5 / 12) < 1e-12


def test_confusion_edges():
    workers = set(range(6))
    truth = {1, 2}
    counts = confusion(truth, truth, workers)
    assert counts.fp == counts.fn == 0
    counts = confusion(set(), truth, workers)
    assert counts.tp == 0 and counts.fp == 0 and counts.fn == 2 and counts.tn == 4


def test_confusion_rejects_ids_outside_worker_set():
    with pytest.raises(MetricsError):
        confusion({9}, set(), {0, 1})
    with pytest.raises(MetricsError):
        confusion(set(), {9}, {0, 1})


def test_precision_recall_conventions():
    zero = ConfusionCounts(0, 0, 0, 5)
    assert precision(zero) == 0.0
    assert recall(zero) == 0.0
    perfect = ConfusionCounts(3, 0, 0, 2)
    assert precision(perfect) == 1.0 and recall(perfect) == 1.0


def test_f_beta_worked_example():
    p, r, beta = 0.625, 5 / 12, 2.0
    expected = (1 + beta**2) * p * r / (beta**2 * p + r)  # one-line reference
    value = f_beta(p, r, beta)
    assert abs(value - expected) < 1e-12
    assert abs(value - 0.446429) < 1e-6


def test_f_beta_identity_and_harmonic_mean():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = float(rng.uniform(0, 1))
        beta = float(rng.uniform(0, 4))
        assert abs(f_beta(x, x, beta) - x) < 1e-12
    assert abs(f_beta(0.5, 1.0, 1.0) - 2 * 0.5 / 1.5) < 1e-12


def test_f_beta_zero_convention_and_validation():
    assert f_beta(0.0, 0.0, 2.0) == 0.0
    with pytest.raises(MetricsError):
        f_beta(1.2, 0.5, 2.0)
    with pytest.raises(MetricsError):
        f_beta(0.5, 0.5, -1.0)


def test_f2_weights_recall_above_precision():
    # dF/dr = b^2 p^2 (1+b^2)/(b^2 p+r)^2 vs dF/dp = r^2 (1+b^2)/(b^2 p+r)^2,
    # so the recall derivative dominates exactly where r < b*p; on the
    # diagonal it is b^2 times larger. Swapping the arguments always favours
    # the variant with the larger recall.
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(50):
        x = float(rng.uniform(0.1, 0.9))
        dr = (f_beta(x, x + h, 2) - f_beta(x, x - h, 2)) / (2 * h)
        dp = (f_beta(x + h, x, 2) - f_beta(x - h, x, 2)) / (2 * h)
        assert abs(dr) > abs(dp)
        assert abs(dr / dp - 4.0) < 1e-3  # beta^2
    for _ in range(50):
        p, r = sorted(rng.uniform(0.1, 0.9, 2))
        if r - p < 1e-3:
            continue
        assert f_beta(p, r, 2) > f_beta(r, p, 2)  # recall-heavy beats
        if r < 2 * p:
            dr = (f_beta(p, r + h, 2) - f_beta(p, r - h, 2)) / (2 * h)
            dp = (f_beta(p + h, r, 2) - f_beta(p - h, r, 2)) / (2 * h)
            assert abs(dr) > abs(dp)


def test_f_beta_between_min_and_max():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, r = rng.uniform(0.05, 1.0, 2)
        val = f_beta(p, r, 2.0)
        assert min(p, r) - 1e-12 <= val <= max(p, r) + 1e-12


@settings(max_examples=50, deadline=None)
@given(
    st.sets(st.integers(0, 19)),
    st.sets(st.integers(0, 19)),
)
def test_confusion_partitions_worker_set(excluded, truth):
    workers = set(range(20))
    counts = confusion(excluded, truth, workers)
    assert counts.total == 20
    assert min(counts.tp, counts.fp, counts.fn, counts.tn) >= 0
