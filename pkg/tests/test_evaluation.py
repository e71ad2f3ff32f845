import itertools
import math

import numpy as np
import pytest

from src.errors import ArgumentError, DegeneracyError
from src.simulation.signal_model import ActiveSet
from src.utils.evaluation import (
    aggregate_trials,
    best_threshold_f,
    density_report,
    detected_atoms,
    f_measure,
)


def test_perfect_detection():
    result = f_measure({1, 4}, ActiveSet([4, 1]))
    assert (result.precision, result.recall, result.f_measure) == (1.0, 1.0, 1.0)


def test_half_precision_full_recall():
    result = f_measure({0, 1, 2, 3}, ActiveSet([0, 1]))
    assert result.precision == 0.5
    assert result.recall == 1.0
    assert result.f_measure == pytest.approx(2.0 / 3.0)


def test_disjoint_detection():
    assert f_measure({5}, ActiveSet([1])).f_measure == 0.0


def test_empty_detection():
    result = f_measure(set(), ActiveSet([1, 2]))
    assert result.precision == 0.0
    assert result.f_measure == 0.0
    assert f_measure(set(), ActiveSet()).f_measure == 1.0


def test_precision_and_recall_swap_with_roles():
    a, b = {0, 1, 2}, {1, 2, 5, 7}
    forward, backward = f_measure(a, b), f_measure(b, a)
    assert forward.precision == backward.recall
    assert forward.recall == backward.precision
    assert forward.f_measure == pytest.approx(backward.f_measure)


def test_indicator_scores():
    scores = np.zeros(10)
    scores[[2, 7]] = 1.0
    result = best_threshold_f(scores, ActiveSet([2, 7]))
    assert result.f_measure == 1.0
    assert 0.0 < result.threshold < 1.0


def test_threshold_example():
    result = best_threshold_f([0.9, 0.8, 0.1, 0.05], ActiveSet([0, 1]))
    assert result.f_measure == 1.0
    assert 0.1 < result.threshold < 0.8


def test_negative_scores_use_magnitudes():
    result = best_threshold_f([-0.9, 0.05, 0.8, -0.1], ActiveSet([0, 2]))
    assert result.f_measure == 1.0
    assert detected_atoms([-0.9, 0.05, 0.8, -0.1], result.threshold) == [0, 2]


def test_ties_prefer_the_smaller_set():
    # with truth {0, 3}, detecting {0} and detecting all four atoms both give F = 2/3
    result = best_threshold_f([0.9, 0.5, 0.4, 0.1], ActiveSet([0, 3]))
    assert result.f_measure == pytest.approx(2.0 / 3.0)
    assert result.threshold > 0.5
    assert detected_atoms([0.9, 0.5, 0.4, 0.1], result.threshold) == [0]


def _exhaustive_best_f(scores, truth):
    magnitudes = np.abs(scores)
    candidates = list(magnitudes) + [-1.0]
    return max(f_measure(np.flatnonzero(magnitudes > c), truth).f_measure for c in candidates)


def test_threshold_scan_matches_exhaustive_scan():
    rng = np.random.default_rng(5)
    for _ in range(200):
        m = int(rng.integers(1, 21))
        scores = np.round(rng.standard_normal(m), 1)
        k = int(rng.integers(0, m + 1))
        truth = ActiveSet(rng.choice(m, size=k, replace=False))
        assert best_threshold_f(scores, truth).f_measure == pytest.approx(_exhaustive_best_f(scores, truth))


def test_threshold_scan_beats_empty_and_full_sets():
    rng = np.random.default_rng(8)
    for _ in range(50):
        scores = rng.standard_normal(15)
        truth = ActiveSet(rng.choice(15, size=3, replace=False))
        best = best_threshold_f(scores, truth).f_measure
        assert best >= f_measure(set(), truth).f_measure
        assert best >= f_measure(range(15), truth).f_measure


def test_monotone_transform_leaves_f_unchanged():
    rng = np.random.default_rng(9)
    scores = rng.random(30)
    truth = ActiveSet([3, 11, 20])
    original = best_threshold_f(scores, truth).f_measure
    assert best_threshold_f(np.exp(4.0 * scores), truth).f_measure == original
    assert best_threshold_f(scores ** 3, truth).f_measure == original


def test_random_scores_score_poorly():
    values = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        truth = ActiveSet(rng.choice(1000, size=2, replace=False))
        values.append(best_threshold_f(rng.random(1000), truth).f_measure)
    assert np.mean(values) < 0.5


def test_best_threshold_rejects_non_finite():
    with pytest.raises(ArgumentError):
        best_threshold_f([0.1, np.nan], ActiveSet([0]))


def test_aggregate_trials():
    ones = aggregate_trials([1.0, 1.0, 1.0])
    assert (ones.mean, ones.std, ones.n) == (1.0, 0.0, 3)
    pair = aggregate_trials([0.0, 1.0])
    assert pair.mean == 0.5
    assert pair.std == pytest.approx(math.sqrt(0.5))
    single = aggregate_trials([0.7])
    assert (single.std, single.n) == (0.0, 1)
    with pytest.raises(ArgumentError):
        aggregate_trials([])


def test_density_of_one_hot_and_constant_scores():
    one_hot = np.zeros(100)
    one_hot[42] = 3.0
    report = density_report(one_hot)
    assert report.support_fraction == pytest.approx(0.01)
    assert report.l1_l2_ratio == pytest.approx(0.1)
    assert report.peak_score == 3.0

    flat = density_report(np.full(100, -0.2))
    assert flat.support_fraction == 1.0
    assert flat.l1_l2_ratio == pytest.approx(1.0)


def test_density_of_zero_scores():
    with pytest.raises(DegeneracyError):
        density_report(np.zeros(5))


def test_detected_atoms():
    assert detected_atoms([0.2, -0.6, 0.5], 0.4) == [1, 2]


def test_exhaustive_helper_sanity():
    # every truth set of a 4-atom problem
    scores = np.array([0.4, 0.3, 0.2, 0.1])
    for k in range(5):
        for truth in itertools.combinations(range(4), k):
            assert best_threshold_f(scores, ActiveSet(truth)).f_measure == pytest.approx(
                _exhaustive_best_f(scores, ActiveSet(truth)))
