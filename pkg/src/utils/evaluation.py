"""
Detection scoring: precision/recall/F-measure, per-trial optimal threshold,
trial aggregation and representation density
"""

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Union

import numpy as np

from src.errors import ArgumentError, DegeneracyError
from src.simulation.signal_model import ActiveSet

RESULT_CSV_FIELDS = [
    "experiment", "algo", "k", "novel_std", "lambda", "seed",
    "precision", "recall", "f", "threshold",
]
DENSITY_CSV_FIELDS = [
    "experiment", "algo", "condition", "amplitude_std", "seed",
    "support_fraction", "peak_score", "l1_l2_ratio",
]

# Share of the peak score above which an atom counts as part of the support
SUPPORT_CUTOFF = 0.1


@dataclass(frozen=True)
class PRFResult:
    precision: float
    recall: float
    f_measure: float
    threshold: float = float("nan")


@dataclass(frozen=True)
class TrialAggregate:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class DensityReport:
    """How spread out a score vector is"""

    support_fraction: float
    peak_score: float
    l1_l2_ratio: float


def _index_set(indices: Union[ActiveSet, Iterable[int]]) -> set:
    if isinstance(indices, ActiveSet):
        return set(indices.indices)
    return {int(i) for i in indices}


def _harmonic(precision: float, recall: float) -> float:
    total = precision + recall
    return 2.0 * precision * recall / total if total > 0 else 0.0


def f_measure(detected: Union[ActiveSet, Iterable[int]], truth: Union[ActiveSet, Iterable[int]]) -> PRFResult:
    """
    Precision, recall and F of a detected index set

    Empty detection of an empty truth is a perfect (vacuous) detection.
    """
    detected = _index_set(detected)
    truth = _index_set(truth)
    return PRFResult(*_counts_to_prf(len(detected), len(detected & truth), len(truth)))


def best_threshold_f(scores: Sequence[float], truth: Union[ActiveSet, Iterable[int]]) -> PRFResult:
    """
    F-measure at the threshold that maximizes it

    Candidate thresholds are the midpoints between consecutive distinct
    absolute scores, plus one above the maximum and one below the minimum.
    An atom is detected when |score| > threshold. Ties in F go to the smaller
    detected set.
    """
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64).reshape(-1))
    if not np.all(np.isfinite(magnitudes)):
        raise ArgumentError("Scores must be finite")
    truth = _index_set(truth)
    n = magnitudes.size
    if n == 0:
        return PRFResult(*_counts_to_prf(0, 0, len(truth)), threshold=0.0)

    order = np.argsort(-magnitudes, kind="stable")
    ranked = magnitudes[order]
    is_true = np.fromiter((int(i) in truth for i in order), dtype=bool, count=n)
    hits = np.concatenate(([0], np.cumsum(is_true)))

    # Detecting the top j atoms is reachable by a threshold only at value boundaries
    cuts = [0] + [j for j in range(1, n) if ranked[j - 1] > ranked[j]] + [n]

    best = None
    for j in cuts:
        precision, recall, f = _counts_to_prf(j, int(hits[j]), len(truth))
        if best is None or f > best[2]:
            best = (precision, recall, f, j)

    precision, recall, f, j = best
    if j == 0:
        threshold = float(ranked[0]) + 1.0
    elif j == n:
        threshold = float(ranked[-1]) - 1.0
    else:
        threshold = 0.5 * float(ranked[j - 1] + ranked[j])
    return PRFResult(precision, recall, f, threshold)


def _counts_to_prf(n_detected: int, n_hits: int, n_truth: int):
    if n_detected == 0 and n_truth == 0:
        return 1.0, 1.0, 1.0
    precision = n_hits / n_detected if n_detected else 0.0
    recall = n_hits / n_truth if n_truth else 1.0
    return precision, recall, _harmonic(precision, recall)


def aggregate_trials(f_values: Sequence[float]) -> TrialAggregate:
    """Sample mean and sample std (ddof=1; 0 for a single trial)"""
    values = np.asarray(list(f_values), dtype=np.float64)
    if values.size == 0:
        raise ArgumentError("aggregate_trials needs at least one value")
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return TrialAggregate(mean=float(np.mean(values)), std=std, n=int(values.size))


def density_report(scores: Sequence[float]) -> DensityReport:
    """Support fraction, peak and normalized L1/L2 ratio of |scores|"""
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64).reshape(-1))
    if magnitudes.size == 0 or not np.any(magnitudes):
        raise DegeneracyError("Density is undefined for an all-zero score vector")
    peak = float(np.max(magnitudes))
    support = float(np.mean(magnitudes > SUPPORT_CUTOFF * peak))
    ratio = float(np.sum(magnitudes) / (np.sqrt(magnitudes.size) * np.linalg.norm(magnitudes)))
    return DensityReport(support_fraction=support, peak_score=peak, l1_l2_ratio=min(ratio, 1.0))


def detected_atoms(scores: Sequence[float], threshold: float) -> List[int]:
    """Indices with |score| above the threshold"""
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64).reshape(-1))
    return [int(i) for i in np.flatnonzero(magnitudes > threshold)]
