"""Detection quality scoring: confusion counts, precision, recall, F-beta."""
from dataclasses import dataclass


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(excluded, truth_malicious, all_workers) -> ConfusionCounts:
    """Counts for "excluded" as the positive call and membership as truth."""
    excluded = set(excluded)
    truth = set(truth_malicious)
    everyone = set(all_workers)
    if not excluded <= everyone:
        raise MetricsError(f"excluded ids outside worker set: {excluded - everyone}")
    if not truth <= everyone:
        raise MetricsError(f"truth ids outside worker set: {truth - everyone}")
    tp = len(excluded & truth)
    return ConfusionCounts(
        tp=tp,
        fp=len(excluded) - tp,
        fn=len(truth) - tp,
        tn=len(everyone - excluded - truth),
    )


def precision(counts: ConfusionCounts) -> float:
    """tp / (tp + fp); 0 when nothing was excluded."""
    called = counts.tp + counts.fp
    return counts.tp / called if called else 0.0


def recall(counts: ConfusionCounts) -> float:
    """tp / (tp + fn); 0 when there is nothing to find."""
    relevant = counts.tp + counts.fn
    return counts.tp / relevant if relevant else 0.0


def f_beta(p: float, r: float, beta: float = 2.0) -> float:
    """(1+b^2) * p*r / (b^2*p + r); beta > 1 weights recall above precision."""
    if not 0.0 <= p <= 1.0 or not 0.0 <= r <= 1.0:
        raise MetricsError("precision and recall must lie in [0, 1]")
    if beta < 0:
        raise MetricsError("beta must be >= 0")
    denom = beta * beta * p + r
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * p * r / denom
