"""Chief-side aggregation rules: weighted averaging plus three robust rules.

All rules consume a list of flat update vectors and return a single vector.
The robust rules tolerate a presumed number m of Byzantine inputs:

* krum   -- selects the input with the smallest sum of squared distances to
            its n-m-2 nearest other inputs (n >= 2m+3).
* geomed -- Weiszfeld iteration to the geometric median.
* bulyan -- iterated krum selection (n-2m picks) followed by a per-coordinate
            trimmed mean of the n-4m values closest to the median (n >= 4m+3).
"""
from dataclasses import dataclass

import numpy as np


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class AggregationRule:
    name: str = "fedavg"
    m: int = 1
    tol: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        if self.name not in ("fedavg", "krum", "geomed", "bulyan"):
            raise AggregationError(f"unknown aggregation rule {self.name!r}")
        if self.m < 0:
            raise AggregationError("m must be >= 0")
        if self.tol <= 0:
            raise AggregationError("tol must be > 0")
        if self.max_iter < 1:
            raise AggregationError("max_iter must be >= 1")


def _stack(vectors):
    if not vectors:
        raise AggregationError("no vectors to aggregate")
    try:
        mat = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    except ValueError:
        raise AggregationError("updates must share one dimension") from None
    if mat.ndim != 2:
        raise AggregationError("updates must be flat vectors")
    return mat


def fedavg(deltas, alphas) -> np.ndarray:
    """Weighted sum of updates; weights must sum to 1 (within 1e-9)."""
    mat = _stack(deltas)
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.shape != (mat.shape[0],):
        raise AggregationError(
            f"{mat.shape[0]} updates but {alphas.shape} weights"
        )
    if abs(alphas.sum() - 1.0) > 1e-9:
        raise AggregationError(f"weights sum to {alphas.sum()!r}, expected 1")
    return alphas @ mat


def _sq_dists(mat) -> np.ndarray:
    diff = mat[:, None, :] - mat[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _krum_scores(mat, closest: int) -> np.ndarray:
    d2 = _sq_dists(mat)
    np.fill_diagonal(d2, np.inf)
    part = np.sort(d2, axis=1)[:, :closest]
    return part.sum(axis=1)


def krum(vectors, m: int):
    """(chosen vector, chosen index, scores); ties pick the lowest index."""
    mat = _stack(vectors)
    n = mat.shape[0]
    if m < 0:
        raise AggregationError("m must be >= 0")
    if n < 2 * m + 3:
        raise AggregationError(f"krum needs n >= 2m+3, got n={n}, m={m}")
    scores = _krum_scores(mat, n - m - 2)
    idx = int(np.argmin(scores))
    return mat[idx].copy(), idx, scores


def geomed(vectors, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Geometric median by Weiszfeld iteration, started at the mean.

    Stops when the step norm drops below tol or after max_iter steps; an
    iterate landing on an input point (within 1e-12) is returned as-is, which
    sidesteps the division-by-zero in the update.
    """
    mat = _stack(vectors)
    x = mat.mean(axis=0)
    for _ in range(max_iter):
        dists = np.linalg.norm(mat - x, axis=1)
        hit = dists < 1e-12
        if hit.any():
            return mat[int(np.argmax(hit))].copy()
        w = 1.0 / dists
        x_new = (w @ mat) / w.sum()
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    return x


def _lower_median(sorted_col):
    return sorted_col[(sorted_col.shape[0] - 1) // 2]


def bulyan(vectors, m: int) -> np.ndarray:
    """Iterated-krum selection, then per-coordinate trimmed mean around the median."""
    mat = _stack(vectors)
    n = mat.shape[0]
    if n < 4 * m + 3:
        raise AggregationError(f"bulyan needs n >= 4m+3, got n={n}, m={m}")

    take = n - 2 * m
    if take == n:  # m = 0: every vector gets selected, order irrelevant
        chosen = list(range(n))
    else:
        remaining = list(range(n))
        chosen = []
        while len(chosen) < take:
            sub = mat[remaining]
            # late iterations drop below krum's n >= m+3 floor; clamp the
            # neighbourhood to at least one other vector
            closest = max(1, len(remaining) - m - 2)
            scores = _krum_scores(sub, closest)
            tied = np.flatnonzero(scores == scores.min())
            if tied.size == 1:
                pick = int(tied[0])
            else:
                # mutually-nearest pairs tie exactly once the neighbourhood
                # clamps; break by vector value to stay permutation-invariant
                rows = [tuple(sub[i]) for i in tied]
                pick = int(tied[rows.index(min(rows))])
            chosen.append(remaining.pop(pick))

    sel = np.sort(mat[chosen], axis=0)  # (take, d), each column sorted
    q = n - 4 * m
    med = sel[(take - 1) // 2]  # lower of the two middle values when even

    # the q values closest to the median form a contiguous window in the
    # sorted column; pick the window with the smallest worst-case distance
    starts = range(0, take - q + 1)
    costs = np.stack(
        [np.maximum(med - sel[a], sel[a + q - 1] - med) for a in starts]
    )
    best = np.argmin(costs, axis=0)  # first minimal start: lower values on ties
    cols = np.arange(sel.shape[1])
    window = sel[best[None, :] + np.arange(q)[:, None], cols]
    return window.mean(axis=0)


def aggregate(rule: AggregationRule, deltas, alphas) -> np.ndarray:
    """Dispatch an AggregationRule over the surviving updates."""
    if rule.name == "fedavg":
        return fedavg(deltas, alphas)
    if rule.name == "krum":
        return krum(deltas, rule.m)[0]
    if rule.name == "geomed":
        return geomed(deltas, rule.tol, rule.max_iter)
    return bulyan(deltas, rule.m)
