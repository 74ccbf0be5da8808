"""External clustering metrics: ACC, NMI, pairwise F1 and purity."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInput, InvalidShape


@dataclass
class MetricBundle:
    acc: float
    nmi: float
    f1: float
    purity: float

    def as_dict(self):
        return asdict(self)


def _tie_tol(cost):
    return 1e-9 * (1.0 + float(np.abs(cost).sum()))


def hungarian(cost) -> list:
    """Permutation ``perm`` (row i -> column perm[i]) minimizing total cost.

    Among all minimizers the lexicographically smallest permutation is
    returned: rows are fixed greedily to the smallest column that still
    admits an optimal completion.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InvalidShape(f"hungarian needs a square matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise InvalidInput("cost matrix contains non-finite entries")
    k = cost.shape[0]
    if k == 0:
        return []
    r, c = linear_sum_assignment(cost)
    best = float(cost[r, c].sum())
    tol = _tie_tol(cost)

    perm = []
    rows = list(range(k))
    cols = list(range(k))
    fixed = 0.0
    for i in range(k):
        rest_rows = rows[1:]
        for j in cols:
            rest_cols = [c2 for c2 in cols if c2 != j]
            if rest_rows:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                rr, cc = linear_sum_assignment(sub)
                completion = float(sub[rr, cc].sum())
            else:
                completion = 0.0
            if fixed + cost[i, j] + completion <= best + tol:
                perm.append(j)
                fixed += cost[i, j]
                cols = rest_cols
                break
        rows = rest_rows
    return perm


def _encode(labels):
    _, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.ravel()


def contingency(truth, pred) -> np.ndarray:
    """Counts table with classes on rows and clusters on columns."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size < 1:
        raise InvalidShape(
            f"truth and pred must be equal-length non-empty 1-D, got {truth.shape} and {pred.shape}")
    t, p = _encode(truth), _encode(pred)
    table = np.zeros((t.max() + 1, p.max() + 1), dtype=np.int64)
    np.add.at(table, (t, p), 1)
    return table


def acc(truth, pred) -> float:
    table = contingency(truth, pred)
    k = max(table.shape)
    square = np.zeros((k, k), dtype=np.int64)
    square[: table.shape[0], : table.shape[1]] = table
    perm = hungarian(-square)
    matched = sum(square[i, j] for i, j in enumerate(perm))
    return float(matched) / float(table.sum())


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(truth, pred) -> float:
    """Mutual information over the geometric mean of the two entropies (natural log)."""
    table = contingency(truth, pred)
    n = table.sum()
    ht = _entropy(table.sum(axis=1))
    hp = _entropy(table.sum(axis=0))
    if ht == 0.0 or hp == 0.0:
        # a constant side: identical partitions only when both are constant
        return 1.0 if ht == hp else 0.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / np.sqrt(ht * hp), 0.0, 1.0))


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def pair_counts(truth, pred):
    """``(tp, fp, fn)`` over unordered sample pairs."""
    table = contingency(truth, pred)
    tp = _pairs(table)
    same_pred = _pairs(table.sum(axis=0))
    same_truth = _pairs(table.sum(axis=1))
    return tp, same_pred - tp, same_truth - tp


def pairwise_f1(truth, pred) -> float:
    tp, fp, fn = pair_counts(truth, pred)
    denom = 2 * tp + fp + fn
    if denom == 0:
        # both partitions are all singletons, hence identical
        return 1.0
    return 2.0 * tp / denom


def purity(truth, pred) -> float:
    table = contingency(truth, pred)
    return float(table.max(axis=0).sum()) / float(table.sum())


def evaluate(truth, pred) -> MetricBundle:
    return MetricBundle(
        acc=acc(truth, pred),
        nmi=nmi(truth, pred),
        f1=pairwise_f1(truth, pred),
        purity=purity(truth, pred),
    )
