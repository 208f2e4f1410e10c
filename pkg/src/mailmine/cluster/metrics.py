"""External and internal clustering-quality metrics plus medoid selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .hierarchy import FlatClustering
from .validation import check_distance_matrix, check_same_universe


@dataclass(frozen=True)
class QualityReport:
    purity: float | None = None
    f_measure: float | None = None
    rand_index: float | None = None
    silhouette: float | None = None

    def as_dict(self) -> dict:
        return {
            "purity": self.purity,
            "f_measure": self.f_measure,
            "rand_index": self.rand_index,
            "silhouette": self.silhouette,
        }


def _contingency(pred: FlatClustering, gold: FlatClustering, ids: list[int]) -> np.ndarray:
    table = np.zeros((pred.k, gold.k), dtype=np.int64)
    for i in ids:
        table[pred.assignments[i], gold.assignments[i]] += 1
    return table


def purity(pred: FlatClustering, gold: FlatClustering) -> float:
    """Fraction of points sitting in their cluster's dominant gold class."""
    ids = check_same_universe(pred.assignments, gold.assignments)
    table = _contingency(pred, gold, ids)
    return float(table.max(axis=1).sum() / len(ids))


def _pair_counts(pred: FlatClustering, gold: FlatClustering) -> tuple[int, int, int, int]:
    ids = check_same_universe(pred.assignments, gold.assignments)
    table = _contingency(pred, gold, ids)
    n = len(ids)
    same_both = int((table * (table - 1) // 2).sum())
    pred_sizes = table.sum(axis=1)
    gold_sizes = table.sum(axis=0)
    same_pred = int((pred_sizes * (pred_sizes - 1) // 2).sum())
    same_gold = int((gold_sizes * (gold_sizes - 1) // 2).sum())
    total = n * (n - 1) // 2
    tp = same_both
    fp = same_pred - same_both
    fn = same_gold - same_both
    tn = total - tp - fp - fn
    return tp, fp, fn, tn


def rand_index(pred: FlatClustering, gold: FlatClustering) -> float:
    """(agreeing pairs) / (all pairs); 1.0 for a single point."""
    tp, fp, fn, tn = _pair_counts(pred, gold)
    total = tp + fp + fn + tn
    if total == 0:
        return 1.0
    return (tp + tn) / total


def pair_f_measure(pred: FlatClustering, gold: FlatClustering) -> float:
    """F1 over same-cluster pairs. Defined as 1.0 when no same pairs exist."""
    tp, fp, fn, _ = _pair_counts(pred, gold)
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def silhouette(flat: FlatClustering, pairwise: np.ndarray, ids: list[int]) -> float:
    """Mean silhouette over points; singleton clusters score 0."""
    n = len(ids)
    check_distance_matrix(pairwise, n)
    if flat.k < 2 or flat.k >= n + 1:
        raise ContractError("silhouette needs 2 <= k <= n clusters")
    labels = np.array(flat.labels_for(ids))
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        own_size = int(own.sum())
        if own_size == 1:
            scores[i] = 0.0
            continue
        a = pairwise[i, own].sum() / (own_size - 1)
        b = min(
            pairwise[i, labels == other].mean()
            for other in range(flat.k)
            if other != labels[i] and np.any(labels == other)
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def quality(
    pred: FlatClustering,
    gold: FlatClustering | None = None,
    pairwise: np.ndarray | None = None,
    ids: list[int] | None = None,
) -> QualityReport:
    """External metrics when gold is given, silhouette when distances are."""
    if gold is None and pairwise is None:
        raise ContractError("quality needs a gold clustering or a distance matrix")
    report: dict[str, float | None] = {}
    if gold is not None:
        report["purity"] = purity(pred, gold)
        report["f_measure"] = pair_f_measure(pred, gold)
        report["rand_index"] = rand_index(pred, gold)
    if pairwise is not None:
        if ids is None:
            raise ContractError("silhouette needs the id ordering of the matrix")
        if 2 <= pred.k <= len(ids) - 1:
            report["silhouette"] = silhouette(pred, pairwise, ids)
    return QualityReport(**report)


def medoid(cluster: set[int] | list[int], pairwise: np.ndarray, ids: list[int]) -> int:
    """Member minimizing total distance to the others; ties take the lowest id."""
    members = sorted(cluster)
    if not members:
        raise ContractError("medoid of an empty cluster is undefined")
    index = {email_id: pos for pos, email_id in enumerate(ids)}
    best_id, best_total = None, None
    for m in members:
        total = sum(pairwise[index[m], index[o]] for o in members if o != m)
        if best_total is None or total < best_total - 1e-12:
            best_id, best_total = m, total
    return best_id
