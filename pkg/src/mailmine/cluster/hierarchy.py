"""Agglomerative hierarchical clustering with pluggable linkage.

At every step the two active clusters at minimal linkage distance merge.
Ties are broken deterministically: each cluster is keyed by its smallest
member email id and the lexicographically lowest (key, key) pair wins.
Merge nodes follow the scipy convention: leaves are 0..n-1, the t-th merge
creates node n+t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import ContractError
from .validation import check_distance_matrix

LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[int, ...]  # email ids, leaf node i <-> leaves[i]
    merges: tuple[Merge, ...]
    linkage: str

    def __post_init__(self) -> None:
        if len(self.merges) != max(0, len(self.leaves) - 1):
            raise ContractError("a dendrogram over n leaves needs exactly n-1 merges")

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def heights(self) -> list[float]:
        return [m.height for m in self.merges]

    def node_members(self) -> dict[int, tuple[int, ...]]:
        """Email ids under every node, leaves and merge nodes alike."""
        members: dict[int, tuple[int, ...]] = {
            i: (email_id,) for i, email_id in enumerate(self.leaves)
        }
        n = self.n_leaves
        for t, merge in enumerate(self.merges):
            members[n + t] = tuple(sorted(members[merge.left] + members[merge.right]))
        return members

    def to_json_tree(self) -> dict:
        """Nested {node, height, children} tree consumed by the labeling UI."""
        nodes: dict[int, dict] = {
            i: {"node": i, "email_id": email_id, "height": 0.0, "children": []}
            for i, email_id in enumerate(self.leaves)
        }
        n = self.n_leaves
        for t, merge in enumerate(self.merges):
            nodes[n + t] = {
                "node": n + t,
                "height": merge.height,
                "children": [nodes[merge.left], nodes[merge.right]],
            }
        root = n + len(self.merges) - 1 if self.merges else 0
        return nodes[root]


@dataclass(frozen=True)
class FlatClustering:
    """Dense cluster ids (0..k-1) keyed by email id."""

    assignments: dict[int, int]
    k: int

    def clusters(self) -> list[tuple[int, ...]]:
        groups: dict[int, list[int]] = {c: [] for c in range(self.k)}
        for email_id, c in self.assignments.items():
            groups[c].append(email_id)
        return [tuple(sorted(groups[c])) for c in range(self.k)]

    def labels_for(self, ids: list[int]) -> list[int]:
        return [self.assignments[i] for i in ids]


def _lance_williams(linkage: str, d_ai: float, d_bi: float, size_a: int, size_b: int) -> float:
    if linkage == "single":
        return min(d_ai, d_bi)
    if linkage == "complete":
        return max(d_ai, d_bi)
    # average linkage: size-weighted mean of member pair distances
    return (size_a * d_ai + size_b * d_bi) / (size_a + size_b)


def agglomerative(ids: list[int], pairwise: np.ndarray, linkage: str = "complete") -> Dendrogram:
    """Full merge tree over a precomputed distance matrix."""
    if linkage not in LINKAGES:
        raise ContractError(f"unknown linkage {linkage!r}")
    n = len(ids)
    if n == 0:
        raise ContractError("cannot cluster an empty id list")
    check_distance_matrix(pairwise, n)

    dist = pairwise.astype(float).copy()
    active = list(range(n))  # positions into dist that are alive
    node_of = list(range(n))  # dendrogram node id per position
    size = [1] * n
    min_member = [ids[i] for i in range(n)]

    merges: list[Merge] = []
    for step in range(n - 1):
        best = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                lo, hi = sorted((min_member[i], min_member[j]))
                key = (dist[i, j], lo, hi)
                if best is None or key < best[0]:
                    best = (key, i, j)
        (height, _, _), i, j = best
        merges.append(Merge(left=node_of[i], right=node_of[j], height=float(height)))

        # fold cluster j into i, then retire j
        for k in active:
            if k in (i, j):
                continue
            d = _lance_williams(linkage, dist[i, k], dist[j, k], size[i], size[j])
            dist[i, k] = dist[k, i] = d
        node_of[i] = n + step
        size[i] += size[j]
        min_member[i] = min(min_member[i], min_member[j])
        active.remove(j)

    return Dendrogram(leaves=tuple(ids), merges=tuple(merges), linkage=linkage)


def cut(dendrogram: Dendrogram, k: int | None = None, height: float | None = None) -> FlatClustering:
    """Flatten a dendrogram into k clusters, or keep merges up to a height."""
    n = dendrogram.n_leaves
    if (k is None) == (height is None):
        raise ContractError("cut needs exactly one of k or height")
    if k is not None:
        if not 1 <= k <= n:
            raise ContractError(f"k={k} out of range [1, {n}]")
        keep = n - k
    else:
        if height < 0:
            raise ContractError("cut height must be >= 0")
        keep = sum(1 for m in dendrogram.merges if m.height <= height)

    parent = list(range(n + keep))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in range(keep):
        merge = dendrogram.merges[t]
        new = n + t
        parent[find(merge.left)] = new
        parent[find(merge.right)] = new

    groups: dict[int, list[int]] = {}
    for leaf, email_id in enumerate(dendrogram.leaves):
        groups.setdefault(find(leaf), []).append(email_id)

    # dense ids ordered by smallest member for cross-platform determinism
    ordered = sorted(groups.values(), key=min)
    assignments = {email_id: c for c, members in enumerate(ordered) for email_id in members}
    return FlatClustering(assignments=assignments, k=len(ordered))


class AgglomerativeClusterer(BaseEstimator):
    """sklearn-style wrapper: fit a precomputed distance matrix, cut to labels.

    Parameters mirror the functional API; `fit` stores `dendrogram_` and the
    flat `labels_` for the configured cut.
    """

    def __init__(self, n_clusters: int = 2, linkage: str = "complete", height: float | None = None):
        self.n_clusters = n_clusters
        self.linkage = linkage
        self.height = height

    def fit(self, X, y=None, ids: list[int] | None = None):
        X = np.asarray(X, dtype=float)
        item_ids = list(ids) if ids is not None else list(range(X.shape[0]))
        self.ids_ = item_ids
        self.dendrogram_ = agglomerative(item_ids, X, self.linkage)
        if self.height is not None:
            flat = cut(self.dendrogram_, height=self.height)
        else:
            flat = cut(self.dendrogram_, k=self.n_clusters)
        self.clustering_ = flat
        self.labels_ = np.array(flat.labels_for(item_ids))
        return self

    def fit_predict(self, X, y=None, ids: list[int] | None = None):
        return self.fit(X, ids=ids).labels_
