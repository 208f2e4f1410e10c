import itertools

import numpy as np
import pytest

from mailmine.cluster.hierarchy import FlatClustering
from mailmine.cluster.metrics import (
    medoid,
    pair_f_measure,
    purity,
    quality,
    rand_index,
    silhouette,
)
from mailmine.errors import ContractError


def flat(assignments):
    dense = {v: c for c, v in enumerate(sorted(set(assignments.values())))}
    return FlatClustering(
        assignments={i: dense[v] for i, v in assignments.items()}, k=len(dense)
    )


def pair_oracle(pred, gold, ids):
    """O(n^2) enumeration of agreeing/disagreeing pairs."""
    tp = fp = fn = tn = 0
    for i, j in itertools.combinations(ids, 2):
        same_pred = pred[i] == pred[j]
        same_gold = gold[i] == gold[j]
        if same_pred and same_gold:
            tp += 1
        elif same_pred:
            fp += 1
        elif same_gold:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def purity_oracle(pred, gold, ids):
    clusters = {}
    for i in ids:
        clusters.setdefault(pred[i], []).append(i)
    total = 0
    for members in clusters.values():
        counts = {}
        for i in members:
            counts[gold[i]] = counts.get(gold[i], 0) + 1
        total += max(counts.values())
    return total / len(ids)


class TestAgainstDefinitions:
    def test_identical_clusterings_score_one(self):
        a = flat({1: 0, 2: 0, 3: 1, 4: 1})
        assert purity(a, a) == 1.0
        assert rand_index(a, a) == 1.0
        assert pair_f_measure(a, a) == 1.0

    def test_singletons_vs_one_cluster(self):
        pred = flat({i: i for i in range(4)})
        gold = flat({i: 0 for i in range(4)})
        # no same-cluster pair is predicted, every pair is same in gold:
        # 0 agreeing pairs out of 6
        assert rand_index(pred, gold) == 0.0
        assert purity(pred, gold) == 1.0  # every singleton is pure
        assert pair_f_measure(pred, gold) == 0.0

    def test_disjoint_universes_rejected(self):
        with pytest.raises(ContractError):
            rand_index(flat({1: 0}), flat({2: 0}))

    def test_random_labelings_match_pair_oracle(self):
        rng = np.random.default_rng(101)
        for _ in range(100):
            n = int(rng.integers(2, 14))
            ids = list(range(n))
            pred = {i: int(rng.integers(0, 4)) for i in ids}
            gold = {i: int(rng.integers(0, 4)) for i in ids}
            pf = flat(pred)
            gf = flat(gold)
            tp, fp, fn, tn = pair_oracle(pred, gold, ids)
            total = tp + fp + fn + tn
            assert rand_index(pf, gf) == pytest.approx((tp + tn) / total if total else 1.0)
            if tp:
                precision, recall = tp / (tp + fp), tp / (tp + fn)
                f1 = 2 * precision * recall / (precision + recall)
            else:
                f1 = 1.0 if fp == 0 and fn == 0 else 0.0
            assert pair_f_measure(pf, gf) == pytest.approx(f1)
            assert purity(pf, gf) == pytest.approx(purity_oracle(pred, gold, ids))


class TestSilhouette:
    def test_two_tight_blobs_score_high(self):
        pts = np.array([[0.0], [0.1], [10.0], [10.1]])
        D = np.abs(pts - pts.T)
        labels = flat({0: 0, 1: 0, 2: 1, 3: 1})
        s = silhouette(labels, D, [0, 1, 2, 3])
        assert s > 0.9

    def test_matches_sklearn_on_random_inputs(self):
        from sklearn.metrics import silhouette_score

        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(5, 20))
            pts = rng.random((n, 3))
            D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
            labels = {i: int(rng.integers(0, 3)) for i in range(n)}
            if len(set(labels.values())) < 2:
                labels[0] = 0
                labels[1] = 1
            dense = {v: c for c, v in enumerate(sorted(set(labels.values())))}
            labels = {i: dense[v] for i, v in labels.items()}
            mine = silhouette(flat(labels), D, list(range(n)))
            ref = silhouette_score(D, [labels[i] for i in range(n)], metric="precomputed")
            assert mine == pytest.approx(float(ref), abs=1e-9)

    def test_range(self):
        rng = np.random.default_rng(8)
        pts = rng.random((10, 2))
        D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        labels = flat({i: i % 3 for i in range(10)})
        assert -1.0 <= silhouette(labels, D, list(range(10))) <= 1.0


class TestQualityReport:
    def test_needs_gold_or_distances(self):
        with pytest.raises(ContractError):
            quality(flat({1: 0}))

    def test_combined_report(self):
        pts = np.array([[0.0], [0.2], [5.0], [5.2]])
        D = np.abs(pts - pts.T)
        pred = flat({0: 0, 1: 0, 2: 1, 3: 1})
        report = quality(pred, gold=pred, pairwise=D, ids=[0, 1, 2, 3])
        assert report.purity == 1.0
        assert report.rand_index == 1.0
        assert report.f_measure == 1.0
        assert report.silhouette > 0.9
        assert set(report.as_dict()) == {"purity", "f_measure", "rand_index", "silhouette"}


class TestMedoid:
    def test_singleton(self):
        assert medoid({42}, np.zeros((1, 1)), [42]) == 42

    def test_collinear_points(self):
        # points at 0, 1, 5: sums are 6, 5, 9 -> the middle point wins
        pts = np.array([0.0, 1.0, 5.0])
        D = np.abs(pts[:, None] - pts[None, :])
        candidates = {(a, b, c) for a, b, c in [(10, 20, 30)]}
        assert medoid({10, 20, 30}, D, [10, 20, 30]) == 20
        # exhaustive check over the 3 candidates
        sums = {10: 1 + 5, 20: 1 + 4, 30: 5 + 4}
        assert min(sums, key=lambda m: (sums[m], m)) == 20

    def test_two_member_tie_takes_lower_id(self):
        D = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert medoid({9, 4}, D, [4, 9]) == 4

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            medoid(set(), np.zeros((0, 0)), [])
