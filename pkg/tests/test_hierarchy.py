import itertools

import numpy as np
import pytest

from mailmine.cluster.hierarchy import AgglomerativeClusterer, agglomerative, cut
from mailmine.errors import ContractError


def reference_agglomerative(ids, D, linkage):
    """Brute-force reference: recompute every cluster-pair linkage from the raw
    matrix by scanning member pairs; same tie rule (lowest min-member id pair).
    Returns the list of partitions (as sets of frozensets) after each merge."""
    index = {e: i for i, e in enumerate(ids)}
    clusters = [frozenset([e]) for e in ids]
    partitions = [set(clusters)]

    def linkage_distance(a, b):
        pair_ds = [D[index[x], index[y]] for x in a for y in b]
        if linkage == "single":
            return min(pair_ds)
        if linkage == "complete":
            return max(pair_ds)
        return sum(pair_ds) / len(pair_ds)

    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(clusters, 2):
            lo, hi = sorted((min(a), min(b)))
            key = (linkage_distance(a, b), lo, hi)
            if best is None or key < best[0]:
                best = (key, a, b)
        _, a, b = best
        clusters = [c for c in clusters if c not in (a, b)] + [a | b]
        partitions.append(set(frozenset(c) for c in clusters))
    return partitions


def engine_partitions(ids, D, linkage):
    dendrogram = agglomerative(ids, D, linkage)
    out = []
    for k in range(len(ids), 0, -1):
        flat = cut(dendrogram, k=k)
        out.append(set(frozenset(c) for c in flat.clusters()))
    return out


def random_metric(rng, n, dim=3):
    points = rng.random((n, dim))
    D = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(D, 0.0)
    return D


class TestAgainstReference:
    @pytest.mark.parametrize("linkage", ["single", "complete", "average"])
    def test_matches_brute_force_on_small_random_instances(self, linkage):
        rng = np.random.default_rng(12345)
        for _ in range(60):
            n = int(rng.integers(2, 9))
            ids = sorted(rng.choice(1000, size=n, replace=False).tolist())
            D = random_metric(rng, n)
            assert engine_partitions(ids, D, linkage) == reference_agglomerative(ids, D, linkage)


class TestExamples:
    def test_line_points_complete_linkage(self):
        # exhaustive oracle at n=4: of all 2-cluster partitions of points
        # 0,1,10,11 the minimal complete-linkage diameter pairing is {0,1},{10,11}
        pts = np.array([0.0, 1.0, 10.0, 11.0])
        best = None
        for assignment in itertools.product([0, 1], repeat=4):
            if len(set(assignment)) != 2:
                continue
            diam = 0.0
            for c in (0, 1):
                members = [pts[i] for i in range(4) if assignment[i] == c]
                for x, y in itertools.combinations(members, 2):
                    diam = max(diam, abs(x - y))
            if best is None or diam < best[0]:
                best = (diam, assignment)
        assert best[1] in ((0, 0, 1, 1), (1, 1, 0, 0))

        ids = [1, 2, 3, 4]
        D = np.abs(pts[:, None] - pts[None, :])
        flat = cut(agglomerative(ids, D, "complete"), k=2)
        assert set(map(frozenset, flat.clusters())) == {frozenset({1, 2}), frozenset({3, 4})}

    def test_single_leaf(self):
        d = agglomerative([7], np.zeros((1, 1)), "complete")
        assert d.merges == ()
        assert cut(d, k=1).clusters() == [(7,)]

    def test_n2_all_linkages_coincide(self):
        D = np.array([[0.0, 3.5], [3.5, 0.0]])
        for linkage in ("single", "complete", "average"):
            d = agglomerative([1, 2], D, linkage)
            assert len(d.merges) == 1
            assert d.merges[0].height == pytest.approx(3.5)

    def test_empty_input_rejected(self):
        with pytest.raises(ContractError):
            agglomerative([], np.zeros((0, 0)), "complete")

    def test_bad_linkage_rejected(self):
        with pytest.raises(ContractError):
            agglomerative([1], np.zeros((1, 1)), "ward")

    def test_asymmetric_matrix_rejected(self):
        D = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ContractError):
            agglomerative([1, 2], D, "complete")


class TestCut:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.ids = list(range(10, 17))
        self.D = random_metric(rng, 7)
        self.dendro = agglomerative(self.ids, self.D, "complete")

    def test_cut_k_equals_n_gives_singletons(self):
        flat = cut(self.dendro, k=7)
        assert flat.k == 7
        assert all(len(c) == 1 for c in flat.clusters())

    def test_cut_k_one_gives_single_cluster(self):
        flat = cut(self.dendro, k=1)
        assert flat.k == 1
        assert flat.clusters() == [tuple(self.ids)]

    def test_cut_out_of_range(self):
        with pytest.raises(ContractError):
            cut(self.dendro, k=0)
        with pytest.raises(ContractError):
            cut(self.dendro, k=8)

    def test_cut_requires_exactly_one_target(self):
        with pytest.raises(ContractError):
            cut(self.dendro)
        with pytest.raises(ContractError):
            cut(self.dendro, k=2, height=0.5)

    def test_cut_height_zero_gives_singletons(self):
        flat = cut(self.dendro, height=0.0)
        assert flat.k == 7

    def test_cut_height_above_root_gives_one_cluster(self):
        flat = cut(self.dendro, height=max(self.dendro.heights()) + 1)
        assert flat.k == 1

    def test_cluster_ids_dense_and_ordered_by_min_member(self):
        flat = cut(self.dendro, k=3)
        clusters = flat.clusters()
        assert sorted(set(flat.assignments.values())) == list(range(flat.k))
        mins = [min(c) for c in clusters]
        assert mins == sorted(mins)


class TestInvariants:
    def test_complete_linkage_heights_non_decreasing(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            n = int(rng.integers(2, 15))
            D = random_metric(rng, n)
            d = agglomerative(list(range(n)), D, "complete")
            hs = d.heights()
            assert all(h2 >= h1 - 1e-12 for h1, h2 in zip(hs, hs[1:]))

    def test_scaling_invariance_of_memberships(self):
        rng = np.random.default_rng(9)
        n = 9
        D = random_metric(rng, n)
        ids = list(range(n))
        for linkage in ("single", "complete", "average"):
            a = agglomerative(ids, D, linkage)
            b = agglomerative(ids, 3.7 * D, linkage)
            for k in range(1, n + 1):
                assert cut(a, k=k).assignments == cut(b, k=k).assignments

    def test_deterministic_under_ties(self):
        # all-equal distances: merge order is fully decided by the id tie rule
        n = 5
        D = np.ones((n, n)) - np.eye(n)
        d = agglomerative([30, 10, 20, 50, 40], D, "complete")
        first = d.merges[0]
        members = d.node_members()
        assert members[d.n_leaves + 0] == (10, 20)
        assert first.height == 1.0


class TestJsonTree:
    def test_tree_structure(self):
        D = np.array([[0, 1, 4], [1, 0, 4], [4, 4, 0.0]])
        d = agglomerative([1, 2, 3], D, "complete")
        tree = d.to_json_tree()
        assert tree["height"] == pytest.approx(4.0)
        assert len(tree["children"]) == 2
        leaves = []

        def walk(node):
            if not node["children"]:
                leaves.append(node["email_id"])
            for child in node["children"]:
                walk(child)

        walk(tree)
        assert sorted(leaves) == [1, 2, 3]


class TestEstimatorApi:
    def test_fit_predict_with_ids(self):
        D = np.array([[0, 1, 4], [1, 0, 4], [4, 4, 0.0]])
        model = AgglomerativeClusterer(n_clusters=2, linkage="complete")
        labels = model.fit_predict(D, ids=[11, 12, 13])
        assert labels[0] == labels[1] != labels[2]
        assert model.dendrogram_.n_leaves == 3

    def test_get_params_roundtrip(self):
        model = AgglomerativeClusterer(n_clusters=4, linkage="average")
        params = model.get_params()
        assert params["n_clusters"] == 4
        clone = AgglomerativeClusterer(**params)
        assert clone.get_params() == params
