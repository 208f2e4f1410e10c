"""Phase orchestration: topics -> process instances -> activity clusters.

Topic and instance discovery run complete-linkage hierarchical clustering
over the composite email distance; activity recognition runs a seeded
k-means in a concatenated subject+body vector space where the Euclidean
metric equals the weighted quadratic mean of the field distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .cluster.distance import DistanceSpec, corpus_vectors, pairwise_distances
from .cluster.hierarchy import Dendrogram, FlatClustering, agglomerative, cut
from .cluster.kmeans import KMeansConfig, kmeans
from .cluster.metrics import QualityReport, medoid, quality, silhouette
from .errors import ContractError, CorpusError
from .ingest import Corpus
from .textprep import TermMatrix, _l2_normalize_rows

# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class TopicCluster:
    cluster_id: int
    email_ids: tuple[int, ...]  # sorted
    label: str | None = None


@dataclass(frozen=True)
class ProcessInstance:
    instance_id: int  # local to its topic cluster
    topic_cluster_id: int
    email_ids: tuple[int, ...]  # ordered by timestamp, ties by id


@dataclass(frozen=True)
class InstanceStats:
    average_size: float
    sizes: tuple[int, ...]
    initial_k: int


@dataclass(frozen=True)
class ActivityCluster:
    activity_id: int  # unique within a run
    topic_cluster_id: int
    email_ids: tuple[int, ...]
    medoid_id: int
    label: str | None = None


@dataclass(frozen=True)
class CutTarget:
    """Either an explicit k, an explicit height, or silhouette-chosen k."""

    k: int | None = None
    height: float | None = None

    def __post_init__(self) -> None:
        if self.k is not None and self.height is not None:
            raise ContractError("cut target takes k or height, not both")


# ---------------------------------------------------------------------------
# synonym folding


def load_synonyms(path: str | Path | None = None) -> dict[str, str]:
    """term<TAB>synset_key rows; unknown terms later map to themselves."""
    if path is None:
        text = resources.files("mailmine.data").joinpath("synonyms_en.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    table: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        term, _, key = line.partition("\t")
        if term and key:
            table[term.strip()] = key.strip()
    return table


def fold_synonyms(matrix: TermMatrix, table: dict[str, str]) -> TermMatrix:
    """Sum columns sharing a synset key, re-normalize rows."""
    targets = [table.get(term, term) for term in matrix.vocabulary]
    folded_vocab = tuple(sorted(set(targets)))
    col_of = {term: j for j, term in enumerate(folded_vocab)}
    from scipy import sparse

    n_terms = len(matrix.vocabulary)
    mapping = sparse.csr_matrix(
        (np.ones(n_terms), (range(n_terms), [col_of[t] for t in targets])),
        shape=(n_terms, len(folded_vocab)),
    )
    folded = (matrix.weights @ mapping).tocsr()
    from dataclasses import replace

    return replace(
        matrix, vocabulary=folded_vocab, weights=_l2_normalize_rows(folded).tocsr()
    )


# ---------------------------------------------------------------------------
# composite vectors for the activity phase


@dataclass(frozen=True)
class CompositeSpace:
    """Folded subject+body vectors whose Euclidean metric is the activity distance."""

    email_ids: tuple[int, ...]
    vectors: np.ndarray  # len(email_ids) x (subject_dim + body_dim)
    subject_matrix: TermMatrix
    body_matrix: TermMatrix
    w_subject: float
    w_body: float

    def rows_for(self, ids: list[int] | tuple[int, ...]) -> np.ndarray:
        index = {e: i for i, e in enumerate(self.email_ids)}
        return self.vectors[[index[i] for i in ids]]

    def pairwise(self, ids: list[int] | tuple[int, ...]) -> np.ndarray:
        rows = self.rows_for(ids)
        diff = rows[:, None, :] - rows[None, :, :]
        return np.sqrt(np.maximum(0.0, (diff**2).sum(axis=2)))


def composite_space(
    subject_matrix: TermMatrix,
    body_matrix: TermMatrix,
    spec: DistanceSpec,
    synonyms: dict[str, str] | None = None,
) -> CompositeSpace:
    """Concatenate sqrt(w/2)-scaled field rows so Euclid stays in [0, 1]."""
    if subject_matrix.doc_ids != body_matrix.doc_ids:
        raise ContractError("subject and body matrices cover different documents")
    subj, body = subject_matrix, body_matrix
    if spec.use_synonyms and synonyms:
        subj = fold_synonyms(subj, synonyms)
        body = fold_synonyms(body, synonyms)
    total = spec.w_subject + spec.w_body
    if total <= 0:
        raise ContractError("activity distance needs positive subject/body weight")
    ws, wb = spec.w_subject / total, spec.w_body / total
    vectors = np.hstack(
        [
            np.sqrt(ws / 2.0) * subj.dense(),
            np.sqrt(wb / 2.0) * body.dense(),
        ]
    )
    return CompositeSpace(
        email_ids=subj.doc_ids,
        vectors=vectors,
        subject_matrix=subj,
        body_matrix=body,
        w_subject=ws,
        w_body=wb,
    )


# ---------------------------------------------------------------------------
# phase 2: topic clustering


def _auto_cut(dendrogram: Dendrogram, pairwise: np.ndarray, ids: list[int]) -> FlatClustering:
    """Silhouette-best k over 2..min(10, n-1); falls back to k=1 for tiny inputs."""
    n = len(ids)
    if n < 3:
        return cut(dendrogram, k=min(n, 1) if n == 1 else 2)
    best = None
    for k in range(2, min(10, n - 1) + 1):
        flat = cut(dendrogram, k=k)
        score = silhouette(flat, pairwise, ids)
        if best is None or score > best[0] + 1e-12:
            best = (score, k, flat)
    return best[2]


def _apply_cut(
    dendrogram: Dendrogram, pairwise: np.ndarray, ids: list[int], target: CutTarget
) -> FlatClustering:
    if target.k is not None:
        return cut(dendrogram, k=target.k)
    if target.height is not None:
        return cut(dendrogram, height=target.height)
    return _auto_cut(dendrogram, pairwise, ids)


def cluster_topics(
    corpus: Corpus,
    subject_matrix: TermMatrix,
    body_matrix: TermMatrix,
    spec: DistanceSpec,
    target: CutTarget = CutTarget(),
) -> tuple[Dendrogram, list[TopicCluster], FlatClustering]:
    """Complete-linkage topic clustering over subject+body distance."""
    if len(corpus) == 0:
        raise CorpusError("empty corpus")
    if spec.w_time != 0:
        raise ContractError("topic clustering must not weight timestamps")
    vectors = corpus_vectors(corpus, subject_matrix, body_matrix)
    ids = corpus.ids()
    pairwise = pairwise_distances(vectors, spec)
    dendrogram = agglomerative(ids, pairwise, "complete")
    flat = _apply_cut(dendrogram, pairwise, ids, target)
    clusters = [
        TopicCluster(cluster_id=c, email_ids=members)
        for c, members in enumerate(flat.clusters())
    ]
    return dendrogram, clusters, flat


# ---------------------------------------------------------------------------
# phase 3.1: process instances


def discover_instances(
    tc: TopicCluster,
    corpus: Corpus,
    subject_matrix: TermMatrix,
    body_matrix: TermMatrix,
    spec: DistanceSpec,
    target: CutTarget = CutTarget(),
) -> tuple[Dendrogram, list[ProcessInstance]]:
    """Hierarchical sub-clustering of one topic cluster into instances."""
    sub = corpus.subset(tc.email_ids)
    vectors = corpus_vectors(
        sub,
        _select_rows(subject_matrix, sub.ids()),
        _select_rows(body_matrix, sub.ids()),
    )
    ids = sub.ids()
    pairwise = pairwise_distances(vectors, spec)
    dendrogram = agglomerative(ids, pairwise, "complete")
    flat = _apply_cut(dendrogram, pairwise, ids, target)

    groups = flat.clusters()
    by_time = {e.id: e.timestamp for e in sub.emails}
    ordered = sorted(groups, key=lambda g: (min(by_time[i] for i in g), min(g)))
    instances = []
    for local_id, members in enumerate(ordered):
        chronological = tuple(sorted(members, key=lambda i: (by_time[i], i)))
        instances.append(
            ProcessInstance(
                instance_id=local_id,
                topic_cluster_id=tc.cluster_id,
                email_ids=chronological,
            )
        )
    return dendrogram, instances


def _select_rows(matrix: TermMatrix, ids: list[int]) -> TermMatrix:
    from dataclasses import replace

    index = {e: i for i, e in enumerate(matrix.doc_ids)}
    rows = [index[i] for i in ids]
    return replace(matrix, doc_ids=tuple(ids), weights=matrix.weights[rows].tocsr())


# ---------------------------------------------------------------------------
# phase 3.2: k estimation and centroid seeding


def estimate_k(instances: list[ProcessInstance]) -> InstanceStats:
    """k0 = banker's-rounded mean instance size, clamped to [2, total emails]."""
    if not instances:
        raise ContractError("need at least one instance")
    sizes = tuple(sorted(len(inst.email_ids) for inst in instances))
    average = float(np.mean(sizes))
    total = sum(sizes)
    k0 = int(round(average))
    k0 = max(2, min(k0, total))
    return InstanceStats(average_size=average, sizes=sizes, initial_k=k0)


def select_seed_instance(
    instances: list[ProcessInstance],
    stats: InstanceStats,
    corpus: Corpus,
    override: int | None = None,
) -> ProcessInstance:
    """Instance sized closest to round(N); ties go to the earliest start."""
    if override is not None:
        for inst in instances:
            if inst.instance_id == override:
                return inst
        raise ContractError(f"no instance with id {override}")
    target = round(stats.average_size)

    def sort_key(inst: ProcessInstance):
        first = min(corpus.by_id(i).timestamp for i in inst.email_ids)
        return (abs(len(inst.email_ids) - target), first, inst.instance_id)

    return min(instances, key=sort_key)


def _farthest_point_subset(candidates: list[int], k: int, space: CompositeSpace) -> list[int]:
    """Greedy max-min selection, deterministic: ties resolve to the lowest id."""
    dist = space.pairwise(candidates)
    n = len(candidates)
    if k >= n:
        return list(candidates)
    # start from the most mutually distant pair (lowest ids on ties)
    best = (-1.0, 0, 1)
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] > best[0] + 1e-12:
                best = (dist[i, j], i, j)
    chosen = [best[1], best[2]]
    while len(chosen) < k:
        remaining = [i for i in range(n) if i not in chosen]
        gaps = [(min(dist[i, c] for c in chosen), -candidates[i], i) for i in remaining]
        gaps.sort(key=lambda t: (-t[0], -t[1]))
        chosen.append(gaps[0][2])
    picked = [candidates[i] for i in chosen]
    return sorted(picked, key=lambda e: candidates.index(e))


def seed_centroids(
    seed: ProcessInstance,
    k: int,
    tc: TopicCluster,
    space: CompositeSpace,
) -> tuple[np.ndarray, list[int]]:
    """Centroids from the seed instance's emails, padded/trimmed to k."""
    seed_ids = list(seed.email_ids)
    if k == len(seed_ids):
        chosen = seed_ids
    elif k < len(seed_ids):
        chosen = _farthest_point_subset(seed_ids, k, space)
    else:
        chosen = list(seed_ids)
        pool = [i for i in tc.email_ids if i not in chosen]
        all_ids = chosen + pool
        dist = space.pairwise(all_ids)
        while len(chosen) < k and pool:
            gaps = []
            for email in pool:
                gi = all_ids.index(email)
                gap = min(dist[gi, all_ids.index(c)] for c in chosen)
                gaps.append((gap, -email, email))
            gaps.sort(key=lambda t: (-t[0], -t[1]))
            chosen.append(gaps[0][2])
            pool.remove(gaps[0][2])
        if len(chosen) < k:
            raise ContractError(f"topic cluster too small for k={k}")
    return space.rows_for(chosen), chosen


# ---------------------------------------------------------------------------
# phase 3.3: activity clustering with a k sweep


def default_k_sweep(stats: InstanceStats, cluster_size: int) -> list[int]:
    k0 = stats.initial_k
    lo, hi = max(2, k0 - 2), min(cluster_size, k0 + 2)
    return list(range(lo, hi + 1))


@dataclass(frozen=True)
class ActivitySweepEntry:
    k: int
    assignments: dict[int, int]
    report: QualityReport


@dataclass(frozen=True)
class ActivityResult:
    clusters: list[ActivityCluster]
    chosen_k: int
    sweep: list[ActivitySweepEntry]
    centroids: np.ndarray  # re-ordered to match cluster order
    seed_email_ids: tuple[int, ...]


def cluster_activities(
    tc: TopicCluster,
    instances: list[ProcessInstance],
    seed: ProcessInstance,
    space: CompositeSpace,
    k_values: list[int],
    chosen_k: int | None = None,
    activity_id_base: int = 0,
) -> ActivityResult:
    """Seeded k-means per k; the kept k maximizes silhouette unless forced."""
    if not set(seed.email_ids) <= set(tc.email_ids):
        raise ContractError("seed instance is not part of the topic cluster")
    ids = list(tc.email_ids)
    X = space.rows_for(ids)
    pairwise = space.pairwise(ids)

    sweep: list[ActivitySweepEntry] = []
    results: dict[int, tuple] = {}
    for k in k_values:
        if not 1 <= k <= len(ids):
            raise ContractError(f"swept k={k} outside [1, {len(ids)}]")
        centroids, seed_ids = seed_centroids(seed, k, tc, space)
        cfg = KMeansConfig(k=k, initial_centroids=centroids)
        result = kmeans(X, cfg)
        flat = result.flat(ids)
        report = quality(flat, pairwise=pairwise, ids=ids)
        sweep.append(ActivitySweepEntry(k=k, assignments=dict(flat.assignments), report=report))
        results[k] = (result, flat, seed_ids)

    if chosen_k is None:
        scored = [e for e in sweep if e.report.silhouette is not None]
        pick = max(scored, key=lambda e: (e.report.silhouette, -e.k)) if scored else sweep[0]
        chosen_k = pick.k
    if chosen_k not in results:
        centroids, seed_ids = seed_centroids(seed, chosen_k, tc, space)
        result = kmeans(X, KMeansConfig(k=chosen_k, initial_centroids=centroids))
        flat = result.flat(ids)
        results[chosen_k] = (result, flat, seed_ids)
        sweep.append(
            ActivitySweepEntry(
                k=chosen_k,
                assignments=dict(flat.assignments),
                report=quality(flat, pairwise=pairwise, ids=ids),
            )
        )

    result, flat, seed_ids = results[chosen_k]
    groups = flat.clusters()  # ordered by smallest member id
    clusters = []
    centroid_rows = []
    for offset, members in enumerate(groups):
        med = medoid(set(members), pairwise, ids)
        clusters.append(
            ActivityCluster(
                activity_id=activity_id_base + offset,
                topic_cluster_id=tc.cluster_id,
                email_ids=members,
                medoid_id=med,
            )
        )
        original = flat.assignments[members[0]]
        centroid_rows.append(result.centroids[original])
    return ActivityResult(
        clusters=clusters,
        chosen_k=chosen_k,
        sweep=sweep,
        centroids=np.array(centroid_rows),
        seed_email_ids=tuple(seed_ids),
    )
