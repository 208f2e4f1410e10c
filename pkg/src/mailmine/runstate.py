"""Single-file pipeline state: every phase output, reloadable across sessions.

The run file stores the corpus path plus a SHA-256 digest (the corpus itself
is re-read and verified on load), the full configuration, dendrograms, flat
clusters, instances, activity clusters with their k sweep, the classify
model, and the label store. Writes are crash-safe (write then rename) and
byte-deterministic (sorted keys, fixed indentation).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .cluster.hierarchy import Dendrogram, FlatClustering, Merge
from .cluster.metrics import QualityReport, silhouette
from .config import PipelineConfig
from .errors import ContractError, PhaseOrderError
from .ingest import Corpus, parse_csv
from .pipeline import (
    ActivityCluster,
    ActivityResult,
    CompositeSpace,
    CutTarget,
    ProcessInstance,
    TopicCluster,
    cluster_activities,
    cluster_topics,
    composite_space,
    default_k_sweep,
    discover_instances,
    estimate_k,
    load_synonyms,
    select_seed_instance,
)
from .textprep import apply_subject_boost, build_term_matrix, tfidf_normalize

RUN_VERSION = 1


def corpus_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dendrogram_to_dict(d: Dendrogram) -> dict:
    return {
        "leaves": list(d.leaves),
        "merges": [[m.left, m.right, float(m.height)] for m in d.merges],
        "linkage": d.linkage,
    }


def _dendrogram_from_dict(raw: dict) -> Dendrogram:
    return Dendrogram(
        leaves=tuple(raw["leaves"]),
        merges=tuple(Merge(left=m[0], right=m[1], height=float(m[2])) for m in raw["merges"]),
        linkage=raw["linkage"],
    )


def _report_to_dict(r: QualityReport) -> dict:
    return {k: (None if v is None else float(v)) for k, v in r.as_dict().items()}


@dataclass
class TopicsState:
    dendrogram: Dendrogram
    clusters: list[TopicCluster]
    cut_k: int
    silhouette: float | None


@dataclass
class InstancesState:
    dendrogram: Dendrogram
    instances: list[ProcessInstance]
    cut_k: int


@dataclass
class ActivitiesState:
    stats_average: float
    stats_sizes: list[int]
    stats_initial_k: int
    seed_instance_id: int
    seed_email_ids: list[int]
    chosen_k: int
    sweep: list[dict]
    clusters: list[ActivityCluster]
    centroids: np.ndarray
    model: dict


@dataclass
class RunState:
    corpus_path: str
    corpus: Corpus
    digest: str
    config: PipelineConfig
    topics: TopicsState | None = None
    instances: dict[int, InstancesState] = field(default_factory=dict)
    activities: dict[int, ActivitiesState] = field(default_factory=dict)
    activity_labels: dict[int, dict] = field(default_factory=dict)  # id -> {label, labeled_by}
    topic_labels: dict[int, str] = field(default_factory=dict)
    label_audit: list[dict] = field(default_factory=list)

    # ---- matrices (recomputed deterministically, cached per process) ----

    def _matrices(self):
        if not hasattr(self, "_matrix_cache"):
            subj = tfidf_normalize(build_term_matrix(self.corpus, "subject", self.config.cleansing))
            body = apply_subject_boost(
                tfidf_normalize(build_term_matrix(self.corpus, "body", self.config.cleansing)),
                self.corpus,
                self.config.boost,
                self.config.cleansing,
            )
            self._matrix_cache = (subj, body)
        return self._matrix_cache

    def synonym_table(self) -> dict[str, str]:
        return load_synonyms(self.config.synonyms_path)

    def activity_space(self) -> CompositeSpace:
        subj, body = self._matrices()
        return composite_space(subj, body, self.config.activity_distance, self.synonym_table())

    # ---- phase runners (shared by CLI and HTTP service) ----

    def run_topics(self, k: int | None = None, height: float | None = None) -> TopicsState:
        subj, body = self._matrices()
        target = self.config.topic_cut if k is None and height is None else CutTarget(k=k, height=height)
        dendrogram, clusters, flat = cluster_topics(
            self.corpus, subj, body, self.config.topic_distance, target
        )
        score = None
        if 2 <= flat.k <= len(self.corpus) - 1:
            from .cluster.distance import corpus_vectors, pairwise_distances

            vecs = corpus_vectors(self.corpus, subj, body)
            score = silhouette(flat, pairwise_distances(vecs, self.config.topic_distance), self.corpus.ids())
        self.topics = TopicsState(
            dendrogram=dendrogram, clusters=clusters, cut_k=flat.k, silhouette=score
        )
        # downstream phases are stale now
        self.instances = {}
        self.activities = {}
        self.activity_labels = {}
        self.topic_labels = {}
        return self.topics

    def topic_by_id(self, topic_id: int) -> TopicCluster:
        if self.topics is None:
            raise PhaseOrderError("run the topics phase first")
        for tc in self.topics.clusters:
            if tc.cluster_id == topic_id:
                return tc
        raise KeyError(topic_id)

    def run_instances(self, topic_id: int | None = None, k: int | None = None,
                      height: float | None = None) -> dict[int, InstancesState]:
        if self.topics is None:
            raise PhaseOrderError("run the topics phase first")
        targets = [self.topic_by_id(topic_id)] if topic_id is not None else self.topics.clusters
        subj, body = self._matrices()
        use_cfg = k is None and height is None
        for tc in targets:
            target = self.config.instance_cut if use_cfg else CutTarget(k=k, height=height)
            if target.k is not None and target.k > len(tc.email_ids):
                target = CutTarget(k=len(tc.email_ids))
            dendrogram, instances = discover_instances(
                tc, self.corpus, subj, body, self.config.instance_distance, target
            )
            self.instances[tc.cluster_id] = InstancesState(
                dendrogram=dendrogram, instances=instances, cut_k=len(instances)
            )
            # activity results for this topic are stale
            self.activities.pop(tc.cluster_id, None)
            stale = [a for a in self.activity_labels if a // 100 == tc.cluster_id]
            for a in stale:
                del self.activity_labels[a]
        return self.instances

    def run_activities(self, topic_id: int, k: int | None = None,
                       seed_override: int | None = None) -> ActivitiesState:
        if topic_id not in self.instances:
            raise PhaseOrderError("run the instances phase for this topic first")
        tc = self.topic_by_id(topic_id)
        instances = self.instances[topic_id].instances
        stats = estimate_k(instances)
        seed = select_seed_instance(
            instances, stats, self.corpus,
            override=seed_override if seed_override is not None else self.config.seed_instance,
        )
        space = self.activity_space()
        sweep_values = default_k_sweep(stats, len(tc.email_ids))
        radius = self.config.k_sweep_radius
        if radius != 2:
            lo = max(2, stats.initial_k - radius)
            hi = min(len(tc.email_ids), stats.initial_k + radius)
            sweep_values = list(range(lo, hi + 1))
        chosen = k if k is not None else self.config.activity_k
        result = cluster_activities(
            tc, instances, seed, space, sweep_values,
            chosen_k=chosen, activity_id_base=topic_id * 100,
        )
        model = self._build_vector_model(space)
        self.activities[topic_id] = ActivitiesState(
            stats_average=stats.average_size,
            stats_sizes=list(stats.sizes),
            stats_initial_k=stats.initial_k,
            seed_instance_id=seed.instance_id,
            seed_email_ids=list(result.seed_email_ids),
            chosen_k=result.chosen_k,
            sweep=[
                {
                    "k": entry.k,
                    "assignments": {str(i): int(c) for i, c in sorted(entry.assignments.items())},
                    "report": _report_to_dict(entry.report),
                }
                for entry in result.sweep
            ],
            clusters=result.clusters,
            centroids=result.centroids,
            model=model,
        )
        stale = [a for a in self.activity_labels if a // 100 == topic_id]
        for a in stale:
            del self.activity_labels[a]
        return self.activities[topic_id]

    def _build_vector_model(self, space: CompositeSpace) -> dict:
        """Per-term folded position and multiplier so new emails can be vectorized."""
        cfg = self.config.cleansing
        table = self.synonym_table() if self.config.activity_distance.use_synonyms else {}
        from .textprep import build_term_matrix as _btm, subject_term_set

        model: dict[str, Any] = {
            "w_subject": float(space.w_subject),
            "w_body": float(space.w_body),
            "subject_dim": len(space.subject_matrix.vocabulary),
            "body_dim": len(space.body_matrix.vocabulary),
        }
        n_docs = len(self.corpus)
        boosted = subject_term_set(self.corpus, cfg)
        for field_name, folded, use_boost in (
            ("subject", space.subject_matrix, False),
            ("body", space.body_matrix, True),
        ):
            counts = _btm(self.corpus, field_name, cfg)
            df = np.asarray((counts.weights > 0).sum(axis=0)).ravel()
            pos = {term: j for j, term in enumerate(folded.vocabulary)}
            terms = {}
            for j, term in enumerate(counts.vocabulary):
                idf = float(np.log(n_docs / df[j])) if df[j] else 0.0
                mult = idf
                if use_boost and term in boosted:
                    mult *= self.config.boost.subject_term_weight
                folded_term = table.get(term, term)
                terms[term] = [pos[folded_term], mult]
            model[f"{field_name}_terms"] = terms
        return model

    # ---- labels ----

    def all_activities(self) -> list[ActivityCluster]:
        out: list[ActivityCluster] = []
        for topic_id in sorted(self.activities):
            out.extend(self.activities[topic_id].clusters)
        return out

    def activity_by_id(self, activity_id: int) -> ActivityCluster:
        for cluster in self.all_activities():
            if cluster.activity_id == activity_id:
                return cluster
        raise KeyError(activity_id)

    def assign_label(self, activity_id: int, label: str, labeled_by: str = "user") -> None:
        label = label.strip()
        if not label:
            raise ContractError("label must be non-empty")
        self.activity_by_id(activity_id)  # raises KeyError when unknown
        previous = self.activity_labels.get(activity_id)
        if previous is not None and previous["label"] != label:
            self.label_audit.append(
                {"activity_id": activity_id, "previous": previous["label"], "new": label}
            )
        self.activity_labels[activity_id] = {"label": label, "labeled_by": labeled_by}

    def label_of(self, activity_id: int) -> str | None:
        entry = self.activity_labels.get(activity_id)
        return entry["label"] if entry else None

    def unlabeled_activities(self, topic_id: int | None = None) -> list[int]:
        clusters = (
            self.activities[topic_id].clusters
            if topic_id is not None and topic_id in self.activities
            else self.all_activities()
        )
        return [c.activity_id for c in clusters if c.activity_id not in self.activity_labels]

    def email_label(self, email_id: int) -> str | None:
        for cluster in self.all_activities():
            if email_id in cluster.email_ids:
                return self.label_of(cluster.activity_id)
        return None

    # ---- persistence ----

    def to_dict(self) -> dict:
        payload: dict[str, Any] = {
            "version": RUN_VERSION,
            "corpus_path": self.corpus_path,
            "corpus_digest": self.digest,
            "config": self.config.to_dict(),
            "topics": None,
            "instances": {},
            "activities": {},
            "labels": {
                "activities": {
                    str(a): dict(entry) for a, entry in sorted(self.activity_labels.items())
                },
                "topics": {str(t): lbl for t, lbl in sorted(self.topic_labels.items())},
                "audit": list(self.label_audit),
            },
        }
        if self.topics is not None:
            payload["topics"] = {
                "dendrogram": _dendrogram_to_dict(self.topics.dendrogram),
                "cut_k": self.topics.cut_k,
                "silhouette": self.topics.silhouette,
                "clusters": [
                    {
                        "cluster_id": tc.cluster_id,
                        "email_ids": list(tc.email_ids),
                        "label": tc.label,
                    }
                    for tc in self.topics.clusters
                ],
            }
        for topic_id, state in sorted(self.instances.items()):
            payload["instances"][str(topic_id)] = {
                "dendrogram": _dendrogram_to_dict(state.dendrogram),
                "cut_k": state.cut_k,
                "instances": [
                    {"instance_id": inst.instance_id, "email_ids": list(inst.email_ids)}
                    for inst in state.instances
                ],
            }
        for topic_id, state in sorted(self.activities.items()):
            payload["activities"][str(topic_id)] = {
                "stats": {
                    "average_size": state.stats_average,
                    "sizes": state.stats_sizes,
                    "initial_k": state.stats_initial_k,
                },
                "seed_instance_id": state.seed_instance_id,
                "seed_email_ids": state.seed_email_ids,
                "chosen_k": state.chosen_k,
                "sweep": state.sweep,
                "clusters": [
                    {
                        "activity_id": c.activity_id,
                        "email_ids": list(c.email_ids),
                        "medoid_id": c.medoid_id,
                    }
                    for c in state.clusters
                ],
                "centroids": [[float(x) for x in row] for row in state.centroids],
                "model": state.model,
            }
        return payload

    def save(self, path: str | Path) -> None:
        path = Path(path)
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, "utf-8")
        os.replace(tmp, path)

    @staticmethod
    def create(corpus_path: str | Path, config: PipelineConfig) -> "RunState":
        corpus = parse_csv(corpus_path, receiver_delimiter=config.receiver_delimiter)
        return RunState(
            corpus_path=str(corpus_path),
            corpus=corpus,
            digest=corpus_digest(corpus_path),
            config=config,
        )

    @staticmethod
    def load(path: str | Path) -> "RunState":
        raw = json.loads(Path(path).read_text("utf-8"))
        if raw.get("version") != RUN_VERSION:
            raise ContractError(f"unsupported run file version {raw.get('version')}")
        config = PipelineConfig.from_dict(raw["config"])
        digest = corpus_digest(raw["corpus_path"])
        if digest != raw["corpus_digest"]:
            raise ContractError("corpus file changed since the run was created")
        state = RunState.create(raw["corpus_path"], config)
        if raw["topics"] is not None:
            t = raw["topics"]
            state.topics = TopicsState(
                dendrogram=_dendrogram_from_dict(t["dendrogram"]),
                clusters=[
                    TopicCluster(
                        cluster_id=c["cluster_id"],
                        email_ids=tuple(c["email_ids"]),
                        label=c["label"],
                    )
                    for c in t["clusters"]
                ],
                cut_k=t["cut_k"],
                silhouette=t["silhouette"],
            )
        for topic_id, entry in raw["instances"].items():
            state.instances[int(topic_id)] = InstancesState(
                dendrogram=_dendrogram_from_dict(entry["dendrogram"]),
                instances=[
                    ProcessInstance(
                        instance_id=i["instance_id"],
                        topic_cluster_id=int(topic_id),
                        email_ids=tuple(i["email_ids"]),
                    )
                    for i in entry["instances"]
                ],
                cut_k=entry["cut_k"],
            )
        for topic_id, entry in raw["activities"].items():
            state.activities[int(topic_id)] = ActivitiesState(
                stats_average=entry["stats"]["average_size"],
                stats_sizes=list(entry["stats"]["sizes"]),
                stats_initial_k=entry["stats"]["initial_k"],
                seed_instance_id=entry["seed_instance_id"],
                seed_email_ids=list(entry["seed_email_ids"]),
                chosen_k=entry["chosen_k"],
                sweep=entry["sweep"],
                clusters=[
                    ActivityCluster(
                        activity_id=c["activity_id"],
                        topic_cluster_id=int(topic_id),
                        email_ids=tuple(c["email_ids"]),
                        medoid_id=c["medoid_id"],
                    )
                    for c in entry["clusters"]
                ],
                centroids=np.array(entry["centroids"], dtype=float),
                model=entry["model"],
            )
        labels = raw["labels"]
        state.activity_labels = {int(a): dict(e) for a, e in labels["activities"].items()}
        state.topic_labels = {int(t): lbl for t, lbl in labels["topics"].items()}
        state.label_audit = list(labels["audit"])
        return state
