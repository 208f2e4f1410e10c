"""Medoid labeling and nearest-centroid activity recommendation.

Labels attach to activity clusters; every member email inherits its
cluster's label. New emails are vectorized against the run's vocabulary
(out-of-vocabulary terms dropped) and classified by the nearest k-means
centroid in the composite subject+body space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster.metrics import medoid
from .errors import ContractError, PhaseOrderError
from .ingest import Email
from .runstate import RunState
from .textprep import cleanse


@dataclass(frozen=True)
class LabelEntry:
    activity_id: int
    label: str
    labeled_by: str  # "user" | "file"
    medoid_email_id: int
    centroid: np.ndarray


@dataclass(frozen=True)
class ClassificationResult:
    email_id: int | None
    predicted_activity_id: int | None
    predicted_label: str | None
    distance_to_centroid: float | None
    confidence: float | None
    unclassifiable: bool = False


def label_store(run: RunState) -> dict[int, LabelEntry]:
    """Materialize the persistent label store: one entry per labeled activity."""
    entries: dict[int, LabelEntry] = {}
    for topic_id, state in run.activities.items():
        for offset, cluster in enumerate(state.clusters):
            raw = run.activity_labels.get(cluster.activity_id)
            if raw is None:
                continue
            entries[cluster.activity_id] = LabelEntry(
                activity_id=cluster.activity_id,
                label=raw["label"],
                labeled_by=raw["labeled_by"],
                medoid_email_id=cluster.medoid_id,
                centroid=state.centroids[offset],
            )
    return entries


def propose_medoids(run: RunState) -> list[tuple[int, Email]]:
    """One (activity_id, medoid email) pair per activity cluster, for display."""
    clusters = run.all_activities()
    if not clusters:
        raise PhaseOrderError("run lacks activity clusters")
    return [(c.activity_id, run.corpus.by_id(c.medoid_id)) for c in clusters]


def assign_label(run: RunState, activity_id: int, label: str, labeled_by: str = "user") -> None:
    run.assign_label(activity_id, label, labeled_by)


def load_labels_csv(path: str | Path) -> list[tuple[int, str]]:
    """Bulk label file: activity_id,label rows with an optional header."""
    out: list[tuple[int, str]] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            if row[0].strip().lower() == "activity_id":
                continue
            if len(row) < 2:
                raise ContractError(f"labels row needs activity_id,label: {row!r}")
            out.append((int(row[0]), row[1]))
    return out


def apply_labels_file(run: RunState, path: str | Path) -> int:
    pairs = load_labels_csv(path)
    for activity_id, label in pairs:
        run.assign_label(activity_id, label, labeled_by="file")
    return len(pairs)


def vectorize_email(email: Email, run: RunState, topic_id: int) -> np.ndarray | None:
    """Composite vector using the stored per-term multipliers; None if empty."""
    if topic_id not in run.activities:
        raise PhaseOrderError("run the activities phase for this topic first")
    model = run.activities[topic_id].model
    parts = []
    any_mass = False
    for field_name, weight_key in (("subject", "w_subject"), ("body", "w_body")):
        terms: dict = model[f"{field_name}_terms"]
        dim = model[f"{field_name}_dim"]
        vec = np.zeros(dim)
        for token in cleanse(getattr(email, field_name), run.config.cleansing):
            hit = terms.get(token)
            if hit is None:
                continue  # out-of-vocabulary terms are dropped
            pos, mult = hit
            vec[pos] += mult
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
            any_mass = True
        parts.append(np.sqrt(model[weight_key] / 2.0) * vec)
    if not any_mass:
        return None
    return np.concatenate(parts)


def classify(email: Email, run: RunState, topic_id: int | None = None) -> ClassificationResult:
    """Nearest labeled centroid; confidence = 1 - d1/(d1+d2), 1.0 if one centroid."""
    store = label_store(run)
    if not store:
        raise PhaseOrderError("no labeled activities to classify against")
    if topic_id is None:
        labeled_topics = sorted({a // 100 for a in store})
        topic_id = labeled_topics[0]
    entries = [e for e in store.values() if e.activity_id // 100 == topic_id]
    if not entries:
        raise PhaseOrderError(f"topic {topic_id} has no labeled activities")
    vec = vectorize_email(email, run, topic_id)
    if vec is None:
        return ClassificationResult(
            email_id=email.id,
            predicted_activity_id=None,
            predicted_label=None,
            distance_to_centroid=None,
            confidence=None,
            unclassifiable=True,
        )
    scored = sorted(
        ((float(np.linalg.norm(vec - e.centroid)), e.activity_id, e) for e in entries),
        key=lambda t: (t[0], t[1]),
    )
    d1, _, best = scored[0]
    if len(scored) == 1:
        confidence = 1.0
    else:
        d2 = scored[1][0]
        confidence = 1.0 if d1 + d2 == 0 else 1.0 - d1 / (d1 + d2)
    return ClassificationResult(
        email_id=email.id,
        predicted_activity_id=best.activity_id,
        predicted_label=best.label,
        distance_to_centroid=d1,
        confidence=confidence,
    )
