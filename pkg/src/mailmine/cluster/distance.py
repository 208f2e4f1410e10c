"""Composite email distances in [0, 1].

Each component is a normalized dissimilarity:
  - subject / body: Euclidean distance of unit-L2 TF-IDF rows divided by
    sqrt(2), so non-negative vectors land in [0, 1];
  - time: min(1, delta_t / t_max);
  - participants: 0 when sender/receiver sets intersect, else 1.
Weights are renormalized to sum to one, so the blend stays in [0, 1].

Zero-vector rule: two emptied documents are identical (distance 0); an
emptied document against a non-empty one is maximally distant (1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from ..errors import ContractError

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class DistanceSpec:
    w_subject: float = 0.05
    w_body: float = 0.95
    w_time: float = 0.0
    t_max: timedelta = timedelta(days=14)
    use_synonyms: bool = False
    w_participants: float = 0.0

    def __post_init__(self) -> None:
        weights = (self.w_subject, self.w_body, self.w_time, self.w_participants)
        if any(w < 0 for w in weights):
            raise ContractError("distance weights must be non-negative")
        if sum(weights) <= 0:
            raise ContractError("at least one distance weight must be positive")
        if self.t_max.total_seconds() <= 0:
            raise ContractError("t_max must be a positive duration")

    def normalized(self) -> tuple[float, float, float, float]:
        total = self.w_subject + self.w_body + self.w_time + self.w_participants
        return (
            self.w_subject / total,
            self.w_body / total,
            self.w_time / total,
            self.w_participants / total,
        )


@dataclass(frozen=True)
class EmailVectors:
    """Per-email view over shared subject/body matrices plus metadata."""

    email_id: int
    subject: np.ndarray
    body: np.ndarray
    timestamp: datetime
    participants: frozenset[str]
    subject_signature: int = 0
    body_signature: int = 0


def corpus_vectors(corpus, subject_matrix, body_matrix) -> list[EmailVectors]:
    """Pair every corpus email with its rows of the two term matrices."""
    if tuple(corpus.ids()) != subject_matrix.doc_ids or tuple(corpus.ids()) != body_matrix.doc_ids:
        raise ContractError("matrix doc_ids must match the corpus id order")
    subj = subject_matrix.dense()
    body = body_matrix.dense()
    subj_sig = subject_matrix.vocabulary_signature()
    body_sig = body_matrix.vocabulary_signature()
    return [
        EmailVectors(
            email_id=e.id,
            subject=subj[i],
            body=body[i],
            timestamp=e.timestamp,
            participants=e.participants(),
            subject_signature=subj_sig,
            body_signature=body_sig,
        )
        for i, e in enumerate(corpus.emails)
    ]


def _field_distance(a: np.ndarray, b: np.ndarray) -> float:
    a_zero = not np.any(a)
    b_zero = not np.any(b)
    if a_zero and b_zero:
        return 0.0
    if a_zero or b_zero:
        return 1.0
    return min(1.0, float(np.linalg.norm(a - b)) / SQRT2)


def _time_distance(t1: datetime, t2: datetime, t_max: timedelta) -> float:
    delta = abs((t1 - t2).total_seconds())
    return min(1.0, delta / t_max.total_seconds())


def email_distance(a: EmailVectors, b: EmailVectors, spec: DistanceSpec) -> float:
    """Weighted blend of subject, body, time and participant dissimilarities."""
    if a.subject_signature != b.subject_signature or a.body_signature != b.body_signature:
        raise ContractError("emails were vectorized against different vocabularies")
    ws, wb, wt, wp = spec.normalized()
    dist = 0.0
    if ws:
        dist += ws * _field_distance(a.subject, b.subject)
    if wb:
        dist += wb * _field_distance(a.body, b.body)
    if wt:
        dist += wt * _time_distance(a.timestamp, b.timestamp, spec.t_max)
    if wp:
        dist += wp * (0.0 if a.participants & b.participants else 1.0)
    return dist


def _field_distance_matrix(rows: np.ndarray) -> np.ndarray:
    """Pairwise field distances with the zero-vector rules applied."""
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0
    gram = rows @ rows.T
    sq = np.maximum(0.0, 2.0 - 2.0 * gram)  # rows are unit length where nonzero
    dist = np.sqrt(sq) / SQRT2
    np.clip(dist, 0.0, 1.0, out=dist)
    zero = ~nonzero
    dist[zero, :] = 1.0
    dist[:, zero] = 1.0
    dist[np.ix_(zero, zero)] = 0.0
    np.fill_diagonal(dist, 0.0)
    return dist


def pairwise_distances(vectors: list[EmailVectors], spec: DistanceSpec) -> np.ndarray:
    """Symmetric zero-diagonal matrix of email_distance over all pairs."""
    n = len(vectors)
    if n == 0:
        raise ContractError("no vectors given")
    ws, wb, wt, wp = spec.normalized()
    total = np.zeros((n, n))
    if ws:
        total += ws * _field_distance_matrix(np.stack([v.subject for v in vectors]))
    if wb:
        total += wb * _field_distance_matrix(np.stack([v.body for v in vectors]))
    if wt:
        stamps = np.array([v.timestamp.timestamp() for v in vectors])
        delta = np.abs(stamps[:, None] - stamps[None, :])
        total += wt * np.minimum(1.0, delta / spec.t_max.total_seconds())
    if wp:
        overlap = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = 0.0 if vectors[i].participants & vectors[j].participants else 1.0
                overlap[i, j] = overlap[j, i] = d
        total += wp * overlap
    np.fill_diagonal(total, 0.0)
    return total
