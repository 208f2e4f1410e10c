"""Text cleansing and TF-IDF term matrices for email subjects and bodies.

The weighting is the classical tf * ln(D / df), followed by L2 row
normalization. Terms that occur in any email subject can be boosted in the
body matrix before the final normalization so that topic-bearing words
carry extra weight.
"""

from __future__ import annotations

import csv
import string
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ContractError, CorpusError
from .ingest import Corpus

_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})
_DIGIT_TABLE = str.maketrans({ch: "" for ch in string.digits})


def default_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package (one lowercase token per line)."""
    text = resources.files("mailmine.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    text = Path(path).read_text("utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class CleansingConfig:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    remove_numbers: bool = True
    remove_punctuation: bool = True
    lowercase: bool = True
    min_token_length: int = 2

    def __post_init__(self) -> None:
        if self.min_token_length < 1:
            raise ContractError("min_token_length must be >= 1")


@dataclass(frozen=True)
class BoostConfig:
    subject_term_weight: float = 2.0

    def __post_init__(self) -> None:
        if self.subject_term_weight < 1:
            raise ContractError("subject_term_weight must be >= 1")


def cleanse(text: str, cfg: CleansingConfig) -> list[str]:
    """Tokenize free text: lowercase, strip punctuation/digits, drop stopwords."""
    if cfg.lowercase:
        text = text.lower()
    if cfg.remove_punctuation:
        text = text.translate(_PUNCT_TABLE)
    if cfg.remove_numbers:
        text = text.translate(_DIGIT_TABLE)
    tokens = []
    for token in text.split():
        if len(token) < cfg.min_token_length:
            continue
        if token in cfg.stopwords:
            continue
        tokens.append(token)
    return tokens


@dataclass(frozen=True)
class TermMatrix:
    """Sparse document x term matrix over one email field."""

    doc_ids: tuple[int, ...]
    vocabulary: tuple[str, ...]
    weights: sparse.csr_matrix
    field_tag: str  # "subject" or "body"

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def row(self, doc_id: int) -> np.ndarray:
        idx = self.doc_ids.index(doc_id)
        return np.asarray(self.weights[idx].todense()).ravel()

    def dense(self) -> np.ndarray:
        return np.asarray(self.weights.todense())

    def vocabulary_signature(self) -> int:
        return hash(self.vocabulary)


def build_term_matrix(corpus: Corpus, field_name: str, cfg: CleansingConfig) -> TermMatrix:
    """Raw occurrence counts of cleansed tokens, vocabulary sorted lexicographically."""
    if field_name not in ("subject", "body"):
        raise ContractError(f"unknown field {field_name!r}")
    if len(corpus) == 0:
        raise CorpusError("empty corpus")

    token_lists = [cleanse(getattr(e, field_name), cfg) for e in corpus.emails]
    vocabulary = tuple(sorted({tok for tokens in token_lists for tok in tokens}))
    index = {term: j for j, term in enumerate(vocabulary)}

    rows, cols, vals = [], [], []
    for i, tokens in enumerate(token_lists):
        counts: dict[int, int] = {}
        for tok in tokens:
            j = index[tok]
            counts[j] = counts.get(j, 0) + 1
        for j, c in sorted(counts.items()):
            rows.append(i)
            cols.append(j)
            vals.append(float(c))

    weights = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(corpus), len(vocabulary)), dtype=np.float64
    )
    return TermMatrix(
        doc_ids=tuple(corpus.ids()),
        vocabulary=vocabulary,
        weights=weights,
        field_tag=field_name,
    )


def _l2_normalize_rows(matrix: sparse.csr_matrix) -> sparse.csr_matrix:
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sparse.diags(scale) @ matrix


def tfidf_normalize(matrix: TermMatrix) -> TermMatrix:
    """count * ln(D / df) per entry, then unit L2 rows (zero rows stay zero)."""
    counts = matrix.weights.tocsc()
    n_docs = counts.shape[0]
    df = np.asarray((counts > 0).sum(axis=0)).ravel()
    idf = np.zeros_like(df, dtype=np.float64)
    present = df > 0
    idf[present] = np.log(n_docs / df[present])
    weighted = (counts @ sparse.diags(idf)).tocsr()
    return replace(matrix, weights=_l2_normalize_rows(weighted).tocsr())


def subject_term_set(corpus: Corpus, cfg: CleansingConfig) -> frozenset[str]:
    """Union of cleansed tokens over all email subjects."""
    terms: set[str] = set()
    for e in corpus.emails:
        terms.update(cleanse(e.subject, cfg))
    return frozenset(terms)


def apply_subject_boost(
    body_matrix: TermMatrix,
    corpus: Corpus,
    boost: BoostConfig,
    cfg: CleansingConfig,
) -> TermMatrix:
    """Scale body entries of subject-occurring terms, then re-normalize rows."""
    terms = subject_term_set(corpus, cfg)
    scale = np.array(
        [boost.subject_term_weight if t in terms else 1.0 for t in body_matrix.vocabulary]
    )
    boosted = (body_matrix.weights @ sparse.diags(scale)).tocsr()
    return replace(body_matrix, weights=_l2_normalize_rows(boosted).tocsr())


def write_triplets(matrix: TermMatrix, path: str | Path) -> None:
    """Debug dump as doc_id,term,weight rows."""
    coo = matrix.weights.tocoo()
    cells = sorted(zip(coo.row, coo.col, coo.data))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "term", "weight"])
        for i, j, v in cells:
            writer.writerow([matrix.doc_ids[i], matrix.vocabulary[j], repr(v)])
