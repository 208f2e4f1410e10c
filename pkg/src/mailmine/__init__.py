"""mailmine: turn a raw, thread-unaware email log into a process event log.

The pipeline clusters emails by process topic, splits topics into process
instances, groups instance emails into activities with a seeded k-means,
lets a human label activity medoids, and exports CSV/XES event logs plus a
directly-follows graph.
"""

__version__ = "0.1.0"

from .ingest import Corpus, Email, parse_csv, parse_mbox, write_csv
from .textprep import (
    BoostConfig,
    CleansingConfig,
    TermMatrix,
    apply_subject_boost,
    build_term_matrix,
    cleanse,
    default_stopwords,
    tfidf_normalize,
)

__all__ = [
    "BoostConfig",
    "CleansingConfig",
    "Corpus",
    "Email",
    "TermMatrix",
    "apply_subject_boost",
    "build_term_matrix",
    "cleanse",
    "default_stopwords",
    "parse_csv",
    "parse_mbox",
    "tfidf_normalize",
    "write_csv",
    "__version__",
]
