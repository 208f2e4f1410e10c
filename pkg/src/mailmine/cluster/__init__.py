"""Clustering engines: composite email distances, agglomerative hierarchy,
seeded k-means and clustering-quality metrics."""

from .distance import DistanceSpec, EmailVectors, corpus_vectors, email_distance, pairwise_distances
from .hierarchy import AgglomerativeClusterer, Dendrogram, FlatClustering, agglomerative, cut
from .kmeans import KMeansConfig, KMeansResult, SeededKMeans, kmeans
from .metrics import QualityReport, medoid, pair_f_measure, purity, quality, rand_index, silhouette

__all__ = [
    "AgglomerativeClusterer",
    "Dendrogram",
    "DistanceSpec",
    "EmailVectors",
    "FlatClustering",
    "KMeansConfig",
    "KMeansResult",
    "QualityReport",
    "SeededKMeans",
    "agglomerative",
    "corpus_vectors",
    "cut",
    "email_distance",
    "kmeans",
    "medoid",
    "pair_f_measure",
    "pairwise_distances",
    "purity",
    "quality",
    "rand_index",
    "silhouette",
]
