"""Input validation helpers for the clustering engines."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def check_distance_matrix(matrix: np.ndarray, n: int | None = None, atol: float = 1e-9) -> np.ndarray:
    """Require a square, symmetric, non-negative matrix with a zero diagonal."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractError(f"distance matrix must be square, got shape {matrix.shape}")
    if n is not None and matrix.shape[0] != n:
        raise ContractError(f"distance matrix is {matrix.shape[0]}x{matrix.shape[0]}, expected {n}")
    if np.any(matrix < -atol):
        raise ContractError("distance matrix has negative entries")
    if not np.allclose(matrix, matrix.T, atol=atol):
        raise ContractError("distance matrix is not symmetric")
    if not np.allclose(np.diag(matrix), 0.0, atol=atol):
        raise ContractError("distance matrix diagonal is not zero")
    return matrix


def check_vectors(X, min_rows: int = 1) -> np.ndarray:
    """Require a finite 2-D float array with at least `min_rows` rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ContractError(f"expected a 2-D array, got ndim={X.ndim}")
    if X.shape[0] < min_rows:
        raise ContractError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ContractError("vectors contain NaN or infinite entries")
    return X


def check_same_universe(a: dict[int, int], b: dict[int, int]) -> list[int]:
    """Two flat clusterings must label exactly the same ids."""
    if set(a) != set(b):
        raise ContractError("clusterings cover different id universes")
    return sorted(a)
