"""
Small numerical helpers shared by the backend modules
"""

import math
from enum import Enum
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

__all__ = ["fsum_rows", "cluster_points", "relative_residuals", "to_jsonable"]


def fsum_rows(matrix: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Compensated weighted row sums: out[k] = sum_l matrix[k, l] * weights[l].

    Complex input is summed separately in its real and imaginary parts.
    :param matrix: (K, N) array
    :param weights: (N,) array
    :return: (K,) array
    """
    products = matrix * weights[None, :]
    if np.iscomplexobj(products):
        re = [math.fsum(row) for row in products.real]
        im = [math.fsum(row) for row in products.imag]
        return np.array(re) + 1j * np.array(im)
    return np.array([math.fsum(row) for row in products], dtype=float)


def cluster_points(points: np.ndarray, radius: float) -> np.ndarray:
    """
    Label points lying within `radius` of each other (transitively) as one cluster.

    Each label is the smallest row index of its cluster, so labels[k] == k
    marks the representative row.
    :param points: (N, d) array
    :param radius: Euclidean merge distance
    :return: (N,) integer array of representative row indices
    """
    n = points.shape[0]
    if n < 2 or radius <= 0:
        return np.arange(n)
    pairs = cKDTree(points).query_pairs(r=radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    first = np.full(count, n)
    np.minimum.at(first, labels, np.arange(n))
    return first[labels]


def relative_residuals(actual: np.ndarray, expected: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """|actual - expected| / scale, falling back to the absolute residual where scale is 0."""
    absolute = np.abs(np.asarray(actual) - np.asarray(expected))
    scale = np.asarray(scale, dtype=float)
    safe = np.where(scale > 0, scale, 1.0)
    return absolute / safe


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays and complex numbers to plain JSON types.

    Complex values become {"re": .., "im": ..}; tuples become lists; inf and
    nan become None.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Enum):
        return value.value
    return value
