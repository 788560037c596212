"""Quality indicators for approximation sets of maximization problems."""
from __future__ import annotations

import numpy as np

from .problems import dominates


def igd(reference_points: np.ndarray, approximation: np.ndarray) -> float:
    """Inverted generational distance.

    Mean, over the reference set, of the Euclidean distance to the nearest
    point of the approximation set.  Zero iff every reference point is matched
    exactly; an empty approximation set yields +inf.
    """
    ref = np.asarray(reference_points, dtype=float)
    if ref.ndim != 2 or len(ref) == 0:
        raise ValueError("reference set must be a non-empty (k, m) array")
    approx = np.asarray(approximation, dtype=float)
    if approx.size == 0:
        return float("inf")
    if approx.ndim != 2 or approx.shape[1] != ref.shape[1]:
        raise ValueError(f"approximation set must have shape (j, {ref.shape[1]})")
    diff = ref[:, None, :] - approx[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    return float(dists.min(axis=1).mean())


def count_matched_points(reference_points: np.ndarray, approximation: np.ndarray) -> int:
    """Number of reference objective points present (exactly) in the approximation set."""
    ref = np.asarray(reference_points, dtype=float)
    if ref.ndim != 2 or len(ref) == 0:
        raise ValueError("reference set must be a non-empty (k, m) array")
    approx = np.asarray(approximation, dtype=float)
    if approx.size == 0:
        return 0
    found = {tuple(row) for row in approx.tolist()}
    return sum(1 for row in ref.tolist() if tuple(row) in found)


def nondominated_filter(points: np.ndarray) -> np.ndarray:
    """Indices of points not dominated by any other point (maximization).

    Duplicates of a non-dominated point are all kept.  Indices come back in
    ascending order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a (k, m) array")
    keep = []
    for i in range(len(pts)):
        if not any(dominates(pts[j], pts[i]) for j in range(len(pts)) if j != i):
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)
