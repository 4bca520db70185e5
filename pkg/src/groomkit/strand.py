"""Polyline strands, gradient conversion and Euclidean interpolation.

Strands are plain float64 arrays of shape ``(..., n_points, 3)`` in head
coordinates (millimeters, +y up, +z forward). Every function here accepts a
single strand or a batch and never mutates its input.
"""

from __future__ import annotations

import numpy as np

N_POINTS = 100


class DimensionError(ValueError):
    """Shapes of two strands (or a strand and a config) do not agree."""


def as_strands(points, n_points: int | None = None) -> np.ndarray:
    """Validate and return ``points`` as a float64 array of strands."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != 3:
        raise DimensionError(f"expected (..., n, 3) points, got shape {arr.shape}")
    if arr.shape[-2] < 2:
        raise DimensionError("a strand needs at least 2 points")
    if n_points is not None and arr.shape[-2] != n_points:
        raise DimensionError(f"expected {n_points} points per strand, got {arr.shape[-2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("strand coordinates must be finite")
    return arr


def to_gradients(points) -> tuple[np.ndarray, np.ndarray]:
    """Split strands into root positions and per-segment displacements.

    Returns ``(roots, gradients)`` with shapes ``(..., 3)`` and
    ``(..., n - 1, 3)``.
    """
    pts = as_strands(points)
    return pts[..., 0, :].copy(), np.diff(pts, axis=-2)


def from_gradients(roots, gradients) -> np.ndarray:
    """Integrate displacements from a root (sequential prefix sum)."""
    roots = np.asarray(roots, dtype=np.float64)
    grads = np.asarray(gradients, dtype=np.float64)
    if grads.shape[-1] != 3 or roots.shape != grads.shape[:-2] + (3,):
        raise DimensionError(f"root shape {roots.shape} does not match gradients {grads.shape}")
    stacked = np.concatenate([roots[..., None, :], grads], axis=-2)
    # np.add.accumulate is strictly sequential, so point i+1 == point i + d_i
    return np.add.accumulate(stacked, axis=-2)


def interp_euclidean(a, b, t: float) -> np.ndarray:
    """Per-vertex linear blend ``(1 - t) * a + t * b``."""
    a = as_strands(a)
    b = as_strands(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot interpolate strands of shape {a.shape} and {b.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    return (1.0 - t) * a + t * b


def arc_length(points) -> np.ndarray:
    """Cumulative arc length from the root, shape ``(..., n)``."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=-2), axis=-1)
    zeros = np.zeros(seg.shape[:-1] + (1,))
    return np.concatenate([zeros, np.cumsum(seg, axis=-1)], axis=-1)


def resample(points, n_points: int = N_POINTS) -> np.ndarray:
    """Resample one polyline to ``n_points`` uniformly spaced in arc length.

    Degenerate (zero-length) polylines collapse to repeated copies of the root.
    """
    pts = as_strands(points)
    if pts.ndim != 2:
        raise DimensionError("resample works on a single strand")
    s = arc_length(pts)
    total = s[-1]
    if total <= 0.0:
        return np.repeat(pts[:1], n_points, axis=0)
    target = np.linspace(0.0, total, n_points)
    out = np.empty((n_points, 3))
    for axis in range(3):
        out[:, axis] = np.interp(target, s, pts[:, axis])
    out[0] = pts[0]
    return out
