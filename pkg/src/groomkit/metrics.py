"""Groom quality metrics: reconstruction errors, messiness, jitter,
penetration and volumetric occupancy/flow comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .groom import Groom
from .parallel import map_chunks
from .scalp import DEFAULT_SCALP, HeadSdf
from .strand import DimensionError

SCHEMA_VERSION = 1
REPORT_KEYS = ("pos_err_mm", "loc_err_mm", "messiness_mm", "jitter_mm_s3",
               "penetration_permille", "iou", "precision", "recall", "l2_flow_mm")


class CorrespondenceError(ValueError):
    """Two grooms cannot be put in strand-to-strand correspondence."""


def _matched(a: Groom, b: Groom) -> tuple[np.ndarray, np.ndarray]:
    """Corresponding point arrays, matched by texel when both carry texels."""
    if a.n_points != b.n_points:
        raise CorrespondenceError(f"strand lengths differ: {a.n_points} vs {b.n_points}")
    if a.texels is not None and b.texels is not None:
        ka = a.texels[:, 0] * (1 << 32) + a.texels[:, 1]
        kb = b.texels[:, 0] * (1 << 32) + b.texels[:, 1]
        if len(np.unique(ka)) == len(ka) and len(np.unique(kb)) == len(kb):
            if len(ka) != len(kb) or not np.array_equal(np.sort(ka), np.sort(kb)):
                raise CorrespondenceError("grooms occupy different texels")
            return a.points[np.argsort(ka, kind="stable")], b.points[np.argsort(kb, kind="stable")]
    if len(a) != len(b):
        raise CorrespondenceError(f"strand counts differ: {len(a)} vs {len(b)}")
    return a.points, b.points


def positional_error(a: Groom, b: Groom) -> float:
    """Mean distance between corresponding vertices (mm)."""
    pa, pb = _matched(a, b)
    if len(pa) == 0:
        return 0.0
    return float(np.linalg.norm(pa - pb, axis=-1).mean(axis=-1).mean())


def local_error(a: Groom, b: Groom) -> float:
    """Mean distance between corresponding gradients (mm)."""
    pa, pb = _matched(a, b)
    if len(pa) == 0:
        return 0.0
    da, db = np.diff(pa, axis=-2), np.diff(pb, axis=-2)
    return float(np.linalg.norm(da - db, axis=-1).mean(axis=-1).mean())


def dataset_error(pairs, metric=positional_error) -> float:
    """Average a metric per groom pair, then across the set."""
    vals = [metric(a, b) for a, b in pairs]
    return float(np.mean(vals)) if vals else 0.0


_RING = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def neighbor_pairs(g: Groom, k_roots: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Directed neighbor pairs ``(i, j)``.

    Grooms with unique texels use the 8-connected texel ring (columns wrap
    around the scalp, rows do not); otherwise each strand's ``k_roots``
    nearest roots are its neighbors.
    """
    n = len(g)
    if g.texels is not None and g.resolution is not None:
        h, w = g.resolution
        flat = g.texels[:, 0] * w + g.texels[:, 1]
        if len(np.unique(flat)) == n:
            grid = np.full(h * w, -1, dtype=np.int64)
            grid[flat] = np.arange(n)
            src, dst = [], []
            for dr, dc in _RING:
                r = g.texels[:, 0] + dr
                c = np.mod(g.texels[:, 1] + dc, w)
                ok = (r >= 0) & (r < h)
                j = np.full(n, -1, dtype=np.int64)
                j[ok] = grid[r[ok] * w + c[ok]]
                keep = j >= 0
                src.append(np.flatnonzero(keep))
                dst.append(j[keep])
            return np.concatenate(src), np.concatenate(dst)
    if n < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    k = min(k_roots, n - 1)
    _, idx = cKDTree(g.roots).query(g.roots, k=k + 1)
    idx = idx.reshape(n, k + 1)
    src = np.repeat(np.arange(n)[:, None], k + 1, axis=1)
    keep = idx != src
    return src[keep], idx[keep]


def messiness(g: Groom, k_roots: int = 4) -> float:
    """Mean per-strand gradient deviation from its neighbors (mm).

    Strands without neighbors are left out of the mean.
    """
    n = len(g)
    if n == 0:
        return 0.0
    src, dst = neighbor_pairs(g, k_roots)
    if len(src) == 0:
        return 0.0
    grads = np.diff(g.points, axis=-2)
    dev = np.empty(len(src))
    for s in range(0, len(src), 16384):
        sl = slice(s, s + 16384)
        dev[sl] = np.linalg.norm(grads[src[sl]] - grads[dst[sl]], axis=-1).mean(axis=-1)
    total = np.bincount(src, weights=dev, minlength=n)
    count = np.bincount(src, minlength=n)
    has = count > 0
    return float((total[has] / count[has]).mean())


def relative_messiness(g: Groom, reference: Groom) -> float:
    """Messiness of ``g`` minus that of the reference groom."""
    return messiness(g) - messiness(reference)


def jitter(trajectory, dt: float = 1.0) -> float:
    """Mean third time-difference of vertex paths (mm/s^3).

    ``trajectory`` is a sequence of strands (or grooms' point arrays) with
    time along the first axis.
    """
    x = np.asarray(trajectory, dtype=np.float64)
    if x.ndim < 2 or x.shape[0] < 4:
        raise ValueError("jitter needs at least 4 trajectory samples")
    third = x[3:] - 3.0 * x[2:-1] + 3.0 * x[1:-2] - x[:-3]
    return float(np.linalg.norm(third, axis=-1).mean() / dt ** 3)


def penetrating(g: Groom, sdf: HeadSdf | None = None, tolerance: float = 0.1) -> np.ndarray:
    """Boolean mask of strands with a non-root vertex deeper than ``tolerance``."""
    sdf = HeadSdf(DEFAULT_SCALP) if sdf is None else sdf
    if len(g) == 0:
        return np.zeros(0, dtype=bool)
    return np.concatenate([(sdf(g.points[i:i + 16384, 1:]) < -tolerance).any(axis=-1)
                           for i in range(0, len(g), 16384)])


def penetration_rate(g: Groom, sdf: HeadSdf | None = None, tolerance: float = 0.1) -> float:
    """Per-mille fraction of penetrating strands."""
    if len(g) == 0:
        return 0.0
    return 1000.0 * float(np.count_nonzero(penetrating(g, sdf, tolerance))) / len(g)


@dataclass
class VoxelGrid:
    """Occupancy, mean unit flow and sample counts on a cubic grid."""

    occupancy: np.ndarray
    flow: np.ndarray
    counts: np.ndarray
    lo: np.ndarray
    size: float

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    @classmethod
    def empty(cls, resolution: int = 96, extent: float = 400.0, center=(0.0, 0.0, 0.0)) -> "VoxelGrid":
        r = (resolution,) * 3
        lo = np.asarray(center, dtype=np.float64) - extent / 2
        return cls(np.zeros(r, dtype=bool), np.zeros(r + (3,)), np.zeros(r, dtype=np.int64),
                   lo, extent / resolution)


def segment_voxels(p0, p1, lo, size: float, resolution: int):
    """Voxels traversed by each segment (vectorized 3D DDA).

    Returns ``(segment_index, voxel_ijk)`` for every traversed voxel inside
    the grid, in segment order and along each segment.
    """
    q0 = (np.asarray(p0) - lo) / size
    q1 = (np.asarray(p1) - lo) / size
    d = q1 - q0
    c0 = np.floor(q0)
    c1 = np.floor(q1)
    steps = np.abs(c1 - c0).astype(np.int64)
    m = int(steps.max()) if steps.size else 0
    ts = [np.zeros((len(q0), 1))]
    if m > 0:
        k = np.arange(1, m + 1)
        for a in range(3):
            sign = np.sign(d[:, a])
            planes = np.where(sign[:, None] > 0, c0[:, a, None] + k, c0[:, a, None] + 1 - k)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (planes - q0[:, a, None]) / d[:, a, None]
            t = np.where(k[None, :] <= steps[:, a, None], t, np.inf)
            ts.append(t)
    t = np.sort(np.concatenate(ts, axis=1), axis=1)
    t = np.clip(t, 0.0, 1.0)
    t_next = np.concatenate([t[:, 1:], np.ones((len(t), 1))], axis=1)
    valid = t_next > t
    valid[~valid.any(axis=1), 0] = True  # zero-length segment: its own voxel
    mid = 0.5 * (t + t_next)
    seg, col = np.nonzero(valid)
    pts = q0[seg] + mid[seg, col, None] * d[seg]
    ijk = np.floor(pts).astype(np.int64)
    inside = ((ijk >= 0) & (ijk < resolution)).all(axis=1)
    ijk, seg = ijk[inside], seg[inside]
    # collapse repeats of one voxel along the same segment
    if len(seg):
        keep = np.ones(len(seg), dtype=bool)
        keep[1:] = (seg[1:] != seg[:-1]) | (ijk[1:] != ijk[:-1]).any(axis=1)
        seg, ijk = seg[keep], ijk[keep]
    return seg, ijk


def voxelize(g: Groom, resolution: int = 96, extent: float = 400.0,
             center=(0.0, 0.0, 0.0)) -> VoxelGrid:
    """Rasterize every gradient segment into the voxels it traverses."""
    grid = VoxelGrid.empty(resolution, extent, center)
    if len(g) == 0:
        return grid
    n_vox = resolution ** 3
    pts = g.points

    def work(sl):
        p0 = pts[sl, :-1].reshape(-1, 3)
        p1 = pts[sl, 1:].reshape(-1, 3)
        seg, ijk = segment_voxels(p0, p1, grid.lo, grid.size, resolution)
        d = p1 - p0
        norm = np.linalg.norm(d, axis=-1, keepdims=True)
        unit = np.divide(d, norm, out=np.zeros_like(d), where=norm > 0)
        flat = (ijk[:, 0] * resolution + ijk[:, 1]) * resolution + ijk[:, 2]
        flow = np.zeros((n_vox, 3))
        np.add.at(flow, flat, unit[seg])
        return np.bincount(flat, minlength=n_vox), flow

    counts = np.zeros(n_vox, dtype=np.int64)
    flow = np.zeros((n_vox, 3))
    for c, f in map_chunks(work, len(g), chunk=1024):
        counts += c
        flow += f
    norm = np.linalg.norm(flow, axis=-1, keepdims=True)
    occ = counts > 0
    unit = np.divide(flow, norm, out=np.zeros_like(flow), where=norm > 0)
    degenerate = occ & (norm[:, 0] == 0)
    unit[degenerate] = (1.0, 0.0, 0.0)
    shape = (resolution,) * 3
    grid.occupancy = occ.reshape(shape)
    grid.flow = unit.reshape(shape + (3,))
    grid.counts = counts.reshape(shape)
    return grid


def volumetric_compare(a: VoxelGrid, b: VoxelGrid) -> tuple[float, float, float, float]:
    """``(iou, precision, recall, l2_flow)`` of ``a`` against ground truth ``b``.

    Ratios with an empty denominator are defined as 1; ``l2_flow`` is 0 when
    no voxel is occupied in both.
    """
    if a.occupancy.shape != b.occupancy.shape:
        raise DimensionError("voxel grids differ in resolution")
    A, B = a.occupancy, b.occupancy
    inter = int(np.count_nonzero(A & B))
    union = int(np.count_nonzero(A | B))
    na, nb = int(np.count_nonzero(A)), int(np.count_nonzero(B))
    iou = inter / union if union else 1.0
    precision = inter / na if na else 1.0
    recall = inter / nb if nb else 1.0
    both = A & B
    l2 = float(np.linalg.norm(a.flow[both] - b.flow[both], axis=-1).mean()) if inter else 0.0
    return float(iou), float(precision), float(recall), l2


def report(groom: Groom, reference: Groom | None = None, sdf: HeadSdf | None = None,
           trajectory=None, resolution: int = 96) -> dict:
    """All metrics as a flat dict; comparison entries are None without a reference."""
    out = {k: None for k in REPORT_KEYS}
    out["schema_version"] = SCHEMA_VERSION
    out["messiness_mm"] = messiness(groom)
    out["penetration_permille"] = penetration_rate(groom, sdf)
    if trajectory is not None:
        out["jitter_mm_s3"] = jitter(trajectory)
    if reference is not None:
        try:
            out["pos_err_mm"] = positional_error(groom, reference)
            out["loc_err_mm"] = local_error(groom, reference)
        except CorrespondenceError:
            pass
        iou, prec, rec, l2 = volumetric_compare(voxelize(groom, resolution), voxelize(reference, resolution))
        out.update(iou=iou, precision=prec, recall=rec, l2_flow_mm=l2)
    return out


def format_report(rep: dict, kind: str = "json") -> str:
    if kind == "json":
        return json.dumps(rep, indent=2, sort_keys=True)
    lines = [f"{k} = {'none' if v is None else repr(v)}" for k, v in sorted(rep.items())]
    return "\n".join(lines)
