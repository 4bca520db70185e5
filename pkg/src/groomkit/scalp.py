"""Analytic scalp chart, head SDF and scalp-space grids.

The head is an origin-centered ellipsoid. The hair-bearing scalp is the
polar cap within ``phi_max`` of the +y pole, charted as

    u = azimuth / 2pi   (0 at +z, increasing toward +x)
    v = polar angle / phi_max

Grids are stored height-first and row-major: row ``r`` covers
``v in [r/H, (r+1)/H)``, column ``c`` covers ``u in [c/W, (c+1)/W)`` and
wraps around in ``u``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec
from .codec import CodecConfig
from .groom import Groom
from .strand import DimensionError

LOW = (24, 32)
HIGH = (216, 288)
STRAND_LATENT_DIM = 64

GRID_MAGIC_F32 = b"GKG4"
GRID_MAGIC_F64 = b"GKG8"


class ChartError(ValueError):
    """A point does not lie on the scalp chart."""


@dataclass(frozen=True)
class ScalpSurface:
    semi_axes: tuple[float, float, float] = (75.0, 95.0, 85.0)
    phi_max: float = float(np.deg2rad(100.0))

    @property
    def axes(self) -> np.ndarray:
        return np.asarray(self.semi_axes, dtype=np.float64)

    def uv_to_point(self, u, v) -> np.ndarray:
        u, v = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
        theta = 2.0 * np.pi * u
        phi = v * self.phi_max
        ax, ay, az = self.semi_axes
        sp = np.sin(phi)
        return np.stack([ax * sp * np.sin(theta), ay * np.cos(phi), az * sp * np.cos(theta)], axis=-1)

    def point_to_uv(self, p, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
        """Chart coordinates of on-surface points; raises ChartError otherwise."""
        p = np.asarray(p, dtype=np.float64)
        off_surface = np.abs(HeadSdf(self)(p)) > tol
        u, v = self._angles(p)
        off_chart = v > 1.0 + 1e-9
        if np.any(off_surface | off_chart):
            n = int(np.count_nonzero(off_surface | off_chart))
            raise ChartError(f"{n} point(s) are not on the scalp chart")
        return u, np.minimum(v, 1.0)

    def _angles(self, p):
        q = p / self.axes
        r = np.linalg.norm(q, axis=-1)
        r = np.where(r == 0, 1.0, r)
        phi = np.arccos(np.clip(q[..., 1] / r, -1.0, 1.0))
        theta = np.mod(np.arctan2(q[..., 0], q[..., 2]), 2.0 * np.pi)
        return theta / (2.0 * np.pi), phi / self.phi_max

    def project(self, p) -> np.ndarray:
        """Radial projection (in normalized ellipsoid space) onto the surface."""
        p = np.asarray(p, dtype=np.float64)
        q = p / self.axes
        r = np.linalg.norm(q, axis=-1, keepdims=True)
        return p / np.where(r == 0, 1.0, r)

    def normal(self, p) -> np.ndarray:
        return HeadSdf(self).normal(p)

    def tangent_frame(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Two unit tangents orthogonal to the surface normal at ``p``."""
        n = self.normal(p)
        ref = np.zeros_like(n)
        ref[..., 2] = 1.0
        near = np.abs(n[..., 2]) > 0.9
        ref[near] = (1.0, 0.0, 0.0)
        t1 = np.cross(n, ref)
        t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
        t2 = np.cross(n, t1)
        return t1, t2

    def implicit(self, p) -> np.ndarray:
        q = np.asarray(p, dtype=np.float64) / self.axes
        return (q ** 2).sum(axis=-1) - 1.0


@dataclass(frozen=True)
class HeadSdf:
    """Scaled-gradient distance approximation of the ellipsoid head.

    Uses the implicit ``g(p) = |p / a| - 1`` divided by its gradient norm,
    which is exact for spheres and has the exact sign everywhere. Values are
    clamped below at ``-min(a)`` (no interior point is deeper).
    """

    surface: ScalpSurface = field(default_factory=ScalpSurface)

    def __call__(self, p) -> np.ndarray:
        a = self.surface.axes
        p = np.asarray(p, dtype=np.float64)
        k0 = np.linalg.norm(p / a, axis=-1)
        k1 = np.linalg.norm(p / (a * a), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = k0 * (k0 - 1.0) / k1
        d = np.where(k1 > 0, d, -a.min())
        return np.maximum(d, -a.min())

    def normal(self, p) -> np.ndarray:
        a = self.surface.axes
        g = np.asarray(p, dtype=np.float64) / (a * a)
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
        up = np.zeros_like(g)
        up[..., 1] = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            n = g / norm
        return np.where(norm > 1e-300, n, up)


DEFAULT_SCALP = ScalpSurface()


def texel_uv(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Texel-center ``(u, v)`` grids of shape ``(H, W)``."""
    h, w = shape
    v = (np.arange(h) + 0.5) / h
    u = (np.arange(w) + 0.5) / w
    vv, uu = np.meshgrid(v, u, indexing="ij")
    return uu, vv


def texel_points(shape: tuple[int, int], scalp: ScalpSurface = DEFAULT_SCALP) -> np.ndarray:
    uu, vv = texel_uv(shape)
    return scalp.uv_to_point(uu, vv)


def uv_to_texel(u, v, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    h, w = shape
    col = np.mod(np.floor(np.asarray(u) * w).astype(np.int64), w)
    row = np.clip(np.floor(np.asarray(v) * h).astype(np.int64), 0, h - 1)
    return row, col


def texel_side_lengths(shape: tuple[int, int], scalp: ScalpSurface = DEFAULT_SCALP,
                       samples: int = 32) -> np.ndarray:
    """Geodesic extents (mm) of every texel along v and u, shape ``(H, W, 2)``.

    Each extent is the arc length of the chart curve through the texel
    center, spanning the texel's parameter interval.
    """
    h, w = shape
    uu, vv = texel_uv(shape)
    s = np.linspace(-0.5, 0.5, samples + 1)
    along_v = scalp.uv_to_point(uu[..., None], vv[..., None] + s / h)
    along_u = scalp.uv_to_point(uu[..., None] + s / w, vv[..., None])
    lv = np.linalg.norm(np.diff(along_v, axis=-2), axis=-1).sum(axis=-1)
    lu = np.linalg.norm(np.diff(along_u, axis=-2), axis=-1).sum(axis=-1)
    return np.stack([lv, lu], axis=-1)


@dataclass
class StrandMap:
    """Frequency codes on a scalp grid; ``mask`` marks occupied texels."""

    codes: np.ndarray
    mask: np.ndarray
    scalp: ScalpSurface = DEFAULT_SCALP
    cfg: CodecConfig = codec.DEFAULT

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.codes.shape != self.mask.shape + (self.cfg.dim,):
            raise DimensionError(f"codes {self.codes.shape} do not match mask {self.mask.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def occupied(self) -> int:
        return int(self.mask.sum())

    def roots(self) -> np.ndarray:
        return texel_points(self.shape, self.scalp)

    @classmethod
    def empty(cls, shape, scalp: ScalpSurface = DEFAULT_SCALP, cfg: CodecConfig = codec.DEFAULT):
        codes = np.zeros(tuple(shape) + (cfg.dim,))
        codes[..., :] = _EMPTY_CODE(cfg)
        return cls(codes, np.zeros(shape, dtype=bool), scalp, cfg)


def _EMPTY_CODE(cfg: CodecConfig) -> np.ndarray:
    p = np.zeros((cfg.n_g, 3, 3, cfg.f))
    p[..., codec.COS, :] = 1.0
    return codec.join(p, cfg)


@dataclass
class LatentMap:
    """Per-texel strand latents plus a baldness channel (1 = hair)."""

    latents: np.ndarray
    baldness: np.ndarray

    def __post_init__(self):
        self.latents = np.asarray(self.latents, dtype=np.float64)
        self.baldness = np.clip(np.asarray(self.baldness, dtype=np.float64), 0.0, 1.0)
        if self.latents.shape[:2] != self.baldness.shape:
            raise DimensionError("latent and baldness grids differ in shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.baldness.shape

    @property
    def channels(self) -> int:
        return self.latents.shape[-1] + 1

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.latents, self.baldness[..., None]], axis=-1)

    @classmethod
    def from_array(cls, arr) -> "LatentMap":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr[..., :-1], arr[..., -1])


def groom_to_map(groom: Groom, shape: tuple[int, int] = LOW, scalp: ScalpSurface = DEFAULT_SCALP,
                 cfg: CodecConfig = codec.DEFAULT, root_tol: float = 2.0) -> tuple[StrandMap, int]:
    """Encode strands into the texels containing their roots.

    Returns the map and the number of strands skipped because their root
    was off the chart. When several roots share a texel the one closest to
    the texel center wins (lowest index on ties).
    """
    m = StrandMap.empty(shape, scalp, cfg)
    if len(groom) == 0:
        return m, 0
    roots = groom.roots
    near = np.abs(HeadSdf(scalp)(roots)) <= root_tol
    u, v = scalp._angles(scalp.project(roots))
    ok = near & (v <= 1.0 + 1e-9)
    idx = np.flatnonzero(ok)
    skipped = len(groom) - len(idx)
    if len(idx) == 0:
        return m, skipped
    row, col = uv_to_texel(u[idx], np.minimum(v[idx], 1.0), shape)
    centers = texel_points(shape, scalp)[row, col]
    dist = np.linalg.norm(roots[idx] - centers, axis=-1)
    flat = row * shape[1] + col
    order = np.lexsort((idx, dist, flat))
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat[order][1:] != flat[order][:-1]
    win = order[first]
    grads = np.diff(groom.points[idx[win]], axis=-2)
    m.codes[row[win], col[win]] = codec.encode(grads, cfg)
    m.mask[row[win], col[win]] = True
    return m, skipped


def map_to_groom(m: StrandMap) -> Groom:
    """Decode every occupied texel into a strand rooted at its texel center."""
    rows, cols = np.nonzero(m.mask)
    roots = m.roots()[rows, cols]
    if len(rows) == 0:
        return Groom(np.zeros((0, m.cfg.n_s, 3)), np.zeros((0, 2), dtype=np.int64), m.shape)
    pts = codec.decode(m.codes[rows, cols], roots, m.cfg)
    return Groom(pts, np.stack([rows, cols], axis=-1), m.shape)


def baldness_iou(a, b, threshold: float = 0.8) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"baldness maps differ in shape: {a.shape} vs {b.shape}")
    ba = a >= threshold
    bb = b >= threshold
    union = np.count_nonzero(ba | bb)
    if union == 0:
        return 1.0
    return np.count_nonzero(ba & bb) / union


def write_grid(path, array, precision: int = 32) -> None:
    """Write an ``(H, W, C)`` array as a flat little-endian binary grid.

    Layout: 4-byte magic, uint32 height, width, channels, then row-major
    floats (``GKG4`` for float32, ``GKG8`` for float64).
    """
    arr = np.asarray(array)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise DimensionError("grids must be (H, W) or (H, W, C)")
    magic, dtype = (GRID_MAGIC_F32, "<f4") if precision == 32 else (GRID_MAGIC_F64, "<f8")
    with open(path, "wb") as fh:
        fh.write(magic + struct.pack("<III", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ValueError(f"{path}: truncated grid header (offset {len(data)})")
    magic = data[:4]
    if magic == GRID_MAGIC_F32:
        dtype, size = "<f4", 4
    elif magic == GRID_MAGIC_F64:
        dtype, size = "<f8", 8
    else:
        raise ValueError(f"{path}: bad grid magic {magic!r} at offset 0")
    h, w, c = struct.unpack("<III", data[4:16])
    expected = 16 + h * w * c * size
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, file ends at offset {len(data)}")
    return np.frombuffer(data, dtype=dtype, offset=16).astype(np.float64).reshape(h, w, c)


def strand_map_to_array(m: StrandMap) -> np.ndarray:
    return np.concatenate([m.codes, m.mask[..., None].astype(np.float64)], axis=-1)


def strand_map_from_array(arr, scalp: ScalpSurface = DEFAULT_SCALP,
                          cfg: CodecConfig = codec.DEFAULT) -> StrandMap:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[-1] != cfg.dim + 1:
        raise DimensionError(f"strand-map grids need {cfg.dim + 1} channels, got {arr.shape[-1]}")
    return StrandMap(arr[..., :-1].copy(), arr[..., -1] > 0.5, scalp, cfg)
