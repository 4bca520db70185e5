"""Guide-to-dense upsampling of strand maps.

Every high-resolution texel sees the four low-resolution guide texels of its
bilinear footprint. Guides are ordered nearest-first by UV distance (in
low-resolution texel units, stable on ties), so ``X1`` is always the
nearest guide. A five-channel weight map then defines each dense strand as

    Y = a1 X1 + a2 X2 + a3 X3 + a4 X4 + a5 B(X1, X2, X3, X4)

where ``B`` is the bilinear blend and all blending happens on
``(A, cos, sin)`` with the phase renormalized afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import codec
from .scalp import HIGH, StrandMap, _EMPTY_CODE, texel_uv

DESCRIPTOR_BANDS = 8
DESCRIPTOR_DIM = DESCRIPTOR_BANDS * 3 * 3
FEATURE_CHANNELS = 5 * DESCRIPTOR_DIM + 4
BALD_THRESHOLD = 0.5
ROW_CHUNK = 24


@dataclass
class WeightMap:
    """Per-texel ``(a1, a2, a3, a4, a5)``; a5 weights the bilinear blend."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 3 or self.weights.shape[-1] != 5:
            raise ValueError(f"weight maps are (H, W, 5), got {self.weights.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape[:2]

    @classmethod
    def constant(cls, shape, values) -> "WeightMap":
        w = np.empty(tuple(shape) + (5,))
        w[...] = np.asarray(values, dtype=np.float64)
        return cls(w)


@dataclass(frozen=True)
class Footprint:
    """Sorted guide neighborhoods for one (low, high) resolution pair.

    ``rows``/``cols`` index the low map, ``bilinear`` holds the footprint
    weights and ``dist`` the UV distances, all ``(H, W, 4)`` nearest-first.
    """

    rows: np.ndarray
    cols: np.ndarray
    bilinear: np.ndarray
    dist: np.ndarray


@lru_cache(maxsize=4)
def footprint(low_shape: tuple[int, int], high_shape: tuple[int, int] = HIGH) -> Footprint:
    hl, wl = low_shape
    uu, vv = texel_uv(high_shape)
    x = uu * wl - 0.5
    y = vv * hl - 0.5
    c0 = np.floor(x).astype(np.int64)
    fx = x - c0
    r0 = np.floor(y).astype(np.int64)
    fy = y - r0
    top = r0 < 0
    r0[top], fy[top] = 0, 0.0
    bottom = r0 >= hl - 1
    r0[bottom], fy[bottom] = max(hl - 2, 0), 1.0
    r1 = np.minimum(r0 + 1, hl - 1)
    c1 = c0 + 1
    rows = np.stack([r0, r0, r1, r1], axis=-1)
    cols_raw = np.stack([c0, c1, c0, c1], axis=-1)
    bil = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=-1)
    dx = x[..., None] - cols_raw
    dy = y[..., None] - rows
    dist = np.hypot(dx, dy)
    order = np.argsort(dist, axis=-1, kind="stable")
    take = lambda a: np.take_along_axis(a, order, axis=-1)
    return Footprint(take(rows), np.mod(take(cols_raw), wl), take(bil), take(dist))


def _guide_occupancy(low: StrandMap, fp: Footprint) -> np.ndarray:
    return low.mask[fp.rows, fp.cols]


def _normalized_bilinear(bil, occ):
    b = np.where(occ, bil, 0.0)
    s = b.sum(-1, keepdims=True)
    return np.divide(b, s, out=np.zeros_like(b), where=s > 0)


def upsample_baldness(low_mask, high_shape: tuple[int, int] = HIGH) -> np.ndarray:
    """Bilinear upsampling of a low-resolution baldness map (1 = hair)."""
    low_mask = np.asarray(low_mask, dtype=np.float64)
    fp = footprint(low_mask.shape, tuple(high_shape))
    return np.clip((fp.bilinear * low_mask[fp.rows, fp.cols]).sum(-1), 0.0, 1.0)


def _effective_weights(w: np.ndarray, occ: np.ndarray):
    """Zero weights on missing guides, keeping the guide-weight total."""
    a = w[..., :4]
    kept = np.where(occ, a, 0.0)
    total = a.sum(-1, keepdims=True)
    kept_total = kept.sum(-1, keepdims=True)
    lost = (kept != a).any(-1, keepdims=True)
    scale = np.divide(total, kept_total, out=np.ones_like(total), where=lost & (kept_total != 0))
    kept = np.where(lost, kept * scale, kept)
    a5 = w[..., 4:5]
    # every chosen guide vanished: fall back to bilinear over what is left
    dead = lost & (kept_total == 0) & (total != 0)
    a5 = np.where(dead, a5 + total, a5)
    return kept, a5[..., 0]


def apply_weights(low: StrandMap, w: WeightMap, baldness=None) -> StrandMap:
    """Blend guide codes into a high-resolution map using a weight map.

    ``baldness`` defaults to the bilinear upsampling of the low-res mask;
    texels below 0.5 or without any occupied guide come out empty.
    """
    cfg = low.cfg
    shape = w.shape
    fp = footprint(low.shape, shape)
    occ = _guide_occupancy(low, fp)
    if baldness is None:
        baldness = upsample_baldness(low.mask, shape)
    baldness = np.asarray(baldness, dtype=np.float64)
    if baldness.shape != shape:
        raise ValueError(f"baldness map {baldness.shape} does not match weights {shape}")
    bil = _normalized_bilinear(fp.bilinear, occ)
    a, a5 = _effective_weights(w.weights, occ)
    mask = occ.any(-1) & (baldness >= BALD_THRESHOLD)

    codes = np.empty(shape + (cfg.dim,))
    codes[...] = _EMPTY_CODE(cfg)
    parts = codec.split(low.codes, cfg)
    for r0 in range(0, shape[0], ROW_CHUNK):
        sl = slice(r0, r0 + ROW_CHUNK)
        rr, cc = np.nonzero(mask[sl])
        if len(rr) == 0:
            continue
        rr = rr + r0
        X = parts[fp.rows[rr, cc], fp.cols[rr, cc]]  # (n, 4, g, 3, 3, f)
        b = bil[rr, cc][:, :, None, None, None, None]
        B = (b * X).sum(axis=1)
        B[..., codec.COS, :], B[..., codec.SIN, :] = codec.normalize_phase(
            B[..., codec.COS, :], B[..., codec.SIN, :])
        ai = a[rr, cc][:, :, None, None, None, None]
        Y = ai[:, 0] * X[:, 0]
        for j in range(1, 4):
            Y = Y + ai[:, j] * X[:, j]
        Y = Y + a5[rr, cc][:, None, None, None, None] * B
        Y[..., codec.AMP, :] = np.maximum(Y[..., codec.AMP, :], 0.0)
        Y[..., codec.COS, :], Y[..., codec.SIN, :] = codec.normalize_phase(
            Y[..., codec.COS, :], Y[..., codec.SIN, :])
        codes[rr, cc] = codec.join(Y, cfg)
    return StrandMap(codes, mask, low.scalp, cfg)


def guide_descriptors(low: StrandMap, f_l: int = DESCRIPTOR_BANDS) -> np.ndarray:
    """Segment-averaged low-band ``(A, cos, sin)`` per low texel, ``(H, W, 9 f_l)``."""
    p = codec.split(low.codes, low.cfg)[..., :f_l]
    d = p.mean(axis=-4).reshape(low.shape + (-1,))
    return np.where(low.mask[..., None], d, 0.0)


def build_features(low: StrandMap, f_l: int = DESCRIPTOR_BANDS,
                   high_shape: tuple[int, int] = HIGH) -> np.ndarray:
    """Network-style input features for every high-res texel.

    Channels: four guide descriptors (nearest first), their bilinear blend
    over occupied guides, then the four guide distances in low-res texel
    units; ``5 * 9 f_l + 4`` channels in total (364 for ``f_l = 8``).
    """
    fp = footprint(low.shape, tuple(high_shape))
    desc = guide_descriptors(low, f_l)
    g = desc[fp.rows, fp.cols]  # (H, W, 4, D)
    bil = _normalized_bilinear(fp.bilinear, _guide_occupancy(low, fp))
    blend = (bil[..., None] * g).sum(axis=-2)
    h, w = high_shape
    return np.concatenate([g.reshape(h, w, -1), blend, fp.dist], axis=-1)


def _nearest_occupied_delta(occ: np.ndarray) -> np.ndarray:
    # footprints with no occupied guide keep a slot-0 delta (argmax of all
    # False); the texel is bald either way, and the row stays a valid weight
    first = np.argmax(occ, axis=-1)
    w = np.zeros(occ.shape[:-1] + (5,))
    np.put_along_axis(w, first[..., None], 1.0, axis=-1)
    return w


def upsample_nearest(low: StrandMap, high_shape: tuple[int, int] = HIGH):
    """Each dense strand copies its nearest occupied guide."""
    fp = footprint(low.shape, tuple(high_shape))
    w = WeightMap(_nearest_occupied_delta(_guide_occupancy(low, fp)))
    return apply_weights(low, w), w


def upsample_bilinear(low: StrandMap, high_shape: tuple[int, int] = HIGH):
    w = WeightMap.constant(high_shape, (0.0, 0.0, 0.0, 0.0, 1.0))
    return apply_weights(low, w), w


def initial_directions(low: StrandMap) -> np.ndarray:
    """Unit first-gradient direction of every low texel, ``(H, W, 3)``."""
    d0 = codec.decode_gradients(low.codes, low.cfg)[..., 0, :]
    n = np.linalg.norm(d0, axis=-1, keepdims=True)
    return np.divide(d0, n, out=np.zeros_like(d0), where=n > 0)


def guide_coherence(low: StrandMap, high_shape: tuple[int, int] = HIGH) -> np.ndarray:
    """Minimum pairwise cosine between the occupied guides of each texel.

    Texels with fewer than two occupied guides are fully coherent (1.0).
    """
    fp = footprint(low.shape, tuple(high_shape))
    occ = _guide_occupancy(low, fp)
    dirs = initial_directions(low)[fp.rows, fp.cols]  # (H, W, 4, 3)
    cos = np.einsum("...ic,...jc->...ij", dirs, dirs)
    both = occ[..., :, None] & occ[..., None, :]
    cos = np.where(both, cos, np.inf)
    out = cos.min(axis=(-1, -2))
    return np.where(np.isfinite(out), np.minimum(out, 1.0), 1.0)


def direction_clusters(dirs: np.ndarray, occ: np.ndarray) -> np.ndarray:
    """Split occupied guides into two direction groups, ``(..., 4)`` labels.

    Seeds are the least similar occupied pair; every other guide joins the
    seed it is more aligned with. Unoccupied guides get label -1.
    """
    cos = np.einsum("...ic,...jc->...ij", dirs, dirs)
    both = occ[..., :, None] & occ[..., None, :]
    flat = np.where(both, cos, np.inf).reshape(cos.shape[:-2] + (16,))
    pair = np.argmin(flat, axis=-1)
    s0, s1 = pair // 4, pair % 4
    c0 = np.take_along_axis(cos, s0[..., None, None].repeat(4, -1), axis=-2)[..., 0, :]
    c1 = np.take_along_axis(cos, s1[..., None, None].repeat(4, -1), axis=-2)[..., 0, :]
    labels = np.where(c1 > c0, 1, 0)
    return np.where(occ, labels, -1)


def upsample_parting_aware(low: StrandMap, coherence_threshold: float = 0.7,
                           high_shape: tuple[int, int] = HIGH):
    """Bilinear where guides agree, nearest-guide copy across partings.

    Where the footprint's guides disagree (minimum pairwise cosine below the
    threshold) the guides are split into two direction groups and the texel
    copies the nearest guide of the group holding its nearest guide, which
    keeps the parting line sharp.
    """
    fp = footprint(low.shape, tuple(high_shape))
    occ = _guide_occupancy(low, fp)
    coherent = guide_coherence(low, high_shape) >= coherence_threshold
    dirs = initial_directions(low)[fp.rows, fp.cols]
    labels = direction_clusters(dirs, occ)
    home = np.take_along_axis(labels, np.argmax(occ, -1)[..., None], axis=-1)
    in_home = occ & (labels == home)
    w = np.where(coherent[..., None], np.array([0.0, 0.0, 0.0, 0.0, 1.0]),
                 _nearest_occupied_delta(in_home))
    w[~occ.any(-1)] = (0.0, 0.0, 0.0, 0.0, 1.0)
    wm = WeightMap(w)
    return apply_weights(low, wm), wm


def weight_regularizers(w: WeightMap) -> tuple[float, float, float]:
    """Means of ``|a5 - 1|``, ``sum |a1..a4|`` and ``|sum a - 1|``."""
    a = w.weights
    bl = float(np.abs(a[..., 4] - 1.0).mean())
    g = float(np.abs(a[..., :4]).sum(-1).mean())
    s = float(np.abs(a.sum(-1) - 1.0).mean())
    return bl, g, s


def weight_std_map(w: WeightMap, low_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Std of guide weights after folding a5 into them via the footprint."""
    if low_shape is None:
        low_shape = (w.shape[0] // 9, w.shape[1] // 9)
    fp = footprint(tuple(low_shape), w.shape)
    folded = w.weights[..., :4] + w.weights[..., 4:5] * fp.bilinear
    return folded.std(axis=-1)


def write_pgm(path, image, vmax: float | None = None) -> None:
    """8-bit binary PGM of a 2D scalar grid, scaled to ``[0, vmax]``."""
    img = np.asarray(image, dtype=np.float64)
    top = float(img.max()) if vmax is None else float(vmax)
    scaled = np.zeros_like(img) if top <= 0 else np.clip(img / top, 0.0, 1.0)
    data = np.round(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
