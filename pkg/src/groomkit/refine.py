"""Heuristic refinement: penetration resolution, noise, wisps, duplication.

The chain runs in a fixed order (penetration -> perturbation -> wisp
formation -> duplication, then an optional last penetration pass) and is a
deterministic function of its inputs and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codec
from .groom import Groom
from .parallel import map_chunks
from .scalp import DEFAULT_SCALP, HeadSdf, ScalpSurface
from .strand import arc_length, from_gradients


class ClusterError(ValueError):
    """More clusters were requested than there are strands."""


@dataclass(frozen=True)
class RefineParams:
    noise_amp: float = 0.05
    noise_phase: float = 0.05
    wisp_count: int = 32
    stickiness: float = 0.5
    duplication_factor: int = 6
    l_bar: float = 50.0
    texel_pitch: float = 0.7
    seed: int = 0

    def __post_init__(self):
        for name in ("noise_amp", "noise_phase", "stickiness", "l_bar", "texel_pitch"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.wisp_count < 0:
            raise ValueError("wisp_count must be non-negative")
        if self.duplication_factor < 1:
            raise ValueError("duplication_factor must be at least 1")


@dataclass(frozen=True)
class PenetrationParams:
    lookahead: int = 20
    decay: float = 0.9
    margin: float = 0.5
    removal_tolerance: float = 0.1
    clamp_exponent: bool = False
    angle_tol: float = 1e-4
    sweeps: int = 16

    def __post_init__(self):
        if self.lookahead < 1:
            raise ValueError("lookahead must be at least 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.margin < 0 or self.removal_tolerance < 0:
            raise ValueError("margin and removal tolerance must be non-negative")


def rotation_factors(k: int, delta: float, count: int, clamp: bool = False) -> np.ndarray:
    """``delta ** (j - i - k/2)`` for ``j - i = 0 .. count-1``.

    With ``clamp`` the exponent is floored at 0 so no vertex turns further
    than the pivot-to-lookahead angle.
    """
    e = np.arange(count) - k / 2
    if clamp:
        e = np.maximum(e, 0.0)
    return np.power(float(delta), e)


def _rotate_about(v, axis, angle):
    """Rodrigues rotation of ``v (..., 3)`` about unit ``axis`` by ``angle``."""
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    dot = (axis * v).sum(-1, keepdims=True)
    return v * c + np.cross(axis, v) * s + axis * dot * (1.0 - c)


def _resolve_chunk(points: np.ndarray, sdf: HeadSdf, p: PenetrationParams) -> np.ndarray:
    """Repeat the root-to-tail traversal until nothing is inside (or ``sweeps`` runs)."""
    pts = points.copy()
    for _ in range(p.sweeps):
        todo = np.flatnonzero((sdf(pts[:, 1:]) < 0.0).any(axis=-1))
        if len(todo) == 0:
            break
        pts[todo] = _traverse(pts[todo], sdf, p)
    return pts


def _traverse(pts: np.ndarray, sdf: HeadSdf, p: PenetrationParams) -> np.ndarray:
    """One root-to-tail pass of lookahead rotations, in place."""
    m = pts.shape[1]
    k = p.lookahead
    factors = rotation_factors(k, p.decay, m, p.clamp_exponent)
    # vertices closer to the root than the lookahead are tested against the
    # root pivot first, so a near-root contact is never left unexamined
    pairs = [(0, j) for j in range(1, min(k, m))] + [(i, i + k) for i in range(0, m - k)]
    for i, j in pairs:
        ahead = pts[:, j]
        inside = sdf(ahead) < 0.0
        if not inside.any():
            continue
        idx = np.flatnonzero(inside)
        pivot = pts[idx, i]
        r = ahead[idx] - pivot
        normal = sdf.normal(ahead[idx])
        b = np.cross(r, normal)
        bn = np.linalg.norm(b, axis=-1)
        ok = bn >= 1e-9
        if not ok.any():
            continue
        idx, pivot, r = idx[ok], pivot[ok], r[ok]
        axis = b[ok] / bn[ok, None]
        target = p.margin

        def clear(theta):
            return sdf(pivot + _rotate_about(r, axis, theta)) >= target

        lo = np.zeros(len(idx))
        hi = np.full(len(idx), np.pi / 2)
        while np.any(hi - lo > p.angle_tol):
            mid = 0.5 * (lo + hi)
            good = clear(mid)
            hi = np.where(good, mid, hi)
            lo = np.where(good, lo, mid)
        theta = hi
        rel = pts[idx, i:] - pivot[:, None]
        ang = theta[:, None] * factors[None, : m - i]
        pts[idx, i:] = pivot[:, None] + _rotate_about(rel, axis[:, None], ang)
    return pts


def resolve_penetration(g: Groom, sdf: HeadSdf | None = None,
                        params: PenetrationParams = PenetrationParams()) -> tuple[Groom, int]:
    """Rotate strand tails out of the head, then drop strands still inside.

    Returns the refined groom and the number of removed strands.
    """
    sdf = HeadSdf(DEFAULT_SCALP) if sdf is None else sdf
    if len(g) == 0:
        return g.with_points(g.points.copy()), 0
    pts = np.empty_like(g.points)

    def work(sl):
        # each chunk writes only its own rows, so thread order does not matter
        pts[sl] = _resolve_chunk(g.points[sl], sdf, params)
        return (sdf(pts[sl, 1:]) < -params.removal_tolerance).any(axis=-1)

    bad = np.concatenate(map_chunks(work, len(g), chunk=2048))
    out = g.with_points(pts)
    if bad.any():
        out = out.subset(np.flatnonzero(~bad))
    return out, int(np.count_nonzero(bad))


def kmeans(features: np.ndarray, k: int, seed: int = 0, iterations: int = 100):
    """Seeded k-means++ followed by Lloyd iterations.

    Returns ``(centroids, labels)``; ties go to the lowest cluster index and
    clusters that empty out keep their previous centroid.
    """
    x = np.asarray(features, dtype=np.float64)
    n = len(x)
    if k < 1 or k > n:
        raise ClusterError(f"cannot form {k} clusters from {n} samples")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(-1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            pick = min(pick, n - 1)
        else:
            pick = int(rng.integers(n))
        centers[c] = x[pick]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(-1))
    labels = np.full(n, -1)
    for _ in range(iterations):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        new = np.argmin(dist, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        counts = np.bincount(labels, minlength=k)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
    return centers, labels


def wisp_centers(g: Groom, w: int, seed: int = 0) -> np.ndarray:
    """Index of the cluster-center (medoid) strand for every strand."""
    feats = np.concatenate([g.points[:, 0], g.points[:, -1]], axis=-1)
    centroids, labels = kmeans(feats, w, seed)
    center = np.empty(len(g), dtype=np.int64)
    for c in range(w):
        members = np.flatnonzero(labels == c)
        if len(members) == 0:
            continue
        d = ((feats[members] - centroids[c]) ** 2).sum(-1)
        center[members] = members[np.argmin(d)]
    return center


def wisp_displacements(points: np.ndarray, center_points: np.ndarray, s: float,
                       l_bar: float) -> np.ndarray:
    """Per-vertex displacement budgets ``delta_i`` (root budget is 0).

    ``delta_i = s min(1, l_i / l_bar) / max(1, d_i^2) + sum_{k<i} delta_k``
    """
    l = arc_length(points)
    d = np.linalg.norm(center_points - points, axis=-1)
    term = s * np.minimum(1.0, l / l_bar) / np.maximum(1.0, d * d)
    delta = np.zeros_like(term)
    running = np.zeros(term.shape[:-1])
    for i in range(1, term.shape[-1]):
        delta[..., i] = term[..., i] + running
        running = running + delta[..., i]
    return delta


def wisp_formation(g: Groom, w: int, s: float, l_bar: float = 50.0, seed: int = 0) -> Groom:
    """Pull strands toward their wisp's center strand; roots stay fixed."""
    if w == 0 or s == 0:
        return g.with_points(g.points.copy())
    if w > len(g):
        raise ClusterError(f"cannot form {w} wisps from {len(g)} strands")
    center = wisp_centers(g, w, seed)
    pts = g.points
    target = pts[center]
    delta = wisp_displacements(pts, target, s, l_bar)
    gap = target - pts
    d = np.linalg.norm(gap, axis=-1)
    step = np.minimum(delta, d)
    unit = np.divide(gap, d[..., None], out=np.zeros_like(gap), where=d[..., None] > 0)
    out = pts + step[..., None] * unit
    out[:, 0] = pts[:, 0]
    return g.with_points(out)


def perturb_strands(g: Groom, sigma_amp: float, sigma_phase: float, seed: int,
                    cfg: codec.CodecConfig = codec.DEFAULT) -> Groom:
    """Frequency-domain noise on every strand, keeping the roots."""
    if (sigma_amp == 0 and sigma_phase == 0) or len(g) == 0:
        return g.with_points(g.points.copy())
    code = codec.encode(np.diff(g.points, axis=-2), cfg)
    noisy = codec.perturb(code, sigma_amp, sigma_phase, seed, cfg)
    return g.with_points(codec.decode(noisy, g.roots, cfg))


def duplicate(g: Groom, factor: int = 6, noise_amp: float = 0.0, noise_phase: float = 0.0,
              texel_pitch: float = 0.0, seed: int = 0, scalp: ScalpSurface = DEFAULT_SCALP,
              cfg: codec.CodecConfig = codec.DEFAULT) -> Groom:
    """``factor`` copies per strand; copy 0 is the unchanged original.

    Output is copy-major: strand ``s`` of copy ``c`` sits at ``c * len(g) + s``.
    Other copies get their root jittered in the tangent plane by up to half
    a texel pitch (then reprojected onto the scalp) and frequency noise.
    """
    if factor < 1:
        raise ValueError("factor must be at least 1")
    n = len(g)
    if factor == 1 or n == 0:
        tex = None if g.texels is None else np.tile(g.texels, (factor, 1))
        return Groom(np.tile(g.points, (factor, 1, 1)), tex, g.resolution, dict(g.meta))
    ss = np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss.spawn(1)[0])
    offsets = rng.uniform(-0.5, 0.5, size=(factor - 1, n, 2)) * texel_pitch
    noise_seeds = ss.generate_state(factor - 1)
    roots = g.roots
    t1, t2 = scalp.tangent_frame(roots)
    grads = np.diff(g.points, axis=-2)
    code = None
    if noise_amp > 0 or noise_phase > 0:
        code = codec.encode(grads, cfg)
    out = np.empty((factor * n,) + g.points.shape[1:])
    out[:n] = g.points
    for c in range(1, factor):
        if texel_pitch > 0:
            o = offsets[c - 1]
            r = scalp.project(roots + o[:, :1] * t1 + o[:, 1:] * t2)
        else:
            r = roots
        if code is None and texel_pitch == 0:
            out[c * n:(c + 1) * n] = g.points
        elif code is None:
            out[c * n:(c + 1) * n] = from_gradients(r, grads)
        else:
            noisy = codec.perturb(code, noise_amp, noise_phase, int(noise_seeds[c - 1]), cfg)
            out[c * n:(c + 1) * n] = codec.decode(noisy, r, cfg)
    tex = None if g.texels is None else np.tile(g.texels, (factor, 1))
    return Groom(out, tex, g.resolution, dict(g.meta))


def refine(g: Groom, rp: RefineParams = RefineParams(), pp: PenetrationParams = PenetrationParams(),
           sdf: HeadSdf | None = None, final_pass: bool = True) -> tuple[Groom, dict]:
    """Run the full chain; returns the groom and per-stage statistics."""
    sdf = HeadSdf(DEFAULT_SCALP) if sdf is None else sdf
    seeds = np.random.SeedSequence(rp.seed).generate_state(3)
    stats = {"input": len(g)}
    g, stats["removed_initial"] = resolve_penetration(g, sdf, pp)
    g = perturb_strands(g, rp.noise_amp, rp.noise_phase, int(seeds[0]))
    if rp.wisp_count > 0 and rp.stickiness > 0:
        g = wisp_formation(g, min(rp.wisp_count, len(g)), rp.stickiness, rp.l_bar, int(seeds[1]))
    g = duplicate(g, rp.duplication_factor, rp.noise_amp, rp.noise_phase, rp.texel_pitch,
                  int(seeds[2]), sdf.surface)
    stats["removed_final"] = 0
    if final_pass:
        g, stats["removed_final"] = resolve_penetration(g, sdf, pp)
    stats["output"] = len(g)
    return g, stats
