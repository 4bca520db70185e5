"""Procedural grooms for fitting and exercising the pipeline.

Strands grow from texel-center roots: they leave the scalp along a direction
tilted from the normal toward a comb direction, bend toward gravity, pick up
wave or helix texture, and are kept on or above a clearance shell around the
head so no generated vertex starts inside it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .groom import Groom
from .scalp import DEFAULT_SCALP, LOW, HeadSdf, ScalpSurface, StrandMap, groom_to_map, texel_uv
from .strand import N_POINTS

KINDS = ("straight", "wavy", "curly", "bob", "parted")
GRAVITY = np.array([0.0, -1.0, 0.0])


@dataclass(frozen=True)
class StyleRecipe:
    kind: str = "straight"
    length: tuple[float, float] = (150.0, 220.0)
    wave_amplitude: float = 0.0
    wave_frequency: float = 0.0
    curl_radius: float = 0.0
    curl_pitch: float = 30.0
    parting_azimuth: float | None = None
    parting_offset: float = 0.0
    baldness: float = 0.0
    droop: float = 0.8
    tilt: float = 0.8
    clearance: float = 12.0
    jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown style kind {self.kind!r}; expected one of {KINDS}")
        lo, hi = self.length
        if not 0 < lo <= hi:
            raise ValueError(f"length range must be positive and ordered, got {self.length}")
        if min(self.wave_amplitude, self.wave_frequency, self.curl_radius, self.jitter,
               self.clearance, self.tilt) < 0 or self.curl_pitch <= 0:
            raise ValueError("recipe magnitudes must be non-negative (pitch positive)")
        if not 0.0 <= self.baldness < 1.0:
            raise ValueError(f"baldness cap fraction must lie in [0, 1), got {self.baldness}")
        if not 0.0 <= self.droop <= 1.0:
            raise ValueError(f"droop must lie in [0, 1], got {self.droop}")
        if self.parting_azimuth is not None and not 0.0 <= self.parting_azimuth < 2 * np.pi:
            raise ValueError("parting azimuth must lie in [0, 2pi)")


def default_recipes() -> list[StyleRecipe]:
    return [
        StyleRecipe("straight", length=(140.0, 200.0)),
        StyleRecipe("wavy", length=(150.0, 220.0), wave_amplitude=6.0, wave_frequency=3.0),
        StyleRecipe("curly", length=(120.0, 180.0), curl_radius=5.0, curl_pitch=25.0, droop=0.7),
        StyleRecipe("bob", length=(70.0, 110.0), droop=0.9, baldness=0.0),
        parted_recipe(),
    ]


def parted_recipe(seed: int = 0) -> StyleRecipe:
    """Side parting 45 mm off the midline: one side combs over, one falls away."""
    return StyleRecipe("parted", length=(150.0, 210.0), parting_azimuth=0.0, parting_offset=45.0,
                       droop=0.8, tilt=1.0, clearance=12.0, jitter=0.22, seed=seed)


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n == 0, 1.0, n)


def _comb_directions(recipe: StyleRecipe, roots, normals, uu, vv, scalp: ScalpSurface):
    if recipe.parting_azimuth is not None:
        psi = recipe.parting_azimuth
        m = np.array([np.cos(psi), 0.0, -np.sin(psi)])
        side = np.where(roots @ m >= recipe.parting_offset, 1.0, -1.0)
        dir_ = side[:, None] * m
    else:
        theta = 2 * np.pi * uu
        phi = vv * scalp.phi_max
        ax, ay, az = scalp.semi_axes
        dir_ = np.stack([ax * np.cos(phi) * np.sin(theta), -ay * np.sin(phi),
                         az * np.cos(phi) * np.cos(theta)], axis=-1)
    tangential = dir_ - (dir_ * normals).sum(-1, keepdims=True) * normals
    return _unit(tangential)


def _rotate(v, axis, angle):
    axis = _unit(axis)
    c, s = np.cos(angle)[:, None], np.sin(angle)[:, None]
    return v * c + np.cross(axis, v) * s + axis * (axis * v).sum(-1, keepdims=True) * (1 - c)


def grow_strands(recipe: StyleRecipe, roots, uu, vv, rand, scalp: ScalpSurface = DEFAULT_SCALP,
                 n_points: int = N_POINTS) -> np.ndarray:
    """Grow one strand per root; ``rand`` holds per-strand uniforms ``(M, 6)``."""
    sdf = HeadSdf(scalp)
    m = len(roots)
    normals = scalp.normal(roots)
    comb = _comb_directions(recipe, roots, normals, uu, vv, scalp)
    lo, hi = recipe.length
    length = lo + (hi - lo) * rand[:, 0]
    h = length / (n_points - 1)

    start = _unit(normals + recipe.tilt * comb)
    if recipe.jitter > 0:
        start = _rotate(start, np.cross(normals, comb) + 1e-12, recipe.jitter * (2 * rand[:, 1] - 1))
        start = _rotate(start, normals, recipe.jitter * (2 * rand[:, 2] - 1))
    side = _unit(np.cross(start, normals) + 1e-9 * comb)
    phase0 = 2 * np.pi * rand[:, 3]

    pts = np.empty((m, n_points, 3))
    pts[:, 0] = roots
    height = np.zeros(m)
    for i in range(n_points - 1):
        frac = i / (n_points - 2)
        bend = recipe.droop * np.clip((frac - 0.05) / 0.6, 0.0, 1.0) ** 2 * (3 - 2 * np.clip((frac - 0.05) / 0.6, 0.0, 1.0))
        base = _unit((1 - bend) * start + bend * GRAVITY)
        e1 = _unit(np.cross(base, side))
        e1 = np.where(np.linalg.norm(e1, axis=-1, keepdims=True) > 0, e1, side)
        e2 = _unit(np.cross(base, e1))
        ramp = np.clip(frac / 0.15, 0.0, 1.0)
        s = i * h
        vel = base.copy()
        if recipe.wave_amplitude > 0 and recipe.wave_frequency > 0:
            w = 2 * np.pi * recipe.wave_frequency / length
            vel += (ramp * recipe.wave_amplitude * w * np.cos(w * s + phase0))[:, None] * side
        if recipe.curl_radius > 0:
            w = 2 * np.pi / recipe.curl_pitch
            ang = w * s + phase0
            speed = ramp * recipe.curl_radius * w
            vel += (speed * -np.sin(ang))[:, None] * e1 + (speed * np.cos(ang))[:, None] * e2
        nxt = pts[:, i] + h[:, None] * _unit(vel)
        for _ in range(3):
            d = sdf(nxt)
            target = np.minimum(recipe.clearance, height)
            low = d < target
            if not low.any():
                break
            nxt[low] += (target[low] - d[low])[:, None] * scalp.normal(nxt[low])
        height = np.maximum(height, sdf(nxt))
        pts[:, i + 1] = nxt
    return pts


def generate_groom(recipe: StyleRecipe, shape: tuple[int, int] = LOW,
                   scalp: ScalpSurface = DEFAULT_SCALP, n_points: int = N_POINTS) -> Groom:
    """One strand per hair-bearing texel, rooted at the texel center."""
    uu, vv = texel_uv(shape)
    rng = np.random.default_rng([recipe.seed, shape[0], shape[1]])
    rand = rng.random(shape + (6,))
    hair = vv >= recipe.baldness
    rows, cols = np.nonzero(hair)
    roots = scalp.uv_to_point(uu[rows, cols], vv[rows, cols])
    if len(rows) == 0:
        return Groom(np.zeros((0, n_points, 3)), np.zeros((0, 2), dtype=np.int64), shape)
    pts = grow_strands(recipe, roots, uu[rows, cols], vv[rows, cols], rand[rows, cols], scalp, n_points)
    return Groom(pts, np.stack([rows, cols], axis=-1), shape, {"kind": recipe.kind})


def generate_map(recipe: StyleRecipe, shape: tuple[int, int] = LOW,
                 scalp: ScalpSurface = DEFAULT_SCALP) -> StrandMap:
    m, _ = groom_to_map(generate_groom(recipe, shape, scalp), shape, scalp)
    return m


def mirror_groom(g: Groom) -> Groom:
    """Reflect across the x = 0 plane; texel columns flip accordingly."""
    pts = g.points.copy()
    pts[..., 0] *= -1.0
    tex = None
    if g.texels is not None and g.resolution is not None:
        tex = g.texels.copy()
        tex[:, 1] = g.resolution[1] - 1 - tex[:, 1]
    meta = dict(g.meta, mirrored=not g.meta.get("mirrored", False))
    return Groom(pts, tex, g.resolution, meta)


def jitter_recipe(recipe: StyleRecipe, rng: np.random.Generator, seed: int) -> StyleRecipe:
    lo, hi = recipe.length
    scale = np.exp(rng.uniform(-0.2, 0.2))
    psi = recipe.parting_azimuth
    if psi is not None:
        psi = float(np.mod(psi + rng.uniform(-0.4, 0.4), 2 * np.pi))
    return replace(
        recipe,
        length=(lo * scale, hi * scale),
        wave_amplitude=recipe.wave_amplitude * np.exp(rng.uniform(-0.3, 0.3)),
        curl_radius=recipe.curl_radius * np.exp(rng.uniform(-0.3, 0.3)),
        droop=float(np.clip(recipe.droop + rng.uniform(-0.15, 0.15), 0.0, 1.0)),
        baldness=float(rng.choice([0.0, 0.0, rng.uniform(0.05, 0.4)])),
        parting_azimuth=psi,
        seed=seed,
    )


def iter_dataset(recipes, per_recipe: int, seed: int = 0, mirror: bool = True,
                 shape: tuple[int, int] = LOW, scalp: ScalpSurface = DEFAULT_SCALP):
    """Yield jittered variations of each recipe, each followed by its mirror.

    Order is recipe-major; one groom is live at a time.
    """
    for r_idx, recipe in enumerate(recipes):
        for s_idx in range(per_recipe):
            ss = np.random.SeedSequence([seed, r_idx, s_idx])
            rng = np.random.default_rng(ss)
            sub_seed = int(ss.generate_state(1)[0])
            g = generate_groom(jitter_recipe(recipe, rng, sub_seed), shape, scalp)
            yield g
            if mirror:
                yield mirror_groom(g)


def generate_dataset(recipes, per_recipe: int, seed: int = 0, mirror: bool = True,
                     shape: tuple[int, int] = LOW, scalp: ScalpSurface = DEFAULT_SCALP) -> list[Groom]:
    """Jittered variations of each recipe, optionally with mirrored copies."""
    return list(iter_dataset(recipes, per_recipe, seed, mirror, shape, scalp))
