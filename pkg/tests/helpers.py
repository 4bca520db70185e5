"""Shared strand and groom builders for the tests."""

import numpy as np

from groomkit.groom import Groom
from groomkit.scalp import LOW, texel_points


def random_strands(n, seed=0, n_points=100, scale=1.0):
    """Random-walk strands with smooth and rough components."""
    rng = np.random.default_rng(seed)
    roots = rng.uniform(-50, 50, size=(n, 3))
    steps = rng.normal(0.0, scale, size=(n, n_points - 1, 3))
    steps += np.array([0.0, -1.0, 0.3])
    pts = np.concatenate([roots[:, None], roots[:, None] + np.cumsum(steps, axis=1)], axis=1)
    return pts


def curly_strands(n, seed=0, n_points=100, radius=4.0, pitch=20.0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n_points)
    out = np.empty((n, n_points, 3))
    for i in range(n):
        turns = rng.uniform(2, 6)
        phase = rng.uniform(0, 2 * np.pi)
        ang = 2 * np.pi * turns * t + phase
        out[i, :, 0] = radius * np.cos(ang)
        out[i, :, 1] = -pitch * turns * t
        out[i, :, 2] = radius * np.sin(ang)
        out[i] += rng.uniform(-40, 40, 3)
    return out


def texel_groom(shape=LOW, rows=None, gradient=(0.0, -1.0, 0.5)):
    """Straight strands rooted exactly at texel centers."""
    roots = texel_points(shape)
    h, w = shape
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    rr, cc = rr.ravel(), cc.ravel()
    if rows is not None:
        keep = np.isin(rr, rows)
        rr, cc = rr[keep], cc[keep]
    d = np.asarray(gradient)
    pts = roots[rr, cc][:, None, :] + np.arange(100)[None, :, None] * d
    return Groom(pts, np.stack([rr, cc], -1), shape)




def outward_groom(shape=LOW, step=0.5):
    """Strands growing straight out along the scalp normal (never penetrate)."""
    from groomkit.scalp import DEFAULT_SCALP
    g = texel_groom(shape)
    roots = g.points[:, 0]
    n = DEFAULT_SCALP.normal(roots)
    pts = roots[:, None] + step * np.arange(100)[None, :, None] * n[:, None]
    return Groom(pts, g.texels, g.resolution)
