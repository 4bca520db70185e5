"""Segmented one-sided DFT codec for strand gradients.

A strand's ``n_s - 1`` gradients are cut into ``n_g`` equal segments of
``k`` samples. Each segment and axis is transformed with an unnormalized
forward DFT and the first ``f = k // 2 + 1`` bands are kept as an amplitude
plus a unit phase vector ``(cos, sin)``. The flat code layout is

    code[..., ((segment * 3 + axis) * 3 + part) * f + band]

with ``part`` 0 = amplitude, 1 = cos, 2 = sin. For the default
``n_s = 100, n_g = 3`` this gives ``k = 33, f = 17`` and 459 values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .strand import DimensionError, from_gradients

AMP, COS, SIN = 0, 1, 2
PHASE_TOL = 1e-12


class ParameterError(ValueError):
    """An operation parameter is outside its valid range."""


@dataclass(frozen=True)
class CodecConfig:
    n_s: int = 100
    n_g: int = 3

    def __post_init__(self):
        if self.n_s < 2 or self.n_g < 1:
            raise ParameterError(f"invalid codec config n_s={self.n_s}, n_g={self.n_g}")
        if (self.n_s - 1) % self.n_g:
            raise ParameterError(
                f"n_s - 1 = {self.n_s - 1} is not divisible by n_g = {self.n_g}"
            )

    @property
    def k(self) -> int:
        return math.ceil((self.n_s - 1) / self.n_g)

    @property
    def f(self) -> int:
        return self.k // 2 + 1

    @property
    def dim(self) -> int:
        return self.n_g * 3 * 3 * self.f


DEFAULT = CodecConfig()


@lru_cache(maxsize=8)
def _basis(k: int, f: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = np.arange(f)[:, None]
    t = np.arange(k)[None, :]
    ang = 2.0 * np.pi * n * t / k
    weights = np.full(f, 2.0)
    weights[0] = 1.0
    if k % 2 == 0:
        weights[-1] = 1.0  # Nyquist bin is not mirrored
    return np.cos(ang), np.sin(ang), weights


def split(code, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """View a flat code as ``(..., n_g, 3 axes, 3 parts, f)``."""
    code = np.asarray(code, dtype=np.float64)
    if code.shape[-1] != cfg.dim:
        raise DimensionError(f"expected code dimension {cfg.dim}, got {code.shape[-1]}")
    return code.reshape(code.shape[:-1] + (cfg.n_g, 3, 3, cfg.f))


def join(parts: np.ndarray, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    return np.ascontiguousarray(parts).reshape(parts.shape[:-4] + (cfg.dim,))


def normalize_phase(cos: np.ndarray, sin: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project phase vectors back to the unit circle.

    Vectors already unit length within ``PHASE_TOL`` are returned bit-for-bit;
    near-zero vectors fall back to ``(1, 0)``.
    """
    cos = np.array(cos, dtype=np.float64)
    sin = np.array(sin, dtype=np.float64)
    norm = np.hypot(cos, sin)
    degenerate = norm < PHASE_TOL
    fix = ~degenerate & (np.abs(norm - 1.0) > PHASE_TOL)
    cos[fix] /= norm[fix]
    sin[fix] /= norm[fix]
    cos[degenerate] = 1.0
    sin[degenerate] = 0.0
    return cos, sin


def spectrum(code, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Complex coefficients ``A * (cos + i sin)``, shape ``(..., n_g, 3, f)``."""
    p = split(code, cfg)
    cos, sin = normalize_phase(p[..., COS, :], p[..., SIN, :])
    return p[..., AMP, :] * (cos + 1j * sin)


def encode(gradients, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Encode gradients ``(..., n_s - 1, 3)`` into frequency codes ``(..., dim)``."""
    g = np.asarray(gradients, dtype=np.float64)
    if g.shape[-2:] != (cfg.n_s - 1, 3):
        raise DimensionError(f"expected gradients (..., {cfg.n_s - 1}, 3), got {g.shape}")
    cos_b, sin_b, _ = _basis(cfg.k, cfg.f)
    seg = g.reshape(g.shape[:-2] + (cfg.n_g, cfg.k, 3))
    seg = np.swapaxes(seg, -1, -2)  # (..., n_g, axis, t)
    re = seg @ cos_b.T
    im = -(seg @ sin_b.T)
    amp = np.hypot(re, im)
    zero = amp == 0.0
    safe = np.where(zero, 1.0, amp)
    cos = np.where(zero, 1.0, re / safe)
    sin = np.where(zero, 0.0, im / safe)
    return join(np.stack([amp, cos, sin], axis=-2), cfg)


def decode_gradients(code, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Inverse one-sided real DFT back to gradients ``(..., n_s - 1, 3)``."""
    F = spectrum(code, cfg)
    cos_b, sin_b, w = _basis(cfg.k, cfg.f)
    seg = ((F.real * w) @ cos_b - (F.imag * w) @ sin_b) / cfg.k  # (..., n_g, axis, t)
    seg = np.swapaxes(seg, -1, -2)
    return seg.reshape(seg.shape[:-3] + (cfg.n_s - 1, 3))


def decode(code, roots, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Decode codes into strands rooted at ``roots``."""
    return from_gradients(roots, decode_gradients(code, cfg))


def truncate_low_freq(code, f_l: int, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Zero every band ``>= f_l`` (amplitude 0, phase (1, 0))."""
    if not 1 <= f_l <= cfg.f:
        raise ParameterError(f"cut-off must lie in [1, {cfg.f}], got {f_l}")
    p = split(code, cfg).copy()
    p[..., AMP, f_l:] = 0.0
    p[..., COS, f_l:] = 1.0
    p[..., SIN, f_l:] = 0.0
    return join(p, cfg)


def interp_frequency(a, b, t: float, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Blend amplitudes linearly and phase vectors with renormalization."""
    pa, pb = split(a, cfg), split(b, cfg)
    if pa.shape != pb.shape:
        raise DimensionError(f"code batches differ: {pa.shape} vs {pb.shape}")
    if t == 0.0:
        return join(pa.copy(), cfg)
    if t == 1.0:
        return join(pb.copy(), cfg)
    out = (1.0 - t) * pa + t * pb
    out[..., COS, :], out[..., SIN, :] = normalize_phase(out[..., COS, :], out[..., SIN, :])
    return join(out, cfg)


def perturb(code, sigma_amp: float, sigma_phase: float, seed: int,
            cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Log-normal amplitude jitter and Gaussian phase rotation on bands >= 1.

    The DC band is never touched. Noise for the whole batch is drawn from one
    generator in a fixed order, so results depend only on ``seed``.
    """
    if sigma_amp < 0 or sigma_phase < 0:
        raise ParameterError("noise scales must be non-negative")
    p = split(code, cfg).copy()
    if sigma_amp == 0 and sigma_phase == 0:
        return join(p, cfg)
    rng = np.random.default_rng(seed)
    shape = p.shape[:-2] + (cfg.f - 1,)
    amp_noise = rng.standard_normal(shape)
    phase_noise = rng.standard_normal(shape)
    if sigma_amp > 0:
        p[..., AMP, 1:] *= np.exp(sigma_amp * amp_noise)
    if sigma_phase > 0:
        ang = sigma_phase * phase_noise
        c, s = p[..., COS, 1:].copy(), p[..., SIN, 1:]
        ca, sa = np.cos(ang), np.sin(ang)
        p[..., COS, 1:] = c * ca - s * sa
        p[..., SIN, 1:] = c * sa + s * ca
        p[..., COS, 1:], p[..., SIN, 1:] = normalize_phase(p[..., COS, 1:], p[..., SIN, 1:])
    return join(p, cfg)


def phase_weighted_distance(a, b_truth, cfg: CodecConfig = DEFAULT):
    """Amplitude L1 and amplitude-weighted phase L1 between codes.

    Phase differences in each segment/axis are weighted by the truth
    amplitudes normalized to sum to one over the bands; a segment/axis with
    zero total amplitude uses uniform weights. Returns per-strand arrays for
    batched input, floats otherwise.
    """
    pa, pb = split(a, cfg), split(b_truth, cfg)
    if pa.shape != pb.shape:
        raise DimensionError(f"code batches differ: {pa.shape} vs {pb.shape}")
    amp_l1 = np.abs(pa[..., AMP, :] - pb[..., AMP, :]).sum(axis=(-1, -2, -3))
    total = pb[..., AMP, :].sum(axis=-1, keepdims=True)
    uniform = np.full_like(pb[..., AMP, :], 1.0 / cfg.f)
    weights = np.divide(pb[..., AMP, :], total, out=uniform, where=total > 0)
    diff = np.abs(pa[..., SIN, :] - pb[..., SIN, :]) + np.abs(pa[..., COS, :] - pb[..., COS, :])
    phase = (weights * diff).sum(axis=(-1, -2, -3))
    if np.ndim(amp_l1) == 0:
        return float(amp_l1), float(phase)
    return amp_l1, phase


def band_energy(code, band: int, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    """Sum of squared amplitudes at one band over segments and axes."""
    return (split(code, cfg)[..., AMP, band] ** 2).sum(axis=(-1, -2))


def high_band_energy(code, f_l: int, cfg: CodecConfig = DEFAULT) -> np.ndarray:
    return (split(code, cfg)[..., AMP, f_l:] ** 2).sum(axis=(-1, -2, -3))


def check_code(code, cfg: CodecConfig = DEFAULT, tol: float = 1e-6) -> int:
    """Count codes that break the amplitude/phase invariants."""
    p = split(code, cfg)
    bad_amp = (p[..., AMP, :] < 0).any(axis=(-1, -2, -3))
    norm = np.hypot(p[..., COS, :], p[..., SIN, :])
    bad_phase = (np.abs(norm - 1.0) > tol).any(axis=(-1, -2, -3))
    finite = np.isfinite(p).all(axis=(-1, -2, -3, -4))
    return int(np.count_nonzero(bad_amp | bad_phase | ~finite))
