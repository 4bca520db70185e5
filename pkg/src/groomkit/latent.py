"""Linear latent codecs for strands and hairstyles.

A :class:`PcaModel` compresses frequency codes (459 values) to 64-dim strand
latents, and whole latent maps (24 x 32 x 65) to 512-dim hairstyle
latents. Decoding repairs code invariants (non-negative amplitudes, unit
phases) and clamps baldness, since linear reconstructions can leave the
valid set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec
from .scalp import LOW, STRAND_LATENT_DIM, LatentMap, StrandMap, _EMPTY_CODE
from .strand import DimensionError

HAIRSTYLE_LATENT_DIM = 512
MODEL_MAGIC = b"GKPC"
MODEL_VERSION = 1
KINDS = {"strand": 0, "hairstyle": 1}


class FitError(ValueError):
    """Not enough samples to fit the requested number of components."""


@dataclass(frozen=True)
class PcaModel:
    """Mean, orthonormal basis rows and per-component standard deviations."""

    mean: np.ndarray
    basis: np.ndarray
    std: np.ndarray
    kind: str = "strand"
    shape: tuple[int, ...] | None = None

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def components(self) -> int:
        return self.basis.shape[0]

    def truncated(self, components: int) -> "PcaModel":
        if not 1 <= components <= self.components:
            raise ValueError(f"cannot keep {components} of {self.components} components")
        return PcaModel(self.mean, self.basis[:components], self.std[:components], self.kind, self.shape)


def fit_pca(samples, components: int, kind: str = "strand") -> PcaModel:
    """Mean-centered PCA by thin SVD.

    Components are ordered by decreasing variance and each is signed so its
    largest-magnitude entry is positive.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"samples must be (n, dim), got {x.shape}")
    n, d = x.shape
    if components < 1 or components > d:
        raise FitError(f"components must lie in [1, {d}], got {components}")
    if n < components:
        raise FitError(f"need at least {components} samples, got {n}")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    basis = vt[:components].copy()
    lead = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(components), lead])
    basis *= np.where(signs == 0, 1.0, signs)[:, None]
    var = s[:components] ** 2 / max(n - 1, 1)
    return PcaModel(mean, basis, np.sqrt(var), kind)


def encode(m: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.dim:
        raise DimensionError(f"model expects {m.dim} inputs, got {x.shape[-1]}")
    return (x - m.mean) @ m.basis.T


def decode_raw(m: PcaModel, latent) -> np.ndarray:
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape[-1] != m.components:
        raise DimensionError(f"model has {m.components} components, got latent of {latent.shape[-1]}")
    return m.mean + latent @ m.basis


def reconstruction_error(m: PcaModel, x, components: int | None = None) -> float:
    """RMS per-entry residual of projecting ``x`` onto the first components."""
    mm = m if components is None else m.truncated(components)
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean((decode_raw(mm, encode(mm, x)) - x) ** 2)))


def repair_codes(codes, cfg: codec.CodecConfig = codec.DEFAULT) -> np.ndarray:
    """Clamp amplitudes at 0 and renormalize phases of decoded codes."""
    p = codec.split(codes, cfg).copy()
    p[..., codec.AMP, :] = np.maximum(p[..., codec.AMP, :], 0.0)
    p[..., codec.COS, :], p[..., codec.SIN, :] = codec.normalize_phase(
        p[..., codec.COS, :], p[..., codec.SIN, :])
    return codec.join(p, cfg)


def fit_strand_pca(codes, components: int = STRAND_LATENT_DIM) -> PcaModel:
    return fit_pca(codes, components, "strand")


def encode_strand(m: PcaModel, code) -> np.ndarray:
    return encode(m, code)


def decode_strand(m: PcaModel, latent, cfg: codec.CodecConfig = codec.DEFAULT) -> np.ndarray:
    return repair_codes(decode_raw(m, latent), cfg)


def strand_map_to_latent(m: PcaModel, smap: StrandMap) -> LatentMap:
    """Encode occupied texels; empty texels get a zero latent and baldness 0."""
    lat = np.zeros(smap.shape + (m.components,))
    if smap.occupied:
        lat[smap.mask] = encode(m, smap.codes[smap.mask])
    return LatentMap(lat, smap.mask.astype(np.float64))


def latent_to_strand_map(m: PcaModel, lmap: LatentMap, threshold: float = 0.5,
                         cfg: codec.CodecConfig = codec.DEFAULT) -> StrandMap:
    """Decode texels whose baldness value reaches ``threshold``."""
    out = StrandMap.empty(lmap.shape, cfg=cfg)
    mask = lmap.baldness >= threshold
    if mask.any():
        out.codes[mask] = decode_strand(m, lmap.latents[mask], cfg)
    out.mask[...] = mask
    out.codes[~mask] = _EMPTY_CODE(cfg)
    return out


def fit_hairstyle_pca(maps, components: int = HAIRSTYLE_LATENT_DIM) -> PcaModel:
    arrs = [lm.to_array() for lm in maps]
    if not arrs:
        raise FitError("no latent maps to fit")
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise DimensionError("latent maps differ in shape")
    model = fit_pca(np.stack([a.reshape(-1) for a in arrs]), components, "hairstyle")
    return PcaModel(model.mean, model.basis, model.std, "hairstyle", shape)


def sample_map_codes(maps, count: int, seed: int = 0) -> np.ndarray:
    """Uniform draw (without replacement) of ``count`` occupied-texel codes.

    Picks are made over the concatenation of all maps' occupied codes, but
    only the chosen rows are gathered, so large datasets are never copied
    whole. Fewer codes than ``count`` returns all of them.
    """
    sizes = np.array([m.occupied for m in maps], dtype=np.int64)
    total = int(sizes.sum())
    if total <= count:
        return np.concatenate([m.codes[m.mask] for m in maps])
    pick = np.sort(np.random.default_rng(seed).choice(total, count, replace=False))
    starts = np.concatenate([[0], np.cumsum(sizes)])
    owner = np.searchsorted(starts, pick, side="right") - 1
    out = np.empty((count, maps[0].codes.shape[-1]))
    for i in np.unique(owner):
        sel = owner == i
        out[sel] = maps[i].codes[maps[i].mask][pick[sel] - starts[i]]
    return out


def fit_models(maps, strand_components: int = STRAND_LATENT_DIM,
               hairstyle_components: int = HAIRSTYLE_LATENT_DIM, strand_samples: int = 20000,
               seed: int = 0) -> tuple[PcaModel, PcaModel]:
    """Fit the strand model on sampled codes, then the hairstyle model on
    every map's latent map."""
    sm = fit_strand_pca(sample_map_codes(maps, strand_samples, seed), strand_components)
    hm = fit_hairstyle_pca([strand_map_to_latent(sm, m) for m in maps], hairstyle_components)
    return sm, hm


def encode_hairstyle(m: PcaModel, lmap: LatentMap) -> np.ndarray:
    return encode(m, lmap.to_array().reshape(-1))


def decode_hairstyle(m: PcaModel, latent) -> LatentMap:
    shape = m.shape or LOW + (m.dim // (LOW[0] * LOW[1]),)
    return LatentMap.from_array(decode_raw(m, latent).reshape(shape))


def sample_hairstyle(m: PcaModel, seed: int) -> LatentMap:
    """Draw coefficients from ``N(0, var_c)`` and decode."""
    rng = np.random.default_rng(seed)
    return decode_hairstyle(m, rng.standard_normal(m.components) * m.std)


def interp_latent(a, b, t: float) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"latents differ in shape: {a.shape} vs {b.shape}")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    return (1.0 - t) * a + t * b


def save_model(path, m: PcaModel) -> None:
    """Header (magic, version, kind, dim, components, shape rank + dims), then
    mean, basis and variances as little-endian float64."""
    shape = m.shape or ()
    header = MODEL_MAGIC + struct.pack("<IIIII", MODEL_VERSION, KINDS[m.kind], m.dim, m.components, len(shape))
    header += struct.pack(f"<{len(shape)}I", *shape)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (m.mean, m.basis, m.std ** 2):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> PcaModel:
    data = Path(path).read_bytes()
    if len(data) < 24:
        raise ValueError(f"{path}: truncated model header (offset {len(data)})")
    if data[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: bad model magic {data[:4]!r} at offset 0")
    version, kind, dim, comps, rank = struct.unpack("<IIIII", data[4:24])
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version} at offset 4")
    names = {v: k for k, v in KINDS.items()}
    if kind not in names:
        raise ValueError(f"{path}: unknown model kind {kind} at offset 8")
    off = 24 + 4 * rank
    shape = struct.unpack(f"<{rank}I", data[24:off]) if rank else None
    need = off + 8 * (dim + comps * dim + comps)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, file ends at offset {len(data)}")
    vals = np.frombuffer(data, dtype="<f8", offset=off).astype(np.float64)
    mean = vals[:dim]
    basis = vals[dim:dim + comps * dim].reshape(comps, dim)
    var = vals[dim + comps * dim:]
    return PcaModel(mean, basis, np.sqrt(var), names[kind], tuple(shape) if shape else None)
