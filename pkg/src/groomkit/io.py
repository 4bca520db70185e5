"""Groom file formats: native binary, OBJ polylines and Cem Yuksel's HAIR.

Native layout (little-endian)::

    b"GKNS" | uint32 version | uint32 n_points | uint32 count
    | float32 roots[count, 3] | float32 gradients[count, n_points - 1, 3]

Imports reject strands with non-finite coordinates (reporting how many) and
resample polylines of any other length to ``n_points`` by arc length.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .groom import Groom
from .strand import N_POINTS, from_gradients, resample

NATIVE_MAGIC = b"GKNS"
NATIVE_VERSION = 1
HAIR_MAGIC = b"HAIR"
HAIR_HEADER = 128
FORMATS = ("native", "obj", "hair")
EXTENSIONS = {".gks": "native", ".obj": "obj", ".hair": "hair"}


class GroomFileError(ValueError):
    """A groom file is malformed or violates strand invariants."""


def detect_format(path, fmt: str | None = None) -> str:
    if fmt:
        if fmt not in FORMATS:
            raise GroomFileError(f"unknown groom format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower()
    if ext in EXTENSIONS:
        return EXTENSIONS[ext]
    raise GroomFileError(f"{path}: cannot infer groom format from extension {ext!r}")


def _finalize(path, strands: list[np.ndarray], n_points: int) -> tuple[Groom, int]:
    bad = sum(1 for s in strands if not np.all(np.isfinite(s)))
    if bad:
        raise GroomFileError(f"{path}: {bad} strand(s) have non-finite coordinates")
    resampled = 0
    out = np.empty((len(strands), n_points, 3))
    for i, s in enumerate(strands):
        if len(s) < 2:
            raise GroomFileError(f"{path}: strand {i} has fewer than 2 points")
        if len(s) != n_points:
            resampled += 1
            out[i] = resample(s, n_points)
        else:
            out[i] = s
    return Groom(out), resampled


def write_native(path, g: Groom) -> None:
    n = len(g)
    header = NATIVE_MAGIC + struct.pack("<III", NATIVE_VERSION, g.n_points, n)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(g.roots, dtype="<f4").tobytes())
        for i in range(0, n, 65536):  # bounded temporaries for large grooms
            fh.write(np.diff(g.points[i:i + 65536], axis=-2).astype("<f4").tobytes())


def read_native(path, n_points: int = N_POINTS) -> tuple[Groom, int]:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise GroomFileError(f"{path}: truncated header (file ends at offset {len(data)})")
    if data[:4] != NATIVE_MAGIC:
        raise GroomFileError(f"{path}: bad magic {data[:4]!r} at offset 0")
    version, n_s, count = struct.unpack("<III", data[4:16])
    if version != NATIVE_VERSION:
        raise GroomFileError(f"{path}: unsupported version {version} at offset 4")
    if n_s < 2:
        raise GroomFileError(f"{path}: invalid point count {n_s} at offset 8")
    need = 16 + 4 * (count * 3 + count * (n_s - 1) * 3)
    if len(data) != need:
        raise GroomFileError(f"{path}: expected {need} bytes, file ends at offset {len(data)}")
    roots = np.frombuffer(data, "<f4", count * 3, 16).astype(np.float64).reshape(count, 3)
    grads = np.frombuffer(data, "<f4", offset=16 + 12 * count).astype(np.float64)
    grads = grads.reshape(count, n_s - 1, 3)
    finite = np.isfinite(roots).all(-1) & np.isfinite(grads).all(axis=(-1, -2))
    if not finite.all():
        raise GroomFileError(f"{path}: {int((~finite).sum())} strand(s) have non-finite coordinates")
    pts = from_gradients(roots, grads)
    if n_s == n_points:
        return Groom(pts), 0
    return _finalize(path, list(pts), n_points)


def write_obj(path, g: Groom) -> None:
    lines = [f"# {len(g)} strands, {g.n_points} points each"]
    for p in g.points.reshape(-1, 3):
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    m = g.n_points
    for s in range(len(g)):
        idx = range(s * m + 1, (s + 1) * m + 1)
        lines.append("l " + " ".join(map(str, idx)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path, n_points: int = N_POINTS) -> tuple[Groom, int]:
    verts: list[tuple[float, float, float]] = []
    elements: list[tuple[int, list[int]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "v":
                try:
                    verts.append(tuple(float(t) for t in tok[1:4]))
                    if len(tok) < 4:
                        raise ValueError
                except ValueError:
                    raise GroomFileError(f"{path}: line {lineno}: malformed vertex") from None
            elif tok[0] == "l":
                try:
                    idx = [int(t.split("/")[0]) for t in tok[1:]]
                except ValueError:
                    raise GroomFileError(f"{path}: line {lineno}: malformed line element") from None
                elements.append((lineno, idx))
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    strands = []
    for lineno, idx in elements:
        idx = [i - 1 if i > 0 else len(v) + i for i in idx]
        if any(i < 0 or i >= len(v) for i in idx):
            raise GroomFileError(f"{path}: line {lineno}: vertex index out of range")
        strands.append(v[idx])
    if not strands:
        return Groom.empty(n_points), 0
    return _finalize(path, strands, n_points)


def write_hair(path, g: Groom, info: str = "groomkit") -> None:
    n, m = len(g), g.n_points
    header = HAIR_MAGIC + struct.pack("<IIII", n, n * m, 0b11, m - 1)
    header += struct.pack("<fffff", 1.0, 0.0, 1.0, 1.0, 1.0)
    header += info.encode("ascii", "replace")[:88].ljust(88, b"\0")
    assert len(header) == HAIR_HEADER
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.full(n, m - 1, dtype="<u2").tobytes())
        fh.write(np.ascontiguousarray(g.points, dtype="<f4").tobytes())


def read_hair(path, n_points: int = N_POINTS) -> tuple[Groom, int]:
    data = Path(path).read_bytes()
    if len(data) < HAIR_HEADER:
        raise GroomFileError(f"{path}: truncated HAIR header (file ends at offset {len(data)})")
    if data[:4] != HAIR_MAGIC:
        raise GroomFileError(f"{path}: bad magic {data[:4]!r} at offset 0")
    n, total, bits, default_seg = struct.unpack("<IIII", data[4:20])
    off = HAIR_HEADER
    if bits & 1:
        end = off + 2 * n
        if len(data) < end:
            raise GroomFileError(f"{path}: segment array truncated at offset {len(data)}")
        segs = np.frombuffer(data, "<u2", n, off).astype(np.int64)
        off = end
    else:
        segs = np.full(n, default_seg, dtype=np.int64)
    if not bits & 2:
        raise GroomFileError(f"{path}: file has no point array (flags at offset 12)")
    if int((segs + 1).sum()) != total:
        raise GroomFileError(f"{path}: segment counts give {int((segs + 1).sum())} points, "
                             f"header at offset 8 says {total}")
    end = off + 12 * total
    if len(data) < end:
        raise GroomFileError(f"{path}: point array truncated at offset {len(data)} (need {end})")
    pts = np.frombuffer(data, "<f4", total * 3, off).astype(np.float64).reshape(total, 3)
    starts = np.concatenate([[0], np.cumsum(segs + 1)[:-1]])
    strands = [pts[s:s + c + 1] for s, c in zip(starts, segs)]
    if not strands:
        return Groom.empty(n_points), 0
    return _finalize(path, strands, n_points)


def read_groom(path, fmt: str | None = None, n_points: int = N_POINTS) -> tuple[Groom, int]:
    """Load a groom; returns ``(groom, resampled_count)``."""
    kind = detect_format(path, fmt)
    reader = {"native": read_native, "obj": read_obj, "hair": read_hair}[kind]
    return reader(path, n_points)


def write_groom(path, g: Groom, fmt: str | None = None) -> None:
    kind = detect_format(path, fmt)
    {"native": write_native, "obj": write_obj, "hair": write_hair}[kind](path, g)
