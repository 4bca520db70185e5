from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .strand import as_strands


@dataclass
class Groom:
    """A set of equal-length strands.

    ``texels`` optionally records the ``(row, col)`` strand-map cell each
    strand came from, on a map of shape ``resolution``; metrics use it for
    correspondence and neighborhoods.
    """

    points: np.ndarray
    texels: np.ndarray | None = None
    resolution: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-2] if pts.ndim == 3 else 100, 3)
        else:
            pts = as_strands(pts)
        if pts.ndim != 3:
            raise ValueError(f"groom points must be (strands, n, 3), got {pts.shape}")
        self.points = pts
        if self.texels is not None:
            tex = np.asarray(self.texels, dtype=np.int64).reshape(-1, 2)
            if len(tex) != len(pts):
                raise ValueError("texels must have one row per strand")
            self.texels = tex

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    @property
    def roots(self) -> np.ndarray:
        return self.points[:, 0, :]

    def subset(self, keep) -> "Groom":
        keep = np.asarray(keep)
        tex = None if self.texels is None else self.texels[keep]
        return Groom(self.points[keep], tex, self.resolution, dict(self.meta))

    def with_points(self, points) -> "Groom":
        return Groom(points, self.texels, self.resolution, dict(self.meta))

    @classmethod
    def empty(cls, n_points: int = 100) -> "Groom":
        return cls(np.zeros((0, n_points, 3)))
