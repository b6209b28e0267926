"""Structured box meshes and uniform time grids.

Cells are indexed lexicographically in C order (last axis fastest), which is
also the memory layout of every field array in the package: a scalar field on
a mesh is an ``ndarray`` of shape ``mesh.shape``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoundaryPatch:
    """All boundary faces on one side of one axis.

    Attributes
    ----------
    axis : int
        Axis the faces are orthogonal to.
    side : int
        ``-1`` for the low face (x_axis = 0), ``+1`` for the high face.
    normal : ndarray (dim,)
        Outward unit normal.
    area : float
        Area of a single face (1.0 in 1-D, by convention).
    centers : tuple of ndarray
        Face-center coordinates, one array of shape ``face_shape`` per axis.
    """

    axis: int
    side: int
    normal: np.ndarray
    area: float
    centers: tuple

    @property
    def face_shape(self) -> tuple:
        return self.centers[0].shape

    @property
    def count(self) -> int:
        return int(np.prod(self.face_shape, dtype=int))

    def cell_slice(self, dim: int) -> tuple:
        """Index selecting the layer of cells adjacent to this patch."""
        sl = [slice(None)] * dim
        sl[self.axis] = 0 if self.side < 0 else -1
        return tuple(sl)


@dataclass(frozen=True)
class BoxMesh:
    """Uniform cell-centred discretization of ``[0, L1] x ... x [0, Ld]``."""

    dim: int
    extents: tuple
    cells_per_axis: tuple

    @cached_property
    def cell_size(self) -> tuple:
        return tuple(L / n for L, n in zip(self.extents, self.cells_per_axis))

    @property
    def shape(self) -> tuple:
        return tuple(self.cells_per_axis)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis, dtype=int))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_size))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.cell_size[axis]
        return (np.arange(self.cells_per_axis[axis]) + 0.5) * h

    @cached_property
    def centers(self) -> tuple:
        """Cell-center coordinate arrays, each of shape ``self.shape``."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        for g in grids:
            g.flags.writeable = False
        return tuple(grids)

    def face_area(self, axis: int) -> float:
        return float(np.prod([h for a, h in enumerate(self.cell_size) if a != axis]))

    @cached_property
    def boundary_patches(self) -> tuple:
        patches = []
        for axis in range(self.dim):
            others = [self.axis_centers(a) for a in range(self.dim) if a != axis]
            grids = np.meshgrid(*others, indexing="ij") if others else []
            face_shape = tuple(self.cells_per_axis[a] for a in range(self.dim) if a != axis)
            for side in (-1, 1):
                coords = []
                k = 0
                for a in range(self.dim):
                    if a == axis:
                        value = 0.0 if side < 0 else self.extents[axis]
                        coords.append(np.full(face_shape, value))
                    else:
                        coords.append(grids[k])
                        k += 1
                normal = np.zeros(self.dim)
                normal[axis] = float(side)
                patches.append(BoundaryPatch(axis, side, normal, self.face_area(axis), tuple(coords)))
        return tuple(patches)

    @property
    def boundary_faces(self) -> list:
        """Flat enumeration of boundary faces as ``(patch_index, face_index, normal)``."""
        faces = []
        for p, patch in enumerate(self.boundary_patches):
            for f in range(patch.count):
                faces.append((p, f, patch.normal))
        return faces

    @property
    def n_boundary_faces(self) -> int:
        return sum(p.count for p in self.boundary_patches)

    def patch(self, axis: int, side: int) -> BoundaryPatch:
        return self.boundary_patches[2 * axis + (0 if side < 0 else 1)]

    def index(self, multi_index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def refine(self, factor: int = 2) -> "BoxMesh":
        return build_mesh(self.dim, self.extents, [n * factor for n in self.cells_per_axis])


def build_mesh(dim: int, extents: Sequence[float], cells_per_axis: Sequence[int]) -> BoxMesh:
    """Build a box mesh, validating dimensions, extents and cell counts."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    extents = tuple(float(L) for L in extents)
    cells = tuple(int(n) for n in cells_per_axis)
    if len(extents) != dim or len(cells) != dim:
        raise ValueError("extents and cells_per_axis must have one entry per axis")
    if any(not np.isfinite(L) or L <= 0 for L in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    if any(n < 2 for n in cells) or any(n != c for n, c in zip(cells, cells_per_axis)):
        raise ValueError(f"need at least 2 (integer) cells per axis, got {tuple(cells_per_axis)}")
    return BoxMesh(dim, extents, cells)


def boundary_measure(mesh: BoxMesh) -> float:
    """Total boundary area; in 1-D the two endpoints count 1 each."""
    return float(sum(p.area * p.count for p in mesh.boundary_patches))


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @property
    def n_levels(self) -> int:
        return self.steps + 1
