"""Grayscale grid encoding of a cubical complex.

Every cell of the complex is represented by one lattice point, four times its
barycenter, and the grid stores the cell's dimension there (``-1`` where no
cell lives).  Face relations are read back by matching structuring elements,
small offset->value stencils, around a point.

All coordinates in this module are grid units: real coordinate x 4.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .image_io import BinaryImage

Point = tuple[int, int, int]

AXES: tuple[Point, ...] = ((1, 0, 0), (0, 1, 0), (0, 0, 1))

#: Offsets of the closure of a unit cube around its center, with cell dimension.
CUBE_CLOSURE: tuple[tuple[Point, int], ...] = tuple(
    (off, 3 - sum(1 for c in off if c))
    for off in itertools.product((-2, 0, 2), repeat=3)
)


class ECMError(RuntimeError):
    """A grid is inconsistent with the structuring elements used to read it."""


class NoElementFits(ECMError):
    pass


class AmbiguousFit(ECMError):
    pass


class GridFormatError(ValueError):
    pass


def add(p, q) -> Point:
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2])


def sub(p, q) -> Point:
    return (p[0] - q[0], p[1] - q[1], p[2] - q[2])


def scale(k: int, p) -> Point:
    return (k * p[0], k * p[1], k * p[2])


def residue_dim(p) -> int:
    """Dimension class of ``p`` in the S_0..S_3 partition of Z^3.

    A coordinate counts as "near 2" when its residue mod 4 is 1, 2 or 3; the
    class is 3 minus the number of near-2 coordinates.  Cell keys of the cubical
    complex sit on residues {0, 2}, so for them this is the cell dimension.
    """
    return 3 - sum(1 for c in p if c % 4 != 0)


@dataclass
class GrayscaleGrid:
    """Bounded integer field over Z^3; reads outside the box return -1."""

    origin: Point
    values: np.ndarray

    def __post_init__(self):
        self.origin = tuple(int(c) for c in self.origin)
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.ndim != 3 or 0 in self.values.shape:
            raise ValueError("grid values must be a non-empty 3D array")

    @classmethod
    def empty(cls, origin=(0, 0, 0), extent=(1, 1, 1)) -> "GrayscaleGrid":
        return cls(origin, np.full(tuple(extent), -1, dtype=np.int8))

    @property
    def extent(self) -> Point:
        return tuple(int(n) for n in self.values.shape)

    def copy(self) -> "GrayscaleGrid":
        return GrayscaleGrid(self.origin, self.values.copy())

    def __getitem__(self, p) -> int:
        i, j, k = p[0] - self.origin[0], p[1] - self.origin[1], p[2] - self.origin[2]
        nx, ny, nz = self.values.shape
        if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
            return int(self.values[i, j, k])
        return -1

    def __setitem__(self, p, value: int) -> None:
        idx = self._index(np.asarray([p]))
        if not idx[1].all():
            raise IndexError(f"point {p} outside grid")
        self.values[tuple(idx[0][0])] = value

    def _index(self, pts: np.ndarray):
        idx = np.asarray(pts, dtype=np.int64) - np.asarray(self.origin, dtype=np.int64)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.values.shape)), axis=-1)
        return idx, inside

    def read(self, pts) -> np.ndarray:
        """Vectorized read of an ``(..., 3)`` array of points."""
        idx, inside = self._index(pts)
        out = np.full(inside.shape, -1, dtype=np.int8)
        sel = idx[inside]
        out[inside] = self.values[sel[:, 0], sel[:, 1], sel[:, 2]]
        return out

    def write(self, pts, values) -> None:
        idx, inside = self._index(pts)
        if not np.all(inside):
            raise IndexError("write outside grid bounds")
        idx = idx.reshape(-1, 3)
        self.values[idx[:, 0], idx[:, 1], idx[:, 2]] = np.broadcast_to(values, idx.shape[:1])

    def points(self, value: int | None = None, min_value: int | None = None) -> np.ndarray:
        """Points (``(n, 3)``, lexicographically sorted) with a given value."""
        if value is not None:
            mask = self.values == value
        elif min_value is not None:
            mask = self.values >= min_value
        else:
            mask = np.ones(self.values.shape, dtype=bool)
        # argwhere on C-order data is already lexicographic in (x, y, z)
        return np.argwhere(mask) + np.asarray(self.origin)

    def cell_keys(self) -> np.ndarray:
        return self.points(min_value=0)

    def counts(self) -> list[int]:
        """Number of points holding each value 0..3."""
        return [int(np.count_nonzero(self.values == d)) for d in range(4)]

    def euler_from_colors(self) -> int:
        c = self.counts()
        return c[0] - c[1] + c[2] - c[3]

    def same_content(self, other: "GrayscaleGrid") -> bool:
        """Equality of the underlying maps Z^3 -> Z, independent of storage box."""
        a, b = self.cell_keys(), other.cell_keys()
        if a.shape != b.shape or not np.array_equal(a, b):
            return False
        return np.array_equal(self.read(a), other.read(b))


def build_q_grid(image: BinaryImage) -> GrayscaleGrid:
    """Encode the closure of the foreground voxels as a grid."""
    vox = image.as_array()
    if len(vox) == 0:
        return GrayscaleGrid.empty()
    lo = vox.min(axis=0) * 4 - 3
    hi = vox.max(axis=0) * 4 + 3
    grid = GrayscaleGrid(tuple(lo.tolist()), np.full(tuple(hi - lo + 1), -1, dtype=np.int8))
    centers = vox * 4 - lo
    for off, dim in CUBE_CLOSURE:
        idx = centers + np.asarray(off)
        grid.values[idx[:, 0], idx[:, 1], idx[:, 2]] = dim
    return grid


# --- neighborhoods -------------------------------------------------------

NEIGHBORHOOD_KINDS = ("N6", "N12", "N8", "Nshell", "Nbox")


def neighborhood_offsets(kind: str, radius: int = 1) -> list[Point]:
    """Offsets of the named neighborhood of radius ``radius`` (sorted)."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    r = radius
    box = itertools.product(range(-r, r + 1), repeat=3)
    if kind == "N6":
        pts = [q for q in box if sorted(map(abs, q)) == [0, 0, r]]
    elif kind == "N12":
        pts = [q for q in box if sorted(map(abs, q)) == [0, r, r]]
    elif kind == "N8":
        pts = [q for q in box if all(abs(c) == r for c in q)]
    elif kind == "Nshell":
        pts = [q for q in box if max(map(abs, q)) == r]
    elif kind == "Nbox":
        pts = list(box)
    else:
        raise ValueError(f"unknown neighborhood kind {kind!r}")
    return sorted(pts)


def neighborhood(kind: str, p, radius: int = 1) -> set[Point]:
    return {add(p, q) for q in neighborhood_offsets(kind, radius)}


# --- structuring elements ------------------------------------------------

@dataclass(frozen=True)
class StructuringElement:
    """Offset -> value stencil; always contains the zero offset.

    Stored as a sorted tuple of ``(offset, value)`` pairs so that equal
    elements compare and hash equal.
    """

    entries: tuple[tuple[Point, int], ...]

    def __post_init__(self):
        offs = [o for o, _ in self.entries]
        if (0, 0, 0) not in offs:
            raise ValueError("structuring element must contain the origin")
        if len(set(offs)) != len(offs):
            raise ValueError("duplicate offsets in structuring element")
        if any(v not in (-1, 0, 1, 2, 3) for _, v in self.entries):
            raise ValueError("structuring element values must lie in -1..3")

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "StructuringElement":
        return cls(tuple(sorted((tuple(int(c) for c in o), int(v)) for o, v in mapping.items())))

    def as_dict(self) -> dict[Point, int]:
        return dict(self.entries)

    @property
    def origin_value(self) -> int:
        return self.as_dict()[(0, 0, 0)]

    def offsets_with(self, value: int) -> list[Point]:
        return [o for o, v in self.entries if v == value and o != (0, 0, 0)]

    @property
    def facet_offsets(self) -> list[Point]:
        return self.offsets_with(self.origin_value - 1)

    def transformed(self, matrix) -> "StructuringElement":
        m = np.asarray(matrix)
        return StructuringElement.from_mapping(
            {tuple((m @ np.asarray(o)).tolist()): v for o, v in self.entries}
        )

    def __len__(self) -> int:
        return len(self.entries)


def fits(grid: GrayscaleGrid, p, se: StructuringElement) -> bool:
    return all(grid[add(p, q)] == v for q, v in se.entries)


def fit_mask(grid: GrayscaleGrid, points, se: StructuringElement) -> np.ndarray:
    """Vectorized :func:`fits` over an ``(n, 3)`` array of points."""
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    ok = np.ones(len(pts), dtype=bool)
    for q, v in se.entries:
        ok &= grid.read(pts + np.asarray(q)) == v
        if not ok.any():
            break
    return ok


def _axis_element(origin_value: int, facet_axes: Iterable[Point]) -> StructuringElement:
    entries = {(0, 0, 0): origin_value}
    for a in facet_axes:
        for s in (1, -1):
            entries[scale(s, a)] = -1
            entries[scale(2 * s, a)] = origin_value - 1
    return StructuringElement.from_mapping(entries)


def q_face_elements() -> frozenset[StructuringElement]:
    """Face-reading elements for the cubical complex: 3 edge, 3 square, 1 cube."""
    elems = set()
    for a in AXES:
        elems.add(_axis_element(1, [a]))
    for a, b in itertools.combinations(AXES, 2):
        elems.add(_axis_element(2, [a, b]))
    elems.add(_axis_element(3, AXES))
    return frozenset(elems)


def _fitting(grid, p, elements):
    value = grid[p]
    return [se for se in elements if se.origin_value == value and fits(grid, p, se)]


def faces_of(grid: GrayscaleGrid, p, elements) -> list[Point]:
    """Keys of the (dim-1)-faces of the cell at ``p``, read through ``elements``."""
    p = tuple(int(c) for c in p)
    if grid[p] < 1:
        raise ValueError(f"faces_of needs a cell of dimension >= 1 at {p}, found {grid[p]}")
    found = _fitting(grid, p, elements)
    if not found:
        raise NoElementFits(f"no structuring element fits at {p}")
    if len(found) > 1:
        raise AmbiguousFit(f"{len(found)} structuring elements fit at {p}")
    return sorted(add(p, q) for q in found[0].facet_offsets)


def coface_elements() -> list[tuple[Point, StructuringElement]]:
    """Upward-reading elements around a vertex: one per direction of its star."""
    out = []
    for u in itertools.product((-1, 0, 1), repeat=3):
        if u == (0, 0, 0):
            continue
        dim = sum(1 for c in u if c)
        out.append((u, StructuringElement.from_mapping({(0, 0, 0): 0, u: -1, scale(2, u): dim})))
    return out


_COFACE_ELEMENTS = coface_elements()


def cofaces_of_vertex(grid: GrayscaleGrid, p) -> list[tuple[Point, int]]:
    """Keys and dimensions of all cells having the vertex at ``p`` as a face."""
    p = tuple(int(c) for c in p)
    if grid[p] != 0:
        raise ValueError(f"cofaces_of_vertex needs a vertex at {p}, found {grid[p]}")
    out = []
    for u, se in _COFACE_ELEMENTS:
        if fits(grid, p, se):
            out.append((add(p, scale(2, u)), se.as_dict()[scale(2, u)]))
    return sorted(out)


# --- text dump -----------------------------------------------------------

def dump_grid(grid: GrayscaleGrid) -> bytes:
    nx, ny, nz = grid.extent
    ox, oy, oz = grid.origin
    flat = grid.values.ravel(order="F")
    lines = [f"ecmgrid {ox} {oy} {oz} {nx} {ny} {nz}"]
    for start in range(0, flat.size, nx):
        lines.append(" ".join(map(str, flat[start:start + nx].tolist())))
    return ("\n".join(lines) + "\n").encode()


def load_grid(data) -> GrayscaleGrid:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    tokens = text.split()
    if len(tokens) < 7 or tokens[0] != "ecmgrid":
        raise GridFormatError("malformed header: expected 'ecmgrid ox oy oz nx ny nz'")
    try:
        ox, oy, oz, nx, ny, nz = (int(t) for t in tokens[1:7])
    except ValueError:
        raise GridFormatError("malformed header: non-integer field") from None
    if min(nx, ny, nz) <= 0:
        raise GridFormatError("malformed header: extents must be positive")
    body = tokens[7:]
    if len(body) != nx * ny * nz:
        raise GridFormatError(f"value count mismatch: expected {nx * ny * nz}, got {len(body)}")
    try:
        vals = np.array([int(t) for t in body], dtype=np.int64)
    except ValueError:
        raise GridFormatError("non-integer grid value") from None
    bad = np.flatnonzero((vals < -1) | (vals > 3))
    if bad.size:
        raise GridFormatError(f"value out of range: {vals[bad[0]]} at position {bad[0]}")
    return GrayscaleGrid((ox, oy, oz), vals.reshape((nx, ny, nz), order="F"))
