"""Critical (non-manifold) vertices of the cubical complex.

The eight unit cubes around a vertex are indexed by octant direction
``d = (dx, dy, dz)`` in {-1, +1}^3 with bit ``(dx>0) + 2*(dy>0) + 4*(dz>0)``.
An occupancy pattern is an 8-bit integer over that order.

Whether the central vertex is critical is decided from first principles on
the explicit local complex (boundary-edge coface counts and link
connectivity), once per pattern, and cached in a 256-entry table.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .ecm_grid import GrayscaleGrid, StructuringElement

OCTANTS: tuple[tuple[int, int, int], ...] = tuple(
    (2 * (b & 1) - 1, 2 * ((b >> 1) & 1) - 1, 2 * ((b >> 2) & 1) - 1) for b in range(8)
)


def octant_bit(d) -> int:
    return int(d[0] > 0) + 2 * int(d[1] > 0) + 4 * int(d[2] > 0)


# --- symmetry group ------------------------------------------------------

@lru_cache(maxsize=None)
def symmetry_group() -> tuple[np.ndarray, ...]:
    """The 48 signed permutation matrices of Z^3 (identity first)."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            mats.append(m)
    mats.sort(key=lambda m: (not np.array_equal(m, np.eye(3)), m.ravel().tolist()))
    return tuple(mats)


@lru_cache(maxsize=None)
def _pattern_permutations() -> np.ndarray:
    """``perm[g, b]``: octant bit that bit ``b`` moves to under group element ``g``."""
    out = np.zeros((48, 8), dtype=np.int64)
    for g, m in enumerate(symmetry_group()):
        for b, d in enumerate(OCTANTS):
            out[g, b] = octant_bit(m @ np.asarray(d))
    return out


def transform_pattern(pattern: int, g: int) -> int:
    perm = _pattern_permutations()[g]
    return sum(1 << int(perm[b]) for b in range(8) if pattern >> b & 1)


def pattern_orbit(pattern: int) -> frozenset[int]:
    return frozenset(transform_pattern(pattern, g) for g in range(48))


def canonical_pattern(pattern: int) -> int:
    return min(pattern_orbit(pattern))


# --- first-principles oracle --------------------------------------------
#
# Doubled coordinates: the central vertex is the origin, the cube in octant d
# has center d, and a cell with center c has dimension = number of odd coords.

def _closure(center):
    ranges = [(c - 1, c, c + 1) if c % 2 else (c,) for c in center]
    return set(itertools.product(*ranges))


def _dim(cell) -> int:
    return sum(1 for c in cell if c % 2)


def local_vertex_is_critical(cubes) -> bool:
    """E1/E2 test at the origin for the closure of ``cubes`` (doubled coords).

    ``cubes`` are cube centers with all coordinates odd; only the cells of the
    star of the origin matter, so any cube set containing the eight around the
    origin gives the same answer.
    """
    cubes = [tuple(c) for c in cubes]
    cube_count: dict = {}
    for c in cubes:
        for cell in _closure(c):
            if _dim(cell) == 2:
                cube_count[cell] = cube_count.get(cell, 0) + 1
    free_squares = [s for s, n in cube_count.items() if n == 1]
    origin = (0, 0, 0)
    # boundary squares and edges incident to the origin
    squares_at_v = [s for s in free_squares if origin in _closure(s)]
    if not squares_at_v:
        return False
    edge_cofaces: dict = {}
    for s in free_squares:
        for e in _closure(s):
            if _dim(e) == 1:
                edge_cofaces.setdefault(e, []).append(s)
    edges_at_v = [e for e in edge_cofaces if origin in _closure(e)]
    if any(len(edge_cofaces[e]) != 2 for e in edges_at_v):
        return True
    # link graph: nodes = boundary edges at v, arcs = boundary squares at v
    parent = {e: e for e in edges_at_v}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s in squares_at_v:
        a, b = [e for e in _closure(s) if _dim(e) == 1 and origin in _closure(e)]
        parent[find(a)] = find(b)
    return len({find(e) for e in edges_at_v}) > 1


def pattern_cubes(pattern: int) -> list[tuple[int, int, int]]:
    return [OCTANTS[b] for b in range(8) if pattern >> b & 1]


@lru_cache(maxsize=None)
def build_criticality_table() -> np.ndarray:
    """Boolean array of length 256, ``True`` where the central vertex is critical."""
    table = np.array([local_vertex_is_critical(pattern_cubes(i)) for i in range(256)])
    table.setflags(write=False)
    return table


def dump_table(table) -> str:
    return "".join("1" if t else "0" for t in table) + "\n"


def load_table(text: str) -> np.ndarray:
    s = text.strip()
    if len(s) != 256 or set(s) - {"0", "1"}:
        raise ValueError("criticality table must be 256 characters of 0/1")
    return np.array([c == "1" for c in s])


def classify_patterns(table=None) -> tuple[int, int]:
    """Orbit counts of all 256 patterns and of the critical ones under the 48 symmetries."""
    if table is None:
        table = build_criticality_table()
    orbits = {pattern_orbit(i) for i in range(256)}
    critical = {o for o in orbits if table[min(o)]}
    return len(orbits), len(critical)


def critical_classes(table=None) -> list[int]:
    """Canonical (smallest) pattern of each critical orbit, sorted."""
    if table is None:
        table = build_criticality_table()
    return sorted({canonical_pattern(i) for i in range(256) if table[i]})


def critical_elements(table=None) -> frozenset[StructuringElement]:
    """One 17-entry element per critical pattern, reading guards and cube corners."""
    if table is None:
        table = build_criticality_table()
    elems = set()
    for i in range(256):
        if not table[i]:
            continue
        entries = {(0, 0, 0): 0}
        for b, d in enumerate(OCTANTS):
            entries[d] = -1
            entries[(2 * d[0], 2 * d[1], 2 * d[2])] = 3 if i >> b & 1 else -1
        elems.add(StructuringElement.from_mapping(entries))
    return frozenset(elems)


def vertex_patterns(grid: GrayscaleGrid, points) -> np.ndarray:
    """8-bit cube-occupancy pattern around each vertex point."""
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    pattern = np.zeros(len(pts), dtype=np.int64)
    for b, d in enumerate(OCTANTS):
        occupied = grid.read(pts + 2 * np.asarray(d)) == 3
        pattern |= occupied.astype(np.int64) << b
    return pattern


def detect_critical(grid: GrayscaleGrid, table=None) -> list[tuple[int, int, int]]:
    """Sorted keys of the critical vertices of a cubical-complex grid."""
    if table is None:
        table = build_criticality_table()
    verts = grid.points(value=0)
    if len(verts) == 0:
        return []
    crit = verts[np.asarray(table)[vertex_patterns(grid, verts)]]
    return [tuple(p) for p in crit.tolist()]


def detect_critical_array(grid: GrayscaleGrid, table=None) -> np.ndarray:
    """Like :func:`detect_critical` but returns an ``(n, 3)`` array."""
    if table is None:
        table = build_criticality_table()
    verts = grid.points(value=0)
    if len(verts) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return verts[np.asarray(table)[vertex_patterns(grid, verts)]]


def found_classes(grid: GrayscaleGrid, critical) -> set[int]:
    """Canonical critical patterns occurring at the given vertices."""
    if len(critical) == 0:
        return set()
    return {canonical_pattern(int(i)) for i in vertex_patterns(grid, critical)}
