"""Explicit cell-incidence complexes keyed by grid points.

A cell's key is the grid point that represents it, so the complex and its
grayscale grid describe the same thing twice; most checks exploit that.
Vertex positions are the keys themselves (grid units; divide by 4 for real
coordinates).
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .ecm_grid import (
    GrayscaleGrid,
    NoElementFits,
    AmbiguousFit,
    StructuringElement,
    add,
    faces_of,
    fit_mask,
    neighborhood_offsets,
    q_face_elements,
    sub,
)
from .repair import RepairOutcome, edge_axis, square_normal

Point = tuple[int, int, int]


class ComplexError(RuntimeError):
    pass


class DanglingFacet(ComplexError):
    pass


class AmbiguityUnresolvable(ComplexError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


@dataclass
class Cell:
    dim: int
    facets: tuple[Point, ...]
    cycle: tuple[Point, ...] | None = None


def _unit(i: int, s: int = 1) -> Point:
    u = [0, 0, 0]
    u[i] = s
    return tuple(u)


@dataclass
class PolyComplex:
    cells: dict[Point, Cell] = field(default_factory=dict)

    def __len__(self):
        return len(self.cells)

    def __contains__(self, key):
        return key in self.cells

    def __getitem__(self, key) -> Cell:
        return self.cells[key]

    def keys(self, dim: int | None = None) -> list[Point]:
        if dim is None:
            return sorted(self.cells)
        return sorted(k for k, c in self.cells.items() if c.dim == dim)

    def counts(self) -> list[int]:
        out = [0, 0, 0, 0]
        for c in self.cells.values():
            out[c.dim] += 1
        return out

    def euler(self) -> int:
        c = self.counts()
        return c[0] - c[1] + c[2] - c[3]

    def cofaces(self) -> dict[Point, list[Point]]:
        """Immediate cofaces of every cell."""
        out: dict[Point, list[Point]] = {k: [] for k in self.cells}
        for k, c in self.cells.items():
            for f in c.facets:
                out[f].append(k)
        return out

    def closure(self, keys) -> set[Point]:
        todo = list(keys)
        seen = set(todo)
        while todo:
            k = todo.pop()
            for f in self.cells[k].facets:
                if f not in seen:
                    seen.add(f)
                    todo.append(f)
        return seen

    def subcomplex(self, keys) -> "PolyComplex":
        return PolyComplex({k: self.cells[k] for k in keys})

    def validate(self) -> None:
        """Check facet closure, dimensions and 2-cell cycles."""
        for k, c in self.cells.items():
            for f in c.facets:
                if f not in self.cells:
                    raise DanglingFacet(f"cell {k} lists missing facet {f}")
                if self.cells[f].dim != c.dim - 1:
                    raise ComplexError(f"facet {f} of {k} has wrong dimension")
            if c.dim == 2:
                if c.cycle is None or len(c.cycle) < 3:
                    raise ComplexError(f"2-cell {k} has no valid vertex cycle")
                verts = {v for e in c.facets for v in self.cells[e].facets}
                if set(c.cycle) != verts or len(c.cycle) != len(verts):
                    raise ComplexError(f"2-cell {k} cycle does not match its edges")
                ring = {frozenset(self.cells[e].facets) for e in c.facets}
                walk = {frozenset((a, b)) for a, b in zip(c.cycle, c.cycle[1:] + c.cycle[:1])}
                if ring != walk:
                    raise ComplexError(f"2-cell {k} cycle is not a closed walk over its edges")

    def is_complete(self) -> bool:
        if not self.cells:
            return True
        top = self.closure(self.keys(3))
        return len(top) == len(self.cells)

    def dump(self) -> str:
        lines = []
        for k in sorted(self.cells, key=lambda k: (self.cells[k].dim, k)):
            c = self.cells[k]
            lines.append(" ".join([str(c.dim), _fmt(k)] + [_fmt(f) for f in c.facets]))
        return "\n".join(lines) + ("\n" if lines else "")


def _fmt(p) -> str:
    return ",".join(map(str, p))


def order_cycle(complex_cells: dict, edge_keys) -> tuple[Point, ...]:
    """Vertex cycle of a 2-cell from its edges.

    Starts at the lexicographically smallest vertex and runs counterclockwise
    about the positive direction of the dominant (Newell) normal axis.
    """
    adj: dict[Point, list[Point]] = defaultdict(list)
    for e in edge_keys:
        a, b = complex_cells[e].facets
        adj[a].append(b)
        adj[b].append(a)
    if any(len(v) != 2 for v in adj.values()):
        raise ComplexError(f"edges {sorted(edge_keys)} do not form a cycle")
    start = min(adj)
    cyc = [start]
    prev, cur = None, start
    while True:
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        if nxt == start:
            break
        cyc.append(nxt)
        prev, cur = cur, nxt
    if len(cyc) != len(adj):
        raise ComplexError(f"edges {sorted(edge_keys)} form more than one cycle")
    normal = [0, 0, 0]
    for a, b in zip(cyc, cyc[1:] + cyc[:1]):
        normal[0] += (a[1] - b[1]) * (a[2] + b[2])
        normal[1] += (a[2] - b[2]) * (a[0] + b[0])
        normal[2] += (a[0] - b[0]) * (a[1] + b[1])
    axis = max(range(3), key=lambda i: abs(normal[i]))
    if normal[axis] < 0:
        cyc = [cyc[0]] + cyc[1:][::-1]
    return tuple(cyc)


def _finish_cycles(cells: dict, keys) -> None:
    for k in keys:
        c = cells[k]
        if c.dim == 2:
            c.cycle = order_cycle(cells, c.facets)


# --- Q(I) ---------------------------------------------------------------

def build_q_complex(grid: GrayscaleGrid) -> PolyComplex:
    """Cells and facets of the cubical complex read off its grid.

    Facets come from matching the cubical face elements at every cell key,
    vectorized per element; a key matched by zero or several elements raises.
    """
    cells: dict[Point, Cell] = {}
    keys = grid.cell_keys()
    vals = grid.read(keys)
    hits = np.zeros(len(keys), dtype=np.int64)
    facets: list = [()] * len(keys)
    for se in sorted(q_face_elements(), key=lambda e: e.entries):
        sel = np.flatnonzero(vals == se.origin_value)
        if not len(sel):
            continue
        ok = sel[fit_mask(grid, keys[sel], se)]
        hits[ok] += 1
        offs = np.asarray(se.facet_offsets)
        for i in ok.tolist():
            facets[i] = tuple(sorted(map(tuple, (keys[i] + offs).tolist())))
    for i, (key, v) in enumerate(zip(map(tuple, keys.tolist()), vals.tolist())):
        if v >= 1 and hits[i] != 1:
            raise (NoElementFits if hits[i] == 0 else AmbiguousFit)(f"cell reading failed at {key}")
        cells[key] = Cell(v, facets[i])
    _finish_cycles(cells, cells)
    return PolyComplex(cells)


# --- P(I) ---------------------------------------------------------------

def _small_cube_template():
    out = []
    for o in neighborhood_offsets("Nbox", 1):
        zero = [i for i in range(3) if not o[i]]
        facets = tuple(sorted(add(o, _unit(i, s)) for i in zero for s in (1, -1)))
        out.append((o, len(zero), facets))
    return out


_SMALL_CUBE = _small_cube_template()


def small_cube_cells(p) -> dict[Point, Cell]:
    """Half-size cube around key ``p`` with all its faces."""
    return {add(p, o): Cell(dim, tuple(add(p, f) for f in facets)) for o, dim, facets in _SMALL_CUBE}


def build_p_complex(grid_q: GrayscaleGrid, outcome: RepairOutcome,
                    q_complex: PolyComplex | None = None) -> PolyComplex:
    """Replace the star of every critical vertex by the repaired polyhedra."""
    base = q_complex if q_complex is not None else build_q_complex(grid_q)
    cells = {k: Cell(c.dim, c.facets, c.cycle) for k, c in base.cells.items()}
    crit = outcome.critical_set
    changed: set[Point] = set()

    def put(key, cell):
        old = cells.get(key)
        if key in changed and old is not None and (old.dim, old.facets) != (cell.dim, cell.facets):
            raise ComplexError(f"conflicting definitions for cell {key}")
        cells[key] = cell
        changed.add(key)

    star_edges, star_squares, star_cubes = set(), set(), set()
    for p in outcome.critical:
        p = tuple(p)
        for u in itertools.product((-1, 0, 1), repeat=3):
            if u == (0, 0, 0):
                continue
            d = sum(1 for c in u if c)
            q = add(p, (2 * u[0], 2 * u[1], 2 * u[2]))
            if grid_q[q] == d and grid_q[add(p, u)] == -1:
                (star_edges, star_squares, star_cubes)[d - 1].add(q)

    # (1) critical vertex -> half-size cube
    for p in crit:
        for k, c in small_cube_cells(p).items():
            put(k, c)

    # (2)/(3) edges of the star -> pyramid, or small cube when both ends are critical
    for q in sorted(star_edges):
        a = edge_axis(q)
        ends = [add(q, _unit(a, 2)), add(q, _unit(a, -2))]
        perp = [i for i in range(3) if i != a]
        if all(e in crit for e in ends):
            for k, c in small_cube_cells(q).items():
                if c.dim > 0:
                    put(k, c)
            continue
        v = next(e for e in ends if e in crit)
        w = next(e for e in ends if e not in crit)
        s = 1 if w[a] > q[a] else -1
        base_key = add(q, _unit(a, -s))
        tri = [add(q, _unit(t, sg)) for t in perp for sg in (1, -1)]
        put(q, Cell(3, tuple(sorted([base_key] + tri))))
        for t in perp:
            (t2,) = [i for i in perp if i != t]
            for sg in (1, -1):
                tk = add(q, _unit(t, sg))
                slants = [add(tk, _unit(t2, s2)) for s2 in (1, -1)]
                put(tk, Cell(2, tuple(sorted([add(tk, _unit(a, -s))] + slants))))
                for sk in slants:
                    put(sk, Cell(1, tuple(sorted([add(sk, _unit(a, -s)), w]))))

    # (4) squares of the star -> thin 3-cells between the two big faces
    replaced_squares = set(star_squares)
    for r in sorted(star_squares):
        n = square_normal(r)
        inplane = [i for i in range(3) if i != n]
        side_facets = []
        big = {1: [], -1: []}
        for i in inplane:
            (j,) = [x for x in inplane if x != i]
            for sg in (1, -1):
                side = add(r, _unit(i, 2 * sg))
                corners = [add(side, _unit(j, 2)), add(side, _unit(j, -2))]
                if any(c in crit for c in corners):
                    inner = add(r, _unit(i, sg))
                    side_facets.append(inner)
                    for sn in (1, -1):
                        big[sn].append(add(inner, _unit(n, sn)))
                else:
                    for sn in (1, -1):
                        big[sn].append(side)
        bkeys = [add(r, _unit(n, 1)), add(r, _unit(n, -1))]
        put(r, Cell(3, tuple(sorted(bkeys + side_facets))))
        for sn, bk in zip((1, -1), bkeys):
            put(bk, Cell(2, tuple(sorted(big[sn]))))

    # (5) cubes of the star -> hexahedra
    for s in sorted(star_cubes):
        facets = []
        for i in range(3):
            for sg in (1, -1):
                sq = add(s, _unit(i, 2 * sg))
                facets.append(add(s, _unit(i, sg)) if sq in replaced_squares else sq)
        put(s, Cell(3, tuple(sorted(facets))))

    for p in crit:
        if cells.get(p) is not None and cells[p].dim == 0:
            raise ComplexError(f"critical vertex {p} survived")
    _finish_cycles(cells, [k for k in changed if cells[k].dim == 2])
    out = PolyComplex(cells)
    for k in changed:
        for f in cells[k].facets:
            if f not in cells:
                raise DanglingFacet(f"cell {k} needs missing facet {f}")
    return out


# --- boundary, star, link, well-composedness ------------------------------

def boundary_subcomplex(K: PolyComplex) -> PolyComplex:
    """Free 2-cells (face of exactly one 3-cell) together with their faces."""
    count: dict[Point, int] = defaultdict(int)
    for k in K.keys(3):
        for f in K[k].facets:
            count[f] += 1
    free = [k for k, n in count.items() if n == 1]
    return K.subcomplex(K.closure(free))


def star(K: PolyComplex, keys) -> set[Point]:
    """Cells having a proper face in ``keys``."""
    keys = set(keys)
    for k in keys:
        if k not in K:
            raise KeyError(f"unknown cell {k}")
    if not keys:
        return set()
    cof = K.cofaces()
    out: set[Point] = set()
    todo = list(keys)
    while todo:
        k = todo.pop()
        for c in cof[k]:
            if c not in out:
                out.add(c)
                todo.append(c)
    return out


def link_graph(K: PolyComplex, v) -> dict[Point, set[Point]]:
    """Adjacency over edges at ``v``: two edges are joined when a 2-cell at ``v`` has both.

    Evaluated on ``K`` as given; pass a boundary subcomplex for the E2 test.
    """
    v = tuple(v)
    if v not in K or K[v].dim != 0:
        raise KeyError(f"unknown vertex {v}")
    cof = K.cofaces()
    edges = [e for e in cof[v] if K[e].dim == 1]
    graph: dict[Point, set[Point]] = {e: set() for e in edges if cof[e]}
    for e in graph:
        for f in cof[e]:
            others = [x for x in K[f].facets if x != e and v in K[x].facets]
            graph[e].update(others)
    return graph


def graph_components(graph: dict) -> int:
    seen: set = set()
    n = 0
    for start in graph:
        if start in seen:
            continue
        n += 1
        todo = [start]
        seen.add(start)
        while todo:
            x = todo.pop()
            for y in graph[x]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
    return n


@dataclass
class WellComposedReport:
    e1_violations: list[tuple[Point, int]]
    e2_violations: list[Point]

    @property
    def is_well_composed(self) -> bool:
        return not self.e1_violations and not self.e2_violations


def check_well_composed(K: PolyComplex) -> WellComposedReport:
    bd = boundary_subcomplex(K)
    cof = bd.cofaces()
    e1 = [(e, len(cof[e])) for e in bd.keys(1) if len(cof[e]) != 2]
    e2 = []
    for v in bd.keys(0):
        edges = [e for e in cof[v]]
        graph: dict[Point, set[Point]] = {e: set() for e in edges}
        for e in edges:
            for f in cof[e]:
                graph[e].update(x for x in bd[f].facets if x != e and v in bd[x].facets)
        if graph_components(graph) != 1:
            e2.append(v)
    return WellComposedReport(e1, e2)


# --- structuring elements of the repaired complex --------------------------

_BOX2 = np.asarray(neighborhood_offsets("Nbox", 2), dtype=np.int64)
_BOX2_INDEX = {tuple(o): i for i, o in enumerate(_BOX2.tolist())}
_ORIGIN_INDEX = _BOX2_INDEX[(0, 0, 0)]


def _guard_order(offsets):
    # prefer keeping near guards: removal is attempted from the far end first
    return sorted(offsets, key=lambda o: (-(o[0] ** 2 + o[1] ** 2 + o[2] ** 2), tuple(-c for c in o)))


_PRUNE_ORDER = [_BOX2_INDEX[o] for o in _guard_order(_BOX2_INDEX)]


def _local_windows(grid: GrayscaleGrid, keys: np.ndarray) -> np.ndarray:
    """``(n, 125)`` grid values on the radius-2 box around each key."""
    return grid.read(keys[:, None, :] + _BOX2[None, :, :])


def _signature_windows(pairs):
    """Distinct (signature, window) rows over all cells of dimension >= 1."""
    sig_ids: dict[tuple, int] = {}
    chunks = []
    for g_p, P in pairs:
        keys = [k for k, c in P.cells.items() if c.dim >= 1]
        if not keys:
            continue
        ids = np.empty(len(keys), dtype=np.int64)
        for i, k in enumerate(keys):
            c = P.cells[k]
            sk = (c.dim, frozenset(sub(f, k) for f in c.facets))
            ids[i] = sig_ids.setdefault(sk, len(sig_ids))
        win = _local_windows(g_p, np.asarray(keys, dtype=np.int64)).astype(np.int8)
        chunks.append(_unique_rows(np.column_stack([ids.astype("<i4").view(np.int8).reshape(-1, 4), win])))
    sigs = [None] * len(sig_ids)
    for sk, i in sig_ids.items():
        for o in sk[1]:
            if o not in _BOX2_INDEX:
                raise ComplexError(f"facet offset {o} lies outside the radius-2 box")
        sigs[i] = sk
    if not chunks:
        return sigs, np.zeros(0, dtype=np.int64), np.zeros((0, len(_BOX2)), dtype=np.int64)
    rows = _unique_rows(np.concatenate(chunks))
    owner = np.ascontiguousarray(rows[:, :4]).view("<i4").ravel().astype(np.int64)
    return sigs, owner, rows[:, 4:].astype(np.int64)


def _unique_rows(a: np.ndarray) -> np.ndarray:
    # byte-wise row dedup; much faster than np.unique(axis=0) on wide rows
    a = np.ascontiguousarray(a)
    packed = a.view(np.dtype((np.void, a.shape[1] * a.itemsize))).ravel()
    _, idx = np.unique(packed, return_index=True)
    return a[np.sort(idx)]


def derive_bp(g_p: GrayscaleGrid, P: PolyComplex, *, strict: bool = True,
              unresolved: list | None = None) -> frozenset[StructuringElement]:
    """Face-reading elements for a repaired complex; see :func:`derive_bp_many`."""
    return derive_bp_many([(g_p, P)], strict=strict, unresolved=unresolved)


def derive_bp_many(pairs, *, strict: bool = True,
                   unresolved: list | None = None) -> frozenset[StructuringElement]:
    """Derive one face-reading element per facet signature.

    A signature is (dimension, set of facet offsets).  Its guard candidates are
    the radius-2 box offsets that read -1 around every cell of that signature.
    A cell of another signature whose window shows this signature's origin and
    facet values is a threat; guards are pruned greedily, far ones first, as
    long as every threat still reads something other than -1 at a kept guard.
    Raises :class:`AmbiguityUnresolvable` when even the full candidate set
    misses some threat.

    With ``strict=False`` such collisions are appended to ``unresolved`` as
    ``(signature, other signature)`` pairs and otherwise ignored, which still
    yields an element set whose failures :func:`validate_bp` can report.
    """
    sigs, owner, win = _signature_windows(pairs)
    neg = win == -1
    elements = set()
    for sid, (dim, facets) in enumerate(sigs):
        mine = owner == sid
        guards = np.all(neg[mine], axis=0)
        guards[_ORIGIN_INDEX] = False
        fidx = [_BOX2_INDEX[o] for o in facets]
        guards[fidx] = False
        threat = (~mine) & (win[:, _ORIGIN_INDEX] == dim)
        if fidx:
            threat &= np.all(win[:, fidx] == dim - 1, axis=1)
        blocks = ~neg[threat] & guards
        hopeless = ~blocks.any(axis=1)
        if hopeless.any():
            others = sorted({int(o) for o in owner[threat][hopeless]})
            if strict:
                other = sigs[others[0]]
                raise AmbiguityUnresolvable(
                    f"element for dim-{dim} facets {sorted(facets)} also fits a cell "
                    f"with facets {sorted(other[1])}",
                    pair=(sigs[sid], other),
                )
            if unresolved is not None:
                unresolved.extend((sigs[sid], sigs[o]) for o in others)
            blocks = blocks[~hopeless]
        for g in _PRUNE_ORDER:
            if not guards[g]:
                continue
            guards[g] = False
            if blocks.size and not blocks[:, guards].any(axis=1).all():
                guards[g] = True
        entries = {(0, 0, 0): dim}
        entries.update({o: dim - 1 for o in facets})
        entries.update({tuple(_BOX2[i].tolist()): -1 for i in np.flatnonzero(guards)})
        elements.add(StructuringElement.from_mapping(entries))
    return frozenset(elements)


@dataclass
class BpValidation:
    cells: int = 0
    no_fit: list = field(default_factory=list)
    ambiguous: list = field(default_factory=list)
    wrong_facets: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.no_fit or self.ambiguous or self.wrong_facets)


def validate_bp(g_p: GrayscaleGrid, P: PolyComplex, elements, report: BpValidation | None = None
                ) -> BpValidation:
    """Check that each cell of ``P`` is read back exactly through ``elements``.

    Elements start with the cell dimension at the origin, so none can fit at
    a non-cell or at a cell of another dimension; only cells are scanned.
    """
    report = report or BpValidation()
    by_dim: dict[int, list] = defaultdict(list)
    for e in elements:
        by_dim[e.origin_value].append(e)
    for dim in (1, 2, 3):
        keys = P.keys(dim)
        if not keys:
            continue
        arr = np.asarray(keys, dtype=np.int64)
        elems = by_dim.get(dim, [])
        hits = np.zeros(len(keys), dtype=np.int64)
        which = np.full(len(keys), -1, dtype=np.int64)
        local = all(o in _BOX2_INDEX for e in elems for o, _ in e.entries)
        win = _local_windows(g_p, arr) if local and elems else None
        for j, e in enumerate(elems):
            if win is not None:
                idx = [_BOX2_INDEX[o] for o, _ in e.entries]
                m = np.all(win[:, idx] == np.asarray([v for _, v in e.entries]), axis=1)
            else:
                m = fit_mask(g_p, arr, e)
            hits += m
            which[m] = j
        report.cells += len(keys)
        offsets = [frozenset(e.facet_offsets) for e in elems]
        for i in np.flatnonzero(hits != 1).tolist():
            (report.no_fit if hits[i] == 0 else report.ambiguous).append(keys[i])
        for i in np.flatnonzero(hits == 1).tolist():
            k = keys[i]
            if frozenset(sub(f, k) for f in P.cells[k].facets) != offsets[which[i]]:
                report.wrong_facets.append(k)
    return report


def faces_via_bp(g_p: GrayscaleGrid, bp, key) -> list[Point]:
    """Facet keys of the cell at ``key`` read from the grid alone."""
    key = tuple(int(c) for c in key)
    if g_p[key] < 1:
        raise ValueError(f"faces_via_bp needs a cell of dimension >= 1 at {key}")
    return faces_of(g_p, key, bp)


__all__ = [
    "AmbiguityUnresolvable", "AmbiguousFit", "BpValidation", "Cell", "ComplexError",
    "DanglingFacet", "NoElementFits", "PolyComplex", "WellComposedReport",
    "boundary_subcomplex", "build_p_complex", "build_q_complex", "check_well_composed",
    "derive_bp", "derive_bp_many", "faces_via_bp", "graph_components", "link_graph",
    "order_cycle", "small_cube_cells", "star", "validate_bp",
]
