"""Triangle meshes of boundary surfaces and a minimal OBJ reader/writer."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .complex import ComplexError, PolyComplex, boundary_subcomplex


@dataclass
class TriMesh:
    vertices: list[tuple[float, float, float]] = field(default_factory=list)
    triangles: list[tuple[int, int, int]] = field(default_factory=list)  # 0-based

    def edge_counts(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = defaultdict(int)
        for t in self.triangles:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                out[(a, b) if a < b else (b, a)] += 1
        return dict(out)

    def is_edge_manifold(self) -> bool:
        return all(n == 2 for n in self.edge_counts().values())

    def is_vertex_manifold(self) -> bool:
        """Every vertex's incident triangles form one closed fan."""
        fans: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for t in self.triangles:
            for i in range(3):
                fans[t[i]].append((t[(i + 1) % 3], t[(i + 2) % 3]))
        for arcs in fans.values():
            adj: dict[int, list[int]] = defaultdict(list)
            for a, b in arcs:
                adj[a].append(b)
                adj[b].append(a)
            if any(len(n) != 2 for n in adj.values()):
                return False
            if _components(adj) != 1:
                return False
        return True

    def components(self) -> int:
        adj: dict[int, list[int]] = defaultdict(list)
        for t in self.triangles:
            for a, b in ((t[0], t[1]), (t[1], t[2])):
                adj[a].append(b)
                adj[b].append(a)
        return _components(adj)

    def euler(self) -> int:
        used = {i for t in self.triangles for i in t}
        return len(used) - len(self.edge_counts()) + len(self.triangles)


def _components(adj) -> int:
    seen: set = set()
    n = 0
    for s in adj:
        if s in seen:
            continue
        n += 1
        seen.add(s)
        todo = [s]
        while todo:
            x = todo.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
    return n


def triangulate_boundary(K: PolyComplex) -> TriMesh:
    """Fan every boundary 2-cell from its smallest vertex key.

    Vertex positions are keys / 4.  Output order follows sorted cell keys.
    """
    bd = boundary_subcomplex(K)
    faces = bd.keys(2)
    index: dict = {}
    tris = []
    for k in faces:
        cyc = bd[k].cycle
        if cyc is None or len(cyc) < 3:
            raise ComplexError(f"2-cell {k} has a cycle shorter than 3")
        i0 = cyc.index(min(cyc))
        cyc = cyc[i0:] + cyc[:i0]
        ids = []
        for v in cyc:
            if v not in index:
                index[v] = len(index)
            ids.append(index[v])
        tris += [(ids[0], ids[j], ids[j + 1]) for j in range(1, len(ids) - 1)]
    verts = [None] * len(index)
    for v, i in index.items():
        verts[i] = tuple(c / 4 for c in v)
    return TriMesh(verts, tris)


def write_obj(mesh: TriMesh) -> bytes:
    lines = ["v %.2f %.2f %.2f" % v for v in mesh.vertices]
    lines += ["f %d %d %d" % (a + 1, b + 1, c + 1) for a, b, c in mesh.triangles]
    return ("\n".join(lines) + "\n").encode() if lines else b""


def read_obj(data) -> TriMesh:
    """Parse the ``v``/``f`` subset written by :func:`write_obj`."""
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    mesh = TriMesh()
    for n, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v" and len(parts) == 4:
            mesh.vertices.append(tuple(float(x) for x in parts[1:]))
        elif parts[0] == "f" and len(parts) == 4:
            mesh.triangles.append(tuple(int(x.split("/")[0]) - 1 for x in parts[1:]))
        else:
            raise ValueError(f"unsupported OBJ record at line {n}: {line!r}")
    return mesh


__all__ = ["TriMesh", "read_obj", "triangulate_boundary", "write_obj"]
