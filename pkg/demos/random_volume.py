"""Repair a random volume and export both boundary surfaces as OBJ.

    python3 demos/random_volume.py [size] [density] [outdir]
"""
import sys
import time
from pathlib import Path

import numpy as np

from ecmrepair import BinaryImage, build_p_complex, build_q_complex, build_q_grid, detect_critical, repair_grid
from ecmrepair.mesh_export import triangulate_boundary, write_obj

size = int(sys.argv[1]) if len(sys.argv) > 1 else 12
density = float(sys.argv[2]) if len(sys.argv) > 2 else 0.4
outdir = Path(sys.argv[3] if len(sys.argv) > 3 else ".")

mask = np.random.default_rng(1).random((size,) * 3) < density
t0 = time.perf_counter()
g_q = build_q_grid(BinaryImage.from_array(mask))
crit = detect_critical(g_q)
outcome = repair_grid(g_q, crit)
print(f"{int(mask.sum())} voxels, {len(crit)} critical vertices, "
      f"detect+repair {time.perf_counter() - t0:.3f} s")

Q = build_q_complex(g_q)
P = build_p_complex(g_q, outcome, Q)
for name, K in (("q", Q), ("p", P)):
    mesh = triangulate_boundary(K)
    path = outdir / f"surface_{name}.obj"
    path.write_bytes(write_obj(mesh))
    print(f"{path}: {len(mesh.triangles)} triangles, edge-manifold {mesh.is_edge_manifold()}, "
          f"vertex-manifold {mesh.is_vertex_manifold()}")
