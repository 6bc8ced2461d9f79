"""Topological repair of 3D binary images through extended cube-map grids.

Pipeline: read a binary image, encode its cubical complex as a grayscale grid,
find critical (non-manifold) vertices, recolor the grid around them, and
rebuild an explicit well-composed polyhedral complex for verification.
"""
from .complex import (
    AmbiguityUnresolvable,
    Cell,
    PolyComplex,
    WellComposedReport,
    boundary_subcomplex,
    build_p_complex,
    build_q_complex,
    check_well_composed,
    derive_bp,
    derive_bp_many,
    faces_via_bp,
    link_graph,
    star,
    validate_bp,
)
from .criticality import build_criticality_table, classify_patterns, detect_critical
from .ecm_grid import GrayscaleGrid, StructuringElement, build_q_grid, faces_of, fits, q_face_elements
from .homology import betti, boundary_matrix, euler
from .image_io import BinaryImage, ImageFormatError, parse_coords, parse_voxgrid, read_image
from .mesh_export import TriMesh, triangulate_boundary, write_obj
from .repair import RepairOutcome, repair_grid, verify_welldefined

__version__ = "0.1.0"
