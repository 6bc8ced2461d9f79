import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmrepair.ecm_grid import (
    AmbiguousFit,
    GrayscaleGrid,
    GridFormatError,
    NoElementFits,
    StructuringElement,
    build_q_grid,
    cofaces_of_vertex,
    dump_grid,
    faces_of,
    fits,
    load_grid,
    neighborhood,
    neighborhood_offsets,
    q_face_elements,
    residue_dim,
)
from ecmrepair.image_io import BinaryImage

import oracles
from corpus import EDGE_PAIR, SINGLE, random_small_images


def grid_of(points):
    return build_q_grid(BinaryImage.from_points(points))


def to_grid_key(doubled):
    # doubled-coordinate cell -> grid key (voxel v sits at 4v)
    return tuple(2 * c - 2 for c in doubled)


def test_single_voxel_colors():
    g = grid_of([(0, 0, 0)])
    assert g[(0, 0, 0)] == 3
    for p in itertools.product((-2, 0, 2), repeat=3):
        assert g[p] == 3 - sum(1 for c in p if c)
    assert len(g.cell_keys()) == 27
    assert g[(1, 0, 0)] == -1 and g[(100, 0, 0)] == -1


def test_empty_image_grid():
    g = build_q_grid(BinaryImage.from_points([]))
    assert g.extent == (1, 1, 1) and len(g.cell_keys()) == 0


def test_face_pair_cell_count_matches_closure_oracle():
    # oracle: 27 + 27 - 9 shared cells
    assert sum(oracles.counts(oracles.cube_complex([(0, 0, 0), (1, 0, 0)]))) == 45
    g = grid_of([(0, 0, 0), (1, 0, 0)])
    assert len(g.cell_keys()) == 45
    assert g[(2, 0, 0)] == 2


@settings(max_examples=25, deadline=None)
@given(st.frozensets(st.tuples(*[st.integers(-2, 3)] * 3), min_size=1, max_size=15))
def test_grid_equals_closure_oracle(pts):
    g = grid_of(pts)
    cells = oracles.cube_complex(pts)
    expected = {to_grid_key(c): oracles.dim(c) for c in cells}
    got = {tuple(k): int(v) for k, v in zip(g.cell_keys().tolist(), g.read(g.cell_keys()))}
    assert got == expected
    assert all(residue_dim(k) == d for k, d in got.items())


def test_grid_bounds_have_margin():
    g = grid_of([(0, 0, 0), (2, 1, 0)])
    assert g.origin == (-3, -3, -3)
    assert g.extent == (8 + 7, 4 + 7, 7)


@pytest.mark.parametrize(
    "kind, radius, size",
    [("N6", 1, 6), ("N12", 1, 12), ("N8", 1, 8), ("Nshell", 1, 26), ("Nbox", 1, 27),
     ("N6", 2, 6), ("Nshell", 2, 98), ("Nbox", 2, 125)],
)
def test_neighborhood_sizes(kind, radius, size):
    assert len(neighborhood_offsets(kind, radius)) == size


def test_neighborhood_examples():
    assert neighborhood("N6", (0, 0, 0)) == {
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)}
    assert neighborhood("N8", (2, 2, 2), 2) == {
        (2 + a, 2 + b, 2 + c) for a in (-2, 2) for b in (-2, 2) for c in (-2, 2)}
    with pytest.raises(ValueError):
        neighborhood_offsets("N6", 0)


def test_q_face_elements_shape():
    elems = q_face_elements()
    assert len(elems) == 7
    b1x = StructuringElement.from_mapping(
        {(0, 0, 0): 1, (1, 0, 0): -1, (-1, 0, 0): -1, (2, 0, 0): 0, (-2, 0, 0): 0})
    assert b1x in elems
    b3 = [e for e in elems if e.origin_value == 3]
    assert len(b3) == 1 and len(b3[0].facet_offsets) == 6


def test_fits_examples():
    g = grid_of([(0, 0, 0)])
    elems = q_face_elements()
    b2x = next(e for e in elems if e.origin_value == 2 and all(o[0] == 0 for o in e.facet_offsets))
    assert fits(g, (2, 0, 0), b2x)
    b1 = [e for e in elems if e.origin_value == 1]
    assert not any(fits(g, (0, 0, 0), e) for e in b1)
    empty = GrayscaleGrid.empty(extent=(5, 5, 5))
    assert not any(fits(empty, (2, 2, 2), e) for e in elems)


def test_faces_of_examples():
    g = grid_of([(0, 0, 0)])
    elems = q_face_elements()
    assert faces_of(g, (0, 0, 0), elems) == sorted(
        [(2, 0, 0), (-2, 0, 0), (0, 2, 0), (0, -2, 0), (0, 0, 2), (0, 0, -2)])
    assert faces_of(g, (2, 2, 0), elems) == [(2, 2, -2), (2, 2, 2)]
    with pytest.raises(ValueError):
        faces_of(g, (2, 2, 2), elems)
    with pytest.raises(NoElementFits):
        faces_of(g, (0, 0, 0), [e for e in elems if e.origin_value != 3])
    twice = list(elems) + [StructuringElement.from_mapping({(0, 0, 0): 3})]
    with pytest.raises(AmbiguousFit):
        faces_of(g, (0, 0, 0), twice)


def test_faces_match_oracle_on_random_images():
    for img in random_small_images(10, seed=5, max_size=4):
        g = build_q_grid(img)
        elems = q_face_elements()
        for k in g.points(min_value=1).tolist():
            doubled = tuple((c + 2) // 2 for c in k)
            expected = sorted(to_grid_key(f) for f in oracles.facets(doubled))
            assert faces_of(g, k, elems) == expected


def star_oracle(points, vertex_key):
    cells = oracles.cube_complex(points)
    v = tuple((c + 2) // 2 for c in vertex_key)
    return sorted((to_grid_key(c), oracles.dim(c)) for c in cells if c != v and v in oracles.closure(c))


def test_cofaces_examples():
    assert len(cofaces_of_vertex(grid_of([(0, 0, 0)]), (2, 2, 2))) == 7
    block = list(itertools.product((0, 1), repeat=3))
    assert len(cofaces_of_vertex(grid_of(block), (2, 2, 2))) == 26
    # endpoint of the edge shared by two edge-adjacent cubes: 2 cubes, 6 squares, 5 edges
    g = build_q_grid(EDGE_PAIR)
    got = cofaces_of_vertex(g, (2, 2, 2))
    assert len(got) == 13
    assert got == star_oracle(EDGE_PAIR.foreground, (2, 2, 2))
    with pytest.raises(ValueError):
        cofaces_of_vertex(g, (0, 0, 0))


def test_cofaces_match_oracle_on_random_images():
    for img in random_small_images(6, seed=9, max_size=4):
        g = build_q_grid(img)
        for v in g.points(value=0).tolist():
            assert cofaces_of_vertex(g, v) == star_oracle(img.foreground, v)


def test_dump_load_roundtrip():
    g = build_q_grid(SINGLE)
    h = load_grid(dump_grid(g))
    assert h.origin == g.origin and np.array_equal(h.values, g.values)
    assert dump_grid(h) == dump_grid(g)


@pytest.mark.parametrize(
    "text, fragment",
    [("grid 0 0 0 1 1 1 0", "malformed header"),
     ("ecmgrid 0 0 0 1 1 2 0", "value count mismatch"),
     ("ecmgrid 0 0 0 1 1 1 4", "out of range"),
     ("ecmgrid 0 0 0 0 1 1", "extents")],
)
def test_load_grid_errors(text, fragment):
    with pytest.raises(GridFormatError, match=fragment):
        load_grid(text)
