import itertools

import numpy as np
import pytest

from ecmrepair.criticality import (
    OCTANTS,
    build_criticality_table,
    canonical_pattern,
    classify_patterns,
    critical_classes,
    critical_elements,
    detect_critical,
    dump_table,
    found_classes,
    load_table,
    local_vertex_is_critical,
    octant_bit,
    pattern_cubes,
    pattern_orbit,
    symmetry_group,
    transform_pattern,
)
from ecmrepair.ecm_grid import build_q_grid, fits
from ecmrepair.image_io import BinaryImage

import oracles
from corpus import EDGE_PAIR, SINGLE, TWO_DIAG, pattern_image, random_small_images


def pattern(*octants):
    return sum(1 << octant_bit(d) for d in octants)


def test_symmetry_group():
    g = symmetry_group()
    assert len(g) == 48
    assert np.array_equal(g[0], np.eye(3))
    assert len({m.tobytes() for m in g}) == 48
    assert all(round(abs(np.linalg.det(m))) == 1 for m in g)


def test_orbits_are_invariant():
    for p in range(256):
        orbit = pattern_orbit(p)
        assert all(pattern_orbit(q) == orbit for q in orbit)
        assert all(bin(q).count("1") == bin(p).count("1") for q in orbit)
    assert transform_pattern(0b1, 0) == 1


def test_census():
    assert classify_patterns() == (22, 11)
    table = build_criticality_table()
    assert int(table.sum()) == 128
    assert len(critical_classes()) == 11
    assert not table.flags.writeable


def test_named_patterns():
    table = build_criticality_table()
    edge = pattern((1, 1, 1), (-1, -1, 1))
    face = pattern((1, 1, 1), (1, -1, 1))
    corner = pattern((1, 1, 1), (-1, -1, -1))
    assert table[edge] and not table[face] and table[corner]
    assert not table[0] and not table[255]


def image_vertex_critical(pat):
    # oracle on the whole 2x2x2 image: is the central vertex critical?
    img = pattern_image(pat)
    return (4, 4, 4) in oracles.critical_vertices(img.foreground)


def test_table_matches_whole_image_oracle():
    table = build_criticality_table()
    for p in range(256):
        assert bool(table[p]) == image_vertex_critical(p), p


def test_local_oracle_invariant_under_symmetry():
    table = build_criticality_table()
    for p in range(256):
        assert all(table[q] == table[p] for q in pattern_orbit(p))


def test_table_text_roundtrip():
    table = build_criticality_table()
    text = dump_table(table)
    assert len(text.strip()) == 256
    assert np.array_equal(load_table(text), table)
    with pytest.raises(ValueError):
        load_table("01")


def test_critical_elements():
    elems = critical_elements()
    assert len(elems) == 128
    assert all(len(e) == 17 for e in elems)
    edge = pattern((1, 1, 1), (-1, -1, 1))
    e = next(e for e in elems
             if sorted(o for o, v in e.entries if v == 3) == sorted([(2, 2, 2), (-2, -2, 2)]))
    corners = [o for o, v in e.entries if v == 3]
    assert sum(1 for a, b in zip(*corners) if a != b) == 2
    # the elements detect exactly what the table detects
    g = build_q_grid(EDGE_PAIR)
    hits = sorted(tuple(p) for p in g.points(value=0).tolist() if any(fits(g, p, el) for el in elems))
    assert hits == detect_critical(g)


def test_detect_examples():
    assert detect_critical(build_q_grid(SINGLE)) == []
    assert detect_critical(build_q_grid(EDGE_PAIR)) == [(2, 2, -2), (2, 2, 2)]
    assert detect_critical(build_q_grid(TWO_DIAG)) == [(2, 2, 2)]
    assert detect_critical(build_q_grid(BinaryImage.from_points([]))) == []


def test_detect_matches_oracle_on_random_images():
    for img in random_small_images(40, seed=11, max_size=5):
        g = build_q_grid(img)
        expected = sorted(tuple(2 * c - 2 for c in v) for v in oracles.critical_vertices(img.foreground))
        assert detect_critical(g) == expected


def test_found_classes():
    g = build_q_grid(TWO_DIAG)
    crit = detect_critical(g)
    assert found_classes(g, crit) == {canonical_pattern(pattern((1, 1, 1), (-1, -1, -1)))}
    assert found_classes(g, []) == set()
