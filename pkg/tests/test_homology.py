import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmrepair.complex import boundary_subcomplex, build_p_complex, build_q_complex
from ecmrepair.ecm_grid import build_q_grid
from ecmrepair.homology import Gf2Matrix, betti, boundary_matrix, euler
from ecmrepair.image_io import BinaryImage
from ecmrepair.repair import repair_grid

import oracles
from corpus import SINGLE, TWO_DIAG, random_small_images


def q_of(points):
    return build_q_complex(build_q_grid(BinaryImage.from_points(points)))


def test_boundary_matrices_single_voxel():
    K = q_of([(0, 0, 0)])
    d3 = boundary_matrix(K, 3)
    assert (d3.rows, d3.cols) == (6, 1) and d3.column_weights() == [6]
    d1 = boundary_matrix(K, 1)
    assert (d1.rows, d1.cols) == (8, 12) and d1.column_weights() == [2] * 12
    with pytest.raises(ValueError):
        boundary_matrix(K, 0)


def test_boundary_squared_is_zero():
    for img in random_small_images(10, seed=31, max_size=4) + [TWO_DIAG]:
        g = build_q_grid(img)
        P = build_p_complex(g, repair_grid(g))
        for d in (2, 3):
            if P.counts()[d]:
                assert boundary_matrix(P, d - 1).matmul(boundary_matrix(P, d)).is_zero()


def test_betti_examples():
    assert betti(q_of([(0, 0, 0)])) == (1, 0, 0)
    shell = [p for p in itertools.product(range(3), repeat=3) if p != (1, 1, 1)]
    assert betti(q_of(shell)) == oracles.betti_of_cells(oracles.cube_complex(shell)) == (1, 0, 1)
    ring = [(x, y, 0) for x in range(3) for y in range(3) if (x, y) != (1, 1)]
    assert betti(q_of(ring)) == oracles.betti_of_cells(oracles.cube_complex(ring)) == (1, 1, 0)
    assert betti(q_of([])) == (0, 0, 0)


def test_euler_examples():
    K = q_of([(0, 0, 0)])
    assert euler(K) == 1
    assert euler(boundary_subcomplex(K)) == 2


def test_betti_against_dense_oracle():
    for img in random_small_images(12, seed=32, max_size=4):
        K = build_q_complex(build_q_grid(img))
        b = betti(K)
        assert b == oracles.betti_of_cells(oracles.cube_complex(img.foreground))
        assert b[0] - b[1] + b[2] == euler(K)
        assert b[0] == oracles.components26(img.foreground)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_rank_matches_dense_elimination(rows, cols, seed):
    rng = np.random.default_rng(seed)
    dense = rng.integers(0, 2, size=(rows, cols))
    m = Gf2Matrix(rows, cols)
    for i, j in zip(*np.nonzero(dense)):
        m.set(int(i), int(j))
    r = m.rank()
    assert r == oracles.rank_mod2(dense) == m.transpose().rank()
    assert r <= min(rows, cols)
    assert m[0, 0] == dense[0, 0]
