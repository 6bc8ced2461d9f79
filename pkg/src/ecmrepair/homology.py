"""Betti numbers over GF(2) of a cell-incidence complex.

Matrices store each row as a Python int used as a bitset, so elimination is a
handful of XORs per pivot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .complex import PolyComplex


@dataclass
class Gf2Matrix:
    rows: int
    cols: int
    data: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.data:
            self.data = [0] * self.rows
        if len(self.data) != self.rows:
            raise ValueError("row count does not match data")

    def __getitem__(self, ij) -> int:
        i, j = ij
        return self.data[i] >> j & 1

    def set(self, i: int, j: int, value: int = 1) -> None:
        if value & 1:
            self.data[i] |= 1 << j
        else:
            self.data[i] &= ~(1 << j)

    def column_weights(self) -> list[int]:
        return [sum(r >> j & 1 for r in self.data) for j in range(self.cols)]

    def transpose(self) -> "Gf2Matrix":
        out = Gf2Matrix(self.cols, self.rows)
        for i, r in enumerate(self.data):
            while r:
                low = r & -r
                out.data[low.bit_length() - 1] |= 1 << i
                r ^= low
        return out

    def matmul(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        out = Gf2Matrix(self.rows, other.cols)
        for i, r in enumerate(self.data):
            acc = 0
            while r:
                low = r & -r
                acc ^= other.data[low.bit_length() - 1]
                r ^= low
            out.data[i] = acc
        return out

    def is_zero(self) -> bool:
        return not any(self.data)

    def rank(self) -> int:
        # pivot on the lowest set bit; each stored pivot row owns that bit
        pivots: dict[int, int] = {}
        for r in self.data:
            while r:
                low = (r & -r).bit_length() - 1
                p = pivots.get(low)
                if p is None:
                    pivots[low] = r
                    break
                r ^= p
        return len(pivots)


def boundary_matrix(K: PolyComplex, d: int) -> Gf2Matrix:
    """Incidence of d-cells (columns) on (d-1)-cells (rows), keys sorted."""
    if not 1 <= d <= 3:
        raise ValueError("boundary dimension must be 1, 2 or 3")
    rows = K.keys(d - 1)
    cols = K.keys(d)
    index = {k: i for i, k in enumerate(rows)}
    m = Gf2Matrix(len(rows), len(cols))
    for j, k in enumerate(cols):
        for f in set(K[k].facets):
            m.data[index[f]] |= 1 << j
    return m


def euler(K: PolyComplex) -> int:
    return K.euler()


def betti(K: PolyComplex) -> tuple[int, int, int]:
    counts = K.counts()
    ranks = [0] + [boundary_matrix(K, d).rank() if counts[d] else 0 for d in (1, 2, 3)] + [0]
    # b_i = (c_i - rank d_i) - rank d_{i+1}
    return tuple(counts[i] - ranks[i] - ranks[i + 1] for i in range(3))


__all__ = ["Gf2Matrix", "betti", "boundary_matrix", "euler"]
