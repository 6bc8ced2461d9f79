"""Reading and writing 3D binary images.

Two text formats are supported:

``voxgrid``
    A header ``voxgrid nx ny nz`` followed by ``nx*ny*nz`` tokens ``0``/``1``,
    x varying fastest, then y, then z.  The origin is voxel (0, 0, 0).

coordinate CSV
    One ``x,y,z`` integer triple per non-empty line.  Coordinates may be
    negative; duplicates are collapsed and counted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

Point = tuple[int, int, int]


class ImageFormatError(ValueError):
    """Raised when an image file cannot be parsed."""


@dataclass(frozen=True)
class BinaryImage:
    """Finite foreground set of voxel centers in Z^3."""

    foreground: frozenset[Point]
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def from_points(cls, points: Iterable, **metadata) -> "BinaryImage":
        return cls(frozenset(tuple(int(c) for c in p) for p in points), dict(metadata))

    @classmethod
    def from_array(cls, mask, offset=(0, 0, 0)) -> "BinaryImage":
        idx = np.argwhere(np.asarray(mask, dtype=bool)) + np.asarray(offset)
        return cls.from_points(idx.tolist())

    @property
    def is_empty(self) -> bool:
        return not self.foreground

    @property
    def bbox(self) -> tuple[Point, Point] | None:
        if not self.foreground:
            return None
        arr = self.as_array()
        return tuple(arr.min(axis=0).tolist()), tuple(arr.max(axis=0).tolist())

    def as_array(self) -> np.ndarray:
        """Foreground as a sorted ``(n, 3)`` integer array."""
        if not self.foreground:
            return np.zeros((0, 3), dtype=np.int64)
        return np.array(sorted(self.foreground), dtype=np.int64)

    def to_mask(self) -> tuple[np.ndarray, Point]:
        """Dense boolean mask over the bounding box and its minimum corner."""
        if not self.foreground:
            return np.zeros((0, 0, 0), dtype=bool), (0, 0, 0)
        lo, hi = self.bbox
        arr = self.as_array() - np.asarray(lo)
        mask = np.zeros(tuple(np.asarray(hi) - np.asarray(lo) + 1), dtype=bool)
        mask[tuple(arr.T)] = True
        return mask, lo

    def translated(self, shift) -> "BinaryImage":
        sx, sy, sz = (int(s) for s in shift)
        return BinaryImage(frozenset((x + sx, y + sy, z + sz) for x, y, z in self.foreground))

    def __len__(self) -> int:
        return len(self.foreground)


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        try:
            return bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ImageFormatError(f"not valid UTF-8 at byte {exc.start}") from exc
    return str(data)


_TOKEN = re.compile(r"\S+")


def parse_voxgrid(data) -> BinaryImage:
    text = _decode(data)
    tokens = list(_TOKEN.finditer(text))
    if len(tokens) < 4 or tokens[0].group() != "voxgrid":
        raise ImageFormatError("malformed header: expected 'voxgrid nx ny nz' at byte 0")
    dims = []
    for tok in tokens[1:4]:
        try:
            n = int(tok.group())
        except ValueError:
            n = 0
        if n <= 0:
            raise ImageFormatError(
                f"malformed header: invalid dimension {tok.group()!r} at byte {tok.start()}"
            )
        dims.append(n)
    nx, ny, nz = dims
    body = tokens[4:]
    expected = nx * ny * nz
    for tok in body[:expected]:
        if tok.group() not in ("0", "1"):
            raise ImageFormatError(f"invalid token {tok.group()!r} at byte {tok.start()}")
    if len(body) != expected:
        where = body[expected].start() if len(body) > expected else len(text.encode("utf-8"))
        raise ImageFormatError(
            f"token count mismatch: expected {expected}, got {len(body)} (at byte {where})"
        )
    flags = np.fromiter((tok.group() == "1" for tok in body), dtype=bool, count=expected)
    # x fastest -> Fortran order over (nx, ny, nz)
    mask = flags.reshape((nx, ny, nz), order="F")
    img = BinaryImage.from_array(mask)
    img.metadata["shape"] = (nx, ny, nz)
    return img


def parse_coords(data) -> BinaryImage:
    text = _decode(data)
    seen: set[Point] = set()
    duplicates = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            raise ImageFormatError(f"expected 3 fields, got {len(fields)} at line {lineno}")
        try:
            p = tuple(int(f) for f in fields)
        except ValueError:
            raise ImageFormatError(f"non-integer field in {line!r} at line {lineno}") from None
        if p in seen:
            duplicates += 1
        seen.add(p)
    return BinaryImage(frozenset(seen), {"duplicates": duplicates, "empty": not seen})


def serialize_voxgrid(image: BinaryImage) -> bytes:
    """Write as voxgrid.  The grid spans voxel (0,0,0) to the bbox maximum."""
    arr = image.as_array()
    if arr.size and arr.min() < 0:
        raise ImageFormatError("voxgrid cannot hold negative coordinates; translate first")
    shape = tuple(arr.max(axis=0) + 1) if arr.size else (1, 1, 1)
    mask = np.zeros(shape, dtype=bool)
    if arr.size:
        mask[tuple(arr.T)] = True
    nx, ny, nz = mask.shape
    flat = mask.ravel(order="F").astype(np.uint8)
    rows = []
    for z in range(nz):
        for y in range(ny):
            start = (z * ny + y) * nx
            rows.append(" ".join(map(str, flat[start:start + nx])))
    return (f"voxgrid {nx} {ny} {nz}\n" + "\n".join(rows) + "\n").encode()


def serialize_coords(image: BinaryImage) -> bytes:
    return "".join(f"{x},{y},{z}\n" for x, y, z in sorted(image.foreground)).encode()


def read_image(path, fmt: str | None = None) -> BinaryImage:
    path = str(path)
    if fmt is None:
        if path.endswith(".csv"):
            fmt = "coords"
        elif path.endswith(".vox"):
            fmt = "voxgrid"
        else:
            raise ImageFormatError(f"cannot infer format of {path!r}; pass --format")
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "voxgrid":
        return parse_voxgrid(data)
    if fmt == "coords":
        return parse_coords(data)
    raise ImageFormatError(f"unknown format {fmt!r}")
