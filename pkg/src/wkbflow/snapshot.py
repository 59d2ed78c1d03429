"""WKBF binary snapshot format.

Layout (all little-endian)::

    b"WKBF"               magic
    u16 version           currently 1
    u16 dim
    f64 x dim             domain lengths
    u32 x dim             spatial sample counts
    u32 n_theta
    u16 n_fields
    per field:
        u16 name length, utf-8 name
        u8  kind (0 scalar, 1 vector, 2 loop, 3 vector loop)
        f64 payload       collocation values, component axis first,
                          spatial axes next (row-major), theta innermost

Loop fields are written as theta-collocation samples, not harmonics, so the
file can be read without knowing the harmonic convention.
"""

from __future__ import annotations

import struct

import numpy as np

from .torus import LoopField, ScalarField, TorusGrid, VectorField, VectorLoopField

MAGIC = b"WKBF"
VERSION = 1
KINDS = {ScalarField: 0, VectorField: 1, LoopField: 2, VectorLoopField: 3}


def _payload(field) -> np.ndarray:
    if isinstance(field, LoopField):
        return field.values()
    return field.values


def write_snapshot(path, fields: dict, grid: TorusGrid) -> None:
    """Write a mapping ``name -> field`` sharing ``grid``."""
    out = bytearray(MAGIC)
    out += struct.pack("<HH", VERSION, grid.dim)
    out += struct.pack(f"<{grid.dim}d", *grid.lengths)
    out += struct.pack(f"<{grid.dim}I", *grid.n_x)
    out += struct.pack("<IH", grid.n_theta, len(fields))
    for name, field in fields.items():
        if field.grid != grid:
            raise ValueError(f"field {name!r} lives on a different grid")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", KINDS[type(field)])
        out += np.ascontiguousarray(_payload(field), dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def read_snapshot(path):
    """Return ``(grid, {name: field})``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError("not a WKBF snapshot")
    pos = 4
    version, dim = struct.unpack_from("<HH", buf, pos)
    pos += 4
    if version != VERSION:
        raise ValueError(f"unsupported WKBF version {version}")
    lengths = struct.unpack_from(f"<{dim}d", buf, pos)
    pos += 8 * dim
    n_x = struct.unpack_from(f"<{dim}I", buf, pos)
    pos += 4 * dim
    n_theta, n_fields = struct.unpack_from("<IH", buf, pos)
    pos += 6
    grid = TorusGrid(dim, lengths, n_x, n_theta)
    fields = {}
    for _ in range(n_fields):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        kind = buf[pos]
        pos += 1
        shape = grid.shape
        if kind in (1, 3):
            shape = (dim,) + shape
        if kind in (2, 3):
            shape = shape + (n_theta,)
        count = int(np.prod(shape))
        vals = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        cls = {0: ScalarField, 1: VectorField, 2: LoopField, 3: VectorLoopField}[kind]
        fields[name] = cls.from_values(grid, vals) if kind >= 2 else cls(grid, vals)
    return grid, fields
