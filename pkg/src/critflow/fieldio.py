"""CFF1 field files.

Layout: one ASCII header line ``CFF1 d=<d> n=<n> L=<decimal> m=<m>\\n``
followed by little-endian float64 ``(re, im)`` pairs for every mode in
row-major ``(component, k_1, ..., k_d)`` order, each ``k_i`` running from
``-n/2`` to ``n/2 - 1``.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .field import SpectralField, full_to_half, half_to_full
from .grid import Grid, make_grid

_HEADER = re.compile(rb"^CFF1 d=(\d+) n=(\d+) L=([0-9eE.+-]+) m=(\d+)\n")


class CFF1Error(ValueError):
    pass


def encode_field(f: SpectralField) -> bytes:
    grid = f.grid
    full = half_to_full(grid, f.coeffs)
    # fft order -> ascending k from -n/2
    full = np.fft.fftshift(full, axes=grid.axes)
    header = f"CFF1 d={grid.d} n={grid.n} L={grid.box_length!r} m={f.m}\n".encode("ascii")
    return header + np.ascontiguousarray(full).astype("<c16").tobytes()


def decode_field(data: bytes) -> SpectralField:
    match = _HEADER.match(data)
    if match is None:
        raise CFF1Error("missing or malformed CFF1 header")
    d, n, m = int(match[1]), int(match[2]), int(match[4])
    L = float(match[3])
    grid = make_grid(d, n, L)
    body = data[match.end() :]
    count = m * n**d
    if len(body) != 16 * count:
        raise CFF1Error(f"expected {16 * count} payload bytes, found {len(body)}")
    full = np.frombuffer(body, dtype="<c16").astype(complex).reshape((m,) + (n,) * d)
    full = np.fft.ifftshift(full, axes=grid.axes)
    return SpectralField(grid, full_to_half(grid, full))


def write_field(path: str | os.PathLike, f: SpectralField) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_field(f))


def read_field(path: str | os.PathLike) -> SpectralField:
    with open(path, "rb") as fh:
        return decode_field(fh.read())


def write_trajectory(directory: str | os.PathLike, traj, stem: str = "state") -> list[str]:
    """Dump each state as ``<stem>_<index>.cff`` plus a ``times.csv`` index."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    with open(os.path.join(directory, "times.csv"), "w") as idx:
        idx.write("index,t,file\n")
        for i, state in enumerate(traj):
            name = f"{stem}_{i:04d}.cff"
            write_field(os.path.join(directory, name), state)
            idx.write(f"{i},{float(traj.times[i])!r},{name}\n")
            paths.append(os.path.join(directory, name))
    return paths


__all__ = ["CFF1Error", "encode_field", "decode_field", "write_field", "read_field", "write_trajectory"]
