"""Periodic box discretization.

The torus ``[0, L)^d`` stands in for ``R^d``.  Fields are stored in the
half-spectrum layout of a real FFT: every axis but the last carries the
integer wavenumbers ``0 .. n/2-1, -n/2 .. -1`` and the last axis carries
``0 .. n/2``.  Physical wavenumbers are ``2*pi*k / L``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

#: Per-component mode budget enforced at grid construction.
MAX_MODES = 2**24


class GridError(ValueError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    box_length: float = 2 * np.pi

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 2 <= self.d <= 4:
            raise GridError(f"d out of range: {self.d} (need 2 <= d <= 4)")
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(self.n):
            raise GridError(f"n must be a power of two, got {self.n}")
        if self.n < 8:
            raise GridError(f"n must be at least 8, got {self.n}")
        if not self.box_length > 0:
            raise GridError(f"box_length must be positive, got {self.box_length}")

    @property
    def modes(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing axes holding the spatial/spectral dimensions."""
        return tuple(range(-self.d, 0))

    @property
    def cell_volume(self) -> float:
        return (self.box_length / self.n) ** self.d

    @property
    def volume(self) -> float:
        return self.box_length**self.d

    @cached_property
    def k_int(self) -> tuple[np.ndarray, ...]:
        """Integer wavevector components, each broadcastable to ``spectral_shape``."""
        ks = []
        for i in range(self.d):
            if i == self.d - 1:
                k = np.arange(self.n // 2 + 1, dtype=float)
            else:
                k = np.fft.fftfreq(self.n, 1.0 / self.n)
            shape = [1] * self.d
            shape[i] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        scale = 2 * np.pi / self.box_length
        return tuple(scale * k for k in self.k_int)

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared physical wavenumber magnitude on the spectral grid."""
        out = np.zeros(self.spectral_shape)
        for k in self.wavenumbers:
            out = out + k * k
        return out

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def kmag_int(self) -> np.ndarray:
        """Lattice magnitude ``|k|`` (equals ``kmag`` when ``L = 2*pi``)."""
        out = np.zeros(self.spectral_shape)
        for k in self.k_int:
            out = out + k * k
        return np.sqrt(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where every ``|k_i| <= n/3`` (2/3 rule)."""
        mask = np.ones(self.spectral_shape, dtype=bool)
        for k in self.k_int:
            mask = mask & (np.abs(k) <= self.n / 3)
        return mask

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes having some component equal to ``-n/2`` (or ``n/2`` on the last axis)."""
        mask = np.zeros(self.spectral_shape, dtype=bool)
        for k in self.k_int:
            mask = mask | (np.abs(k) == self.n // 2)
        return mask

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum mode in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * (self.box_length / self.n)
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    def with_box(self, box_length: float) -> "Grid":
        return Grid(self.d, self.n, box_length)


def make_grid(d: int, n: int, box_length: float = 2 * np.pi, max_modes: int | None = None) -> Grid:
    """Build and validate a grid; ``max_modes`` overrides the module budget."""
    grid = Grid(d, n, float(box_length))
    budget = MAX_MODES if max_modes is None else max_modes
    if grid.modes > budget:
        raise GridError(f"grid needs {grid.modes} modes per component, budget is {budget}")
    return grid
