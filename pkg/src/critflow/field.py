"""Field containers: spectral fields and time trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import scipy.fft as sfft

from .grid import Grid

#: Relative size below which the mean mode counts as zero.
MEAN_TOL = 1e-13


class FieldError(ValueError):
    pass


def to_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Real samples from half-spectrum coefficients (any leading batch axes)."""
    return sfft.irfftn(coeffs, s=grid.shape, axes=grid.axes) * grid.modes


def to_spectral(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, axes=grid.axes) / grid.modes


def _mirror(a: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Index map ``i -> (-i) mod n`` along ``axes``."""
    return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def half_to_full(grid: Grid, half: np.ndarray) -> np.ndarray:
    n, h = grid.n, grid.n // 2 + 1
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., :h] = half
    # negative last-axis frequencies: c(k', -k_d) = conj c(-k', k_d)
    tail = half[..., 1 : n - h + 1]
    lead_axes = tuple(range(-grid.d, -1))
    if lead_axes:
        tail = _mirror(tail, lead_axes)
    full[..., h:] = np.conj(tail[..., ::-1])
    return full


def full_to_half(grid: Grid, full: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(full[..., : grid.n // 2 + 1])


class SpectralField:
    """Immutable real field on a periodic grid, stored as Fourier coefficients.

    ``coeffs`` has shape ``(m, *grid.spectral_shape)`` and is normalized so
    that ``f(x) = sum_k c_k exp(i 2 pi k.x / L)``.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape == grid.spectral_shape:
            coeffs = coeffs[None]
        if coeffs.ndim != grid.d + 1 or coeffs.shape[1:] != grid.spectral_shape:
            raise FieldError(f"coefficient shape {coeffs.shape} does not fit grid {grid}")
        if not coeffs.flags.owndata or coeffs.flags.writeable:
            coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            values = values[None]
        return cls(grid, to_spectral(grid, values))

    @classmethod
    def zeros(cls, grid: Grid, m: int | None = None) -> "SpectralField":
        m = grid.d if m is None else m
        return cls(grid, np.zeros((m,) + grid.spectral_shape, dtype=complex))

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.m == self.grid.d

    def physical(self) -> np.ndarray:
        return to_physical(self.grid, self.coeffs)

    def full_coeffs(self) -> np.ndarray:
        return half_to_full(self.grid, self.coeffs)

    @property
    def mean(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.grid.d].copy()

    def is_zero_mean(self, rtol: float = MEAN_TOL) -> bool:
        scale = float(np.abs(self.coeffs).max(initial=0.0))
        return bool(np.all(np.abs(self.mean) <= rtol * scale))

    def without_mean(self) -> "SpectralField":
        c = self.coeffs.copy()
        c[(slice(None),) + (0,) * self.grid.d] = 0.0
        return SpectralField(self.grid, c)

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i : i + 1])

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid or other.m != self.m:
            raise FieldError("fields live on different grids or have different component counts")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def allclose(self, other: "SpectralField", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.abs(self.coeffs - other.coeffs).max(initial=0.0) <= atol)

    def __repr__(self):
        return f"SpectralField(grid={self.grid}, m={self.m})"


class Trajectory:
    """Time-indexed sequence of fields on one grid.

    States are stacked into one array of shape ``(len(times), m, *spectral_shape)``.
    """

    __slots__ = ("grid", "times", "coeffs")

    def __init__(self, grid: Grid, times: Sequence[float], coeffs: np.ndarray):
        times = np.array(times, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        if times.ndim != 1 or times.size == 0:
            raise FieldError("trajectory needs at least one time node")
        if times[0] != 0.0:
            raise FieldError("first time node must be 0")
        if np.any(np.diff(times) <= 0):
            raise FieldError("time nodes must be strictly increasing")
        if coeffs.shape[0] != times.size or coeffs.shape[2:] != grid.spectral_shape:
            raise FieldError("state array does not match times/grid")
        if coeffs.flags.writeable:
            coeffs = coeffs.copy()
            coeffs.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    @classmethod
    def from_states(cls, times: Sequence[float], states: Sequence[SpectralField]) -> "Trajectory":
        if not states:
            raise FieldError("trajectory needs at least one state")
        grid, m = states[0].grid, states[0].m
        for s in states:
            if s.grid != grid or s.m != m:
                raise FieldError("all states must share one grid and component count")
        return cls(grid, times, np.stack([s.coeffs for s in states]))

    @property
    def m(self) -> int:
        return self.coeffs.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    def __iter__(self) -> Iterator[SpectralField]:
        return (self[i] for i in range(len(self)))

    def at(self, t: float) -> SpectralField:
        """Piecewise-linear interpolation in time."""
        times = self.times
        if t < 0 or t > times[-1] * (1 + 1e-14):
            raise FieldError(f"t = {t} outside trajectory span [0, {times[-1]}]")
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1))
        if i == len(times) - 1:
            return self[i]
        b = (t - times[i]) / (times[i + 1] - times[i])
        return SpectralField(self.grid, (1 - b) * self.coeffs[i] + b * self.coeffs[i + 1])

    def _check(self, other: "Trajectory"):
        if other.grid != self.grid or other.m != self.m or not np.array_equal(other.times, self.times):
            raise FieldError("trajectories do not share grid and time nodes")

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check(other)
        return Trajectory(self.grid, self.times, self.coeffs + other.coeffs)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check(other)
        return Trajectory(self.grid, self.times, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "Trajectory":
        return Trajectory(self.grid, self.times, self.coeffs * a)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Trajectory(grid={self.grid}, m={self.m}, nodes={len(self)}, T={self.T})"
