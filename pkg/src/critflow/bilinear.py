"""Duhamel bilinear operator and its kernel.

``B(u, v)(t) = int_0^t e^{(t - tau) Lap} P div(u(tau) (x) v(tau)) dtau``

Trajectory values between time nodes are interpolated linearly, so on each
interval the integrand is ``e^{(t - tau) Lap}`` times a quadratic polynomial
in ``tau`` whose three coefficients are nonlinear terms evaluated at node
data.  The heat factor is applied exactly at every Gauss node; the integral
over ``[0, t_{i+1}]`` is accumulated from ``[0, t_i]`` through the exact
identity ``e^{(t_{i+1} - tau) Lap} = e^{h Lap} e^{(t_i - tau) Lap}``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .field import SpectralField, Trajectory, to_physical
from .grid import Grid
from .spectral import cross_flux_divergence, flux_divergence


class BilinearError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    panels_per_interval: int = 1
    gauss_points: int = 4
    interpolation: str = "piecewise-linear"

    def __post_init__(self):
        if self.panels_per_interval < 1:
            raise BilinearError("panels_per_interval must be positive")
        if self.gauss_points < 2:
            raise BilinearError("gauss_points must be at least 2")
        if self.interpolation != "piecewise-linear":
            raise BilinearError(f"unsupported interpolation {self.interpolation!r}")


def _interval_weights(grid: Grid, h: float, span: float, quad: QuadratureSpec):
    """Mode-wise weights of the quadratic integrand over ``[0, span]`` of an interval of length ``h``.

    Returns ``(W_aa, W_ab, W_bb)`` such that the integral of
    ``e^{-(span - s)|k|^2} (a^2 N0 + a b C + b^2 N1)``, with ``b = s / h``,
    ``a = 1 - b``, is ``W_aa N0 + W_ab C + W_bb N1``.
    """
    x, w = np.polynomial.legendre.leggauss(quad.gauss_points)
    edges = np.linspace(0.0, span, quad.panels_per_interval + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    b = s / h
    a = 1.0 - b
    k2 = grid.k2
    W = [np.zeros(grid.spectral_shape) for _ in range(3)]
    for si, wi, ai, bi in zip(s, ws, a, b):
        e = wi * np.exp(-(span - si) * k2)
        W[0] += ai * ai * e
        W[1] += ai * bi * e
        W[2] += bi * bi * e
    return W


def _check_pair(u: Trajectory, v: Trajectory):
    if u.grid != v.grid:
        raise BilinearError("grid mismatch")
    if not np.array_equal(u.times, v.times):
        raise BilinearError("trajectories must share one time grid")
    if u.m != u.grid.d or v.m != v.grid.d:
        raise BilinearError("bilinear operator needs vector trajectories")


class _NodeTerms:
    """Streams node and cross nonlinear terms along a pair of trajectories."""

    def __init__(self, u: Trajectory, v: Trajectory):
        self.grid = u.grid
        self.u, self.v = u, v
        self.same = u is v or np.array_equal(u.coeffs, v.coeffs)
        self._phys: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def physical(self, i: int):
        if i not in self._phys:
            for key in [k for k in self._phys if k < i - 1]:
                del self._phys[key]
            U = to_physical(self.grid, self.u.coeffs[i])
            V = U if self.same else to_physical(self.grid, self.v.coeffs[i])
            self._phys[i] = (U, V)
        return self._phys[i]

    def node(self, i: int) -> np.ndarray:
        U, V = self.physical(i)
        if self.same:
            return 0.5 * flux_divergence(self.grid, U, U, symmetrize=True)
        return flux_divergence(self.grid, U, V)

    def cross(self, i: int) -> np.ndarray:
        """Coefficient of ``a b`` on ``[t_i, t_{i+1}]``: ``P div(u_i (x) v_{i+1} + u_{i+1} (x) v_i)``."""
        U0, V0 = self.physical(i)
        U1, V1 = self.physical(i + 1)
        if self.same:
            return flux_divergence(self.grid, U0, U1, symmetrize=True)
        return cross_flux_divergence(self.grid, U0, V0, U1, V1)


def _accumulate(u: Trajectory, v: Trajectory, quad: QuadratureSpec, last: int, t_end: float | None = None):
    """Duhamel values at nodes ``0..last`` and optionally at ``t_end`` in ``[t_last, t_{last+1}]``."""
    grid = u.grid
    times = u.times
    terms = _NodeTerms(u, v)
    out = np.zeros((last + 1, grid.d) + grid.spectral_shape, dtype=complex)
    cache: dict = {}
    acc = out[0]
    n_prev = terms.node(0) if (last > 0 or t_end is not None) else None
    for i in range(last):
        h = times[i + 1] - times[i]
        key = float(h)
        if key not in cache:
            cache[key] = (np.exp(-h * grid.k2), _interval_weights(grid, h, h, quad))
        decay, (Waa, Wab, Wbb) = cache[key]
        n_next = terms.node(i + 1)
        acc = decay * acc + Waa * n_prev + Wab * terms.cross(i) + Wbb * n_next
        out[i + 1] = acc
        n_prev = n_next
    tail = None
    if t_end is not None:
        span = t_end - times[last]
        if span <= 0:
            tail = out[last].copy()
        else:
            h = times[last + 1] - times[last]
            Waa, Wab, Wbb = _interval_weights(grid, h, span, quad)
            tail = (np.exp(-span * grid.k2) * out[last] + Waa * n_prev
                    + Wab * terms.cross(last) + Wbb * terms.node(last + 1))
    return out, tail


def bilinear_trajectory(u: Trajectory, v: Trajectory, quad: QuadratureSpec | None = None) -> Trajectory:
    """``B(u, v)`` at every node of the shared time grid (node 0 is zero)."""
    quad = quad or QuadratureSpec()
    _check_pair(u, v)
    out, _ = _accumulate(u, v, quad, len(u) - 1)
    return Trajectory(u.grid, u.times, out)


def duhamel_bilinear(u: Trajectory, v: Trajectory, t: float, quad: QuadratureSpec | None = None) -> SpectralField:
    """``B(u, v)(t)`` for any ``t`` in the trajectory span."""
    quad = quad or QuadratureSpec()
    _check_pair(u, v)
    times = u.times
    if t < 0 or t > times[-1]:
        raise BilinearError(f"t = {t} outside the trajectory span [0, {times[-1]}]")
    i = int(np.searchsorted(times, t, side="right") - 1)
    if times[i] == t:
        out, _ = _accumulate(u, v, quad, i)
        return SpectralField(u.grid, out[i])
    _, tail = _accumulate(u, v, quad, i, t_end=t)
    return SpectralField(u.grid, tail)


def heat_trajectory(u0: SpectralField, times) -> Trajectory:
    """``e^{t Lap} u0`` sampled at ``times``."""
    times = np.asarray(times, dtype=float)
    grid = u0.grid
    decay = np.exp(-grid.k2[None] * times.reshape((-1,) + (1,) * grid.d))
    return Trajectory(grid, times, u0.coeffs[None] * decay[:, None])


def stationary_trajectory(f: SpectralField, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(f.grid, times, np.broadcast_to(f.coeffs, (times.size,) + f.coeffs.shape))


# --- kernel of e^{Lap} P div ------------------------------------------------

#: Default fine grids (points per axis, box side) for the kernel evaluation.
KERNEL_GRIDS = {2: (512, 32 * np.pi), 3: (256, 32 * np.pi), 4: (64, 16 * np.pi)}


@dataclass
class KernelReport:
    radii: np.ndarray
    kernel_magnitudes: np.ndarray
    bound_constants: float
    per_direction: np.ndarray = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    @property
    def bound(self) -> np.ndarray:
        d = self.metadata["d"]
        return self.bound_constants * (1 + self.radii) ** (-(d + 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "|K|", "bound"])
        for r, k, b in zip(self.radii, self.kernel_magnitudes, self.bound):
            w.writerow([repr(float(r)), repr(float(k)), repr(float(b))])
        return buf.getvalue()


def kernel_axis_samples(d: int, radii: np.ndarray, n: int, box_length: float) -> np.ndarray:
    """``|K(r e_a)|`` (Frobenius over all ``K_{l,k,j}``) for each radius and coordinate axis.

    ``K`` is the inverse Fourier transform of
    ``(2 pi)^{-d/2} e^{-|xi|^2} (delta_jk - xi_j xi_k / |xi|^2) i xi_l``,
    discretized on the lattice ``xi = 2 pi k / box_length``.  On an axis the
    transform only needs the marginal of the symbol over the other
    frequencies, which is then summed against ``e^{i r xi_a}`` exactly.
    """
    dxi = 2 * np.pi / box_length
    xi1 = np.fft.fftfreq(n, 1.0 / n) * dxi
    rest = np.meshgrid(*([xi1] * (d - 1)), indexing="ij")
    pairs = [(j, k) for j in range(d) for k in range(j, d)]
    mult = np.array([1.0 if j == k else 2.0 for j, k in pairs])
    prefac = (2 * np.pi) ** (-d / 2) * dxi**d * (2 * np.pi) ** (-d / 2)
    out = np.zeros((len(radii), d))
    for axis in range(d):
        # marginal[l, pair, slab]
        marginal = np.zeros((d, len(pairs), n))
        for s, xa in enumerate(xi1):
            comps = list(rest)
            comps.insert(axis, np.full_like(rest[0], xa))
            xi2 = sum(c * c for c in comps)
            g = np.exp(-xi2)
            safe = np.where(xi2 == 0, 1.0, xi2)
            for p, (j, k) in enumerate(pairs):
                proj = (1.0 if j == k else 0.0) - comps[j] * comps[k] / safe
                gp = g * proj
                for l in range(d):
                    marginal[l, p, s] = (gp * comps[l]).sum()
        # K = prefac * sum_s i * marginal * e^{i r xi}; symbol odd => real result
        phase = np.exp(1j * np.outer(radii, xi1))
        vals = np.real(1j * np.einsum("lps,rs->rlp", marginal, phase)) * prefac
        out[:, axis] = np.sqrt((vals**2 * mult[None, None, :]).sum(axis=(1, 2)))
    return out


def kernel_decay_check(d: int, radii, n: int | None = None, box_length: float | None = None) -> KernelReport:
    """Sample ``|K|`` along the coordinate axes and fit ``|K(x)| <= c (1 + |x|)^{-(d+1)}``."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise BilinearError("radii must be positive and strictly increasing")
    if d not in KERNEL_GRIDS:
        raise BilinearError(f"d out of range: {d}")
    dn, dL = KERNEL_GRIDS[d]
    n = dn if n is None else n
    box_length = dL if box_length is None else box_length
    window = box_length / 4
    if radii[-1] > window:
        raise BilinearError(f"radius {radii[-1]} beyond the reliable window {window:.3g} of the kernel grid")
    per_dir = kernel_axis_samples(d, radii, n, box_length)
    mags = per_dir.max(axis=1)
    c = float((mags * (1 + radii) ** (d + 1)).max())
    meta = {"d": d, "n": n, "box_length": box_length, "directions": "coordinate axes",
            "window": window}
    return KernelReport(radii, mags, c, per_dir, meta)


__all__ = [
    "QuadratureSpec",
    "BilinearError",
    "duhamel_bilinear",
    "bilinear_trajectory",
    "heat_trajectory",
    "stationary_trajectory",
    "KernelReport",
    "kernel_decay_check",
]

