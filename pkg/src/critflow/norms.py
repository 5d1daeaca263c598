"""Function-space norms of periodic fields and trajectories.

Spatial integrals use the rectangle rule on the physical grid; vector fields
are measured through their pointwise Euclidean magnitude.  For ``q = 2`` the
rectangle rule is evaluated through the discrete Parseval identity, which is
the same number without the inverse transform.

For exponents that are not even integers ``|f|^q`` is only finitely smooth
at the zeros of ``f`` and the rectangle rule converges like ``h^{q+1}``.
``levels > 1`` evaluates the rule on trigonometric interpolants with
``n, 2n, 4n, ...`` points per axis and removes the ``h^{q+1}, h^{q+3}, ...``
error terms by Richardson extrapolation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .field import SpectralField, Trajectory, to_physical
from .grid import Grid
from .quadrature import composite_gauss, geometric_edges, near_zero_rule
from .spectral import bessel_multiplier, riesz_multiplier

KINDS = ("lebesgue", "sobolev_hom", "sobolev_inhom", "besov_lp", "besov_heat")

#: States transformed per batch when a physical-space norm is needed.
BATCH = 8


class NormError(ValueError):
    pass


@dataclass(frozen=True)
class NormSpec:
    kind: str
    s: float = 0.0
    q: float = 2.0
    p: float = 2.0
    alpha: float = 0.0
    levels: int = 1

    def validate(self, d: int) -> "NormSpec":
        if self.kind not in KINDS:
            raise NormError(f"unknown norm kind {self.kind!r}")
        if not (isinstance(self.levels, (int, np.integer)) and self.levels >= 1):
            raise NormError(f"levels must be a positive integer, got {self.levels}")
        if not 1 < self.q < np.inf:
            raise NormError(f"spatial exponent must satisfy 1 < q < inf, got {self.q}")
        if self.kind.startswith("besov") and not 1 <= self.p <= np.inf:
            raise NormError(f"summation exponent must satisfy 1 <= p <= inf, got {self.p}")
        if self.kind == "sobolev_hom" and not self.s < d / self.q:
            raise NormError(f"homogeneous Sobolev norm needs s < d/q ({self.s} >= {d / self.q})")
        if self.kind == "besov_heat":
            if self.alpha < 0:
                raise NormError("alpha must be nonnegative")
            if not self.s < self.alpha:
                raise NormError("characterization hypothesis violated: need s < alpha")
        return self

    @property
    def homogeneous(self) -> bool:
        return self.kind != "sobolev_inhom"


@dataclass
class NormValue:
    value: float
    spec: NormSpec
    metadata: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def csv_row(self) -> dict:
        m = self.metadata
        return {
            "kind": self.spec.kind,
            "s": self.spec.s,
            "p": self.spec.p,
            "q": self.spec.q,
            "alpha": self.spec.alpha,
            "value": self.value,
            "t_min": m.get("t_min", ""),
            "t_max": m.get("t_max", ""),
            "grid_n": m.get("grid_n", ""),
            "box_L": m.get("box_L", ""),
        }


CSV_FIELDS = ["kind", "s", "p", "q", "alpha", "value", "t_min", "t_max", "grid_n", "box_L"]


def norms_to_csv(values: Iterable[NormValue]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for v in values:
        writer.writerow({k: repr(float(x)) if isinstance(x, float) else x for k, x in v.csv_row().items()})
    return buf.getvalue()


def _meta(grid: Grid, **extra) -> dict:
    meta = {"grid_n": grid.n, "box_L": grid.box_length, "d": grid.d, "quadrature": "rectangle",
            "vector_norm": "pointwise-euclidean"}
    meta.update(extra)
    return meta


def _require_zero_mean(f: SpectralField, what: str):
    if not f.is_zero_mean():
        raise NormError(f"{what} needs a zero-mean field")


def _pad_half(grid: Grid, coeffs: np.ndarray, fine: Grid) -> np.ndarray:
    """Trigonometric interpolant of half-spectrum ``coeffs`` on the finer grid ``fine``.

    Nyquist modes are split evenly between ``+n/2`` and ``-n/2`` so the
    interpolant stays real.
    """
    n, N, d = grid.n, fine.n, grid.d
    h = n // 2
    out = coeffs
    lead = coeffs.ndim - d
    for ax in range(d):
        a = lead + ax
        shape = list(out.shape)
        last = ax == d - 1
        shape[a] = N // 2 + 1 if last else N
        big = np.zeros(shape, dtype=complex)
        sl = lambda lo, hi: (slice(None),) * a + (slice(lo, hi),)  # noqa: E731
        big[sl(0, h)] = out[sl(0, h)]
        nyq = 0.5 * out[sl(h, h + 1)]
        big[sl(h, h + 1)] = nyq
        if not last:
            big[sl(N - h + 1, N)] = out[sl(h + 1, n)]
            big[sl(N - h, N - h + 1)] = nyq
        out = big
    return out


def _power_sums(grid: Grid, coeffs: np.ndarray, q: float) -> np.ndarray:
    """Rectangle-rule integrals of ``|f|^q`` for a flat stack ``(N, m, *spectral_shape)``."""
    out = np.empty(coeffs.shape[0])
    batch = max(1, BATCH * 32**grid.d // grid.n**grid.d)
    for start in range(0, coeffs.shape[0], batch):
        phys = to_physical(grid, coeffs[start : start + batch])
        mag2 = (phys * phys).sum(axis=1)
        out[start : start + batch] = grid.cell_volume * (mag2 ** (q / 2)).reshape(mag2.shape[0], -1).sum(axis=1)
    return out


def _max_axis_mode(grid: Grid, coeffs: np.ndarray) -> int:
    support = np.abs(coeffs).reshape((-1,) + grid.spectral_shape).max(axis=0) > 0
    if not support.any():
        return 0
    return int(max(np.abs(k[support]).max() for k in np.broadcast_arrays(*grid.k_int)))


def _lq_batch(grid: Grid, coeffs: np.ndarray, q: float, levels: int = 1) -> np.ndarray:
    """L^q norms of a stack ``(..., m, *spectral_shape)`` of fields."""
    lead = coeffs.shape[: -grid.d - 1]
    if q == 2:
        w = grid.hermitian_weights
        energy = (w * (coeffs.real**2 + coeffs.imag**2)).reshape(lead + (-1,)).sum(axis=-1)
        return np.sqrt(grid.volume * energy)
    flat = coeffs.reshape((-1,) + coeffs.shape[-grid.d - 1 :])
    if q % 2 == 0 and levels > 1:
        # |f|^q is a trigonometric polynomial; stop at the first grid that integrates it exactly
        K = _max_axis_mode(grid, flat)
        levels = min(levels, next((j + 1 for j in range(levels) if q * K < grid.n * 2**j), levels))
    sums = [_power_sums(grid, flat, q)]
    for j in range(1, levels):
        fine = Grid(grid.d, grid.n * 2**j, grid.box_length)
        sums.append(_power_sums(fine, _pad_half(grid, flat, fine), q))
    if q % 2 == 0:
        total = sums[-1]
    else:
        # Richardson table on the exponents q + 1, q + 3, ...
        row = sums
        for k in range(1, levels):
            c = 2.0 ** (q + 2 * k - 1)
            row = [(c * row[i + 1] - row[i]) / (c - 1) for i in range(len(row) - 1)]
        total = np.maximum(row[0], 0.0)
    return (total ** (1.0 / q)).reshape(lead)


def lebesgue_norm(f: SpectralField, q: float, levels: int = 1) -> NormValue:
    spec = NormSpec("lebesgue", q=q, levels=levels).validate(f.grid.d)
    value = float(_lq_batch(f.grid, f.coeffs, q, levels))
    return NormValue(value, spec, _meta(f.grid, levels=levels))


def _sobolev_multiplier(grid: Grid, s: float, homogeneous: bool) -> np.ndarray | None:
    if homogeneous:
        return riesz_multiplier(grid, s)
    return None if s == 0 else bessel_multiplier(grid, s)


def sobolev_norm(f: SpectralField, s: float, q: float, homogeneous: bool = True, levels: int = 1) -> NormValue:
    """``||Lambda^s f||_q`` (homogeneous) or ``||(1 - Laplacian)^(s/2) f||_q``."""
    kind = "sobolev_hom" if homogeneous else "sobolev_inhom"
    spec = NormSpec(kind, s=s, q=q, levels=levels).validate(f.grid.d)
    if homogeneous:
        _require_zero_mean(f, "homogeneous Sobolev norm")
    mult = _sobolev_multiplier(f.grid, s, homogeneous)
    c = f.coeffs if mult is None else f.coeffs * mult
    return NormValue(float(_lq_batch(f.grid, c, q, levels)), spec, _meta(f.grid, levels=levels))


def block_range(grid: Grid) -> range:
    """Dyadic indices ``j`` whose annulus ``2^j <= |k| < 2^(j+1)`` meets the resolved band.

    Wavenumbers are physical, so the first block holds the lowest nonzero
    mode ``2 pi / L`` and the last one starts at or below ``(2 pi / L) n / 3``.
    """
    k0 = 2 * np.pi / grid.box_length
    lo = int(np.floor(np.log2(k0) + 1e-12))
    hi = int(np.floor(np.log2(k0 * grid.n / 3) + 1e-12))
    return range(lo, hi + 1)


def block_count(grid: Grid) -> int:
    return len(block_range(grid))


def lp_blocks(grid: Grid) -> list[np.ndarray]:
    # integer-scaled comparison keeps box 2 pi blocks free of rounding
    k = grid.kmag_int * (2 * np.pi / grid.box_length)
    tol = 1e-12
    return [(k >= 2.0**j * (1 - tol)) & (k < 2.0 ** (j + 1) * (1 - tol)) for j in block_range(grid)]


def _ell_p(values: np.ndarray, p: float) -> float:
    if p == np.inf:
        return float(values.max(initial=0.0))
    return float((values**p).sum() ** (1.0 / p))


def besov_norm_lp(f: SpectralField, s: float, p: float, q: float, levels: int = 1) -> NormValue:
    """Dyadic-block Besov norm with sharp annuli ``2^j <= |k| < 2^(j+1)``."""
    spec = NormSpec("besov_lp", s=s, q=q, p=p, levels=levels).validate(f.grid.d)
    _require_zero_mean(f, "homogeneous Besov norm")
    grid = f.grid
    blocks = lp_blocks(grid)
    stack = np.stack([f.coeffs * b for b in blocks])
    block_norms = _lq_batch(grid, stack, q, levels)
    weighted = 2.0 ** (s * np.array(block_range(grid), dtype=float)) * block_norms
    meta = _meta(grid, blocks=len(blocks), block_norms=block_norms.tolist(), partition="sharp-annuli")
    return NormValue(_ell_p(weighted, p), spec, meta)


def _heat_lq_profile(grid: Grid, coeffs: np.ndarray, times: np.ndarray, q: float, levels: int = 1) -> np.ndarray:
    """``||e^{t Laplacian} f||_q`` at every ``t`` in ``times``."""
    if q == 2:
        w = grid.hermitian_weights
        energy = (w * (np.abs(coeffs) ** 2).sum(axis=0)).ravel()
        k2 = grid.k2.ravel()
        keep = energy > 0
        k2u, inv = np.unique(k2[keep], return_inverse=True)
        e = np.bincount(inv, weights=energy[keep])
        return np.sqrt(grid.volume * (np.exp(-2.0 * np.outer(times, k2u)) @ e))
    out = np.empty(times.size)
    k2 = grid.k2
    for start in range(0, times.size, BATCH):
        ts = times[start : start + BATCH]
        stack = coeffs[None] * np.exp(-k2[None] * ts.reshape((-1,) + (1,) * grid.d))[:, None]
        out[start : start + BATCH] = _lq_batch(grid, stack, q, levels)
    return out


def default_heat_window(grid: Grid, f: SpectralField) -> tuple[float, float]:
    amp = np.abs(f.coeffs).max(axis=0)
    active = amp > 1e-14 * amp.max(initial=0.0)
    active[(0,) * grid.d] = False
    kmin = float(grid.kmag_int[active].min()) if active.any() else 1.0
    t_min = 1e-6 * (grid.box_length / grid.n) ** 2
    t_max = 50.0 * (grid.box_length / (2 * np.pi)) ** 2 / kmin**2
    return t_min, t_max


def besov_norm_heat(
    f: SpectralField,
    s: float,
    p: float,
    q: float,
    alpha: float = 0.0,
    t_max: float | None = None,
    t_min: float | None = None,
    panel_ratio: float = 2.0,
    gauss_points: int = 8,
    levels: int = 1,
) -> NormValue:
    """Caloric Besov quantity ``(int (t^{-s/2} ||e^{t Lap} t^{alpha/2} Lambda^alpha f||_q)^p dt/t)^{1/p}``.

    The time integral is truncated to ``[t_min, t_max]`` and evaluated with
    Gauss-Legendre panels whose edges grow geometrically; ``p = inf`` takes
    the maximum over the quadrature nodes.
    """
    spec = NormSpec("besov_heat", s=s, q=q, p=p, alpha=alpha, levels=levels).validate(f.grid.d)
    _require_zero_mean(f, "caloric Besov norm")
    grid = f.grid
    dt_min, dt_max = default_heat_window(grid, f)
    t_min = dt_min if t_min is None else t_min
    t_max = dt_max if t_max is None else t_max
    edges = geometric_edges(t_min, t_max, panel_ratio)
    nodes, weights = composite_gauss(edges, gauss_points)
    lifted = f.coeffs if alpha == 0 else f.coeffs * riesz_multiplier(grid, alpha)
    phi = _heat_lq_profile(grid, lifted, nodes, q, levels) * nodes ** ((alpha - s) / 2)
    if p == np.inf:
        value = float(phi.max(initial=0.0))
    else:
        value = float((weights * phi**p / nodes).sum() ** (1.0 / p))
    meta = _meta(grid, t_min=t_min, t_max=t_max, panels=len(edges) - 1, gauss_points=gauss_points,
                 time_quadrature="gauss-legendre/geometric")
    return NormValue(value, spec, meta)


def norm_of(f: SpectralField, spec: NormSpec) -> NormValue:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "lebesgue":
        return lebesgue_norm(f, spec.q, spec.levels)
    if spec.kind in ("sobolev_hom", "sobolev_inhom"):
        return sobolev_norm(f, spec.s, spec.q, spec.kind == "sobolev_hom", spec.levels)
    if spec.kind == "besov_lp":
        return besov_norm_lp(f, spec.s, spec.p, spec.q, spec.levels)
    if spec.kind == "besov_heat":
        return besov_norm_heat(f, spec.s, spec.p, spec.q, spec.alpha, levels=spec.levels)
    raise NormError(f"unknown norm kind {spec.kind!r}")


def spatial_norms(grid: Grid, coeffs: np.ndarray, spec: NormSpec) -> np.ndarray:
    """Spatial norm of each state in a stack ``(N, m, *spectral_shape)``."""
    spec.validate(grid.d)
    if spec.kind == "lebesgue":
        return _lq_batch(grid, coeffs, spec.q, spec.levels)
    if spec.kind in ("sobolev_hom", "sobolev_inhom"):
        mult = _sobolev_multiplier(grid, spec.s, spec.kind == "sobolev_hom")
        return _lq_batch(grid, coeffs if mult is None else coeffs * mult, spec.q, spec.levels)
    return np.array([norm_of(SpectralField(grid, c), spec).value for c in coeffs])


def _time_integral(times: np.ndarray, phi: np.ndarray, r: float) -> float:
    if r == np.inf:
        return float(phi.max(initial=0.0))
    if times.size == 1:
        return 0.0
    return float(np.trapezoid(phi**r, times) ** (1.0 / r))


def time_space_norm(traj: Trajectory, r: float, spec: NormSpec) -> NormValue:
    """``L^r([0, T]; X)`` norm: trapezoid rule on the trajectory's nodes."""
    if len(traj) == 0:
        raise NormError("empty trajectory")
    if not (1 <= r < np.inf or r == np.inf):
        raise NormError(f"time exponent must satisfy r >= 1, got {r}")
    phi = spatial_norms(traj.grid, traj.coeffs, spec)
    meta = _meta(traj.grid, r=r, nodes=len(traj), t_max=traj.T, time_quadrature="trapezoid",
                 phi=phi.tolist())
    return NormValue(_time_integral(traj.times, phi, r), spec, meta)


def heat_time_norm(
    u0: SpectralField,
    r: float,
    spec: NormSpec,
    T: float,
    t_min: float | None = None,
    panel_ratio: float = 2.0,
    gauss_points: int = 8,
) -> NormValue:
    """``||e^{t Lap} u0||_{L^r([0, T]; X)}`` for a Sobolev or Lebesgue ``X``.

    The heat flow is known in closed form at every instant, so the time
    integral uses Gauss-Legendre panels instead of a fixed trajectory grid:
    one panel on ``[0, t_min]`` then panels growing geometrically up to
    ``T``.  By default ``t_min = 1/|k|^2`` for the largest active wavenumber.
    """
    spec.validate(u0.grid.d)
    if spec.kind not in ("lebesgue", "sobolev_hom", "sobolev_inhom"):
        raise NormError("heat_time_norm supports Lebesgue and Sobolev spatial norms")
    if spec.kind == "sobolev_hom":
        _require_zero_mean(u0, "homogeneous Sobolev norm")
    if not T > 0:
        raise NormError("horizon must be positive")
    grid = u0.grid
    if t_min is None:
        # the integrand varies on the time scale 1/|k|^2 of the fastest active mode
        amp = np.abs(u0.coeffs).max(axis=0)
        active = amp > 1e-14 * amp.max(initial=0.0)
        t_min = 1.0 / float(grid.k2[active].max()) if active.any() and grid.k2[active].max() > 0 else T
    nodes, weights = near_zero_rule(T, t_min, panel_ratio, gauss_points)
    mult = _sobolev_multiplier(grid, spec.s, spec.kind != "sobolev_inhom") if spec.kind != "lebesgue" else None
    lifted = u0.coeffs if mult is None else u0.coeffs * mult
    phi = _heat_lq_profile(grid, lifted, nodes, spec.q, spec.levels)
    if r == np.inf:
        value = float(max(phi.max(initial=0.0), _lq_batch(grid, lifted, spec.q, spec.levels)))
    else:
        value = float((weights * phi**r).sum() ** (1.0 / r))
    meta = _meta(grid, r=r, t_min=t_min, t_max=T, nodes=nodes.size, levels=spec.levels,
                 time_quadrature="gauss-legendre/geometric")
    return NormValue(value, spec, meta)


__all__ = [
    "NormSpec",
    "NormValue",
    "NormError",
    "lebesgue_norm",
    "sobolev_norm",
    "besov_norm_lp",
    "besov_norm_heat",
    "time_space_norm",
    "heat_time_norm",
    "spatial_norms",
    "norm_of",
    "norms_to_csv",
    "lp_blocks",
    "block_count",
    "block_range",
]
