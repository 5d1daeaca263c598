"""Exact Fourier-multiplier operators on periodic fields.

Every operator here acts mode by mode.  Conventions at ``k = 0``: the Riesz
potential returns 0 for every order, the Leray projection passes the mean
through unchanged.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .field import SpectralField, to_spectral
from .grid import Grid, make_grid

Profile = Union[Callable[[np.ndarray], np.ndarray], Mapping[int, float], Sequence[float]]


class OperatorError(ValueError):
    pass


def _comp(j: int, d: int) -> tuple:
    """Index of component ``j`` on the component axis ``-(d+1)``."""
    return (Ellipsis, j) + (slice(None),) * d


def _zero_mode(grid: Grid) -> tuple:
    return (Ellipsis,) + (0,) * grid.d


def riesz_multiplier(grid: Grid, s: float) -> np.ndarray:
    k = grid.kmag.copy()
    k[(0,) * grid.d] = 1.0
    mult = k**s
    mult[(0,) * grid.d] = 0.0
    return mult


def bessel_multiplier(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.k2) ** (s / 2)


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-grid.k2 * t)


def riesz_potential(f: SpectralField, s: float) -> SpectralField:
    """``(-Laplacian)^(s/2) f``; negative orders need a zero-mean input."""
    if s < 0 and not f.is_zero_mean():
        raise OperatorError("nonzero mean under negative Riesz order")
    if s == 0:
        return f.without_mean()
    return f.with_coeffs(f.coeffs * riesz_multiplier(f.grid, s))


def bessel_potential(f: SpectralField, s: float) -> SpectralField:
    if s == 0:
        return f
    return f.with_coeffs(f.coeffs * bessel_multiplier(f.grid, s))


def heat_semigroup(f: SpectralField, t: float) -> SpectralField:
    if t < 0:
        raise OperatorError("backward heat flow")
    if t == 0:
        return f
    return f.with_coeffs(f.coeffs * heat_multiplier(f.grid, t))


def _leray(grid: Grid, c: np.ndarray) -> np.ndarray:
    """Project the component axis ``-(d+1)`` of ``c`` onto divergence-free fields."""
    ks = grid.wavenumbers
    k2 = grid.k2.copy()
    k2[(0,) * grid.d] = 1.0
    kdot = sum(ks[j] * c[_comp(j, grid.d)] for j in range(grid.d)) / k2
    out = np.empty_like(c)
    for j in range(grid.d):
        out[_comp(j, grid.d)] = c[_comp(j, grid.d)] - ks[j] * kdot
    return out


def leray_project(f: SpectralField) -> SpectralField:
    if f.m != f.grid.d:
        raise OperatorError(f"Leray projection needs {f.grid.d} components, got {f.m}")
    return f.with_coeffs(_leray(f.grid, f.coeffs))


def divergence(f: SpectralField) -> SpectralField:
    """Scalar field ``div f`` (spectral, ``i k . c``)."""
    if f.m != f.grid.d:
        raise OperatorError(f"divergence needs {f.grid.d} components, got {f.m}")
    ks = f.grid.wavenumbers
    return SpectralField(f.grid, 1j * sum(ks[j] * f.coeffs[j] for j in range(f.grid.d)))


def divergence_residual(f: SpectralField) -> float:
    """``max |k . c(k)|`` relative to ``max |k| |c(k)|`` (0 for the zero field)."""
    ks = f.grid.wavenumbers
    num = np.abs(sum(ks[j] * f.coeffs[j] for j in range(f.grid.d))).max()
    den = (f.grid.kmag * np.sqrt((np.abs(f.coeffs) ** 2).sum(axis=0))).max()
    return 0.0 if den == 0 else float(num / den)


def gradient(f: SpectralField) -> SpectralField:
    if f.m != 1:
        raise OperatorError("gradient needs a scalar field")
    ks = f.grid.wavenumbers
    return SpectralField(f.grid, np.stack([1j * k * f.coeffs[0] for k in ks]))


def _sym_pairs(d: int):
    return [(i, j) for i in range(d) for j in range(i, d)]


def flux_divergence(grid: Grid, U: np.ndarray, V: np.ndarray, symmetrize: bool = False) -> np.ndarray:
    """``P div(U (x) V)`` from physical samples, returning half-spectrum coefficients.

    ``U``/``V`` have shape ``(..., d, *grid.shape)``.  With ``symmetrize`` the
    flux is ``U (x) V + V (x) U``, which needs only the upper triangle.
    Products are dealiased by the 2/3 rule before differentiation.
    """
    d = grid.d
    ks = grid.wavenumbers
    mask = grid.dealias_mask
    lead = U.shape[:-d - 1]
    div = np.zeros(lead + (d,) + grid.spectral_shape, dtype=complex)
    if symmetrize:
        pairs = _sym_pairs(d)
        prods = np.stack(
            [U[_comp(i, d)] * V[_comp(j, d)] + V[_comp(i, d)] * U[_comp(j, d)] for i, j in pairs],
            axis=-d - 1,
        )
        F = to_spectral(grid, prods) * mask
        for a, (i, j) in enumerate(pairs):
            Fa = F[_comp(a, d)]
            # (div F)_i = sum_j d_j F_ij, F symmetric
            div[_comp(i, d)] += 1j * ks[j] * Fa
            if i != j:
                div[_comp(j, d)] += 1j * ks[i] * Fa
    else:
        prods = np.stack(
            [U[_comp(i, d)] * V[_comp(j, d)] for i in range(d) for j in range(d)], axis=-d - 1
        )
        F = to_spectral(grid, prods) * mask
        for i in range(d):
            for j in range(d):
                div[_comp(i, d)] += 1j * ks[j] * F[_comp(i * d + j, d)]
    return _leray(grid, div)


def cross_flux_divergence(grid: Grid, U0: np.ndarray, V0: np.ndarray, U1: np.ndarray, V1: np.ndarray) -> np.ndarray:
    """``P div(U0 (x) V1 + U1 (x) V0)`` from physical samples."""
    d = grid.d
    ks = grid.wavenumbers
    prods = np.stack(
        [U0[_comp(i, d)] * V1[_comp(j, d)] + U1[_comp(i, d)] * V0[_comp(j, d)]
         for i in range(d) for j in range(d)],
        axis=-d - 1,
    )
    F = to_spectral(grid, prods) * grid.dealias_mask
    div = np.zeros(U0.shape[: -d - 1] + (d,) + grid.spectral_shape, dtype=complex)
    for i in range(d):
        for j in range(d):
            div[_comp(i, d)] += 1j * ks[j] * F[_comp(i * d + j, d)]
    return _leray(grid, div)


def nonlinear_term(u: SpectralField, v: SpectralField) -> SpectralField:
    """``P div(u (x) v)`` with ``(u (x) v)_ij = u_i v_j``, dealiased."""
    if u.grid != v.grid:
        raise OperatorError("grid mismatch")
    d = u.grid.d
    if u.m != d or v.m != d:
        raise OperatorError(f"nonlinear term needs {d}-component fields")
    return SpectralField(u.grid, flux_divergence(u.grid, u.physical(), v.physical()))


def _profile_array(grid: Grid, profile: Profile) -> np.ndarray:
    shell = np.floor(grid.kmag_int + 1e-9).astype(int)
    if callable(profile):
        amp = np.asarray(profile(shell), dtype=float)
        amp = np.broadcast_to(amp, shell.shape).copy()
    elif isinstance(profile, Mapping):
        amp = np.zeros(shell.shape)
        for sh, a in profile.items():
            amp[shell == int(sh)] = float(a)
    else:
        table = np.asarray(profile, dtype=float)
        amp = np.where(shell < table.size, table[np.minimum(shell, table.size - 1)], 0.0)
    if np.any(amp < 0):
        raise OperatorError("spectrum profile must be nonnegative")
    amp[grid.nyquist_mask] = 0.0
    amp[(0,) * grid.d] = 0.0
    return amp


def _random_coeffs(grid: Grid, m: int, profile: Profile, seed: int) -> np.ndarray:
    amp = _profile_array(grid, profile)
    if not np.any(amp > 0):
        raise OperatorError("degenerate ensemble: profile vanishes on every active mode")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((m,) + grid.shape)
    return to_spectral(grid, noise) * amp


def random_divfree_field(grid: Grid, spectrum_profile: Profile, seed: int) -> SpectralField:
    """Zero-mean divergence-free random field with shell amplitudes from ``spectrum_profile``.

    The profile maps the shell index ``floor(|k|)`` to an amplitude; it may be
    a callable on integer arrays, a ``{shell: amplitude}`` mapping or a
    sequence indexed by shell.
    """
    c = _leray(grid, _random_coeffs(grid, grid.d, spectrum_profile, seed))
    c[_zero_mode(grid)] = 0.0
    return SpectralField(grid, c)


def random_scalar_field(grid: Grid, spectrum_profile: Profile, seed: int) -> SpectralField:
    c = _random_coeffs(grid, 1, spectrum_profile, seed)
    c[_zero_mode(grid)] = 0.0
    return SpectralField(grid, c)


def shell_profile(shells: Sequence[int], slope: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Amplitude ``shell**slope`` on the listed shells, zero elsewhere."""
    shells = np.asarray(list(shells), dtype=int)

    def profile(shell):
        shell = np.asarray(shell)
        on = np.isin(shell, shells)
        return np.where(on, np.maximum(shell, 1).astype(float) ** slope, 0.0)

    return profile


#: Shells used by the default random ensembles; products stay resolved for n >= 32.
DEFAULT_SHELLS = (1, 2, 3, 4)


def ensemble_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def random_ensemble(grid: Grid, count: int, seed: int, profile: Profile | None = None,
                    kind: str = "divfree", generation_n: int = 32) -> list[SpectralField]:
    """Random fields drawn on a base grid and resampled onto ``grid``.

    Drawing on a fixed base grid keeps an ensemble identical across
    resolutions, which is what refinement studies compare.
    """
    makers = {"divfree": random_divfree_field, "scalar": random_scalar_field}
    if kind not in makers:
        raise OperatorError(f"unknown ensemble kind {kind!r}")
    profile = shell_profile(DEFAULT_SHELLS) if profile is None else profile
    base = make_grid(grid.d, min(generation_n, grid.n), grid.box_length)
    out = []
    for s in ensemble_seeds(seed, count):
        f = makers[kind](base, profile, s)
        out.append(f if base == grid else resample(f, grid))
    return out


def resample(f: SpectralField, grid: Grid) -> SpectralField:
    """Spectral interpolation/truncation of ``f`` onto ``grid`` (same d and box)."""
    src = f.grid
    if grid.d != src.d or grid.box_length != src.box_length:
        raise OperatorError("resample keeps dimension and box length")
    full = f.full_coeffs()
    out = np.zeros((f.m,) + (grid.n,) * grid.d, dtype=complex)
    nmin = min(src.n, grid.n)
    idx = np.fft.fftfreq(nmin, 1.0 / nmin).astype(int)
    idx = idx[np.abs(idx) < nmin // 2]
    src_ix = np.ix_(*([np.arange(f.m)] + [idx % src.n] * grid.d))
    dst_ix = np.ix_(*([np.arange(f.m)] + [idx % grid.n] * grid.d))
    out[dst_ix] = full[src_ix]
    return SpectralField(grid, out[..., : grid.n // 2 + 1])


SUPPORT_RTOL = 1e-13


def compress_modes(f: SpectralField, factor: int) -> SpectralField:
    """``f(factor * x)`` on the same grid; the field must be band-limited below ``n / (2 factor)``."""
    grid = f.grid
    if factor < 1 or int(factor) != factor:
        raise OperatorError("compression factor must be a positive integer")
    factor = int(factor)
    full = f.full_coeffs()
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n).astype(int)
    amp = np.abs(full).max(axis=0)
    # coefficients at round-off level do not count as support
    support = amp > SUPPORT_RTOL * amp.max(initial=0.0)
    limit = grid.n / (2 * factor)
    for ax in range(grid.d):
        kk = k.reshape([-1 if a == ax else 1 for a in range(grid.d)])
        if np.any(support & (np.abs(kk) >= limit)):
            raise OperatorError(f"field is not band-limited below n/{2 * factor}")
    out = np.zeros_like(full)
    full = np.where(support, full, 0.0)
    keep = k[np.abs(k) < limit]
    src = np.ix_(*([np.arange(f.m)] + [keep % grid.n] * grid.d))
    dst = np.ix_(*([np.arange(f.m)] + [(factor * keep) % grid.n] * grid.d))
    out[dst] = full[src]
    return SpectralField(grid, out[..., : grid.n // 2 + 1])


def dilate(f: SpectralField, lam: float) -> SpectralField:
    """Navier-Stokes scaling ``lam * f(lam * x)``, carried to the torus of side ``L / lam``.

    One period of the dilated field lives on the shrunken box, so the
    coefficients are unchanged apart from the amplitude factor.
    """
    if lam <= 0:
        raise OperatorError("dilation factor must be positive")
    return SpectralField(f.grid.with_box(f.grid.box_length / lam), f.coeffs * lam)


def shear_field(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    """``(0, A sin x1, 0, ...)`` scaled to the box; an exact stationary point of the nonlinearity."""
    c = np.zeros((grid.d,) + grid.spectral_shape, dtype=complex)
    zeros = (0,) * (grid.d - 1)
    c[(1, 1) + zeros] = -0.5j * amplitude
    c[(1, grid.n - 1) + zeros] = 0.5j * amplitude
    return SpectralField(grid, c)


def taylor_green_field(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    """``A (sin x1 cos x2 c, -cos x1 sin x2 c, 0, ...)`` with ``c`` the product of the remaining cosines."""
    x = [2 * np.pi * xi / grid.box_length for xi in grid.coordinates()]
    rest = np.ones(grid.shape)
    for xi in x[2:]:
        rest = rest * np.cos(xi)
    vals = np.zeros((grid.d,) + grid.shape)
    vals[0] = amplitude * np.sin(x[0]) * np.cos(x[1]) * rest
    vals[1] = -amplitude * np.cos(x[0]) * np.sin(x[1]) * rest
    return SpectralField.from_physical(grid, vals).without_mean()


__all__ = [
    "OperatorError",
    "riesz_potential",
    "bessel_potential",
    "heat_semigroup",
    "leray_project",
    "divergence",
    "divergence_residual",
    "gradient",
    "nonlinear_term",
    "flux_divergence",
    "cross_flux_divergence",
    "random_divfree_field",
    "random_scalar_field",
    "shell_profile",
    "resample",
    "compress_modes",
    "dilate",
    "shear_field",
    "taylor_green_field",
    "riesz_multiplier",
    "bessel_multiplier",
    "heat_multiplier",
]
