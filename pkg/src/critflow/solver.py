"""Mild solutions by Picard iteration, smallness conditions and horizon search."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bilinear import QuadratureSpec, bilinear_trajectory, heat_trajectory
from .families import IndexFamily
from .field import SpectralField, Trajectory
from .grid import Grid
from .norms import NormValue, besov_norm_lp, heat_time_norm, spatial_norms, time_space_norm
from .spectral import Profile, divergence_residual, random_ensemble

log = logging.getLogger(__name__)

CONVERGED, DIVERGED, MAX_ITERS = "converged", "diverged", "max-iters"

class SolverError(ValueError):
    pass


class HorizonError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    T: float
    family: IndexFamily
    time_nodes: int = 65
    picard_tol: float = 1e-8
    max_iters: int = 50
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    homogeneous: bool = True

    def __post_init__(self):
        if not self.T > 0:
            raise SolverError("T must be positive")
        if self.max_iters < 1:
            raise SolverError("max_iters must be at least 1")
        if not self.picard_tol > 0:
            raise SolverError("picard_tol must be positive")
        if self.time_nodes < 2:
            raise SolverError("need at least two time nodes")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.time_nodes)

    def norm(self, traj: Trajectory) -> float:
        return time_space_norm(traj, self.family.r, self.family.spatial_spec(self.homogeneous)).value


@dataclass
class SolutionReport:
    iterates: list[float]
    contraction_ratios: list[float]
    final_residual: float
    verdict: str
    solution: Trajectory
    w: Trajectory
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.iterates)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "iterates": self.iterates,
            "contraction_ratios": self.contraction_ratios,
            **self.metadata,
        }

    def to_text(self) -> str:
        """Key-value header followed by a CSV table of the iteration history."""
        out = io.StringIO()
        out.write("# critflow solution report\n")
        header = {k: v for k, v in self.summary().items() if k not in ("iterates", "contraction_ratios")}
        for key, value in header.items():
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            out.write(f"{key} = {value}\n")
        out.write("\n[iterations]\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["iteration", "distance", "contraction_ratio"])
        for i, dist in enumerate(self.iterates):
            ratio = self.contraction_ratios[i - 1] if i >= 1 else ""
            writer.writerow([i + 1, repr(dist), repr(ratio) if ratio != "" else ""])
        return out.getvalue()


def check_datum(u0: SpectralField, tol: float = 1e-10):
    if not u0.is_vector:
        raise SolverError("initial datum must be a vector field")
    if divergence_residual(u0) > tol:
        raise SolverError(f"initial datum is not divergence-free (residual {divergence_residual(u0):.3e})")
    if not u0.is_zero_mean():
        raise SolverError("initial datum must have zero mean")


def picard_solve(
    u0: SpectralField,
    cfg: SolverConfig,
    initial: str | Trajectory = "heat",
    callback: Callable[[int, float], None] | None = None,
) -> SolutionReport:
    """Iterate ``x_{n+1} = y - B(x_n, x_n)`` with ``y = e^{t Lap} u0``.

    ``initial`` selects the first iterate: ``"heat"`` (``y``), ``"zero"`` or an
    explicit trajectory on the configured time grid.  Distances are measured
    in the discrete ``L^r([0, T]; H^s_p)`` norm of the family.
    """
    check_datum(u0)
    y = heat_trajectory(u0, cfg.times)
    if isinstance(initial, Trajectory):
        x = initial
    elif initial == "heat":
        x = y
    elif initial == "zero":
        x = y * 0.0
    else:
        raise SolverError(f"unknown initial iterate {initial!r}")

    dists: list[float] = []
    ratios: list[float] = []
    verdict = MAX_ITERS
    growing = 0
    max_div = 0.0
    for it in range(cfg.max_iters):
        x_new = y - bilinear_trajectory(x, x, cfg.quad)
        max_div = max(max_div, max(divergence_residual(s) for s in x_new))
        dist = cfg.norm(x_new - x)
        if dists:
            ratios.append(dist / dists[-1] if dists[-1] > 0 else 0.0)
            growing = growing + 1 if dist > dists[-1] else 0
        dists.append(dist)
        x = x_new
        log.debug("picard iteration %d distance %.3e", it + 1, dist)
        if callback is not None:
            callback(it + 1, dist)
        if not np.isfinite(dist):
            verdict = DIVERGED
            break
        if dist <= cfg.picard_tol:
            verdict = CONVERGED
            break
        if growing >= 3 and dist > 10 * dists[0]:
            verdict = DIVERGED
            break

    w = x - y
    if verdict == DIVERGED:
        residual = float("inf")
    else:
        residual = cfg.norm(x - y + bilinear_trajectory(x, x, cfg.quad))
    meta = {
        "family": cfg.family.as_dict(),
        "T": cfg.T,
        "time_nodes": cfg.time_nodes,
        "picard_tol": cfg.picard_tol,
        "quadrature": {"panels_per_interval": cfg.quad.panels_per_interval,
                       "gauss_points": cfg.quad.gauss_points},
        "homogeneous": cfg.homogeneous,
        "dealiasing": "2/3",
        "grid": {"d": u0.grid.d, "n": u0.grid.n, "L": u0.grid.box_length},
        "max_divergence": max_div,
    }
    if verdict != DIVERGED:
        meta["y_norm"] = cfg.norm(y)
        meta["solution_norm"] = cfg.norm(x)
        meta.update(_a_posteriori(cfg.family, x, w))
    return SolutionReport(dists, ratios, residual, verdict, x, w, meta)


def _a_posteriori(family: IndexFamily, u: Trajectory, w: Trajectory) -> dict:
    """Datum-space norms of the solution along time and the uniform Besov size of ``w``."""
    out = {}
    spec = family.datum_spec()
    if spec is not None:
        phi = spatial_norms(u.grid, u.coeffs, spec)
        out["datum_norms"] = {"max": float(phi.max()), "min": float(phi.min()),
                              "max_step": float(np.abs(np.diff(phi)).max(initial=0.0))}
    wb = family.w_besov()
    if wb is not None:
        s, p, q = wb
        vals = [besov_norm_lp(w[i], s, p, q).value for i in range(len(w))]
        out["w_besov_max"] = float(max(vals))
    return out


def smallness_evaluate(u0: SpectralField, family: IndexFamily, T: float, homogeneous: bool = True,
                       levels: int = 2) -> NormValue:
    """``T^{(1 + s - 2/r - d/p)/2} ||e^{t Lap} u0||_{L^r([0, T]; H^s_p)}``; ``T = inf`` for critical families.

    ``levels`` is passed to the spatial norm; two levels remove the leading
    quadrature error of non-even exponents.
    """
    family.check()
    check_datum(u0)
    if T == np.inf:
        if not family.critical:
            raise SolverError("infinite horizon needs a critical family")
        T = 50.0 * (u0.grid.box_length / (2 * np.pi)) ** 2
    if not T > 0:
        raise SolverError("T must be positive")
    norm = heat_time_norm(u0, family.r, family.spatial_spec(homogeneous, levels), T)
    e = family.time_exponent
    value = norm.value * (T**e if e else 1.0)
    meta = dict(norm.metadata, T=T, time_exponent=e, family=family.as_dict())
    return NormValue(value, norm.spec, meta)


def existence_horizon(
    u0: SpectralField,
    family: IndexFamily,
    delta: float,
    T_max: float = 50.0,
    T_min: float = 1e-6,
    rtol: float = 1e-3,
) -> float | str:
    """Largest horizon on the lattice ``T_min (1 + rtol)^j`` meeting the smallness condition.

    Returns ``"global"`` when the condition still holds at ``T_max`` for a
    critical family.
    """
    if not delta > 0:
        raise SolverError("delta must be positive")
    if np.abs(u0.coeffs).max() == 0:
        return "global"
    val = lambda T: smallness_evaluate(u0, family, T).value  # noqa: E731
    if val(T_max) <= delta:
        return "global" if family.critical else T_max
    if val(T_min) > delta:
        raise HorizonError("datum too large at all tested horizons")
    lo, hi = 0, int(np.ceil(np.log(T_max / T_min) / np.log1p(rtol)))
    lattice = lambda j: T_min * (1 + rtol) ** j  # noqa: E731
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if val(lattice(mid)) <= delta:
            lo = mid
        else:
            hi = mid
    return float(lattice(lo))


@dataclass
class ConstantEstimate:
    family: IndexFamily
    C_hat: float
    delta_hat: float
    ratios: list[float]
    metadata: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"family": self.family.as_dict(), "C_hat": self.C_hat, "delta_hat": self.delta_hat,
                "ratios": self.ratios, **self.metadata}


def bilinear_ratio(u: Trajectory, v: Trajectory, family: IndexFamily, quad: QuadratureSpec | None = None,
                   homogeneous: bool = True) -> float:
    """``||B(u, v)|| / (T^e ||u|| ||v||)`` in the family's time-space norm."""
    spec = family.spatial_spec(homogeneous)
    B = bilinear_trajectory(u, v, quad)
    nb = time_space_norm(B, family.r, spec).value
    nu = time_space_norm(u, family.r, spec).value
    nv = time_space_norm(v, family.r, spec).value
    e = family.time_exponent
    denom = (u.T**e if e else 1.0) * nu * nv
    if denom == 0:
        raise SolverError("degenerate sample: zero input norm")
    return nb / denom


def estimate_bilinear_constant(
    family: IndexFamily,
    ensemble_size: int,
    seed: int,
    grid: Grid,
    T: float,
    profile: Profile | None = None,
    time_nodes: int = 65,
    quad: QuadratureSpec | None = None,
    amplitude: float = 1.0,
    generation_n: int = 32,
) -> ConstantEstimate:
    """Largest ensemble ratio of the bilinear estimate over heat-flow pairs.

    Pair ``i`` is ``(e^{t Lap} a u_i, e^{t Lap} a v_i)`` with ``u_i, v_i`` random
    divergence-free fields; ``delta_hat = 1 / (4 C_hat)``.
    """
    family.check()
    if ensemble_size < 10:
        raise SolverError("ensemble_size must be at least 10")
    if grid.d != family.d:
        raise SolverError("grid dimension does not match the family")
    times = np.linspace(0.0, T, time_nodes)
    fields = random_ensemble(grid, 2 * ensemble_size, seed, profile, "divfree", generation_n)
    ratios = []
    for i in range(ensemble_size):
        u = heat_trajectory(fields[2 * i] * amplitude, times)
        v = heat_trajectory(fields[2 * i + 1] * amplitude, times)
        ratios.append(bilinear_ratio(u, v, family, quad))
    C_hat = float(max(ratios))
    meta = {"ensemble_size": ensemble_size, "seed": seed, "T": T, "time_nodes": time_nodes,
            "grid": {"d": grid.d, "n": grid.n, "L": grid.box_length}, "generation_n": generation_n}
    return ConstantEstimate(family, C_hat, 1.0 / (4.0 * C_hat), ratios, meta)


def scale_for_contraction(u0: SpectralField, cfg: SolverConfig, C_hat: float, target: float = 0.9) -> SpectralField:
    """Rescale ``u0`` so that ``4 C_hat ||e^{t Lap} u0|| = target`` in the solver norm."""
    ny = cfg.norm(heat_trajectory(u0, cfg.times))
    if ny == 0:
        raise SolverError("cannot rescale the zero datum")
    return u0 * (target / (4.0 * C_hat * ny))
