"""Empirical checks of product estimates, embeddings and caloric equivalences.

Every check reduces to a quotient of norms.  Single evaluations return the
quotient; ensemble runners collect quotients over seeded random fields
into a :class:`RatioReport`, optionally repeating the ensemble on a grid
with twice the resolution to measure refinement growth.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma

from .bilinear import QuadratureSpec, heat_trajectory
from .families import IndexFamily
from .field import SpectralField
from .grid import Grid, make_grid
from .norms import NormSpec, besov_norm_heat, besov_norm_lp, heat_time_norm, norm_of, sobolev_norm
from .solver import bilinear_ratio, check_datum
from .spectral import Profile, compress_modes, dilate, random_ensemble, resample

#: Horizon standing in for ``[0, inf)`` in box-``2 pi`` units; the neglected tail is below ``e^{-2 T}``.
T_INF = 50.0


class LabError(ValueError):
    pass


class DegenerateSample(LabError):
    def __init__(self, what: str = "degenerate sample"):
        super().__init__(what)


@dataclass
class RatioReport:
    inequality_id: str
    ratios: list[float]
    labels: list[str] = field(default_factory=list)
    degenerate: int = 0
    refinement_growth: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [r for r in self.ratios if not (np.isfinite(r) and r > 0)]
        if bad:
            raise LabError(f"ratios must be finite and positive, got {bad[:3]}")

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else float("nan")

    @property
    def min_ratio(self) -> float:
        return min(self.ratios) if self.ratios else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "ratio"])
        labels = self.labels or [str(i) for i in range(len(self.ratios))]
        for label, r in zip(labels, self.ratios):
            w.writerow([label, repr(r)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "max_ratio": self.max_ratio,
            "min_ratio": self.min_ratio,
            "refinement_growth": self.refinement_growth,
            "samples": len(self.ratios),
            "degenerate": self.degenerate,
            "seed": self.metadata.get("seed"),
            **{k: v for k, v in self.metadata.items() if k != "seed"},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def _quotient(num: float, den: float) -> float:
    if den == 0 or num == 0:
        raise DegenerateSample()
    return num / den


# ---------------------------------------------------------------- products


def product_indices(d: int, s: float, p: float, q: float) -> float:
    """Check the product-estimate hypotheses and return the target exponent ``r``."""
    checks = [
        (0 <= s < d, "0 ≤ s < d"),
        (s / d < 1 / p, "s/d < 1/p"),
        (s / d < 1 / q, "s/d < 1/q"),
        (1 / p + 1 / q < 1 + s / d, "1/p + 1/q < 1 + s/d"),
    ]
    for ok, text in checks:
        if not ok:
            raise LabError(f"product estimate hypothesis violated: {text}")
    return 1.0 / (1 / p + 1 / q - s / d)


def dealiased_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Pointwise product of two scalar fields with the 2/3 rule applied."""
    if u.grid != v.grid:
        raise LabError("fields live on different grids")
    if u.m != 1 or v.m != 1:
        raise LabError("product estimates take scalar fields")
    prod = SpectralField.from_physical(u.grid, u.physical()[0] * v.physical()[0])
    return prod.with_coeffs(prod.coeffs * u.grid.dealias_mask)


def product_estimate_terms(u: SpectralField, v: SpectralField, s: float, p: float, q: float,
                           levels: int = 3) -> dict:
    """Both sides of ``||uv||_{H^s_r} <= C ||u||_{H^s_p} ||v||_{H^s_q}`` with ``1/r = 1/p + 1/q - s/d``."""
    d = u.grid.d
    r = product_indices(d, s, p, q)
    for f in (u, v):
        if not f.is_zero_mean():
            raise LabError("product estimate needs zero-mean factors")
    uv = dealiased_product(u, v)
    mean = float(uv.mean.real[0])
    uv = uv.without_mean()
    lhs = sobolev_norm(uv, s, r, levels=levels).value
    rhs = sobolev_norm(u, s, p, levels=levels).value * sobolev_norm(v, s, q, levels=levels).value
    return {"lhs": lhs, "rhs": rhs, "r": r, "removed_mean": mean}


def product_estimate_ratio(u: SpectralField, v: SpectralField, s: float, p: float, q: float,
                           levels: int = 3) -> float:
    t = product_estimate_terms(u, v, s, p, q, levels)
    return _quotient(t["lhs"], t["rhs"])


# ---------------------------------------------------------------- embeddings

PAIRS = ("a1", "a2", "b1", "b2", "c", "d", "d-sobolev")


def embedding_specs(pair_id: str, d: int, s: float = 0.0, q: float = 2.0, p1: float = 2.0,
                    p2: float = 4.0, s2: float | None = None, q2: float | None = None,
                    p: float = 2.0) -> tuple[NormSpec, NormSpec]:
    """``(source, target)`` norms of one embedding.

    ``a1``/``a2``: ``B^{s,q}_q -> H^s_q -> B^{s,2}_q`` for ``1 < q <= 2``.
    ``b1``/``b2``: ``B^{s,2}_q -> H^s_q -> B^{s,q}_q`` for ``2 <= q``.
    ``c``: ``B^{s,p1}_q -> B^{s,p2}_q`` for ``p1 <= p2``.
    ``d``: ``B^{s,p}_q -> B^{s2,p}_{q2}`` and ``d-sobolev``: ``H^s_q -> H^{s2}_{q2}``,
    both with ``s > s2`` and ``s - d/q = s2 - d/q2``.
    """
    sob = lambda s_, q_: NormSpec("sobolev_hom", s=s_, q=q_)  # noqa: E731
    bes = lambda s_, q_, p_: NormSpec("besov_lp", s=s_, q=q_, p=p_)  # noqa: E731
    if pair_id in ("a1", "a2"):
        if not 1 < q <= 2:
            raise LabError("pair (a) requires 1 < q ≤ 2")
        return (bes(s, q, q), sob(s, q)) if pair_id == "a1" else (sob(s, q), bes(s, q, 2))
    if pair_id in ("b1", "b2"):
        if not 2 <= q < np.inf:
            raise LabError("pair (b) requires 2 ≤ q < ∞")
        return (bes(s, q, 2), sob(s, q)) if pair_id == "b1" else (sob(s, q), bes(s, q, q))
    if pair_id == "c":
        if not 1 <= p1 <= p2:
            raise LabError("pair (c) requires 1 ≤ p1 ≤ p2")
        return bes(s, q, p1), bes(s, q, p2)
    if pair_id in ("d", "d-sobolev"):
        if s2 is None or q2 is None:
            raise LabError("pair (d) needs s2 and q2")
        if not s > s2:
            raise LabError("pair (d) requires s1 > s2")
        if abs((s - d / q) - (s2 - d / q2)) > 1e-12:
            raise LabError("pair (d) requires s1 - d/q1 = s2 - d/q2")
        if pair_id == "d":
            return bes(s, q, p), bes(s2, q2, p)
        return sob(s, q), sob(s2, q2)
    raise LabError(f"unknown embedding pair {pair_id!r} (expected one of {', '.join(PAIRS)})")


def embedding_check(f: SpectralField, pair_id: str, **exponents) -> float:
    """``||f||_target / ||f||_source`` for the embedding ``pair_id``."""
    if not f.is_zero_mean():
        raise LabError("embedding check needs a zero-mean field")
    source, target = embedding_specs(pair_id, f.grid.d, **exponents)
    return _quotient(norm_of(f, target).value, norm_of(f, source).value)


# ---------------------------------------------------------------- caloric characterisation


def heat_characterization_equivalence(f: SpectralField, s: float, p: float, q: float,
                                      alpha: float = 0.0) -> tuple[float, dict]:
    """Quotient of the caloric and the dyadic-block Besov norms of ``f``."""
    heat = besov_norm_heat(f, s, p, q, alpha)
    lp = besov_norm_lp(f, s, p, q)
    meta = {"heat": heat.value, "lp": lp.value, "t_min": heat.metadata["t_min"],
            "t_max": heat.metadata["t_max"], "blocks": lp.metadata["blocks"]}
    return _quotient(heat.value, lp.value), meta


def single_mode_heat_quotient(kappa: float, s: float, p: float, alpha: float = 0.0) -> float:
    """Closed-form caloric/dyadic quotient for a field supported on one shell ``|k| = kappa``.

    With ``a = (alpha - s) p / 2`` the time integral is ``Gamma(a) (p kappa^2)^{-a}``.
    """
    a = (alpha - s) * p / 2
    j = np.floor(np.log2(kappa))
    return (kappa / 2**j) ** s * (gamma(a) / p**a) ** (1 / p)


CALORIC_LABELS = ("caloric/besov", "besov/sobolev", "caloric/sobolev")


def caloric_quantities(u0: SpectralField, family: IndexFamily, T_max: float = T_INF,
                       levels: int = 2) -> dict:
    """Caloric time-space norm, its Besov counterpart and the critical Sobolev norm of ``u0``."""
    if family.name not in ("Th1", "Th5", "Th7"):
        raise LabError("initial-data inequalities exist for the Th1, Th5 and Th7 families")
    family.check()
    check_datum(u0)
    T = T_max * (u0.grid.box_length / (2 * np.pi)) ** 2
    spec = family.spatial_spec(levels=levels)
    bs, br, bp = family.caloric_besov()
    ds = family.datum_spec()
    if np.abs(u0.coeffs).max() == 0:
        return {"caloric": 0.0, "besov": 0.0, "sobolev": 0.0, "T_max": T}
    return {
        "caloric": heat_time_norm(u0, family.r, spec, T).value,
        "besov": besov_norm_lp(u0, bs, br, bp, levels).value,
        "sobolev": sobolev_norm(u0, ds.s, ds.q, levels=levels).value,
        "T_max": T,
    }


def initial_data_inequality_check(u0: SpectralField, family: IndexFamily, T_max: float = T_INF,
                                  levels: int = 2) -> RatioReport:
    """Pairwise quotients of :func:`caloric_quantities`; zero quantities are flagged as degenerate."""
    qs = caloric_quantities(u0, family, T_max, levels)
    pairs = [("caloric", "besov"), ("besov", "sobolev"), ("caloric", "sobolev")]
    ratios, labels, degenerate = [], [], 0
    for (a, b), label in zip(pairs, CALORIC_LABELS):
        if qs[a] == 0 or qs[b] == 0:
            degenerate += 1
            continue
        ratios.append(qs[a] / qs[b])
        labels.append(label)
    meta = {"family": family.as_dict(), "quantities": qs,
            "grid": {"d": u0.grid.d, "n": u0.grid.n, "L": u0.grid.box_length}}
    return RatioReport(f"caloric-{family.name}", ratios, labels, degenerate, metadata=meta)


# ---------------------------------------------------------------- ensembles


def run_ensemble(
    inequality_id: str,
    evaluate: Callable[[Grid, int], float],
    grid: Grid,
    size: int,
    seed: int,
    refine: bool = True,
    extra: dict | None = None,
) -> RatioReport:
    """Evaluate ``evaluate(grid, i)`` for every sample, then again on ``2n`` when ``refine``.

    Degenerate samples are dropped and counted.  Refinement growth is the
    quotient of the two ensemble maxima.
    """

    def sweep(g: Grid):
        out, bad = [], 0
        for i in range(size):
            try:
                out.append(float(evaluate(g, i)))
            except DegenerateSample:
                bad += 1
        return out, bad

    ratios, bad = sweep(grid)
    meta = {"seed": seed, "size": size, "grid": {"d": grid.d, "n": grid.n, "L": grid.box_length}}
    meta.update(extra or {})
    growth = None
    if refine and ratios:
        fine = make_grid(grid.d, 2 * grid.n, grid.box_length)
        fine_ratios, _ = sweep(fine)
        if fine_ratios:
            growth = max(fine_ratios) / max(ratios)
            meta["refined_max_ratio"] = max(fine_ratios)
            meta["refined_n"] = fine.n
    return RatioReport(inequality_id, ratios, [], bad, growth, meta)


def _sampler(grid_d: int, count: int, seed: int, profile: Profile | None, kind: str, L: float):
    """Cached ensembles per resolution, all drawn from the same base fields."""
    cache: dict[int, list[SpectralField]] = {}
    base = make_grid(grid_d, 32, L)
    fields = random_ensemble(base, count, seed, profile, kind)

    def get(g: Grid) -> list[SpectralField]:
        if g.n not in cache:
            cache[g.n] = [f if g == base else resample(f, g) for f in fields]
        return cache[g.n]

    return get


def product_ensemble(d: int, s: float, p: float, q: float, size: int = 20, seed: int = 1, n: int = 32,
                     refine: bool = True, levels: int = 2, profile: Profile | None = None) -> RatioReport:
    product_indices(d, s, p, q)
    get = _sampler(d, 2 * size, seed, profile, "scalar", 2 * np.pi)
    evaluate = lambda g, i: product_estimate_ratio(get(g)[2 * i], get(g)[2 * i + 1], s, p, q, levels)  # noqa: E731
    return run_ensemble(f"product(s={s:g},p={p:g},q={q:g})", evaluate, make_grid(d, n), size, seed, refine,
                        {"s": s, "p": p, "q": q, "levels": levels})


def embedding_ensemble(pair_id: str, d: int = 3, size: int = 20, seed: int = 1, n: int = 32,
                       refine: bool = True, profile: Profile | None = None, **exponents) -> RatioReport:
    embedding_specs(pair_id, d, **exponents)
    get = _sampler(d, size, seed, profile, "scalar", 2 * np.pi)
    evaluate = lambda g, i: embedding_check(get(g)[i], pair_id, **exponents)  # noqa: E731
    return run_ensemble(f"embedding-{pair_id}", evaluate, make_grid(d, n), size, seed, refine,
                        {"exponents": exponents})


def heat_equivalence_ensemble(s: float, p: float, q: float, alpha: float = 0.0, d: int = 3, size: int = 20,
                              seed: int = 1, n: int = 32, profile: Profile | None = None) -> RatioReport:
    """Caloric/dyadic quotients plus their drift under ``f -> f(2x)`` in ``metadata['dilation_drift']``."""
    fields = random_ensemble(make_grid(d, n), size, seed, profile, "scalar")
    ratios, drift = [], []
    for f in fields:
        r, _ = heat_characterization_equivalence(f, s, p, q, alpha)
        r2, _ = heat_characterization_equivalence(compress_modes(f, 2), s, p, q, alpha)
        ratios.append(r)
        drift.append(abs(r2 / r - 1))
    meta = {"seed": seed, "size": size, "grid": {"d": d, "n": n, "L": 2 * np.pi}, "s": s, "p": p, "q": q,
            "alpha": alpha, "dilation_drift": max(drift)}
    return RatioReport(f"heat-besov(s={s:g},p={p:g},q={q:g},alpha={alpha:g})", ratios, metadata=meta)


def caloric_ensemble(family: IndexFamily, size: int = 10, seed: int = 1, n: int = 32,
                     profile: Profile | None = None, dilation: bool = True) -> RatioReport:
    """All caloric quotients over a divergence-free ensemble.

    ``metadata['dilation_drift']`` holds the largest relative change of any
    quotient under the critical dilation ``u0 -> 2 u0(2x)`` onto the half box.
    """
    fields = random_ensemble(make_grid(family.d, n), size, seed, profile, "divfree")
    ratios, labels, drift = [], [], []
    for i, f in enumerate(fields):
        rep = initial_data_inequality_check(f, family)
        ratios += rep.ratios
        labels += [f"{i}:{lab}" for lab in rep.labels]
        if dilation:
            rep2 = initial_data_inequality_check(dilate(f, 2.0), family)
            drift += [abs(b / a - 1) for a, b in zip(rep.ratios, rep2.ratios)]
    meta = {"seed": seed, "size": size, "grid": {"d": family.d, "n": n, "L": 2 * np.pi},
            "family": family.as_dict()}
    if dilation:
        meta["dilation_drift"] = max(drift)
    return RatioReport(f"caloric-{family.name}", ratios, labels, metadata=meta)


def bilinear_stability(family: IndexFamily, size: int = 10, seed: int = 1, n: int = 32, T: float = 1.0,
                       time_nodes: int = 33, quad: QuadratureSpec | None = None,
                       profile: Profile | None = None) -> RatioReport:
    """Bilinear-estimate quotients at ``(n, T)``, with growth under ``n -> 2n`` and ``T -> T/2``.

    ``refinement_growth`` is the larger of the two growth factors; both are
    also stored separately in the metadata.
    """
    def ratios_at(g: Grid, horizon: float) -> list[float]:
        fields = random_ensemble(g, 2 * size, seed, profile, "divfree")
        times = np.linspace(0.0, horizon, time_nodes)
        return [bilinear_ratio(heat_trajectory(fields[2 * i], times), heat_trajectory(fields[2 * i + 1], times),
                               family, quad) for i in range(size)]

    grid = make_grid(family.d, n)
    base = ratios_at(grid, T)
    finer = ratios_at(make_grid(family.d, 2 * n), T)
    shorter = ratios_at(grid, T / 2)
    g_n = max(finer) / max(base)
    g_T = max(shorter) / max(base)
    meta = {"seed": seed, "size": size, "grid": {"d": family.d, "n": n, "L": 2 * np.pi}, "T": T,
            "time_nodes": time_nodes, "family": family.as_dict(), "growth_n": g_n, "growth_T": g_T,
            "max_ratio_2n": max(finer), "max_ratio_half_T": max(shorter)}
    return RatioReport(f"bilinear-{family.name}", base, [], 0, max(g_n, g_T), meta)
