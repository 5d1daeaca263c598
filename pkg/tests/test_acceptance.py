"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are
also collected and repeated in the pytest terminal summary.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from critflow.bilinear import bilinear_trajectory, heat_trajectory, stationary_trajectory
from critflow.config import parse_config
from critflow.families import IndexFamily
from critflow.field import SpectralField
from critflow.fieldio import read_field, write_field
from critflow.grid import make_grid
from critflow.lab import bilinear_stability, heat_equivalence_ensemble, product_ensemble, product_estimate_ratio
from critflow.norms import sobolev_norm
from critflow.runner import run_experiment
from critflow.solver import (
    CONVERGED,
    SolverConfig,
    existence_horizon,
    picard_solve,
    scale_for_contraction,
    smallness_evaluate,
)
from critflow.spectral import (
    dilate,
    divergence,
    gradient,
    heat_semigroup,
    leray_project,
    random_ensemble,
    riesz_potential,
    shear_field,
    taylor_green_field,
)

from conftest import ACCEPTANCE_LINES, from_function, sin_mode


@contextmanager
def criterion(number: int, title: str):
    """Record and print a pass/fail line for the enclosed checks."""
    facts: dict = {}
    start = time.perf_counter()
    try:
        yield facts
    except BaseException as exc:
        line = f"criterion {number}: FAIL {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        raise
    else:
        detail = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in facts.items())
        line = f"criterion {number}: PASS {title} [{detail}; {time.perf_counter() - start:.1f}s]"
    finally:
        print(line)
        ACCEPTANCE_LINES.append(line)


def rel_max(a: np.ndarray, scale: float) -> float:
    return float(np.abs(a).max() / scale)


def test_criterion_01_spectral_identities():
    grid = make_grid(3, 32)
    with criterion(1, "exact spectral identities on 100 fields") as facts:
        start = time.perf_counter()
        vec = random_ensemble(grid, 100, 11, kind="divfree")
        sca = random_ensemble(grid, 100, 12, kind="scalar")
        worst = 0.0
        for i in range(100):
            # a generic vector field: divergence-free part plus a gradient
            u = vec[i] + gradient(sca[i])
            scale = np.abs(u.coeffs).max()
            Pu = leray_project(u)
            worst = max(worst, rel_max(leray_project(Pu).coeffs - Pu.coeffs, scale))
            grad = gradient(sca[i])
            worst = max(worst, rel_max(leray_project(grad).coeffs, np.abs(grad.coeffs).max()))
            worst = max(worst, rel_max(divergence(Pu).coeffs, scale * grid.n))
            t1, t2 = 0.013 * (i % 7 + 1), 0.021 * (i % 5 + 1)
            h = heat_semigroup(heat_semigroup(u, t1), t2).coeffs - heat_semigroup(u, t1 + t2).coeffs
            worst = max(worst, rel_max(h, scale))
            a, b = 0.5 + 0.1 * (i % 4), -0.3 - 0.2 * (i % 3)
            pot = riesz_potential(riesz_potential(vec[i], a), b).coeffs - riesz_potential(vec[i], a + b).coeffs
            worst = max(worst, rel_max(pot, np.abs(vec[i].coeffs).max() * 4.0 ** max(a, a + b, 0)))
        facts["max_rel_error"] = worst
        facts["runtime_s"] = time.perf_counter() - start
        assert worst <= 1e-12
        assert facts["runtime_s"] <= 30


@pytest.mark.parametrize("amplitude", [0.1, 1.0, 10.0])
def test_criterion_02_shear_exact_solution(amplitude):
    grid = make_grid(3, 32)
    with criterion(2, f"shear exact solution A={amplitude:g}") as facts:
        start = time.perf_counter()
        rep = picard_solve(shear_field(grid, amplitude), SolverConfig(1.0, IndexFamily.th1(3, 3)))
        facts.update(residual=rep.final_residual, iterations=rep.iterations, runtime_s=time.perf_counter() - start)
        assert rep.verdict == CONVERGED
        assert rep.final_residual <= 1e-10 and rep.iterations <= 3
        assert facts["runtime_s"] <= 10


def test_criterion_03_contraction_regime(th1_constant):
    grid = make_grid(3, 32)
    family = IndexFamily.th1(3, 3)
    C_hat = th1_constant.C_hat
    with criterion(3, "contraction regime over 10 seeds") as facts:
        cfg = SolverConfig(1.0, family)
        worst_ratio, most_iters = 0.0, 0
        for seed in range(1, 11):
            u0 = scale_for_contraction(random_ensemble(grid, 1, seed, kind="divfree")[0], cfg, C_hat, target=0.9)
            assert 4 * C_hat * cfg.norm(heat_trajectory(u0, cfg.times)) <= 0.9 * (1 + 1e-12)
            rep = picard_solve(u0, cfg)
            assert rep.verdict == CONVERGED, f"seed {seed}: {rep.verdict}"
            assert rep.iterations <= 25, f"seed {seed}: {rep.iterations} iterations"
            assert rep.final_residual <= 10 * cfg.picard_tol
            assert rep.metadata["solution_norm"] <= 1.1 / (2 * C_hat)
            worst_ratio = max(worst_ratio, max(rep.contraction_ratios))
            most_iters = max(most_iters, rep.iterations)
        facts.update(C_hat=C_hat, max_ratio=worst_ratio, max_iterations=most_iters)
        assert worst_ratio <= 0.55


def test_criterion_04_semigroup_contraction():
    cases = [(0.0, 2.0), (0.5, 2.0), (1.0, 3.0)]
    with criterion(4, "heat semigroup contracts Sobolev norms") as facts:
        worst = 0.0
        for homogeneous in (True, False):
            for s, p in cases:
                # the homogeneous (1, 3) norm needs s < d/p, so that case runs in four dimensions
                grid = make_grid(3, 32) if not homogeneous or s < 3 / p else make_grid(4, 16)
                for f in random_ensemble(grid, 100, 21, kind="divfree"):
                    base = sobolev_norm(f, s, p, homogeneous).value
                    for t in (0.01, 0.1, 1.0, 10.0):
                        worst = max(worst, sobolev_norm(heat_semigroup(f, t), s, p, homogeneous).value / base)
        facts["max_quotient"] = worst
        assert worst <= 1 + 1e-8


@pytest.mark.parametrize("s, p, q, alpha", [(-1.0, 2.0, 2.0, 0.0), (0.5, 4.0, 2.0, 1.0)])
def test_criterion_05_heat_characterization(s, p, q, alpha):
    with criterion(5, f"caloric vs dyadic Besov (s,p,q,alpha)=({s:g},{p:g},{q:g},{alpha:g})") as facts:
        rep = heat_equivalence_ensemble(s, p, q, alpha, d=3, size=100, seed=1, n=32)
        facts.update(min_ratio=rep.min_ratio, max_ratio=rep.max_ratio, drift=rep.metadata["dilation_drift"])
        assert 0.1 <= rep.min_ratio and rep.max_ratio <= 10
        assert rep.metadata["dilation_drift"] <= 0.2


def test_criterion_06_product_estimate():
    with criterion(6, "product estimate (3,1,2,2)") as facts:
        rep = product_ensemble(3, 1.0, 2.0, 2.0, size=20, seed=1, n=32, refine=True)
        grid = make_grid(3, 32)
        u = from_function(grid, lambda x, y, z: np.sin(x))
        ratio = product_estimate_ratio(u, u, 1.0, 2.0, 2.0)
        # |cos 2x| in L^{3/2} over ||cos x||_{L^2}^2, both by closed form on the 2 pi torus
        from scipy.integrate import quad

        lhs = ((2 * np.pi) ** 2 * quad(lambda x: abs(np.cos(2 * x)) ** 1.5, 0, 2 * np.pi, epsabs=1e-14, limit=400)[0]) ** (2 / 3)
        oracle = lhs / ((2 * np.pi) ** 2 * np.pi)
        facts.update(max_ratio=rep.max_ratio, growth=rep.refinement_growth, single_mode_err=abs(ratio / oracle - 1))
        assert np.isfinite(rep.max_ratio) and rep.refinement_growth <= 1.5
        assert abs(ratio / oracle - 1) <= 1e-6


@pytest.mark.parametrize("family", [IndexFamily.th1(3, 3), IndexFamily.th7(3, 1.5)], ids=["Th1", "Th7"])
def test_criterion_07_bilinear_stability(family):
    with criterion(7, f"bilinear ratio stability {family.name}") as facts:
        rep = bilinear_stability(family, size=10, seed=1, n=32, T=1.0)
        facts.update(max_ratio=rep.max_ratio, growth_n=rep.metadata["growth_n"], growth_T=rep.metadata["growth_T"])
        assert rep.metadata["growth_n"] <= 1.5 and rep.metadata["growth_T"] <= 1.5


def test_criterion_08_critical_scaling():
    grid = make_grid(3, 32)
    with criterion(8, "critical scaling invariance of the half-derivative L2 norm") as facts:
        worst = 0.0
        for f in random_ensemble(grid, 10, 8, kind="divfree"):
            a = sobolev_norm(f, 0.5, 2.0).value
            worst = max(worst, abs(sobolev_norm(dilate(f, 2.0), 0.5, 2.0).value / a - 1))
        facts["max_rel_change"] = worst
        assert worst <= 1e-10


def test_criterion_09_smallness_machinery(th1_constant):
    grid = make_grid(3, 32)
    family = IndexFamily.th1(3, 3)
    with criterion(9, "smallness, horizon and Duhamel closed form") as facts:
        u0 = taylor_green_field(grid, 1.0)
        vals = [smallness_evaluate(u0, family, 2.0**-k).value for k in range(11)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert smallness_evaluate(u0, family, 1e-12).value <= 1e-2 * vals[0]

        delta = th1_constant.delta_hat
        horizons = [existence_horizon(taylor_green_field(grid, A), family, delta) for A in (40.0, 20.0, 10.0)]
        keys = [np.inf if T == "global" else T for T in horizons]
        assert all(a <= b for a, b in zip(keys, keys[1:]))

        u = sin_mode(grid, axis=0, component=1)
        v = sin_mode(grid, axis=1, component=0)
        times = np.linspace(0.0, 1.0, 9)
        B = bilinear_trajectory(stationary_trajectory(u, times), stationary_trajectory(v, times))
        from critflow.spectral import nonlinear_term

        N = nonlinear_term(u, v).coeffs
        err = max(np.abs(B[i].coeffs - N * (1 - np.exp(-2 * t)) / 2).max() for i, t in enumerate(times))
        err /= np.abs(N).max()
        facts.update(horizons=str(horizons), duhamel_err=err)
        assert err <= 1e-8


def test_criterion_10_determinism(tmp_path):
    with criterion(10, "bit-exact field files and reproducible summaries") as facts:
        for d, n, seed in [(2, 16, 1), (3, 16, 2), (3, 32, 3)]:
            grid = make_grid(d, n)
            for f in (random_ensemble(grid, 1, seed, kind="divfree")[0], random_ensemble(grid, 1, seed, kind="scalar")[0]):
                path = tmp_path / f"f{d}{n}{seed}{f.m}.cff"
                write_field(path, f)
                g = read_field(path)
                assert g.grid == f.grid and g.coeffs.tobytes() == f.coeffs.tobytes()
        texts = ["command = estimate-constant\nfamily = Th1\nq = 3\nn = 16\nM = 8\nensemble_size = 10\nseed = 4",
                 "command = verify-product\ns = 1\np = 2\nq = 2\nn = 16\nensemble_size = 4\nseed = 4"]
        for k, text in enumerate(texts):
            outs = []
            for run in range(2):
                out = tmp_path / f"run{k}{run}"
                assert run_experiment(parse_config(text), out) == 0
                outs.append((out / "summary.json").read_bytes())
            assert outs[0] == outs[1]
            assert json.loads(outs[0])["config"]["seed"] == 4
        facts["runs"] = 2 * len(texts)
