import numpy as np
import pytest

from critflow.bilinear import (
    BilinearError,
    QuadratureSpec,
    bilinear_trajectory,
    duhamel_bilinear,
    heat_trajectory,
    kernel_axis_samples,
    kernel_decay_check,
    stationary_trajectory,
)
from critflow.field import Trajectory
from critflow.grid import make_grid
from critflow.spectral import divergence_residual, nonlinear_term

from conftest import divfree, sin_mode

TIMES = np.linspace(0.0, 1.0, 9)


@pytest.fixture(scope="module")
def stationary_pair(grid3):
    u = sin_mode(grid3, axis=0, component=1)
    v = sin_mode(grid3, axis=1, component=0)
    return u, v, nonlinear_term(u, v)


def closed_form(N, t, grid):
    """Duhamel integral of a constant forcing: ``(1 - e^{-t k^2}) / k^2`` mode by mode."""
    k2 = np.where(grid.k2 == 0, 1.0, grid.k2)
    return N.coeffs * np.where(grid.k2 == 0, t, (1 - np.exp(-t * k2)) / k2)


@pytest.fixture(scope="module")
def random_pair(grid3_small):
    times = np.linspace(0.0, 0.5, 9)
    return heat_trajectory(divfree(grid3_small, 1), times), heat_trajectory(divfree(grid3_small, 2), times)


def test_zero_input(grid3_small, random_pair):
    u, _ = random_pair
    z = u * 0.0
    assert np.abs(bilinear_trajectory(z, u).coeffs).max() == 0
    assert np.abs(duhamel_bilinear(u, z, 0.3).coeffs).max() == 0


def test_node_zero_is_zero(random_pair):
    u, v = random_pair
    assert np.abs(bilinear_trajectory(u, v)[0].coeffs).max() == 0


def test_stationary_closed_form(grid3, stationary_pair):
    u, v, N = stationary_pair
    tr = bilinear_trajectory(stationary_trajectory(u, TIMES), stationary_trajectory(v, TIMES),
                             QuadratureSpec(panels_per_interval=8))
    for i, t in enumerate(TIMES):
        exact = closed_form(N, t, grid3)
        assert np.abs(tr[i].coeffs - exact).max() <= 1e-8 * max(np.abs(exact).max(), 1e-300)
    # only k = (+-1, +-1, 0) is populated, with factor (1 - e^{-2t}) / 2
    support = np.argwhere(np.abs(tr[-1].full_coeffs()).max(axis=0) > 1e-14)
    assert {tuple(int(x) for x in k) for k in support} == {(1, 1, 0), (1, 31, 0), (31, 1, 0), (31, 31, 0)}
    assert np.allclose(tr[-1].coeffs, N.coeffs * (1 - np.exp(-2.0)) / 2, atol=1e-15)


def test_off_node_evaluation(grid3, stationary_pair):
    u, v, N = stationary_pair
    b = duhamel_bilinear(stationary_trajectory(u, TIMES), stationary_trajectory(v, TIMES), 0.3)
    assert np.allclose(b.coeffs, closed_form(N, 0.3, grid3), atol=1e-14)


def test_quadrature_order(grid3, stationary_pair):
    u, v, N = stationary_pair
    times = [0.0, 1.0]
    us, vs = stationary_trajectory(u, times), stationary_trajectory(v, times)
    exact = closed_form(N, 1.0, grid3)
    errs = []
    for panels in (1, 2, 4):
        b = bilinear_trajectory(us, vs, QuadratureSpec(panels_per_interval=panels, gauss_points=2))
        errs.append(np.abs(b[-1].coeffs - exact).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3)


def test_bilinearity_and_divergence(random_pair, grid3_small):
    u, v = random_pair
    w = heat_trajectory(divfree(grid3_small, 3), u.times)
    lhs = bilinear_trajectory(u * 2.0 + w * -0.5, v)
    rhs = bilinear_trajectory(u, v) * 2.0 + bilinear_trajectory(w, v) * -0.5
    assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-12 * np.abs(rhs.coeffs).max()
    assert max(divergence_residual(s) for s in lhs) <= 1e-12


def test_scaling_in_first_argument(random_pair):
    u, v = random_pair
    a = duhamel_bilinear(u * 3.0, v, 0.37)
    b = duhamel_bilinear(u, v, 0.37)
    assert np.abs(a.coeffs - 3.0 * b.coeffs).max() <= 1e-12 * np.abs(a.coeffs).max()


def test_symmetric_inputs(random_pair):
    u, v = random_pair
    sym = (bilinear_trajectory(u, v) + bilinear_trajectory(v, u)) * 0.5
    s = u + v
    full = bilinear_trajectory(s, s)
    # B(s, s) = B(u, u) + B(v, v) + 2 sym
    rebuilt = bilinear_trajectory(u, u) + bilinear_trajectory(v, v) + sym * 2.0
    assert np.abs(full.coeffs - rebuilt.coeffs).max() <= 1e-12 * np.abs(full.coeffs).max()
    same = bilinear_trajectory(u, u)
    copy = Trajectory(u.grid, u.times, u.coeffs.copy())
    assert np.abs(same.coeffs - bilinear_trajectory(u, copy).coeffs).max() <= 1e-13 * np.abs(same.coeffs).max()


def test_matches_node_by_node_evaluation(random_pair):
    u, v = random_pair
    tr = bilinear_trajectory(u, v)
    for i in (3, 8):
        assert np.allclose(duhamel_bilinear(u, v, u.times[i]).coeffs, tr[i].coeffs, atol=1e-14)


def test_errors(random_pair, grid3):
    u, v = random_pair
    with pytest.raises(BilinearError, match="outside"):
        duhamel_bilinear(u, v, 0.6)
    other = heat_trajectory(divfree(grid3, 1), u.times)
    with pytest.raises(BilinearError, match="grid mismatch"):
        bilinear_trajectory(u, other)
    shifted = heat_trajectory(divfree(u.grid, 1), u.times * 2)
    with pytest.raises(BilinearError):
        bilinear_trajectory(u, shifted)
    with pytest.raises(BilinearError):
        QuadratureSpec(gauss_points=1)


def test_kernel_axis_samples_match_direct_transform():
    n, L = 32, 8 * np.pi
    g = make_grid(3, n, L)
    xi = g.wavenumbers
    xi = [np.broadcast_to(np.fft.fftfreq(n, 1 / n).reshape([-1 if a == ax else 1 for a in range(3)]) * 2 * np.pi / L,
                          (n,) * 3) for ax in range(3)]
    k2 = sum(x * x for x in xi)
    safe = np.where(k2 == 0, 1.0, k2)
    frob = 0.0
    for l in range(3):
        for j in range(3):
            for k in range(3):
                sym = (2 * np.pi) ** -1.5 * np.exp(-k2) * ((j == k) - xi[j] * xi[k] / safe) * 1j * xi[l]
                K = np.fft.ifftn(sym).real * n**3 * (2 * np.pi / L) ** 3 * (2 * np.pi) ** -1.5
                frob = frob + K[:, 0, 0] ** 2
    direct = np.sqrt(frob)
    idx = np.array([1, 2, 4])
    radii = idx * L / n
    samples = kernel_axis_samples(3, radii, n, L)
    assert np.allclose(samples[:, 0], direct[idx], rtol=1e-10, atol=1e-16)
    # cubic symmetry: every axis sees the same magnitudes
    assert np.allclose(samples, samples[:, :1], rtol=1e-10)


def test_kernel_decay_report():
    rep = kernel_decay_check(3, [1, 2, 4, 8], n=64, box_length=16 * np.pi)
    assert np.all(np.isfinite(rep.kernel_magnitudes)) and np.all(rep.kernel_magnitudes >= 0)
    assert np.all(rep.kernel_magnitudes <= rep.bound * (1 + 1e-12))
    assert rep.kernel_magnitudes[-1] <= rep.kernel_magnitudes[0]
    finer = kernel_decay_check(3, [1, 2, 4, 8], n=128, box_length=16 * np.pi)
    assert abs(finer.bound_constants / rep.bound_constants - 1) <= 0.10
    lines = rep.to_csv().splitlines()
    assert lines[0] == "r,|K|,bound" and len(lines) == 5


def test_kernel_window():
    with pytest.raises(BilinearError, match="reliable window"):
        kernel_decay_check(3, [1, 30], n=64, box_length=16 * np.pi)
    with pytest.raises(BilinearError):
        kernel_decay_check(3, [2, 1])
