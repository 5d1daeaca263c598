import numpy as np
import pytest

from critflow.field import FieldError, SpectralField, Trajectory, full_to_half, half_to_full
from critflow.grid import Grid, GridError, make_grid

from conftest import divfree, scalar


@pytest.mark.parametrize("d, n, msg", [(1, 16, "d out of range"), (5, 8, "d out of range"),
                                       (3, 24, "power of two"), (3, 4, "at least 8")])
def test_grid_rejects_bad_shapes(d, n, msg):
    with pytest.raises(GridError, match=msg):
        Grid(d, n)


def test_grid_budget():
    with pytest.raises(GridError):
        make_grid(4, 128)
    assert make_grid(3, 64).modes == 64**3


def test_wavenumbers_scale_with_box():
    g = make_grid(3, 16, 4 * np.pi)
    assert np.isclose(g.kmag.max(), 0.5 * g.kmag_int.max())
    assert g.spectral_shape == (16, 16, 9)
    assert np.isclose(g.volume, (4 * np.pi) ** 3)


def test_hermitian_weights_count_every_mode_once():
    g = make_grid(3, 8)
    assert g.hermitian_weights.sum() == 8**3


@pytest.mark.parametrize("d", [2, 3, 4])
def test_physical_round_trip(d):
    g = make_grid(d, 8)
    vals = np.random.default_rng(d).standard_normal((2,) + g.shape)
    f = SpectralField.from_physical(g, vals)
    assert np.allclose(f.physical(), vals, atol=1e-13)


def test_half_full_round_trip(grid3_small):
    f = divfree(grid3_small, 3)
    full = f.full_coeffs()
    assert np.allclose(np.fft.ifftn(full, axes=(1, 2, 3)).imag, 0, atol=1e-15)
    assert np.array_equal(full_to_half(grid3_small, half_to_full(grid3_small, f.coeffs)), f.coeffs)


def test_field_is_immutable(grid3_small):
    f = scalar(grid3_small, 1)
    with pytest.raises(AttributeError):
        f.coeffs = None
    with pytest.raises(ValueError):
        f.coeffs[0, 0, 0, 0] = 1.0


def test_field_shape_mismatch(grid3_small):
    with pytest.raises(FieldError):
        SpectralField(grid3_small, np.zeros((3, 16, 16, 16), dtype=complex))


def test_linear_arithmetic(grid3_small):
    u, v = divfree(grid3_small, 1), divfree(grid3_small, 2)
    w = u * 2.0 - v + (-u)
    assert w.allclose(u - v)


def test_mean_removal(grid3_small):
    vals = 1.0 + np.sin(grid3_small.coordinates()[0])
    f = SpectralField.from_physical(grid3_small, vals)
    assert not f.is_zero_mean()
    assert np.isclose(f.mean[0], 1.0)
    assert f.without_mean().is_zero_mean()


def test_trajectory_validation(grid3_small):
    f = scalar(grid3_small, 1)
    with pytest.raises(FieldError, match="first time node"):
        Trajectory.from_states([0.5, 1.0], [f, f])
    with pytest.raises(FieldError, match="strictly increasing"):
        Trajectory.from_states([0.0, 0.0], [f, f])


def test_trajectory_linear_interpolation(grid3_small):
    f = scalar(grid3_small, 1)
    tr = Trajectory.from_states([0.0, 1.0, 3.0], [f * 0.0, f, f * 3.0])
    assert tr.at(2.0).allclose(f * 2.0)
    assert tr.at(0.5).allclose(f * 0.5)
    with pytest.raises(FieldError):
        tr.at(3.5)
