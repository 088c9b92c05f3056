import numpy as np
import pytest

from dwgate.errors import ConfigurationError, DimensionError
from dwgate.grid import (Grid1D, Grid2D, WaveFunction, exchange, inner_product, kinetic_apply, read_snapshot,
                         symmetrize, write_snapshot)


@pytest.mark.parametrize("n", [16, 48, 100])
def test_grid_size_must_be_power_of_two(n):
    with pytest.raises(ConfigurationError):
        Grid1D(n, 0.0, 1.0)


def test_layout():
    g = Grid1D(64, -1.0, 3.0)
    assert g.spacing == 4.0 / 64
    np.testing.assert_allclose(np.diff(g.positions), g.spacing)
    assert g.n_free == 63


def random_state(grid, rng):
    shape = (grid.n_points,) if isinstance(grid, Grid1D) else grid.shape
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if (grid.boundary if isinstance(grid, Grid1D) else grid.axis.boundary) == "dirichlet":
        ax = grid if isinstance(grid, Grid1D) else grid.axis
        mask = np.zeros(shape, bool)
        if len(shape) == 1:
            mask[ax.interior] = True
        else:
            mask[ax.interior, ax.interior] = True
        a = np.where(mask, a, 0)
    return WaveFunction(grid, a).normalized()


def test_plane_wave_eigenvalue():
    g = Grid1D(64, 0.0, 2 * np.pi, "periodic")
    for q in (0, 1, 3, -7):
        psi = WaveFunction(g, np.exp(1j * q * g.positions))
        np.testing.assert_allclose(kinetic_apply(psi).amplitudes, q * q * psi.amplitudes, atol=1e-10)


def test_box_modes():
    g = Grid1D(128, -0.5, 2.5)
    x = g.positions
    for m in (1, 2, 9):
        psi = WaveFunction(g, np.sin(m * np.pi * (x - g.x_lo) / g.length))
        np.testing.assert_allclose(kinetic_apply(psi).amplitudes, (m * np.pi / g.length) ** 2 * psi.amplitudes,
                                   atol=1e-9)


def test_gaussian_against_fourth_order_differences():
    g = Grid1D(4096, -20.0, 20.0, "periodic")
    x, h = g.positions, g.spacing
    f = np.exp(-0.5 * x**2)
    fd = -(-np.roll(f, 2) + 16 * np.roll(f, 1) - 30 * f + 16 * np.roll(f, -1) - np.roll(f, -2)) / (12 * h * h)
    spectral = kinetic_apply(WaveFunction(g, f)).amplitudes.real
    np.testing.assert_allclose(spectral, fd, atol=1e-8)
    np.testing.assert_allclose(spectral, (1 - x**2) * f, atol=1e-10)


def test_kinetic_of_constant_vanishes():
    g = Grid1D(32, 0.0, 5.0, "periodic")
    assert np.max(np.abs(kinetic_apply(WaveFunction(g, np.ones(32))).amplitudes)) < 1e-12


@pytest.mark.parametrize("boundary", ["periodic", "dirichlet"])
@pytest.mark.parametrize("two", [False, True])
def test_kinetic_is_hermitian(boundary, two):
    rng = np.random.default_rng(3)
    ax = Grid1D(32 if two else 128, -1.0, 2.0, boundary)
    grid = Grid2D(ax) if two else ax
    for _ in range(3):
        psi, phi = random_state(grid, rng), random_state(grid, rng)
        lhs = inner_product(phi, kinetic_apply(psi))
        rhs = inner_product(kinetic_apply(phi), psi)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_inner_product_and_norm():
    rng = np.random.default_rng(4)
    g = Grid1D(64, 0.0, 3.0)
    psi, phi = random_state(g, rng), random_state(g, rng)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert inner_product(psi, psi).real == pytest.approx(1.0, abs=1e-12)
    assert inner_product(psi, phi) == pytest.approx(np.conj(inner_product(phi, psi)), abs=1e-14)
    with pytest.raises(DimensionError):
        inner_product(psi, random_state(Grid1D(64, 0.0, 4.0), rng))


def test_exchange():
    rng = np.random.default_rng(5)
    grid = Grid2D(Grid1D(32, 0.0, 1.0))
    psi = random_state(grid, rng)
    np.testing.assert_array_equal(exchange(exchange(psi)).amplitudes, psi.amplitudes)
    s = symmetrize(psi)
    np.testing.assert_array_equal(exchange(s).amplitudes, s.amplitudes)
    anti = WaveFunction(grid, psi.amplitudes - psi.amplitudes.T)
    np.testing.assert_array_equal(exchange(anti).amplitudes, -anti.amplitudes)
    with pytest.raises(DimensionError):
        exchange(random_state(grid.axis, rng))


def test_shape_and_finiteness_checks():
    g = Grid1D(32, 0.0, 1.0)
    with pytest.raises(DimensionError):
        WaveFunction(g, np.zeros(31))
    with pytest.raises(DimensionError):
        WaveFunction(g, np.full(32, np.nan))
    psi = WaveFunction(g, np.ones(32))
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 2.0


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    grid = Grid2D(Grid1D(32, -0.3, 1.7))
    psi = WaveFunction(grid, random_state(grid, rng).amplitudes, time=1.25)
    path = tmp_path / "psi.dwwf"
    write_snapshot(path, psi, {"note": "test"})
    back, header = read_snapshot(path)
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)
    assert back.grid == grid and back.time == 1.25 and header["parameters"] == {"note": "test"}
    raw = path.read_bytes()
    assert raw[:4] == b"DWWF"
    header_len = int.from_bytes(raw[8:12], "little")
    assert len(raw) - 12 - header_len == 32 * 32 * 16
    assert np.frombuffer(raw[12 + header_len:12 + header_len + 8], "<f8")[0] == psi.amplitudes[0, 0].real
