import io
import math

import numpy as np
import pytest

from dwgate.errors import InvalidParameterError
from dwgate.grid import Grid1D
from dwgate.potential import LatticeParams, double_well, double_well_dtheta, well_geometry
from dwgate.single_particle import (assign_labels, by_label, cell_grid, solve_1d, sp_eigenstates,
                                    tunnel_splitting, write_levels_csv)


def test_harmonic_oracle():
    c = 4.0
    g = Grid1D(256, -8.0, 8.0)
    x = g.positions[g.interior]
    e, _ = solve_1d(g, c * x**2, 6)
    np.testing.assert_allclose(e, (2 * np.arange(6) + 1) * math.sqrt(c), atol=1e-6)


def test_box_oracle():
    g = Grid1D(128, 0.3, 2.3)
    e, v = solve_1d(g, np.zeros(g.n_free), 8)
    np.testing.assert_allclose(e, (np.arange(1, 9) * math.pi / g.length) ** 2, atol=1e-8)


def test_orthonormal_and_residual(lattice):
    p = lattice.with_tilt(0.1)
    g = cell_grid(p)
    states = sp_eigenstates(p, 8, g)
    v = np.array([s.wavefunction.free().real for s in states])
    np.testing.assert_allclose(v @ v.T * g.spacing, np.eye(8), atol=1e-10)
    h = g.kinetic_matrix() + np.diag(double_well(g.positions[g.interior], p))
    for s, row in zip(states, v):
        assert np.linalg.norm(h @ row - s.energy * row) * math.sqrt(g.spacing) < 1e-8
        assert np.max(np.abs(s.wavefunction.amplitudes.imag)) == 0.0


def test_localised_qubit_states(lattice):
    p = lattice.with_tilt(0.1)
    states = sp_eigenstates(p, 6)
    labels = [s.label for s in states]
    assert len(set(labels)) == len(labels)
    assert labels[:4] == ["0_R", "0_L", "1_R", "1_L"]
    barrier = well_geometry(p).barrier_energy
    for s in states[:4]:
        assert abs(s.side_expectation) > 0.9
        assert s.energy < barrier
    lab = by_label(states)
    assert lab["1_L"].energy - lab["0_L"].energy == pytest.approx(10.0, rel=0.15)


def test_parity_at_zero_tilt(lattice):
    g = cell_grid(lattice)
    states = sp_eigenstates(lattice, 6, g)
    for s in states:
        assert abs(s.side_expectation) < 1e-6
        f = s.wavefunction.free().real
        # mirror about the barrier at pi/2: node j <-> node n - j
        mirrored = f[::-1]
        assert min(np.max(np.abs(mirrored - f)), np.max(np.abs(mirrored + f))) < 1e-8 * np.max(np.abs(f))
    assert [s.label for s in states] == ["0_-", "0_+", "1_-", "1_+", "2_-", "2_+"]


def test_labels_for_mixed_ladder():
    assert assign_labels([-0.99, 0.98, 0.1, -0.2, 0.97, 0.0, 0.5]) == \
        ["0_L", "0_R", "1_-", "1_+", "1_R", "2_+", "higher(6)"]


def test_grid_refinement(lattice):
    a = [s.energy for s in sp_eigenstates(lattice, 6, cell_grid(lattice, 256))]
    b = [s.energy for s in sp_eigenstates(lattice, 6, cell_grid(lattice, 512))]
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_hellmann_feynman(lattice):
    d, h = 0.1, 1e-5
    g = cell_grid(lattice.with_tilt(d))
    x = g.positions[g.interior]
    plus = sp_eigenstates(lattice.with_tilt(d + h), 4, g)
    minus = sp_eigenstates(lattice.with_tilt(d - h), 4, g)
    mid = sp_eigenstates(lattice.with_tilt(d), 4, g)
    for s, sp_, sm in zip(mid, plus, minus):
        fd = (sp_.energy - sm.energy) / (2 * h)
        f = s.wavefunction.free().real
        hf = np.sum(f**2 * double_well_dtheta(x, lattice.with_tilt(d))) * g.spacing
        assert fd == pytest.approx(hf, abs=1e-4)


def test_ground_doublet_splitting_is_tiny(lattice):
    assert 0 < tunnel_splitting(lattice, 0) < 0.05 * tunnel_splitting(lattice, 1)


def test_splitting_grows_as_barrier_drops():
    values = [tunnel_splitting(LatticeParams(Zf=z), 1) for z in (0.11, 0.13, 0.15)]
    heights = [well_geometry(LatticeParams(Zf=z)).barrier_height for z in (0.11, 0.13, 0.15)]
    assert heights[0] > heights[1] > heights[2]
    assert values[0] < values[1] < values[2]


def test_warning_above_barrier():
    with pytest.warns(RuntimeWarning):
        tunnel_splitting(LatticeParams(V0=8.0), 1)


def test_state_count_limit(lattice):
    with pytest.raises(InvalidParameterError):
        sp_eigenstates(lattice, 13)


def test_levels_csv(lattice):
    buf = io.StringIO()
    rows = [(0.1, s.index, s.energy, s.label, s.side_expectation) for s in sp_eigenstates(lattice.with_tilt(0.1))]
    write_levels_csv(buf, rows)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "delta_theta,index,energy_Er,label,side_expectation"
    assert len(lines) == 7 and lines[1].split(",")[3] == "0_R"
