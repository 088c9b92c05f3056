import io
import math

import numpy as np
import pytest

from dwgate.errors import NonInteractingSynchronizationError
from dwgate.grid import WaveFunction, exchange, inner_product
from dwgate.interaction import ContactModel
from dwgate.potential import tilt_energy
from dwgate.single_particle import sp_eigenstates
from dwgate import two_particle as tp

DELTA = ContactModel.grid_delta(1.0)
FREE = ContactModel.grid_delta(0.0)


@pytest.fixture(scope="module")
def grid32(lattice):
    return tp.default_grid(lattice, 32)


@pytest.fixture(scope="module")
def energies64(lattice):
    """Interaction energies with the grid delta on the 64-point cell."""
    return tp.interaction_energies(lattice, DELTA, grid=tp.default_grid(lattice.with_tilt(0.1), 64))


def _random(grid, rng):
    n = grid.axis.n_free
    return WaveFunction.from_free(grid, rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))).normalized()


def test_hermitian_and_exchange_covariant(lattice, grid32):
    h = tp.build_two_body_hamiltonian(lattice.with_tilt(0.05), ContactModel.gaussian(1.0, 0.45), grid32)
    rng = np.random.default_rng(7)
    for _ in range(3):
        psi, phi = _random(grid32, rng), _random(grid32, rng)
        a = inner_product(phi, h.apply(psi))
        assert abs(a - inner_product(h.apply(phi), psi)) < 1e-12 * abs(a)
        b = inner_product(exchange(phi), h.apply(exchange(psi)))
        assert abs(a - b) < 1e-12 * abs(a)


def test_separable_limit(lattice, grid32):
    p = lattice.with_tilt(0.1)
    e = [s.energy for s in sp_eigenstates(p, 8, grid32.axis)]
    sums = sorted(e[i] + e[j] for i in range(8) for j in range(i, 8))[:6]
    sol = tp.lowest_spectrum(p, FREE, 6, grid=grid32)
    np.testing.assert_allclose(sol.energies, sums, atol=1e-8)


def test_dense_and_lanczos_agree(lattice, grid32):
    p = lattice.with_tilt(0.03)
    d = tp.lowest_spectrum(p, DELTA, 8, grid=grid32, method="dense")
    l = tp.lowest_spectrum(p, DELTA, 8, grid=grid32, method="lanczos")
    np.testing.assert_allclose(d.energies, l.energies, atol=1e-9)
    assert np.all(l.residuals < 1e-6)


def test_bosonic_sector_purity(lattice, grid32):
    sol = tp.lowest_spectrum(lattice.with_tilt(0.02), DELTA, 10, grid=grid32, method="lanczos")
    for v in sol.vectors:
        assert np.linalg.norm(v - v.T) * grid32.spacing < 1e-8
        assert np.sum(v**2) * grid32.spacing**2 == pytest.approx(1.0, abs=1e-12)


def test_full_space_ground_state_is_bosonic(lattice, grid32):
    sym = tp.lowest_spectrum(lattice, DELTA, 1, grid=grid32)
    full = tp.lowest_spectrum(lattice, DELTA, 2, symmetric_only=False, grid=grid32, method="lanczos")
    assert full.energies[0] == pytest.approx(sym.energies[0], abs=1e-9)


def test_zero_tilt_parity(lattice, grid32):
    sol = tp.lowest_spectrum(lattice, DELTA, 8, grid=grid32)
    h = tp.build_two_body_hamiltonian(lattice, DELTA, grid32)
    for e, v in zip(sol.energies, sol.vectors):
        m = v[::-1, ::-1]  # x -> pi - x on both coordinates
        assert np.linalg.norm(h.apply_free(m) - e * m) / np.linalg.norm(m) < 1e-8


def test_zero_tilt_pattern(lattice, energies64):
    sol = tp.lowest_spectrum(lattice, DELTA, 4, grid=tp.default_grid(lattice, 64))
    gap = sol.energies[1] - sol.energies[0]
    # doubly occupied pair: nearly degenerate, one U00 above the separated ground state
    assert sol.energies[2] - sol.energies[1] < 1e-2
    assert gap == pytest.approx(energies64.U00, rel=0.1)


def test_interaction_energies(energies64):
    u = energies64
    assert u.U00 == pytest.approx(1.0, abs=0.2)
    assert u.U01 / u.U00 == pytest.approx(1.0, rel=0.15)
    assert u.U11 / u.U00 == pytest.approx(0.75, rel=0.15)
    assert min(u.purity[k] for k in ("0_R0_R", "0_L0_R")) > 0.99


def test_interaction_energies_vanish_without_coupling(lattice):
    u = tp.interaction_energies(lattice, FREE, grid=tp.default_grid(lattice.with_tilt(0.1), 32))
    assert max(abs(u.U00), abs(u.U01), abs(u.U11)) < 1e-8


def test_coupling_raises_double_occupancy(lattice, grid32):
    gaps = []
    for g in (0.0, 0.25, 0.5, 1.0):
        e = tp.lowest_spectrum(lattice, ContactModel.grid_delta(g), 2, grid=grid32).energies
        gaps.append(e[1] - e[0])
    assert all(a < b for a, b in zip(gaps, gaps[1:]))


def test_two_state_model():
    assert tp.two_state_splitting(0.8, 0.8, 0.1) == pytest.approx(0.2)
    assert tp.two_state_splitting(0.8, 0.8, 0.1, bose_enhanced=True) == pytest.approx(2 * math.sqrt(2) * 0.1)
    assert tp.two_state_splitting(0.8, 0.5, 0.0) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        tp.two_state_splitting(1.0, 0.5, -0.1)


def test_synchronisation(lattice):
    assert tp.synchronized_tilt(1.0, 0.15) == pytest.approx(0.695)
    assert tp.synchronized_tilt(0.8, 0.0) == pytest.approx(0.7)
    with pytest.raises(NonInteractingSynchronizationError):
        tp.synchronized_tilt(0.0, 0.1)
    with pytest.raises(ZeroDivisionError):
        tp.synchronized_tilt(0.0, 0.1)
    d = tp.synchronized_delta_theta(lattice, 1.0, 0.15)
    assert tilt_energy(d, lattice.V0, lattice.Zf) == pytest.approx(0.695, abs=1e-9)
    assert 0.03 < d < 0.04


def test_synchronised_tilt_near_hold_tilt(lattice, energies64):
    d = tp.synchronized_delta_theta(lattice, energies64.U00)
    assert abs(d - 0.033) < 0.010


@pytest.fixture(scope="module")
def scan32(lattice, grid32):
    return tp.spectrum_vs_tilt(lattice, DELTA, (0.06, 0.12), 7, 8, grid=grid32)


def test_scan_structure(scan32):
    s = scan32
    assert s.energies.shape == (7, 8)
    assert np.all(np.diff(s.energies, axis=1) >= 0)
    assert np.all(tp.adjacent_gaps(s) > 0)
    for row in s.track_of_level:
        assert len(set(row)) == len(row)
    buf = io.StringIO()
    s.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "delta_theta,level_index,energy_Er,track_label" and len(lines) == 1 + 7 * 8


def test_scan_labels_follow_single_particle_sums(lattice, grid32):
    s = tp.spectrum_vs_tilt(lattice, FREE, (0.06, 0.12), 4, 6, grid=grid32)
    for k, d in enumerate(s.delta_theta):
        e = {st.label: st.energy for st in sp_eigenstates(lattice.with_tilt(d), 6, grid32.axis)}
        for lvl in range(6):
            lab = s.track_labels[s.track_of_level[k, lvl]]
            a, b = lab[:3], lab[3:]
            assert s.energies[k, lvl] == pytest.approx(e[a] + e[b], abs=1e-8)


def test_minimal_gap_refinement():
    d = np.linspace(0.0, 0.1, 11)
    centre, gap = 0.043, 0.02
    lower = -np.sqrt((d - centre) ** 2 + gap**2 / 4)
    spec = tp.TwoBodySpectrum(d, np.c_[lower, -lower], np.tile([0, 1], (11, 1)), ["a", "b"],
                              np.zeros((11, 2), bool))
    c = tp.minimal_gap(spec, "a", "b")
    assert c.delta_theta == pytest.approx(centre, abs=2e-3)
    assert c.gap == pytest.approx(gap, rel=0.05)
    assert len(tp.local_gap_minima(spec)) == 1


def test_level_limit(lattice, grid32):
    with pytest.raises(ValueError):
        tp.lowest_spectrum(lattice, DELTA, 31, grid=grid32)


def test_composition_crossing_ignores_track_names():
    d = np.linspace(0.0, 0.1, 51)
    centre, c, slope = 0.043, 0.1, 20.0
    energies, wa, wb = [], [], []
    for x in d:
        h = np.array([[slope * (x - centre), c, 0.0], [c, -slope * (x - centre), 0.0], [0.0, 0.0, 5.0]])
        e, v = np.linalg.eigh(h)
        energies.append(e)
        wa.append(v[0] ** 2)
        wb.append(v[1] ** 2)
    n = len(d)
    spec = tp.TwoBodySpectrum(d, np.array(energies), np.zeros((n, 3), int), ["x", "y", "z"], np.zeros((n, 3), bool),
                              weights={"a": np.array(wa), "b": np.array(wb)})
    got = tp.composition_crossing(spec, "a", "b")
    assert got.delta_theta == pytest.approx(centre, abs=1e-3)
    assert got.gap == pytest.approx(2 * c, rel=0.02)
    assert got.mixing == pytest.approx(1.0, abs=0.05)
    with pytest.raises(Exception):
        tp.composition_crossing(spec, "a", "q")
