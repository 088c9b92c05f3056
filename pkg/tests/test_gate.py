import json
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from dwgate.errors import ProtocolError, UndefinedPhaseError
from dwgate.gate import (average_fidelity, build_qubit_basis, gate_from_matrix, gate_grid, ideal_gate,
                         remove_single_qubit_phases, run_gate)
from dwgate.interaction import ContactModel
from dwgate.propagator import TiltSchedule, evolve

DELTA = ContactModel.grid_delta(1.0)


def _local_phases(rng):
    a, b = rng.uniform(-np.pi, np.pi, 2), rng.uniform(-np.pi, np.pi, 2)
    return np.diag(np.exp(1j * (a[:, None] + b[None, :]).ravel()))


def _near_diagonal(rng, eps=0.1):
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = h + h.conj().T
    w, v = np.linalg.eigh(eps * h)
    return v @ np.diag(np.exp(1j * w)) @ v.conj().T


@pytest.fixture(scope="module")
def grid32(lattice):
    return gate_grid(lattice, 0.1, 32)


def test_fidelity_reference_values():
    assert average_fidelity(ideal_gate(0.9 * np.pi), 0.9 * np.pi) == pytest.approx(1.0, abs=1e-12)
    assert average_fidelity(np.eye(4), np.pi) == pytest.approx(0.4, abs=1e-12)
    assert average_fidelity(np.zeros((4, 4)), 0.3) == pytest.approx(0.2, abs=1e-15)


def test_fidelity_matches_haar_average():
    rng = np.random.default_rng(11)
    V = unitary_group.rvs(4, random_state=rng)
    phi = 0.7
    M = ideal_gate(phi).conj().T @ V
    psi = rng.normal(size=(100_000, 4)) + 1j * rng.normal(size=(100_000, 4))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    mc = np.mean(np.abs(np.einsum("si,ij,sj->s", psi.conj(), M, psi)) ** 2)
    assert average_fidelity(V, phi) == pytest.approx(mc, abs=1e-3)


def test_fidelity_of_lossy_matrix():
    rng = np.random.default_rng(2)
    V = 0.9 * _near_diagonal(rng)
    t = np.trace(ideal_gate(0.4).conj().T @ V)
    assert average_fidelity(V, 0.4) == pytest.approx(0.2 + abs(t) ** 2 / 20, abs=1e-12)


def test_recovers_phase_through_local_rotations():
    rng = np.random.default_rng(5)
    for phi in (0.0, 0.9 * np.pi, -2.0, np.pi):
        V = _local_phases(rng) @ ideal_gate(phi) @ _local_phases(rng)
        Vp, got = remove_single_qubit_phases(V)
        assert abs(np.exp(1j * got) - np.exp(1j * phi)) < 1e-12
        assert average_fidelity(Vp, got) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(Vp, ideal_gate(got), atol=1e-12)


def test_gauge_invariance():
    rng = np.random.default_rng(9)
    V = _near_diagonal(rng)
    ref = gate_from_matrix(V, None)
    for _ in range(5):
        g = gate_from_matrix(_local_phases(rng) @ V @ _local_phases(rng), None)
        assert g.controlled_phase == pytest.approx(ref.controlled_phase, abs=1e-12)
        assert g.fidelity == pytest.approx(ref.fidelity, abs=1e-12)


def test_undefined_phase():
    V = np.eye(4, dtype=complex)
    V[2, 2] = 0.0
    with pytest.raises(UndefinedPhaseError):
        remove_single_qubit_phases(V)


def test_basis(lattice, grid32):
    b = build_qubit_basis(lattice, 0.1, grid32)
    s = b.free_stack()
    gram = np.tensordot(s.conj(), s, axes=([1, 2], [1, 2])) * grid32.spacing**2
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(s, np.swapaxes(s, 1, 2), atol=1e-14)
    with pytest.raises(ProtocolError):
        build_qubit_basis(lattice, 0.0, grid32)


def test_zero_duration_gate_is_identity(lattice, grid32):
    g = run_gate(lattice, DELTA, TiltSchedule(0.1, 0.034, 0.0, 0.0), grid=grid32)
    np.testing.assert_allclose(g.raw, np.eye(4), atol=1e-10)
    assert g.fidelity == pytest.approx(1.0, abs=1e-10)
    assert g.diagnostics["n_steps"] == 0


def test_no_interaction_no_entangling_phase(lattice, grid32):
    s = TiltSchedule(0.1, 0.09, 2.0, 10.0)
    g = run_gate(lattice, ContactModel.grid_delta(0.0), s, grid=grid32)
    assert abs(g.controlled_phase) < 1e-6
    assert g.fidelity > 1 - 1e-4  # residual nonadiabatic mixing only


@pytest.fixture(scope="module")
def coarse_gate(lattice, grid32, units):
    s = TiltSchedule.from_ms(units, 0.1, 0.034, 0.12, 1.46)
    return run_gate(lattice, DELTA, s, grid=grid32, check_dt=True)


def test_gate_bookkeeping(coarse_gate):
    g = coarse_gate
    assert max(abs(n - 1) for n in g.diagnostics["norms"]) < 1e-10
    assert np.all(g.leakage > -1e-10) and np.all(g.leakage < 1)
    assert g.diagnostics["dt_check"] < 0.05
    assert 0.2 <= g.fidelity <= 1.0
    d = json.loads(g.to_json())
    assert d["controlled_phase_over_pi"] == pytest.approx(g.controlled_phase / math.pi)
    z = d["raw_matrix"][3][3]
    assert complex(*z) == pytest.approx(g.raw[3, 3])
    assert d["params"]["model_hash"] == DELTA.param_hash()


def test_gate_is_deterministic(lattice, grid32):
    s = TiltSchedule(0.1, 0.034, 1.0, 2.0)
    a, b = (run_gate(lattice, DELTA, s, grid=grid32) for _ in range(2))
    assert np.array_equal(a.raw, b.raw)


def test_trace_populations(lattice, grid32):
    b = build_qubit_basis(lattice, 0.1, grid32)
    s = TiltSchedule(0.1, 0.034, 2.0, 3.0)
    _, trace = evolve(b.states[3], s, lattice, DELTA, basis=b, stride=50)
    np.testing.assert_allclose(trace.populations[0], [0, 0, 0, 1], atol=1e-12)
    assert trace.times[-1] == pytest.approx(s.duration)
    assert all(sum(p) <= 1 + 1e-10 for p in trace.populations)
