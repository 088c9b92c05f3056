"""Tunnelling phase gate: basis construction, gate matrix, controlled phase and fidelity."""

from dataclasses import dataclass, field, asdict
import itertools
import json
import math

import numpy as np

from .errors import ProtocolError, UndefinedPhaseError
from .grid import Grid2D, WaveFunction
from .interaction import ContactModel
from .potential import LatticeParams
from .propagator import SplitOperator, TiltSchedule, segment_steps
from .single_particle import by_label, cell_grid, sp_eigenstates
from .two_particle import DEFAULT_N_PROP, QUBIT_LABELS, product_state

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_PAIRS = tuple(np.kron(a, b) for a, b in itertools.product(PAULI, PAULI))

# qubit label -> (left-well level, right-well level)
QUBIT_CONTENT = {"00": ("0_L", "0_R"), "01": ("0_L", "1_R"), "10": ("1_L", "0_R"), "11": ("1_L", "1_R")}


@dataclass
class QubitBasis:
    grid: Grid2D
    states: list  # WaveFunctions in QUBIT_LABELS order
    delta_theta: float
    labels: tuple = QUBIT_LABELS

    def free_stack(self):
        return np.array([s.free() for s in self.states])


def gate_grid(p: LatticeParams, dtheta_initial, n_points=DEFAULT_N_PROP) -> Grid2D:
    return Grid2D(cell_grid(p.with_tilt(dtheta_initial), n_points))


def build_qubit_basis(p: LatticeParams, delta_theta, grid: Grid2D = None) -> QubitBasis:
    """Symmetrised products of localised single-particle eigenstates at ``delta_theta``."""
    grid = grid or gate_grid(p, delta_theta)
    sp = by_label(sp_eigenstates(p.with_tilt(delta_theta), 6, grid.axis))
    missing = [lab for lab in ("0_L", "0_R", "1_L", "1_R") if lab not in sp]
    if missing:
        raise ProtocolError(f"qubit states {missing} are delocalised at delta_theta={delta_theta:.4f} rad; "
                            "use a larger initial tilt")
    states = []
    for q in QUBIT_LABELS:
        left, right = QUBIT_CONTENT[q]
        v = product_state(sp[left].wavefunction.free().real, sp[right].wavefunction.free().real)
        v = v / math.sqrt(np.sum(v**2)) / grid.spacing
        states.append(WaveFunction.from_free(grid, v))
    return QubitBasis(grid, states, delta_theta)


def remove_single_qubit_phases(V):
    """Return ``(V', phi)`` with V' = D V, D = diag(exp(i chi_ab)), chi_ab = alpha_a + beta_b.

    The gauge makes V'_00, V'_01 and V'_10 real positive; phi = arg V'_11 =
    phi_11 + phi_00 - phi_01 - phi_10, wrapped to (-pi, pi].
    """
    V = np.asarray(V, dtype=complex)
    d = np.diag(V)
    if np.any(np.abs(d) < 1e-6):
        raise UndefinedPhaseError(f"diagonal entries {np.abs(d)} too small to define phases")
    ph = np.angle(d)
    chi = -np.array([ph[0], ph[1], ph[2], ph[1] + ph[2] - ph[0]])
    Vp = np.exp(1j * chi)[:, None] * V
    phi = float(np.angle(Vp[3, 3]))
    return Vp, phi


def ideal_gate(phi):
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * phi)])


def average_fidelity(Vp, phi):
    """Average gate fidelity of ``Vp`` against diag(1, 1, 1, e^{i phi}) from the Pauli-twirl trace sum."""
    Vp = np.asarray(Vp, dtype=complex)
    W = ideal_gate(phi)
    Wd, Vd = W.conj().T, Vp.conj().T
    total = sum(np.trace(W @ P @ Wd @ Vp @ P @ Vd) for P in PAULI_PAIRS)
    if abs(total.imag) > 1e-9 * max(1.0, abs(total)):
        raise ArithmeticError(f"fidelity trace sum has imaginary part {total.imag:.3e}")
    return 0.2 + total.real / 80.0


@dataclass
class GateResult:
    raw: np.ndarray
    corrected: np.ndarray
    controlled_phase: float
    fidelity: float
    leakage: np.ndarray
    schedule: TiltSchedule
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def phase_over_pi(self):
        return self.controlled_phase / math.pi

    def to_dict(self):
        def cm(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]

        return {
            "raw_matrix": cm(self.raw),
            "corrected_matrix": cm(self.corrected),
            "controlled_phase_rad": self.controlled_phase,
            "controlled_phase_over_pi": self.phase_over_pi,
            "fidelity": self.fidelity,
            "leakage": [float(x) for x in self.leakage],
            "schedule": asdict(self.schedule),
            "params": self.params,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def gate_from_matrix(raw, schedule, params=None, diagnostics=None):
    corrected, phi = remove_single_qubit_phases(raw)
    leakage = 1.0 - np.sum(np.abs(raw) ** 2, axis=0)
    return GateResult(raw, corrected, phi, float(average_fidelity(corrected, phi)), leakage, schedule,
                      params or {}, diagnostics or {})


def project(basis_stack, final_stack, weight):
    """V_ij = <basis_i | final_j>."""
    return np.tensordot(basis_stack.conj(), final_stack, axes=([1, 2], [1, 2])).astype(complex) * weight


def run_gate(p: LatticeParams, model: ContactModel, schedule: TiltSchedule, grid: Grid2D = None, dt=None,
             basis: QubitBasis = None, propagator: SplitOperator = None, check_dt=False) -> GateResult:
    """Evolve the four qubit states through ``schedule`` and assemble the gate.

    With ``check_dt`` the run is repeated at dt/2 and the largest change of a
    final state (L2 norm) is stored in ``diagnostics["dt_check"]``.
    """
    basis = basis or build_qubit_basis(p, schedule.dtheta_initial, grid)
    grid = basis.grid
    op = propagator or SplitOperator(grid, p.with_tilt(0.0), model)
    dt = dt or op.default_dt(schedule)
    stack = basis.free_stack().astype(complex)
    final = op.run_schedule(stack, schedule, dt)
    w = grid.spacing**2
    raw = project(stack, final, w)
    n_steps = sum(len(segment_steps(d, dt)) for d, _ in schedule.segments())
    diagnostics = {"dt": dt, "n_steps": n_steps, "grid": grid.spec(),
                   "norms": [float(x) for x in np.sqrt(np.sum(np.abs(final) ** 2, axis=(1, 2)) * w)]}
    if check_dt:
        half = op.run_schedule(stack, schedule, 0.5 * dt)
        diagnostics["dt_check"] = float(np.max(np.sqrt(np.sum(np.abs(half - final) ** 2, axis=(1, 2)) * w)))
    params = {"V0": p.V0, "Zf": p.Zf, "model": model.to_dict(), "model_hash": model.param_hash()}
    return gate_from_matrix(raw, schedule, params, diagnostics)
