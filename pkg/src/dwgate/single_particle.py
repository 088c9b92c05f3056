"""Single-atom eigenstates of the double-well cell and their labels."""

from dataclasses import dataclass
import csv
import warnings

import numpy as np

from .errors import InvalidParameterError
from .grid import Grid1D, WaveFunction
from .potential import LatticeParams, double_well, well_geometry

DEFAULT_N_1D = 256
MAX_STATES = 12
SIDE_THRESHOLD = 0.5


@dataclass(frozen=True)
class SpState:
    energy: float
    wavefunction: WaveFunction
    label: str
    side_expectation: float
    index: int

    @property
    def localized(self):
        return abs(self.side_expectation) > SIDE_THRESHOLD

    @property
    def side(self):
        if not self.localized:
            return None
        return "L" if self.side_expectation < 0 else "R"


def cell_grid(p: LatticeParams, n_points=DEFAULT_N_1D) -> Grid1D:
    """Dirichlet grid spanning the cell between the maxima flanking the double well."""
    g = well_geometry(p)
    return Grid1D(n_points, g.domain_lo, g.domain_hi, "dirichlet")


def fix_phase(v):
    """Make the largest-magnitude sample real and positive."""
    j = int(np.argmax(np.abs(v)))
    return v * (abs(v[j]) / v[j])


def solve_1d(grid: Grid1D, potential_values, n_states):
    """Lowest eigenpairs of -d^2/dx^2 + U on ``grid``.

    ``potential_values`` are sampled on the free nodes. Returns energies and
    an array of shape (n_states, n_free) of eigenvectors normalised with the
    dx-weighted norm.
    """
    h = grid.kinetic_matrix() + np.diag(np.asarray(potential_values, float))
    e, v = np.linalg.eigh(h)
    v = v[:, :n_states].T / np.sqrt(grid.spacing)
    v = np.array([fix_phase(row).real for row in v])
    return e[:n_states], v


def side_expectation(grid: Grid1D, free_values, barrier_pos):
    x = grid.positions[grid.interior]
    return float(np.sum(np.sign(x - barrier_pos) * np.abs(free_values) ** 2) * grid.spacing)


def assign_labels(sides):
    """Labels from per-state side expectations, in energy order.

    Localized states get ``<n>_L`` / ``<n>_R`` with n the per-side vibrational
    index. Other states get ``<b>_-`` / ``<b>_+`` where b = index // 2 is the
    doublet index and the sign follows energy order inside the doublet.
    Indices beyond the sixth state are labelled ``higher(<index>)``.
    """
    counts = {"L": 0, "R": 0}
    labels = []
    for i, s in enumerate(sides):
        if i >= 6:
            labels.append(f"higher({i})")
        elif abs(s) > SIDE_THRESHOLD:
            side = "L" if s < 0 else "R"
            labels.append(f"{counts[side]}_{side}")
            counts[side] += 1
        else:
            labels.append(f"{i // 2}_{'-' if i % 2 == 0 else '+'}")
    # an unpaired delocalized state could collide with a localized label of the same band
    seen = {}
    for i, lab in enumerate(labels):
        if lab in seen:
            labels[i] = f"{lab}#{i}"
        seen[lab] = i
    return labels


def sp_eigenstates(p: LatticeParams, n_states=6, grid: Grid1D = None):
    if not 1 <= n_states <= MAX_STATES:
        raise InvalidParameterError(f"n_states must be in 1..{MAX_STATES}")
    geom = well_geometry(p)
    grid = grid or cell_grid(p)
    x = grid.positions[grid.interior]
    e, v = solve_1d(grid, double_well(x, p), n_states)
    sides = [side_expectation(grid, row, geom.barrier_pos) for row in v]
    labels = assign_labels(sides)
    return [SpState(float(e[i]), WaveFunction.from_free(grid, v[i]), labels[i], sides[i], i)
            for i in range(n_states)]


def by_label(states):
    return {s.label: s for s in states}


def tunnel_splitting(p: LatticeParams, doublet_index=1, grid: Grid1D = None) -> float:
    """Energy gap 2J inside doublet ``doublet_index`` (0 = ground doublet).

    Warns when the upper member of the doublet is not below the barrier.
    """
    if doublet_index not in (0, 1):
        raise InvalidParameterError("doublet_index must be 0 or 1")
    states = sp_eigenstates(p, 2 * doublet_index + 2, grid)
    lower, upper = states[2 * doublet_index], states[2 * doublet_index + 1]
    if upper.energy >= well_geometry(p).barrier_energy:
        warnings.warn(f"doublet {doublet_index} lies above the barrier; splitting is not a tunnel splitting",
                      RuntimeWarning, stacklevel=2)
    return upper.energy - lower.energy


def write_levels_csv(path_or_file, rows):
    """Rows of (delta_theta, index, energy, label, side_expectation)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["delta_theta", "index", "energy_Er", "label", "side_expectation"])
        for r in rows:
            w.writerow([repr(float(r[0])), r[1], repr(float(r[2])), r[3], repr(float(r[4]))])
    finally:
        if own:
            fh.close()
