"""Two-atom tunnelling phase gate in an optical double-well lattice."""

from .errors import *  # noqa: F401,F403
from .units import PhysicalParams, UnitSystem, make_unit_system, transverse_frequencies, g1d_dimensionless
from .potential import LatticeParams, double_well, well_geometry, tilt_energy, delta_theta_for_tilt
from .grid import Grid1D, Grid2D, WaveFunction
from .single_particle import sp_eigenstates, tunnel_splitting
from .interaction import ContactModel, calibrate
from .two_particle import (build_two_body_hamiltonian, lowest_spectrum, spectrum_vs_tilt, interaction_energies,
                           two_state_splitting, synchronized_tilt, synchronized_delta_theta)
from .propagator import TiltSchedule, strang_step, evolve, populations
from .gate import QubitBasis, build_qubit_basis, run_gate, remove_single_qubit_phases, average_fidelity
from .sweep import Axis, SweepSpec, run_sweep

__version__ = "0.1.0"
