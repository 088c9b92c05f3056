"""Strang split-operator propagation of the two-atom wavefunction under a tilt schedule.

Kinetic factors are applied exactly in the sine basis of the Dirichlet cell;
the single-particle potentials and the interaction kernel are diagonal in
position. Each segment of the schedule is integrated with steps of ``dt``
and, if needed, one final shorter step; the Hamiltonian is evaluated at the
midpoint of every step.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy import fft as sfft

from .errors import ConfigurationError, DimensionError, NumericalBlowupError, StepSizeError
from .grid import Grid2D, WaveFunction
from .interaction import ContactModel, check_resolution, interaction_matrix
from .potential import LatticeParams, double_well

PHASE_PER_STEP = 0.1
BLOWUP_CHECK_STRIDE = 256


@dataclass(frozen=True)
class TiltSchedule:
    """Linear ramp - hold - linear ramp of delta_theta; times in hbar/E_R."""

    dtheta_initial: float
    dtheta_hold: float
    ramp_time: float
    hold_time: float
    shape: str = "linear"

    def __post_init__(self):
        if self.ramp_time < 0 or self.hold_time < 0:
            raise ConfigurationError("ramp and hold times must be non-negative")
        if self.shape != "linear":
            raise ConfigurationError(f"unsupported ramp shape {self.shape!r}")

    @classmethod
    def from_ms(cls, units, dtheta_initial, dtheta_hold, ramp_ms, hold_ms):
        return cls(dtheta_initial, dtheta_hold, units.ms_to_tau(ramp_ms), units.ms_to_tau(hold_ms))

    @property
    def duration(self):
        return 2.0 * self.ramp_time + self.hold_time

    def segments(self):
        """(duration, tilt function of local time) for ramp down, hold, ramp up."""
        a, b, tr = self.dtheta_initial, self.dtheta_hold, self.ramp_time

        def down(s):
            return a + (b - a) * s / tr

        def up(s):
            return b + (a - b) * s / tr

        return [(tr, down), (self.hold_time, lambda s: b), (tr, up)]

    def __call__(self, t):
        tr, th = self.ramp_time, self.hold_time
        if t <= 0:
            return self.dtheta_initial
        if t < tr:
            return self.dtheta_initial + (self.dtheta_hold - self.dtheta_initial) * t / tr
        if t <= tr + th:
            return self.dtheta_hold
        if t < self.duration:
            return self.dtheta_hold + (self.dtheta_initial - self.dtheta_hold) * (t - tr - th) / tr
        return self.dtheta_initial


def segment_steps(duration, dt):
    """Step sizes covering ``duration``: full steps of dt plus a trailing remainder."""
    if duration <= 0:
        return []
    n = int(math.floor(duration / dt * (1.0 + 1e-12)))
    steps = [dt] * n
    rest = duration - n * dt
    if rest > 1e-12 * max(duration, 1.0):
        steps.append(rest)
    return steps


class SplitOperator:
    """Strang stepper for a fixed grid, base lattice and interaction model.

    Works on stacks of free-node arrays of shape (..., n, n).
    """

    def __init__(self, grid: Grid2D, base: LatticeParams, model: ContactModel):
        if grid.axis.boundary != "dirichlet":
            raise DimensionError("propagation uses the Dirichlet cell grid")
        check_resolution(model, grid.spacing)
        self.grid = grid
        self.base = base
        self.model = model
        ax = grid.axis
        self.x = ax.positions[ax.interior]
        k2 = ax.kinetic_eigenvalues()
        self.kinetic = k2[:, None] + k2[None, :]
        self.interaction = interaction_matrix(self.x, model, grid.spacing)
        self._kin_cache = {}
        self._pot_cache = {}
        self._int_cache = {}

    def potential(self, dtheta):
        u = double_well(self.x, self.base.with_tilt(dtheta))
        return u[:, None] + u[None, :] + self.interaction

    def potential_spread(self, dthetas):
        spreads = [np.ptp(self.potential(d)) for d in dthetas]
        return float(max(spreads))

    def default_dt(self, schedule: TiltSchedule):
        """Largest dt with (max V - min V) * dt below PHASE_PER_STEP over the schedule tilts."""
        spread = self.potential_spread([schedule.dtheta_initial, schedule.dtheta_hold])
        return PHASE_PER_STEP / spread

    def _kinetic_factor(self, dt):
        f = self._kin_cache.get(dt)
        if f is None:
            f = np.exp(-1j * dt * self.kinetic)
            if len(self._kin_cache) > 8:
                self._kin_cache.clear()
            self._kin_cache[dt] = f
        return f

    def _potential_half(self, dtheta, dt):
        key = (dtheta, dt)
        f = self._pot_cache.get(key)
        if f is None:
            g = self._int_cache.get(dt)
            if g is None:
                g = np.exp(-0.5j * dt * self.interaction)
                if len(self._int_cache) > 8:
                    self._int_cache.clear()
                self._int_cache[dt] = g
            u = double_well(self.x, self.base.with_tilt(dtheta))
            e1 = np.exp(-0.5j * dt * u)
            f = e1[:, None] * e1[None, :] * g
            if len(self._pot_cache) > 16:
                self._pot_cache.clear()
            self._pot_cache[key] = f
        return f

    def step(self, a, dtheta, dt):
        """One Strang step exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2) on array ``a``."""
        if not dt > 0:
            raise StepSizeError(f"dt must be positive, got {dt}")
        hv = self._potential_half(dtheta, dt)
        a = hv * a
        a = sfft.idstn(self._kinetic_factor(dt) * sfft.dstn(a, type=1, norm="ortho", axes=(-2, -1)),
                       type=1, norm="ortho", axes=(-2, -1))
        return hv * a

    def run_segment(self, a, duration, tilt, dt, t0=0.0, observer=None, stride=1, counter=None):
        """Integrate one schedule segment; ``tilt`` maps local time to delta_theta."""
        s = 0.0
        counter = counter if counter is not None else [0]
        last_good = a
        for h in segment_steps(duration, dt):
            a = self.step(a, tilt(s + 0.5 * h), h)
            s += h
            counter[0] += 1
            if counter[0] % BLOWUP_CHECK_STRIDE == 0:
                if not np.all(np.isfinite(a)):
                    raise NumericalBlowupError(f"non-finite amplitudes after step {counter[0]}",
                                               last_good=last_good, step=counter[0])
                last_good = a
            if observer is not None and counter[0] % stride == 0:
                observer(t0 + s, tilt(s), a)
        if not np.all(np.isfinite(a)):
            raise NumericalBlowupError(f"non-finite amplitudes at end of segment (step {counter[0]})",
                                       last_good=last_good, step=counter[0])
        return a

    def run_schedule(self, a, schedule: TiltSchedule, dt, observer=None, stride=1):
        t0 = 0.0
        counter = [0]
        for duration, tilt in schedule.segments():
            a = self.run_segment(a, duration, tilt, dt, t0, observer, stride, counter)
            t0 += duration
        return a


def strang_step(psi: WaveFunction, p_at_t: LatticeParams, model: ContactModel, dt,
                local_error_tol=1e-6) -> WaveFunction:
    """Single Strang step of ``psi`` with the Hamiltonian frozen at ``p_at_t``.

    The local error is estimated by comparing with two half steps; a step whose
    estimate exceeds ``local_error_tol`` is rejected.
    """
    if psi.ndim != 2:
        raise DimensionError("strang_step acts on two-particle wavefunctions")
    op = SplitOperator(psi.grid, p_at_t.with_tilt(0.0), model)
    d = p_at_t.delta_theta
    a = psi.free()
    full = op.step(a, d, dt)
    if local_error_tol is not None:
        half = op.step(op.step(a, d, 0.5 * dt), d, 0.5 * dt)
        err = np.sqrt(np.sum(np.abs(full - half) ** 2) * psi.weight)
        if err > local_error_tol:
            raise StepSizeError(f"local error estimate {err:.2e} exceeds {local_error_tol:.1e}; reduce dt")
    return WaveFunction.from_free(psi.grid, full, psi.time + dt)


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    delta_theta: list = field(default_factory=list)
    populations: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    edge_density: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def to_csv(self, fh, units=None):
        w = csv.writer(fh)
        w.writerow(["time_ms" if units else "time_tau", "pop_00", "pop_01", "pop_10", "pop_11", "norm",
                    "delta_theta"])
        for t, pops, nrm, d in zip(self.times, self.populations, self.norms, self.delta_theta):
            tt = units.tau_to_ms(t) if units else t
            w.writerow([repr(float(tt))] + [repr(float(x)) for x in pops] + [repr(float(nrm)), repr(float(d))])


def populations(psi: WaveFunction, basis) -> np.ndarray:
    """|<basis_i|psi>|^2 for the four qubit states (00, 01, 10, 11)."""
    if psi.grid != basis.grid:
        raise DimensionError("wavefunction and basis live on different grids")
    return _populations_free(psi.free(), basis.free_stack(), psi.weight)


def _populations_free(a, stack, weight):
    amp = np.tensordot(stack.conj(), a, axes=([1, 2], [0, 1])) * weight
    return np.abs(amp) ** 2


def _edge_density(a, weight, width=2):
    m = np.zeros(a.shape, bool)
    m[:width, :] = m[-width:, :] = True
    m[:, :width] = m[:, -width:] = True
    return float(np.sum(np.abs(a[m]) ** 2) * weight)


def evolve(psi0: WaveFunction, schedule: TiltSchedule, base: LatticeParams, model: ContactModel, dt=None,
           basis=None, stride=100, snapshot_stride=None, propagator=None):
    """Propagate ``psi0`` through ``schedule``.

    Observers record qubit populations (when ``basis`` is given), the norm and
    the density on the outermost grid lines every ``stride`` steps.
    Returns ``(psi_final, EvolutionTrace)``.
    """
    if psi0.ndim != 2:
        raise DimensionError("evolve acts on two-particle wavefunctions")
    if abs(psi0.norm() - 1.0) > 1e-8:
        raise ConfigurationError(f"initial state must be normalised (norm {psi0.norm():.12f})")
    op = propagator or SplitOperator(psi0.grid, base.with_tilt(0.0), model)
    dt = dt or op.default_dt(schedule)
    w = psi0.weight
    trace = EvolutionTrace()
    stack = basis.free_stack() if basis is not None else None

    def observe(t, d, a):
        trace.times.append(t)
        trace.delta_theta.append(d)
        trace.norms.append(float(np.sqrt(np.sum(np.abs(a) ** 2) * w)))
        trace.populations.append(_populations_free(a, stack, w) if stack is not None else np.full(4, np.nan))
        trace.edge_density.append(_edge_density(a, w))
        if snapshot_stride and len(trace.times) % max(1, snapshot_stride // stride) == 0:
            trace.snapshots.append(WaveFunction.from_free(psi0.grid, a, t))

    a0 = psi0.free().astype(complex)
    observe(0.0, schedule(0.0), a0)
    a = op.run_schedule(a0, schedule, dt, observer=observe, stride=stride)
    if trace.times[-1] != schedule.duration:
        observe(schedule.duration, schedule(schedule.duration), a)
    return WaveFunction.from_free(psi0.grid, a, psi0.time + schedule.duration), trace
