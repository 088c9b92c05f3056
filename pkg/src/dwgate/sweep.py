"""Deterministic two-axis scans of gate fidelity over schedule and lattice parameters.

Points are grouped into rows of the first axis and evaluated independently;
results are gathered by index, so the table does not depend on the worker
count. When the second axis is the hold time, a row shares one propagation:
the hold segment is advanced step by step and each requested hold time is
branched off into its own ramp-up. This uses exactly the step sequence of a
standalone gate run, so the two agree bit for bit.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
import csv
import io
import json
import math

import numpy as np

from .errors import ConfigurationError, DWGateError
from .gate import build_qubit_basis, gate_from_matrix, gate_grid, project, run_gate
from .interaction import ContactModel
from .potential import LatticeParams
from .propagator import SplitOperator, TiltSchedule, segment_steps
from .units import UnitSystem

# axis name -> (owner, attribute)
AXES = {
    "ramp_time_ms": ("schedule", "ramp_time_ms"),
    "hold_time_ms": ("schedule", "hold_time_ms"),
    "dtheta_hold_mrad": ("schedule", "dtheta_hold_mrad"),
    "dtheta_initial_mrad": ("schedule", "dtheta_initial_mrad"),
    "V0_Er": ("lattice", "V0"),
    "Zf": ("lattice", "Zf"),
}
MAX_ADJACENT_JUMP = 0.3


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if self.name not in AXES:
            raise ConfigurationError(f"unknown sweep axis {self.name!r}; choose from {sorted(AXES)}")
        if self.n_points < 1 or (self.n_points == 1 and self.lo != self.hi):
            raise ConfigurationError(f"axis {self.name}: need n_points >= 2 (or a single point with min == max)")

    @property
    def values(self):
        return np.linspace(self.lo, self.hi, self.n_points)


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    units: UnitSystem
    model: ContactModel
    lattice: LatticeParams = LatticeParams()
    dtheta_initial_mrad: float = 100.0
    dtheta_hold_mrad: float = 34.0
    ramp_time_ms: float = 0.12
    hold_time_ms: float = 1.46
    n_points: int = 128
    dt: float = None
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if len(self.axes) != 2:
            raise ConfigurationError("a sweep needs exactly two axes")
        if self.axes[0].name == self.axes[1].name:
            raise ConfigurationError("sweep axes must name distinct parameters")

    def point(self, i, j):
        """(LatticeParams, TiltSchedule) at grid indices (i, j)."""
        vals = {self.axes[0].name: self.axes[0].values[i], self.axes[1].name: self.axes[1].values[j]}
        lattice = self.lattice
        sched = {k: getattr(self, k) for k in ("dtheta_initial_mrad", "dtheta_hold_mrad", "ramp_time_ms",
                                                "hold_time_ms")}
        for name, v in vals.items():
            owner, attr = AXES[name]
            if owner == "lattice":
                lattice = replace(lattice, **{attr: float(v)})
            else:
                sched[attr] = float(v)
        schedule = TiltSchedule.from_ms(self.units, sched["dtheta_initial_mrad"] * 1e-3,
                                        sched["dtheta_hold_mrad"] * 1e-3, sched["ramp_time_ms"],
                                        sched["hold_time_ms"])
        return lattice, schedule

    def resolved_dt(self):
        """One dt for the whole sweep: the smallest default over the corner points."""
        if self.dt:
            return self.dt
        a, b = self.axes
        dts = []
        for i in {0, a.n_points - 1}:
            for j in {0, b.n_points - 1}:
                lattice, schedule = self.point(i, j)
                grid = gate_grid(lattice, schedule.dtheta_initial, self.n_points)
                dts.append(SplitOperator(grid, lattice.with_tilt(0.0), self.model).default_dt(schedule))
        return min(dts)

    def describe(self):
        d = {k: v for k, v in asdict(self).items() if k not in ("units", "model", "metadata", "axes")}
        d["axes"] = [asdict(a) for a in self.axes]
        d["model"] = self.model.to_dict()
        d["model_hash"] = self.model.param_hash()
        d["time_unit_s"] = self.units.time_unit_s
        d.update(self.metadata)
        return d


@dataclass
class SweepResult:
    spec: SweepSpec
    fidelity: np.ndarray
    phase: np.ndarray
    leakage: np.ndarray
    errors: dict
    dt: float

    @property
    def grid_values(self):
        return self.spec.axes[0].values, self.spec.axes[1].values

    def best(self):
        if np.all(np.isnan(self.fidelity)):
            return None
        i, j = np.unravel_index(np.nanargmax(self.fidelity), self.fidelity.shape)
        a, b = self.grid_values
        return {self.spec.axes[0].name: float(a[i]), self.spec.axes[1].name: float(b[j]),
                "fidelity": float(self.fidelity[i, j]), "phase_over_pi": float(self.phase[i, j] / math.pi)}

    def max_adjacent_jump(self):
        f = self.fidelity
        jumps = [np.nanmax(np.abs(np.diff(f, axis=k)), initial=0.0) for k in (0, 1) if f.shape[k] > 1]
        return float(max(jumps, default=0.0))

    def to_csv(self, fh, extra_metadata=None):
        meta = self.spec.describe()
        meta["dt_tau"] = self.dt
        meta.update(extra_metadata or {})
        for k in sorted(meta):
            fh.write(f"# {k} = {json.dumps(meta[k], sort_keys=True)}\n")
        a, b = self.spec.axes
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.name, b.name, "fidelity", "phase_rad", "phase_over_pi", "leakage_mean", "error"])
        av, bv = self.grid_values
        for i in range(a.n_points):
            for j in range(b.n_points):
                w.writerow([repr(float(av[i])), repr(float(bv[j])), repr(float(self.fidelity[i, j])),
                            repr(float(self.phase[i, j])), repr(float(self.phase[i, j] / math.pi)),
                            repr(float(self.leakage[i, j])), self.errors.get((i, j), "")])

    def csv_text(self, extra_metadata=None):
        buf = io.StringIO()
        self.to_csv(buf, extra_metadata)
        return buf.getvalue()


def _error_tag(exc):
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _row_branched(spec: SweepSpec, i, dt):
    """Row i when axis 2 is the hold time: one shared hold segment with branch points."""
    hold_ms = spec.axes[1].values
    lattice, first = spec.point(i, 0)
    grid = gate_grid(lattice, first.dtheta_initial, spec.n_points)
    basis = build_qubit_basis(lattice, first.dtheta_initial, grid)
    op = SplitOperator(grid, lattice.with_tilt(0.0), spec.model)
    stack = basis.free_stack().astype(complex)
    w = grid.spacing**2
    (tr, down), _, (_, up) = first.segments()
    a = op.run_segment(stack, tr, down, dt)
    hold = first.dtheta_hold
    done = 0
    order = np.argsort(hold_ms, kind="stable")
    results = [None] * len(hold_ms)
    for j in order:
        schedule = spec.point(i, j)[1]
        steps = segment_steps(schedule.hold_time, dt)
        n_full = sum(1 for h in steps if h == dt)
        while done < n_full:
            a = op.step(a, hold, dt)
            done += 1
        b = a
        for h in steps[n_full:]:
            b = op.step(b, hold, h)
        b = op.run_segment(b, tr, up, dt)
        raw = project(stack, b, w)
        results[j] = gate_from_matrix(raw, schedule)
    return results


def _row(args):
    spec, i, dt = args
    n = spec.axes[1].n_points
    rows = []
    if spec.axes[1].name == "hold_time_ms" and n > 1:
        try:
            return [(r.fidelity, r.controlled_phase, float(np.mean(r.leakage)), "")
                    for r in _row_branched(spec, i, dt)]
        except DWGateError:
            pass  # fall back to independent points to tag the failing ones
    for j in range(n):
        try:
            lattice, schedule = spec.point(i, j)
            r = run_gate(lattice, spec.model, schedule, gate_grid(lattice, schedule.dtheta_initial, spec.n_points),
                         dt=dt)
            rows.append((r.fidelity, r.controlled_phase, float(np.mean(r.leakage)), ""))
        except (DWGateError, ArithmeticError) as exc:
            rows.append((math.nan, math.nan, math.nan, _error_tag(exc)))
    return rows


def run_sweep(spec: SweepSpec, workers=1) -> SweepResult:
    dt = spec.resolved_dt()
    tasks = [(spec, i, dt) for i in range(spec.axes[0].n_points)]
    if workers <= 1 or len(tasks) == 1:
        rows = [_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, tasks))
    shape = (spec.axes[0].n_points, spec.axes[1].n_points)
    fid, phase, leak = (np.full(shape, math.nan) for _ in range(3))
    errors = {}
    for i, row in enumerate(rows):
        for j, (f, ph, lk, err) in enumerate(row):
            fid[i, j], phase[i, j], leak[i, j] = f, ph, lk
            if err:
                errors[(i, j)] = err
    return SweepResult(spec, fid, phase, leak, errors, dt)


def perturbation_scan(lattice, model, schedule: TiltSchedule, grid=None, dt=None, rel=0.05):
    """Fidelities with each of (t_r, t_h, delta_theta_h) scaled by 1 -/+ rel."""
    out = {}
    for name in ("ramp_time", "hold_time", "dtheta_hold"):
        for sign in (-1, 1):
            s = replace(schedule, **{name: getattr(schedule, name) * (1 + sign * rel)})
            out[(name, sign)] = run_gate(lattice, model, s, grid=grid, dt=dt).fidelity
    return out
