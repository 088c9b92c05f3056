"""Command-line entry point: ``dwgate <command> [--config PATH] [--out DIR] [--workers N] [--seed N]``."""

import argparse
from importlib import resources
import json
import math
import os
import sys

import numpy as np

from . import errors
from .config import load_config
from .gate import build_qubit_basis, gate_grid, run_gate
from .grid import Grid2D
from .interaction import ContactModel, calibrate, load_model
from .io import atomic_write, atomic_write_with
from .potential import LatticeParams, double_well, well_geometry
from .propagator import SplitOperator, TiltSchedule, evolve
from .single_particle import cell_grid, sp_eigenstates, tunnel_splitting, write_levels_csv
from .sweep import Axis, SweepSpec, run_sweep
from . import plotting
from . import two_particle as tp
from .units import PhysicalParams, g1d_dimensionless, make_unit_system, transverse_frequencies

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PROTOCOL = 4

COMMANDS = ("potential", "sp-levels", "spectrum", "calibrate", "gate", "trace", "sweep")
DEFAULT_MODEL = "default_model.json"
# product pairs whose avoided crossings the spectrum command reports
CROSSING_PAIRS = (("1_L0_R", "0_R1_R"), ("1_L1_R", "1_R1_R"))


class Context:
    """Objects derived from a resolved config, shared by the commands."""

    def __init__(self, cfg, out, workers, seed):
        self.cfg, self.out, self.workers, self.seed = cfg, out, workers, seed
        ph = cfg["physical"]
        self.physical = PhysicalParams(ph["wavelength_nm"], ph["scattering_length_nm"], ph["mass_u"],
                                       ph["V0_Er"], ph["V3_Er"], cfg["lattice"]["Zf"])
        self.units = make_unit_system(self.physical)
        self.lattice = LatticeParams(V0=ph["V0_Er"], Zf=cfg["lattice"]["Zf"], V3=ph["V3_Er"])
        g = cfg["interaction"]["g1d_Er_over_k"]
        self.strength = g1d_dimensionless(self.physical) if g is None else g
        s = cfg["schedule"]
        self.schedule = TiltSchedule.from_ms(self.units, s["dtheta_initial_mrad"] * 1e-3,
                                             s["dtheta_hold_mrad"] * 1e-3, s["ramp_time_ms"], s["hold_time_ms"])
        self.notes = []

    @property
    def gate_grid(self):
        return gate_grid(self.lattice, self.schedule.dtheta_initial, self.cfg["grid"]["n_gate"])

    def path(self, name):
        return os.path.join(self.out, name)

    def header(self):
        return self.cfg.comment_block()

    def write_csv(self, name, writer):
        def w(fh):
            fh.write(self.header())
            writer(fh)
        return atomic_write_with(self.path(name), w)

    def write_json(self, name, result):
        doc = {"config": self.cfg.to_dict(), "config_ini": self.cfg.to_ini(), "result": result}
        return atomic_write(self.path(name), json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")

    def figure(self, kind, csv_name, stem):
        """Emit the standalone plot script; render the PNG when figures are enabled."""
        atomic_write(self.path(f"plot_{stem}.py"),
                     plotting.plot_script(kind, csv_name, f"{stem}.png", header=self.header()))
        if self.cfg["output"]["figures"]:
            plotting.render(kind, self.path(csv_name), self.path(f"{stem}.png"),
                            metadata={"Description": self.cfg.to_ini()})

    # interaction model --------------------------------------------------
    def model(self, grid: Grid2D):
        i = self.cfg["interaction"]
        if i["kind"] == "grid_delta":
            return ContactModel.grid_delta(self.strength)
        if i["sigma1_x"] is not None:
            if i["kind"] == "gaussian":
                return ContactModel.gaussian(self.strength, i["sigma1_x"])
            return ContactModel.double_gaussian(self.strength, i["weight1"], i["sigma1_x"], i["sigma2_x"])
        if i["model_file"]:
            m = load_model(i["model_file"])
            self._check_loaded(m, i["model_file"])
            return m
        res = resources.files("dwgate").joinpath("data", DEFAULT_MODEL)
        if res.is_file():
            bundled = ContactModel.from_dict(json.loads(res.read_text()))
            if self._matches(bundled, grid):
                return bundled
        self.notes.append("no matching calibrated model; calibrating now")
        return self.calibrated(grid)

    def _check_loaded(self, m, source):
        if m.kind != self.cfg["interaction"]["kind"]:
            raise errors.ConfigurationError(f"{source}: model kind {m.kind} differs from [interaction] kind")
        if not math.isclose(m.strength, self.strength, rel_tol=1e-9):
            raise errors.ConfigurationError(f"{source}: model strength {m.strength} differs from the "
                                            f"configured coupling {self.strength}")

    def _matches(self, m, grid):
        c = m.calibration
        lat = c.get("lattice", {})
        ax = c.get("grid", {}).get("axis", {})
        spacing = (ax["x_hi"] - ax["x_lo"]) / ax["n_points"] if ax else math.nan
        return (m.kind == self.cfg["interaction"]["kind"]
                and math.isclose(m.strength, self.strength, rel_tol=1e-9)
                and math.isclose(spacing, grid.spacing, rel_tol=1e-2)
                and lat.get("V0") == self.lattice.V0 and lat.get("Zf") == self.lattice.Zf
                and math.isclose(c.get("target_tilt", -1), self.cfg["calibration"]["target_tilt_mrad"] * 1e-3))

    def calibrated(self, grid):
        c = self.cfg["calibration"]
        return calibrate(self.cfg["interaction"]["kind"], self.lattice, grid=grid, strength=self.strength,
                         seed=self.seed, target_tilt=c["target_tilt_mrad"] * 1e-3,
                         max_evaluations=c["max_evaluations"])

    @property
    def dt(self):
        return self.cfg["propagation"]["dt_tau"]


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _tilts(section):
    return np.linspace(section["dtheta_min_mrad"], section["dtheta_max_mrad"], section["n_samples"]) * 1e-3


# commands ---------------------------------------------------------------

def cmd_potential(ctx):
    p = ctx.lattice.with_tilt(ctx.cfg["lattice"]["dtheta_mrad"] * 1e-3)
    geom = well_geometry(p)
    x = np.linspace(geom.domain_lo, geom.domain_hi, ctx.cfg["potential"]["n_samples"])
    u = double_well(x, p)
    ctx.write_csv("potential.csv", lambda fh: fh.write("x,U_Er\n" + "".join(
        f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, u))))
    ctx.write_json("geometry.json", {
        "domain": [geom.domain_lo, geom.domain_hi], "barrier_height_Er": geom.barrier_height,
        "U_max_Er": float(u.max()), "U_min_Er": float(u.min()),
        "hbar_omega_transverse_Er": transverse_frequencies(ctx.physical), "g1d_Er_over_k": ctx.strength})
    ctx.figure("potential", "potential.csv", "potential")
    return f"potential: U in [{u.min():.3f}, {u.max():.3f}] E_R, barrier {geom.barrier_height:.3f} E_R"


def cmd_sp_levels(ctx):
    sec = ctx.cfg["sp_levels"]
    n1 = ctx.cfg["grid"]["n_1d"]
    rows = []
    for d in _tilts(sec):
        p = ctx.lattice.with_tilt(d)
        for s in sp_eigenstates(p, sec["n_states"], cell_grid(p, n1)):
            rows.append((d, s.index, s.energy, s.label, s.side_expectation))
    p0 = ctx.lattice.with_tilt(0.0)
    two_j = tunnel_splitting(p0, 1, cell_grid(p0, n1))
    ctx.write_csv("levels.csv", lambda fh: write_levels_csv(fh, rows))
    ctx.write_json("levels.json", {"two_J_upper_Er": two_j,
                                   "two_J_lower_Er": tunnel_splitting(p0, 0, cell_grid(p0, n1))})
    ctx.figure("levels", "levels.csv", "levels")
    return f"sp-levels: {len(rows)} levels, 2J(upper doublet, zero tilt) = {two_j:.4f} E_R"


def cmd_spectrum(ctx):
    sec = ctx.cfg["spectrum"]
    d = _tilts(sec)
    p = ctx.lattice
    grid = tp.default_grid(p.with_tilt(0.5 * (d[0] + d[-1])), ctx.cfg["grid"]["n_spectrum"])
    model = ctx.model(grid)
    spec = tp.spectrum_vs_tilt(p, model, (d[0], d[-1]), len(d), sec["n_levels"], grid=grid)
    crossings = [c.__dict__ for c in tp.local_gap_minima(spec)]
    pairs = {}
    for a, b in CROSSING_PAIRS:
        try:
            pairs[f"{a}|{b}"] = tp.composition_crossing(spec, a, b).__dict__
        except errors.ExtractionError as exc:
            pairs[f"{a}|{b}"] = {"error": str(exc)}
    ctx.write_csv("spectrum.csv", spec.to_csv)
    ctx.write_json("spectrum.json", {"tracks": sorted(set(spec.track_labels[t] for t in spec.track_of_level.ravel())),
                                     "gap_minima": crossings, "pair_crossings": pairs,
                                     "metadata": spec.metadata,
                                     "ambiguous_assignments": int(spec.ambiguous.sum())})
    ctx.figure("spectrum", "spectrum.csv", "spectrum")
    n_tracks = len(set(spec.track_of_level.ravel()))
    return f"spectrum: {len(d)} tilts x {sec['n_levels']} levels, {n_tracks} tracks, {len(crossings)} gap minima"


def cmd_calibrate(ctx):
    if ctx.cfg["interaction"]["kind"] == "grid_delta":
        raise errors.ConfigurationError("[interaction] kind grid_delta needs no calibration")
    grid = ctx.gate_grid
    try:
        model = ctx.calibrated(grid)
    except errors.CalibrationFailedError as exc:
        if exc.best_model is not None:
            ctx.write_json("model_failed.json", exc.best_model.to_dict())
        raise
    doc = model.to_dict()
    doc["param_hash"] = model.param_hash()
    ctx.write_json("model.json", doc)
    r = model.calibration["residuals"]
    return (f"calibrate: sigmas={model.sigmas} weights={model.weights} "
            f"residuals U00={r['U00']:.2e} U11={r['U11']:.2e} hash={model.param_hash()}")


def cmd_gate(ctx):
    grid = ctx.gate_grid
    model = ctx.model(grid)
    result = run_gate(ctx.lattice, model, ctx.schedule, grid=grid, dt=ctx.dt,
                      check_dt=ctx.cfg["propagation"]["check_dt"])
    doc = result.to_dict()
    doc["schedule_ms"] = {"ramp_time_ms": ctx.units.tau_to_ms(ctx.schedule.ramp_time),
                          "hold_time_ms": ctx.units.tau_to_ms(ctx.schedule.hold_time)}
    ctx.write_json("gate.json", doc)
    return (f"gate: phi = {result.phase_over_pi:.4f} pi, F = {result.fidelity:.5f}, "
            f"max leakage = {float(np.max(result.leakage)):.2e}")


def cmd_trace(ctx):
    grid = ctx.gate_grid
    model = ctx.model(grid)
    basis = build_qubit_basis(ctx.lattice, ctx.schedule.dtheta_initial, grid)
    q = ctx.cfg["propagation"]["trace_initial"]
    psi0 = basis.states[basis.labels.index(q)]
    op = SplitOperator(grid, ctx.lattice.with_tilt(0.0), model)
    final, trace = evolve(psi0, ctx.schedule, ctx.lattice, model, dt=ctx.dt, basis=basis,
                          stride=ctx.cfg["propagation"]["trace_stride"], propagator=op)
    ctx.write_csv("trace.csv", lambda fh: trace.to_csv(fh, ctx.units))
    ctx.figure("trace", "trace.csv", "trace")
    pops = " ".join(f"{lab}:{v:.4f}" for lab, v in zip(basis.labels, trace.populations[-1]))
    drift = max(abs(n - 1.0) for n in trace.norms)
    return f"trace: initial {q}, final populations {pops}, max norm drift {drift:.1e}"


def cmd_sweep(ctx):
    sw = ctx.cfg["sweep"]
    s = ctx.cfg["schedule"]
    grid = ctx.gate_grid
    model = ctx.model(grid)
    spec = SweepSpec(
        axes=(Axis(sw["axis1"], sw["axis1_min"], sw["axis1_max"], sw["axis1_n"]),
              Axis(sw["axis2"], sw["axis2_min"], sw["axis2_max"], sw["axis2_n"])),
        units=ctx.units, model=model, lattice=ctx.lattice,
        dtheta_initial_mrad=s["dtheta_initial_mrad"], dtheta_hold_mrad=sw["dtheta_hold_mrad"],
        ramp_time_ms=s["ramp_time_ms"], hold_time_ms=s["hold_time_ms"],
        n_points=ctx.cfg["grid"]["n_gate"], dt=ctx.dt)
    result = run_sweep(spec, workers=ctx.workers)
    ctx.write_csv("sweep.csv", result.to_csv)
    ctx.figure("sweep", "sweep.csv", "sweep")
    best = result.best()
    failed = len(result.errors)
    if best is None:
        return f"sweep: all {result.fidelity.size} points failed"
    return (f"sweep: {result.fidelity.size} points, {failed} failed, best F = {best['fidelity']:.5f} at "
            f"{sw['axis1']}={best[sw['axis1']]:.4g}, {sw['axis2']}={best[sw['axis2']]:.4g}")


HANDLERS = {"potential": cmd_potential, "sp-levels": cmd_sp_levels, "spectrum": cmd_spectrum,
            "calibrate": cmd_calibrate, "gate": cmd_gate, "trace": cmd_trace, "sweep": cmd_sweep}


def build_parser():
    ap = argparse.ArgumentParser(prog="dwgate", description="Double-well tunnelling phase gate simulations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI run configuration (defaults when omitted)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    ap.add_argument("--seed", type=int, default=0, help="calibration optimiser seed")
    return ap


def exit_code_for(exc):
    if isinstance(exc, errors.ProtocolError):
        return EXIT_PROTOCOL
    if isinstance(exc, errors.NumericalError):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise errors.ConfigurationError("--workers must be >= 1")
        cfg = load_config(args.config)
        ctx = Context(cfg, args.out, args.workers, args.seed)
        summary = HANDLERS[args.command](ctx)
    except errors.DWGateError as exc:
        kind = type(exc).__name__
        print(f"dwgate {args.command}: {kind}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    for note in ctx.notes:
        print(f"note: {note}", file=sys.stderr)
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
