"""Regularised one-dimensional contact interaction g * delta(x1 - x2).

The kernel is normalised to unit integral over the relative coordinate and
scaled by the dimensionless strength ``g = k g_1D / E_R``.
"""

from dataclasses import dataclass, field, asdict
import hashlib
import json
import math

import numpy as np
from scipy.optimize import minimize

from .errors import CalibrationFailedError, ConfigurationError, UnderResolvedKernelError

KINDS = ("grid_delta", "gaussian", "double_gaussian")
SIGMA_MAX = 0.2
RESIDUAL_TOL = 1e-2


@dataclass(frozen=True)
class ContactModel:
    kind: str
    strength: float
    sigmas: tuple = ()
    weights: tuple = ()
    calibration: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown interaction kind {self.kind!r}")
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        expected = {"grid_delta": 0, "gaussian": 1, "double_gaussian": 2}[self.kind]
        if len(self.sigmas) != expected or len(self.weights) != expected:
            raise ConfigurationError(f"{self.kind} needs {expected} widths and weights")
        if any(s <= 0 for s in self.sigmas):
            raise ConfigurationError("Gaussian widths must be positive")
        if expected and abs(sum(self.weights) - 1.0) > 1e-12:
            raise ConfigurationError("Gaussian weights must sum to one")

    @classmethod
    def grid_delta(cls, strength):
        return cls("grid_delta", strength)

    @classmethod
    def gaussian(cls, strength, sigma):
        return cls("gaussian", strength, (sigma,), (1.0,))

    @classmethod
    def double_gaussian(cls, strength, w1, sigma1, sigma2, calibration=None):
        return cls("double_gaussian", strength, (sigma1, sigma2), (w1, 1.0 - w1), calibration or {})

    def with_strength(self, strength):
        return ContactModel(self.kind, strength, self.sigmas, self.weights, self.calibration)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["strength"], tuple(d.get("sigmas", ())), tuple(d.get("weights", ())),
                   d.get("calibration", {}))

    def param_hash(self):
        """Short digest of the parameters that affect the Hamiltonian."""
        key = json.dumps([self.kind, repr(self.strength), [repr(s) for s in self.sigmas],
                          [repr(w) for w in self.weights]])
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def save_model(path, model: ContactModel, extra=None):
    doc = model.to_dict()
    doc["param_hash"] = model.param_hash()
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def load_model(path) -> ContactModel:
    """Read a model saved by :func:`save_model` or the ``result`` of a CLI calibration."""
    with open(path) as fh:
        doc = json.load(fh)
    return ContactModel.from_dict(doc.get("result", doc))


def check_resolution(model: ContactModel, spacing):
    if model.sigmas and min(model.sigmas) < 2.0 * spacing:
        raise UnderResolvedKernelError(
            f"Gaussian width {min(model.sigmas):.4g} is below twice the grid spacing {spacing:.4g}")


def _gauss(r, s):
    return np.exp(-0.5 * (r / s) ** 2) / (math.sqrt(2.0 * math.pi) * s)


def interaction_kernel(r, model: ContactModel, spacing=None):
    """Unit-normalised kernel K(r); the interaction is ``model.strength * K(x1 - x2)``.

    ``spacing`` is the grid spacing; required for ``grid_delta`` (a one-cell
    spike of height 1/dx) and used to reject under-resolved Gaussians.
    """
    r = np.asarray(r, float)
    if model.kind == "grid_delta":
        if spacing is None:
            raise ConfigurationError("grid_delta kernel needs the grid spacing")
        return np.where(np.abs(r) < 0.5 * spacing, 1.0 / spacing, 0.0)
    if spacing is not None:
        check_resolution(model, spacing)
    return sum(w * _gauss(r, s) for w, s in zip(model.weights, model.sigmas))


def interaction_matrix(x, model: ContactModel, spacing):
    """strength * K(x_i - x_j) on the node positions ``x``."""
    r = x[:, None] - x[None, :]
    return model.strength * interaction_kernel(r, model, spacing)


def sigma_bounds(spacing):
    # margin keeps the squashed width above the resolution limit after rounding
    return 2.0 * spacing * (1.0 + 1e-9), SIGMA_MAX


def _model_from_vector(kind, strength, v, bounds):
    lo, hi = bounds

    def squash(t):
        return lo + (hi - lo) * 0.5 * (1.0 + math.tanh(t))

    if kind == "gaussian":
        return ContactModel.gaussian(strength, squash(v[0]))
    s1, s2 = sorted((squash(v[0]), squash(v[1])))
    if s2 - s1 < 1e-6:
        s2 = s1 + 1e-6
    return ContactModel.double_gaussian(strength, float(v[2]), s1, s2)


def _unsquash(s, bounds):
    lo, hi = bounds
    t = np.clip(2.0 * (s - lo) / (hi - lo) - 1.0, -0.999999, 0.999999)
    return math.atanh(t)


def calibrate(kind, params, targets=None, grid=None, reference_grid=None, strength=1.0,
              seed=0, target_tilt=0.1, max_evaluations=200):
    """Fit a Gaussian kernel so that the interaction energies match ``targets``.

    ``targets`` maps ``"U00"``/``"U11"`` (and optionally ``"U01"``) to energies
    in E_R. When omitted they are computed with the grid delta on
    ``reference_grid`` at ``target_tilt``. The fit runs on ``grid`` (the grid
    the model will be used on). Returns the calibrated :class:`ContactModel`.
    """
    from . import two_particle as tp

    if kind not in ("gaussian", "double_gaussian"):
        raise ConfigurationError("only Gaussian kinds are calibrated")
    p = params.with_tilt(target_tilt)
    grid = grid or tp.default_grid(params, tp.DEFAULT_N_DENSE * 2)
    if strength == 0.0:
        model = (ContactModel.gaussian(0.0, SIGMA_MAX) if kind == "gaussian"
                 else ContactModel.double_gaussian(0.0, 1.0, 0.5 * SIGMA_MAX, SIGMA_MAX))
        record = {"targets": {"U00": 0.0, "U11": 0.0}, "achieved": {"U00": 0.0, "U11": 0.0},
                  "residuals": {"U00": 0.0, "U11": 0.0}, "grid": grid.spec(), "note": "non-interacting"}
        return ContactModel(model.kind, 0.0, model.sigmas, model.weights, record)
    if targets is None:
        ref = reference_grid or grid
        u = tp.interaction_energies(p, ContactModel.grid_delta(strength), grid=ref, delta_theta=None)
        targets = {"U00": u.U00, "U11": u.U11}
    names = sorted(targets)
    bounds = sigma_bounds(grid.axis.spacing)
    if bounds[0] >= bounds[1]:
        raise UnderResolvedKernelError(f"grid spacing {grid.axis.spacing:.4g} leaves no admissible width "
                                       f"between {bounds[0]:.4g} and {bounds[1]:.4g}; refine the grid")

    cache = {}

    def achieved(model):
        u = tp.interaction_energies(p, model, grid=grid, delta_theta=None)
        return {"U00": u.U00, "U01": u.U01, "U11": u.U11}

    def objective(v):
        key = tuple(np.round(v, 12))
        if key not in cache:
            model = _model_from_vector(kind, strength, v, bounds)
            a = achieved(model)
            cache[key] = sum((a[n] - targets[n]) ** 2 for n in names), model, a
        return cache[key][0]

    if kind == "gaussian":
        x0 = np.array([_unsquash(bounds[0] * 1.05, bounds)])
    else:
        s1, s2 = bounds[0] * 1.05, min(bounds[0] * 2.0, SIGMA_MAX * 0.98)
        # weights that cancel the kernel's second moment
        w1 = s2**2 / (s2**2 - s1**2)
        x0 = np.array([_unsquash(s1, bounds), _unsquash(s2, bounds), w1])
    rng = np.random.default_rng(seed)
    simplex = [x0] + [x0 + np.eye(len(x0))[i] * (0.3 + 0.05 * rng.random()) for i in range(len(x0))]
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"initial_simplex": np.array(simplex), "maxfev": max_evaluations,
                            "xatol": 1e-6, "fatol": 1e-12})
    _, best, a = min(cache.values(), key=lambda t: t[0])
    residuals = {n: a[n] - targets[n] for n in names}
    record = {"targets": dict(targets), "achieved": a, "residuals": residuals,
              "grid": grid.spec(), "lattice": {"V0": params.V0, "Zf": params.Zf}, "target_tilt": target_tilt,
              "seed": seed,
              "evaluations": len(cache), "optimizer_success": bool(res.success)}
    model = ContactModel(best.kind, best.strength, best.sigmas, best.weights, record)
    if max(abs(r) for r in residuals.values()) >= RESIDUAL_TOL:
        raise CalibrationFailedError(f"calibration residuals {residuals} exceed {RESIDUAL_TOL} E_R",
                                     best_model=model, residuals=residuals)
    return model
