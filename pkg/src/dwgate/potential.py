"""Optical potential of the double-well lattice and its one-dimensional cut.

Coordinates are dimensionless (``x`` stands for kx), energies are in E_R.
The phases theta_xy, phi_xy and phi_z are fixed at zero; only theta_z varies.
The tilt is ``delta_theta = theta_z - pi/2``; positive values raise the left well.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import GeometryDegenerateError, InvalidParameterError

HALF_PI = 0.5 * math.pi
SAMPLES_PER_PERIOD = 1024


@dataclass(frozen=True)
class LatticeParams:
    V0: float = 40.0
    Zf: float = 0.11
    theta_z: float = HALF_PI
    V3: float = 40.0

    def __post_init__(self):
        if not self.V0 > 0:
            raise InvalidParameterError(f"V0 must be positive, got {self.V0}")
        if not 0.0 <= self.Zf < 1.0:
            raise InvalidParameterError(f"Zf must lie in [0, 1), got {self.Zf}")

    @classmethod
    def from_tilt(cls, delta_theta, V0=40.0, Zf=0.11, V3=40.0):
        return cls(V0=V0, Zf=Zf, theta_z=HALF_PI + delta_theta, V3=V3)

    @property
    def V1(self):
        return self.V0 * (1.0 - self.Zf)

    @property
    def V2(self):
        return self.V0 * self.Zf

    @property
    def delta_theta(self):
        return self.theta_z - HALF_PI

    def with_tilt(self, delta_theta):
        return replace(self, theta_z=HALF_PI + delta_theta)


def full_potential(x, y, z, p: LatticeParams):
    """V(x, y, z) of the two-dimensional lattice plus the z lattice."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    in_plane = -0.25 * p.V1 * (4.0 + 2.0 * np.cos(2.0 * y) + 2.0 * np.cos(2.0 * x))
    out_of_plane = -p.V2 * (np.cos(x - p.theta_z) + np.cos(y)) ** 2
    return in_plane + out_of_plane + p.V3 * np.sin(z) ** 2


def double_well(x, p: LatticeParams):
    """The cut U(x) = V(x, 0, 0)."""
    x = np.asarray(x, float)
    return -0.25 * p.V1 * (6.0 + 2.0 * np.cos(2.0 * x)) - p.V2 * (np.cos(x - p.theta_z) + 1.0) ** 2


def double_well_dx(x, p: LatticeParams):
    x = np.asarray(x, float)
    c = np.cos(x - p.theta_z)
    return p.V1 * np.sin(2.0 * x) + 2.0 * p.V2 * (c + 1.0) * np.sin(x - p.theta_z)


def double_well_dtheta(x, p: LatticeParams):
    """Partial derivative of U with respect to theta_z."""
    x = np.asarray(x, float)
    return -2.0 * p.V2 * (np.cos(x - p.theta_z) + 1.0) * np.sin(x - p.theta_z)


@dataclass(frozen=True)
class WellGeometry:
    left_min_pos: float
    right_min_pos: float
    barrier_pos: float
    left_min_energy: float
    right_min_energy: float
    barrier_energy: float
    tilt_energy: float
    domain_lo: float
    domain_hi: float

    @property
    def barrier_height(self):
        """Barrier energy above the deeper of the two minima."""
        return self.barrier_energy - min(self.left_min_energy, self.right_min_energy)


def _refine(p, lo, hi, maximum):
    sign = -1.0 if maximum else 1.0
    res = minimize_scalar(lambda t: sign * float(double_well(t, p)), bracket=(lo, 0.5 * (lo + hi), hi),
                          method="golden", tol=1e-10)
    x = float(res.x)
    # polish on U' so that |U'| is at round-off level
    step = 0.5 * (hi - lo)
    a, b = x - step, x + step
    fa, fb = double_well_dx(a, p), double_well_dx(b, p)
    if fa * fb < 0:
        x = brentq(lambda t: float(double_well_dx(t, p)), a, b, xtol=1e-14)
    return x


def _extrema(p):
    xs = np.linspace(-math.pi, math.pi, SAMPLES_PER_PERIOD, endpoint=False)
    u = double_well(xs, p)
    prev, nxt = np.roll(u, 1), np.roll(u, -1)
    h = xs[1] - xs[0]
    minima = [_refine(p, xs[i] - h, xs[i] + h, False) for i in np.flatnonzero((u < prev) & (u <= nxt))]
    maxima = [_refine(p, xs[i] - h, xs[i] + h, True) for i in np.flatnonzero((u > prev) & (u >= nxt))]
    return minima, maxima


def well_geometry(p: LatticeParams) -> WellGeometry:
    minima, maxima = _extrema(p)
    if len(minima) != 2 or len(maxima) != 2:
        raise GeometryDegenerateError(
            f"no double well for V0={p.V0}, Zf={p.Zf}, theta_z={p.theta_z}: "
            f"{len(minima)} minima and {len(maxima)} maxima per period")
    edge = max(maxima, key=lambda t: float(double_well(t, p)))
    barrier = min(maxima, key=lambda t: float(double_well(t, p)))
    lo = edge
    hi = edge + 2.0 * math.pi

    def unwrap(t):
        return lo + (t - lo) % (2.0 * math.pi)

    barrier = unwrap(barrier)
    mins = sorted(unwrap(t) for t in minima)
    if not mins[0] < barrier < mins[1]:
        raise GeometryDegenerateError(
            f"barrier does not separate the minima for theta_z={p.theta_z}")
    e_left, e_right, e_bar = (float(double_well(t, p)) for t in (mins[0], mins[1], barrier))
    if e_bar <= max(e_left, e_right):
        raise GeometryDegenerateError("barrier lies below a well minimum")
    return WellGeometry(
        left_min_pos=mins[0], right_min_pos=mins[1], barrier_pos=barrier,
        left_min_energy=e_left, right_min_energy=e_right, barrier_energy=e_bar,
        tilt_energy=e_left - e_right, domain_lo=lo, domain_hi=hi,
    )


def tilt_energy(delta_theta, V0=40.0, Zf=0.11):
    return well_geometry(LatticeParams.from_tilt(delta_theta, V0=V0, Zf=Zf)).tilt_energy


def delta_theta_for_tilt(energy, p: LatticeParams, bracket=(0.0, 0.3)):
    """Invert ``tilt_energy`` for the tilt offset that gives well-minimum difference ``energy``."""
    lo, hi = bracket

    def f(d):
        return well_geometry(p.with_tilt(d)).tilt_energy - energy

    if f(lo) * f(hi) > 0:
        raise InvalidParameterError(f"tilt energy {energy} E_R not reachable in delta_theta {bracket}")
    return brentq(f, lo, hi, xtol=1e-12)
