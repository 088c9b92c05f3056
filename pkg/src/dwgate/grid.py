"""Uniform grids, wavefunction containers and spectral kinetic operators.

Two boundary conventions share one node layout, ``x_j = x_lo + j*dx`` for
``j = 0..n-1`` with ``dx = (x_hi - x_lo)/n``:

* ``periodic``: plain FFT grid.
* ``dirichlet``: node 0 (and the implicit node n at x_hi) are hard walls where
  the amplitude vanishes; the n-1 interior nodes carry a sine (DST-I) basis,
  which is the odd reflection of the cell into a periodic box of length 2L.
"""

from dataclasses import dataclass, field
import json
import struct

import numpy as np
from scipy import fft as sfft

from .io import atomic_write_with
from .errors import ConfigurationError, DimensionError

BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class Grid1D:
    n_points: int
    x_lo: float
    x_hi: float
    boundary: str = "dirichlet"

    def __post_init__(self):
        n = self.n_points
        if n < 32 or n & (n - 1):
            raise ConfigurationError(f"n_points must be a power of two >= 32, got {n}")
        if not self.x_hi > self.x_lo:
            raise ConfigurationError("x_hi must exceed x_lo")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")

    @property
    def length(self):
        return self.x_hi - self.x_lo

    @property
    def spacing(self):
        return self.length / self.n_points

    @property
    def positions(self):
        return self.x_lo + self.spacing * np.arange(self.n_points)

    @property
    def interior(self):
        """Slice of nodes carrying degrees of freedom."""
        return slice(1, None) if self.boundary == "dirichlet" else slice(None)

    @property
    def n_free(self):
        return self.n_points - 1 if self.boundary == "dirichlet" else self.n_points

    def kinetic_eigenvalues(self):
        """Eigenvalues of -d^2/dx^2 in the basis used by :func:`kinetic_apply`."""
        if self.boundary == "periodic":
            k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
            return k**2
        m = np.arange(1, self.n_points)
        return (m * np.pi / self.length) ** 2

    def kinetic_matrix(self):
        """Dense -d^2/dx^2 on the free nodes."""
        n = self.n_free
        eye = np.eye(n)
        if self.boundary == "periodic":
            return np.real(sfft.ifft(self.kinetic_eigenvalues()[:, None] * sfft.fft(eye, axis=0), axis=0))
        s = sfft.dst(eye, type=1, norm="ortho", axis=0)
        return (s * self.kinetic_eigenvalues()) @ s

    def spec(self):
        return {"n_points": self.n_points, "x_lo": self.x_lo, "x_hi": self.x_hi, "boundary": self.boundary}


@dataclass(frozen=True)
class Grid2D:
    """Two-particle configuration space; both particles share ``axis``."""

    axis: Grid1D

    @property
    def shape(self):
        return (self.axis.n_points, self.axis.n_points)

    @property
    def spacing(self):
        return self.axis.spacing

    def spec(self):
        return {"axis": self.axis.spec()}


def _forward(a, g: Grid1D, axes):
    if g.boundary == "periodic":
        return sfft.fftn(a, axes=axes)
    return sfft.dstn(a, type=1, norm="ortho", axes=axes)


def _backward(a, g: Grid1D, axes):
    if g.boundary == "periodic":
        return sfft.ifftn(a, axes=axes)
    return sfft.idstn(a, type=1, norm="ortho", axes=axes)


def kinetic_on_free(a, g: Grid1D, ndim):
    """Apply sum of -d^2/dx_i^2 over the trailing ``ndim`` axes of an array of free-node values."""
    k2 = g.kinetic_eigenvalues()
    axes = tuple(range(a.ndim - ndim, a.ndim))
    total = k2
    if ndim == 2:
        total = k2[:, None] + k2[None, :]
    out = _backward(total * _forward(a, g, axes), g, axes)
    if g.boundary == "dirichlet" and not np.iscomplexobj(a):
        return out.real if np.iscomplexobj(out) else out
    return out


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes on a :class:`Grid1D` or :class:`Grid2D`.

    Normalisation convention: ``sum |psi|^2 * dx**ndim == 1``.
    """

    grid: object
    amplitudes: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        expected = (self.grid.n_points,) if isinstance(self.grid, Grid1D) else self.grid.shape
        if a.shape != expected:
            raise DimensionError(f"amplitudes of shape {a.shape} do not fit grid {expected}")
        if not np.all(np.isfinite(a)):
            raise DimensionError("amplitudes must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def ndim(self):
        return 1 if isinstance(self.grid, Grid1D) else 2

    @property
    def axis(self):
        return self.grid if isinstance(self.grid, Grid1D) else self.grid.axis

    @property
    def weight(self):
        return self.axis.spacing**self.ndim

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.weight))

    def normalized(self):
        return WaveFunction(self.grid, self.amplitudes / self.norm(), self.time)

    def density(self):
        return np.abs(self.amplitudes) ** 2

    def free(self):
        """Amplitudes restricted to the free (non-wall) nodes."""
        s = self.axis.interior
        return self.amplitudes[s] if self.ndim == 1 else self.amplitudes[s, s]

    @classmethod
    def from_free(cls, grid, values, time=0.0):
        values = np.asarray(values)
        shape = (grid.n_points,) if isinstance(grid, Grid1D) else grid.shape
        ax = grid if isinstance(grid, Grid1D) else grid.axis
        full = np.zeros(shape, dtype=complex)
        if len(shape) == 1:
            full[ax.interior] = values
        else:
            full[ax.interior, ax.interior] = values
        return cls(grid, full, time)


def kinetic_apply(psi: WaveFunction) -> WaveFunction:
    """(-d^2/dx_1^2 [- d^2/dx_2^2]) psi, evaluated spectrally."""
    out = kinetic_on_free(psi.free(), psi.axis, psi.ndim)
    return WaveFunction.from_free(psi.grid, out, psi.time)


def _same_grid(psi, phi):
    if psi.grid != phi.grid:
        raise DimensionError("wavefunctions live on different grids")


def inner_product(psi: WaveFunction, phi: WaveFunction) -> complex:
    """<psi|phi> with the dx-weighted quadrature."""
    _same_grid(psi, phi)
    return complex(np.vdot(psi.amplitudes, phi.amplitudes) * psi.weight)


def exchange(psi: WaveFunction) -> WaveFunction:
    """psi(x1, x2) -> psi(x2, x1)."""
    if psi.ndim != 2:
        raise DimensionError("exchange needs a two-particle wavefunction")
    return WaveFunction(psi.grid, psi.amplitudes.T, psi.time)


def symmetrize(psi: WaveFunction) -> WaveFunction:
    return WaveFunction(psi.grid, 0.5 * (psi.amplitudes + psi.amplitudes.T), psi.time)


# Snapshot format: b"DWWF" | uint32 version | uint32 header length | JSON header |
# little-endian float64 pairs (re, im) in C order.
SNAPSHOT_MAGIC = b"DWWF"
SNAPSHOT_VERSION = 1


def write_snapshot(path, psi: WaveFunction, parameters=None):
    header = {
        "grid": psi.grid.spec(),
        "ndim": psi.ndim,
        "time": psi.time,
        "parameters": parameters or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    data = np.empty(psi.amplitudes.shape + (2,), dtype="<f8")
    data[..., 0] = psi.amplitudes.real
    data[..., 1] = psi.amplitudes.imag

    def write(fh):
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())

    atomic_write_with(path, write, binary=True)


def read_snapshot(path):
    """Return ``(WaveFunction, header)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ConfigurationError(f"{path} is not a wavefunction snapshot")
        version, n = struct.unpack("<II", fh.read(8))
        if version != SNAPSHOT_VERSION:
            raise ConfigurationError(f"unsupported snapshot version {version}")
        header = json.loads(fh.read(n))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    g = header["grid"]
    axis = Grid1D(**(g["axis"] if "axis" in g else g))
    grid = Grid2D(axis) if header["ndim"] == 2 else axis
    shape = (axis.n_points,) * header["ndim"]
    raw = raw.reshape(shape + (2,))
    return WaveFunction(grid, raw[..., 0] + 1j * raw[..., 1], header["time"]), header
