"""Two interacting atoms in one double-well cell.

H = T1 + T2 + U(x1) + U(x2) + g K(x1 - x2) on a shared Dirichlet grid, its
bosonic spectrum versus tilt, interaction energies and the two-state model
of the first-order avoided crossings.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import DimensionError, ExtractionError, NonInteractingSynchronizationError, SolverError
from .grid import Grid2D, WaveFunction, kinetic_on_free
from .interaction import ContactModel, check_resolution, interaction_matrix
from .potential import LatticeParams, delta_theta_for_tilt, double_well
from .single_particle import by_label, sp_eigenstates, tunnel_splitting

DEFAULT_N_DENSE = 64
DEFAULT_N_PROP = 128
MAX_LEVELS = 30
RESIDUAL_TOL = 1e-6
QUBIT_LABELS = ("00", "01", "10", "11")


def default_grid(p: LatticeParams, n_points=DEFAULT_N_DENSE) -> Grid2D:
    from .single_particle import cell_grid
    return Grid2D(cell_grid(p, n_points))


class TwoBodyHamiltonian:
    """Matrix-free two-particle Hamiltonian on the free nodes of a Grid2D."""

    def __init__(self, grid: Grid2D, single_potential, interaction):
        self.grid = grid
        self.axis = grid.axis
        self.single_potential = np.asarray(single_potential, float)
        self.interaction = np.asarray(interaction, float)
        u = self.single_potential
        self.potential = u[:, None] + u[None, :] + self.interaction
        self.n = self.axis.n_free

    def apply_free(self, a):
        """H on arrays whose trailing two axes are free-node grids."""
        return kinetic_on_free(a, self.axis, 2) + self.potential * a

    def apply(self, psi: WaveFunction) -> WaveFunction:
        if psi.grid != self.grid:
            raise DimensionError("wavefunction grid differs from the Hamiltonian grid")
        return WaveFunction.from_free(self.grid, self.apply_free(psi.free()), psi.time)

    def spectral_bound(self):
        return 2.0 * float(self.axis.kinetic_eigenvalues().max()) + float(self.potential.max())

    def dense_symmetric(self):
        """Hamiltonian in the orthonormal exchange-symmetric basis.

        Returns ``(H_sym, (I, J, norm))`` where basis vector c is
        norm[c] * (|I[c] J[c]> + |J[c] I[c]>) for I < J and |I I> on the diagonal.
        """
        n = self.n
        I, J = np.triu_indices(n)
        d = len(I)
        norm = np.where(I == J, 1.0, math.sqrt(0.5))
        cols = np.arange(d)
        P = np.zeros((n, n, d))
        P[I, J, cols] = norm
        P[J, I, cols] = norm
        T = self.axis.kinetic_matrix()
        HP = (T @ P.reshape(n, n * d)).reshape(n, n, d)
        HP += np.einsum("bc,acd->abd", T, P, optimize=True)
        HP += self.potential[:, :, None] * P
        Hs = norm[:, None] * (HP[I, J, :] + HP[J, I, :])
        Hs[I == J] = HP[I[I == J], J[I == J], :]
        return 0.5 * (Hs + Hs.T), (I, J, norm)


def build_two_body_hamiltonian(p: LatticeParams, model: ContactModel, grid: Grid2D = None):
    grid = grid or default_grid(p)
    if grid.axis.boundary != "dirichlet":
        raise DimensionError("two-body eigenproblems use a Dirichlet cell grid")
    check_resolution(model, grid.spacing)
    x = grid.axis.positions[grid.axis.interior]
    return TwoBodyHamiltonian(grid, double_well(x, p), interaction_matrix(x, model, grid.spacing))


@dataclass
class TwoBodyEigen:
    energies: np.ndarray
    vectors: np.ndarray  # (k, n_free, n_free), dx-normalised
    grid: Grid2D
    residuals: np.ndarray
    method: str

    def wavefunction(self, i):
        return WaveFunction.from_free(self.grid, self.vectors[i])


def _dense_lowest(h: TwoBodyHamiltonian, k):
    Hs, (I, J, norm) = h.dense_symmetric()
    e, c = np.linalg.eigh(Hs)
    e, c = e[:k], c[:, :k]
    n = h.n
    vec = np.zeros((k, n, n))
    vec[:, I, J] = (norm[:, None] * c).T
    vec[:, J, I] = (norm[:, None] * c).T
    return e, vec


def _lanczos_lowest(h: TwoBodyHamiltonian, k, symmetric_only, ncv=None):
    n = h.n
    penalty = h.spectral_bound()

    def mv(v):
        a = np.asarray(v).reshape(n, n)
        if not symmetric_only:
            return h.apply_free(a).ravel()
        s = 0.5 * (a + a.T)
        return (h.apply_free(s) + penalty * (a - s)).ravel()

    op = LinearOperator((n * n, n * n), matvec=mv, dtype=float)
    v0 = np.random.default_rng(12345).standard_normal((n, n))
    if symmetric_only:
        v0 = v0 + v0.T
    ncv = ncv or min(n * n - 1, max(4 * k, 60))
    try:
        e, v = eigsh(op, k=k, which="SA", v0=v0.ravel(), ncv=ncv, tol=1e-12, maxiter=20000)
    except ArpackNoConvergence as exc:
        raise SolverError(f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} eigenpairs "
                          f"after maxiter=20000, ncv={ncv}") from exc
    order = np.argsort(e)
    e, v = e[order], v[:, order]
    vec = v.T.reshape(k, n, n)
    if symmetric_only:
        vec = 0.5 * (vec + vec.transpose(0, 2, 1))
    return e, vec


def lowest_spectrum(p: LatticeParams, model: ContactModel, n_levels=14, symmetric_only=True,
                    grid: Grid2D = None, method="auto", hamiltonian=None):
    """Lowest ``n_levels`` eigenpairs, by default in the bosonic sector.

    ``method`` is ``"dense"`` (symmetric-basis diagonalisation), ``"lanczos"``
    (implicitly restarted Lanczos with exchange projection every iteration) or
    ``"auto"`` (dense up to 64 points per axis).
    """
    if not 1 <= n_levels <= MAX_LEVELS:
        raise ValueError(f"n_levels must be in 1..{MAX_LEVELS}")
    h = hamiltonian or build_two_body_hamiltonian(p, model, grid)
    if method == "auto":
        method = "dense" if symmetric_only and h.axis.n_points <= DEFAULT_N_DENSE else "lanczos"
    if method == "dense":
        if not symmetric_only:
            raise ValueError("dense solver covers the symmetric sector only")
        e, vec = _dense_lowest(h, n_levels)
    elif method == "lanczos":
        e, vec = _lanczos_lowest(h, n_levels, symmetric_only)
    else:
        raise ValueError(f"unknown method {method!r}")
    nrm = np.sqrt(np.sum(vec**2, axis=(1, 2)))
    vec = vec / nrm[:, None, None]
    res = np.array([np.linalg.norm(h.apply_free(v) - ei * v) for ei, v in zip(e, vec)])
    if np.any(res > RESIDUAL_TOL):
        raise SolverError(f"eigen-residuals up to {res.max():.2e} exceed {RESIDUAL_TOL}")
    vec = vec / h.grid.spacing
    return TwoBodyEigen(e, vec, h.grid, res, method)


# ---------------------------------------------------------------------------
# product-state labels

_SIDE_ORDER = {"L": 0, "R": 1}


def _label_key(label):
    idx, side = label.split("_")[:2]
    return (_SIDE_ORDER.get(side, 2), int(idx) if idx.isdigit() else 99, side)


def pair_label(a, b):
    """Canonical name of the symmetrised product of single-particle states a and b."""
    a, b = sorted((a, b), key=_label_key)
    return f"{a}{b}"


def product_state(phi_a, phi_b):
    """Unnormalised symmetrised product phi_a(x1) phi_b(x2) + phi_b(x1) phi_a(x2)."""
    prod = np.outer(phi_a, phi_b)
    prod = prod + prod.T
    return prod


def product_basis(sp_states, dx):
    """All symmetrised products of the given single-particle states, dx^2-normalised."""
    out = {}
    for i, a in enumerate(sp_states):
        for b in sp_states[i:]:
            v = product_state(a.wavefunction.free().real, b.wavefunction.free().real)
            v = v / math.sqrt(np.sum(v**2) * dx * dx)
            out[pair_label(a.label, b.label)] = (v, a.energy + b.energy)
    return out


def composition(vectors, products, dx):
    """Overlap-squared matrix |<product|eigvec>|^2, shape (n_products, n_vectors)."""
    names = list(products)
    P = np.array([products[k][0].ravel() for k in names])
    V = vectors.reshape(len(vectors), -1)
    return names, (P @ V.T * dx * dx) ** 2


def _overlaps(prev, cur, dx):
    A = prev.reshape(len(prev), -1)
    B = cur.reshape(len(cur), -1)
    return np.abs(A @ B.T) * dx * dx


# ---------------------------------------------------------------------------
# spectrum versus tilt

AMBIGUITY = 0.05


@dataclass
class TwoBodySpectrum:
    delta_theta: np.ndarray  # ascending
    energies: np.ndarray  # (n_samples, n_levels) ascending per sample
    track_of_level: np.ndarray  # (n_samples, n_levels) -> track id
    track_labels: list
    ambiguous: np.ndarray  # (n_samples, n_levels) bool
    metadata: dict = field(default_factory=dict)
    # product label -> (n_samples, n_levels) weights |<product|level>|^2 with the
    # single-particle states of each sample's own tilt; NaN where the label is absent
    weights: dict = field(default_factory=dict)

    @property
    def n_levels(self):
        return self.energies.shape[1]

    def track_energies(self):
        """(n_samples, n_tracks) energies ordered by track id."""
        out = np.full((len(self.delta_theta), len(self.track_labels)), np.nan)
        for s in range(len(self.delta_theta)):
            out[s, self.track_of_level[s]] = self.energies[s]
        return out

    def track(self, label):
        return self.track_energies()[:, self.track_labels.index(label)]

    def to_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["delta_theta", "level_index", "energy_Er", "track_label"])
        for s, d in enumerate(self.delta_theta):
            for lvl in range(self.n_levels):
                w.writerow([repr(float(d)), lvl, repr(float(self.energies[s, lvl])),
                            self.track_labels[self.track_of_level[s, lvl]]])


def spectrum_vs_tilt(p: LatticeParams, model: ContactModel, delta_theta_range=(0.0, 0.12), n_samples=61,
                     n_levels=14, grid: Grid2D = None, buffer_levels=4, method="auto", progress=None):
    """Low-lying bosonic levels on a tilt scan with overlap-tracked labels.

    Tracks are named at the largest tilt by their dominant product-state
    composition and followed towards smaller tilt by greedy maximal-overlap
    matching between adjacent samples.
    """
    lo, hi = delta_theta_range
    dts = np.linspace(lo, hi, n_samples)
    grid = grid or default_grid(p.with_tilt(0.5 * (lo + hi)))
    dx = grid.spacing
    k = n_levels + buffer_levels
    sols = [None] * n_samples
    for s in range(n_samples - 1, -1, -1):
        sols[s] = lowest_spectrum(p.with_tilt(dts[s]), model, k, grid=grid, method=method)
        if progress:
            progress(n_samples - s, n_samples)

    sp = sp_eigenstates(p.with_tilt(hi), 6, grid.axis)
    products = product_basis(sp, dx)
    names, comp = composition(sols[-1].vectors, products, dx)
    labels = []
    for lvl in range(k):
        order = np.argsort(comp[:, lvl])[::-1]
        lab = next((names[i] for i in order if names[i] not in labels), f"level{lvl}")
        if comp[order[0], lvl] < 0.5:
            lab = f"mixed({lab})"
        while lab in labels:
            lab = lab + "'"
        labels.append(lab)

    track = np.zeros((n_samples, k), dtype=int)
    ambiguous = np.zeros((n_samples, k), dtype=bool)
    track[-1] = np.arange(k)
    for s in range(n_samples - 2, -1, -1):
        ov = _overlaps(sols[s + 1].vectors, sols[s].vectors, dx)  # prev level x current level
        assigned_prev, assigned_cur = set(), set()
        for flat in np.argsort(ov, axis=None)[::-1]:
            i, j = divmod(int(flat), k)
            if i in assigned_prev or j in assigned_cur:
                continue
            track[s, j] = track[s + 1, i]
            assigned_prev.add(i)
            assigned_cur.add(j)
            row = np.sort(ov[i])[::-1]
            if len(row) > 1 and row[0] - row[1] < AMBIGUITY:
                ambiguous[s, j] = True
            if len(assigned_cur) == k:
                break

    energies = np.array([sol.energies for sol in sols])
    keep = energies.argsort(axis=1)[:, :n_levels]
    e_out = np.take_along_axis(energies, keep, axis=1)
    t_out = np.take_along_axis(track, keep, axis=1)
    a_out = np.take_along_axis(ambiguous, keep, axis=1)

    weights = {}
    for s, d in enumerate(dts):
        names_s, comp_s = composition(sols[s].vectors[keep[s]],
                                      product_basis(sp_eigenstates(p.with_tilt(d), 6, grid.axis), dx), dx)
        for name, row in zip(names_s, comp_s):
            weights.setdefault(name, np.full((n_samples, n_levels), np.nan))[s] = row
    meta = {"grid": grid.spec(), "model": model.to_dict(), "model_hash": model.param_hash(),
            "n_levels": n_levels, "V0": p.V0, "Zf": p.Zf}
    return TwoBodySpectrum(dts, e_out, t_out, labels, a_out, meta, weights)


@dataclass(frozen=True)
class AvoidedCrossing:
    labels: tuple
    delta_theta: float
    gap: float
    mixing: float = None  # set by composition_crossing


def minimal_gap(spectrum: TwoBodySpectrum, label_a, label_b) -> AvoidedCrossing:
    """Location and size of the smallest gap between two tracks (parabolic refinement)."""
    ea, eb = spectrum.track(label_a), spectrum.track(label_b)
    gap = np.abs(ea - eb)
    valid = np.isfinite(gap)
    if not valid.any():
        raise ExtractionError(f"tracks {label_a} and {label_b} never coexist in the scan")
    idx = np.flatnonzero(valid)
    i = idx[np.argmin(gap[idx])]
    if 0 < i < len(gap) - 1 and not (valid[i - 1] and valid[i + 1]):
        return AvoidedCrossing((label_a, label_b), float(spectrum.delta_theta[i]), float(gap[i]))
    x, g = _parabolic_min(spectrum.delta_theta, gap, i)
    return AvoidedCrossing((label_a, label_b), x, g)


def _parabolic_min(x, y, i):
    """Refined (x, y) at an interior sample minimum of y."""
    if 0 < i < len(x) - 1:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom > 0:
            off = 0.5 * (y0 - y2) / denom
            return float(x[i] + off * (x[1] - x[0])), float(y1 - 0.25 * (y0 - y2) * off)
    return float(x[i]), float(y[i])


def composition_crossing(spectrum: TwoBodySpectrum, label_a, label_b) -> AvoidedCrossing:
    """Avoided crossing of products a and b located by eigenstate composition.

    At each tilt the two levels carrying the largest combined weight on a and b
    are the adiabatic pair; the crossing is the closest approach of that pair.
    Unlike :func:`minimal_gap` this does not depend on how tracks were named,
    which matters when a third level passes through the crossing region.
    ``mixing`` reports 4 w_a w_b / (w_a + w_b) of the more mixed level at the
    minimum (1 for an equal superposition).
    """
    try:
        wa, wb = np.nan_to_num(spectrum.weights[label_a]), np.nan_to_num(spectrum.weights[label_b])
    except KeyError as exc:
        raise ExtractionError(f"product {exc.args[0]} not present in the scan") from None
    total = wa + wb
    if not np.any(total > 0.5):
        raise ExtractionError(f"products {label_a} and {label_b} are not among the computed levels")
    pair = np.argsort(total, axis=1)[:, ::-1][:, :2]
    rows = np.arange(len(spectrum.delta_theta))
    gap = np.abs(spectrum.energies[rows, pair[:, 0]] - spectrum.energies[rows, pair[:, 1]])
    i = int(np.argmin(gap))
    x, g = _parabolic_min(spectrum.delta_theta, gap, i)
    with np.errstate(invalid="ignore", divide="ignore"):
        mix = np.nan_to_num(4 * wa[i, pair[i]] * wb[i, pair[i]] / total[i, pair[i]])
    return AvoidedCrossing((label_a, label_b), x, g, float(mix.max()))


def adjacent_gaps(spectrum: TwoBodySpectrum):
    """Minimum over the scan of each gap between consecutive levels."""
    return np.min(np.diff(spectrum.energies, axis=1), axis=0)


def local_gap_minima(spectrum: TwoBodySpectrum, max_gap=None):
    """Interior local minima of every consecutive-level gap, as AvoidedCrossing records."""
    gaps = np.diff(spectrum.energies, axis=1)
    out = []
    for lvl in range(gaps.shape[1]):
        g = gaps[:, lvl]
        for s in range(1, len(g) - 1):
            if g[s] < g[s - 1] and g[s] <= g[s + 1] and (max_gap is None or g[s] < max_gap):
                la = spectrum.track_labels[spectrum.track_of_level[s, lvl]]
                lb = spectrum.track_labels[spectrum.track_of_level[s, lvl + 1]]
                out.append(AvoidedCrossing((la, lb), float(spectrum.delta_theta[s]), float(g[s])))
    return out


# ---------------------------------------------------------------------------
# interaction energies and the two-state model

@dataclass(frozen=True)
class InteractionEnergies:
    U00: float
    U01: float
    U11: float
    delta_theta: float
    purity: dict = field(default_factory=dict)


def interaction_energies(p: LatticeParams, model: ContactModel, grid: Grid2D = None, delta_theta=0.1,
                         n_levels=16, method="auto") -> InteractionEnergies:
    """U_ab from two-body energies minus single-particle sums.

    U_ab = [E(a_R b_R) - e(a_R) - e(b_R)] - [E(a_L b_R) - e(a_L) - e(b_R)],
    i.e. the interaction shift of the doubly occupied right well relative to
    the separated configuration, evaluated at a tilt where the states are
    localised.
    """
    if delta_theta is not None:
        p = p.with_tilt(delta_theta)
    grid = grid or default_grid(p)
    sp = by_label(sp_eigenstates(p, 6, grid.axis))
    missing = [lab for lab in ("0_L", "0_R", "1_L", "1_R") if lab not in sp]
    if missing:
        raise ExtractionError(f"single-particle states {missing} are not localised at delta_theta={p.delta_theta}")
    sol = lowest_spectrum(p, model, n_levels, grid=grid, method=method)
    dx = grid.spacing
    products = product_basis([sp[k] for k in ("0_L", "0_R", "1_L", "1_R")], dx)
    names, comp = composition(sol.vectors, products, dx)
    energy, purity = {}, {}
    for lab in ("0_R0_R", "0_L0_R", "0_R1_R", "1_L0_R", "1_R1_R", "1_L1_R"):
        row = comp[names.index(lab)]
        j = int(np.argmax(row))
        if row[j] < 0.5:
            raise ExtractionError(f"no eigenvector dominated by {lab}; best overlap {row[j]:.3f} at level {j}")
        energy[lab], purity[lab] = float(sol.energies[j]), float(row[j])
    e = {k: v.energy for k, v in sp.items()}
    U00 = (energy["0_R0_R"] - 2 * e["0_R"]) - (energy["0_L0_R"] - e["0_L"] - e["0_R"])
    U01 = (energy["0_R1_R"] - e["0_R"] - e["1_R"]) - (energy["1_L0_R"] - e["1_L"] - e["0_R"])
    U11 = (energy["1_R1_R"] - 2 * e["1_R"]) - (energy["1_L1_R"] - e["1_L"] - e["1_R"])
    return InteractionEnergies(U00, U01, U11, p.delta_theta, purity)


def two_state_splitting(U, delta_E, J, bose_enhanced=False):
    """Gap of the two-level model sqrt((U - dE)^2 + c J^2), c = 4 or 8."""
    if J < 0:
        raise ValueError("J must be non-negative")
    c = 8.0 if bose_enhanced else 4.0
    return math.sqrt((U - delta_E) ** 2 + c * J * J)


def synchronized_tilt(U00, J):
    """Tilt energy at which the 10 and 11 channels tunnel at the same frequency."""
    if U00 == 0:
        raise NonInteractingSynchronizationError("synchronised tunnelling needs U00 != 0")
    return 7.0 * U00 / 8.0 - 8.0 * J * J / U00


def synchronized_delta_theta(p: LatticeParams, U00, J=None):
    """Delta-theta whose well-minimum tilt equals :func:`synchronized_tilt`.

    ``J`` defaults to half the upper-doublet splitting at zero tilt.
    """
    if J is None:
        J = 0.5 * tunnel_splitting(p.with_tilt(0.0), 1)
    return delta_theta_for_tilt(synchronized_tilt(U00, J), p)
