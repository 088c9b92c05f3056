"""Laboratory units and the dimensionless recoil system.

Internally lengths are measured in 1/k (the variable ``kx``), energies in
recoil energies E_R and times in hbar/E_R.
"""

from dataclasses import dataclass
import math

from .errors import InvalidParameterError

# CODATA 2018 exact/recommended values; Rb-87 mass from AME2020.
CONSTANTS = {
    "h": 6.62607015e-34,  # J s (exact)
    "hbar": 6.62607015e-34 / (2.0 * math.pi),
    "atomic_mass_unit": 1.66053906660e-27,  # kg
    "rb87_mass_u": 86.909180531,
}

RB87_MASS_U = CONSTANTS["rb87_mass_u"]


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory description of the lattice and the atoms.

    ``mass_u`` is in unified atomic mass units; lengths are in nm.
    """

    wavelength_nm: float = 810.0
    scattering_length_nm: float = 5.3
    mass_u: float = RB87_MASS_U
    V0_over_Er: float = 40.0
    V3_over_Er: float = 40.0
    Zf: float = 0.11

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise InvalidParameterError(f"wavelength must be positive, got {self.wavelength_nm}")
        if not self.mass_u > 0:
            raise InvalidParameterError(f"atom mass must be positive, got {self.mass_u}")
        if self.scattering_length_nm < 0:
            raise InvalidParameterError("scattering length must be non-negative")
        if not self.V0_over_Er > 0:
            raise InvalidParameterError("V0 must be positive")
        if self.V3_over_Er < 0:
            raise InvalidParameterError("V3 must be non-negative")
        if not 0.0 <= self.Zf < 1.0:
            raise InvalidParameterError(f"Zf must lie in [0, 1), got {self.Zf}")

    @property
    def mass_kg(self):
        return self.mass_u * CONSTANTS["atomic_mass_unit"]


@dataclass(frozen=True)
class UnitSystem:
    wavenumber: float  # 1/m
    recoil_energy_J: float
    time_unit_s: float  # hbar / E_R

    @property
    def recoil_energy_Hz(self):
        return self.recoil_energy_J / CONSTANTS["h"]

    def to_dimensionless(self, t_s):
        """Seconds -> units of hbar/E_R."""
        return t_s / self.time_unit_s

    def to_seconds(self, tau):
        return tau * self.time_unit_s

    def ms_to_tau(self, t_ms):
        return self.to_dimensionless(t_ms * 1e-3)

    def tau_to_ms(self, tau):
        return self.to_seconds(tau) * 1e3

    def energy_to_Er(self, energy_J):
        return energy_J / self.recoil_energy_J

    def Er_to_joule(self, energy_Er):
        return energy_Er * self.recoil_energy_J


def make_unit_system(p: PhysicalParams) -> UnitSystem:
    if not (p.wavelength_nm > 0 and p.mass_u > 0):
        raise InvalidParameterError("wavelength and mass must be positive")
    hbar = CONSTANTS["hbar"]
    k = 2.0 * math.pi / (p.wavelength_nm * 1e-9)
    e_r = (hbar * k) ** 2 / (2.0 * p.mass_kg)
    return UnitSystem(wavenumber=k, recoil_energy_J=e_r, time_unit_s=hbar / e_r)


def transverse_frequencies(p: PhysicalParams):
    """Transverse harmonic quanta (hbar*omega_y, hbar*omega_z) in units of E_R."""
    return math.sqrt(4.0 * p.V0_over_Er), math.sqrt(4.0 * p.V3_over_Er)


def g1d_dimensionless(p: PhysicalParams) -> float:
    """k g_1D / E_R = 8 pi (a_s / lambda) sqrt(V0/E_R)."""
    return 8.0 * math.pi * (p.scattering_length_nm / p.wavelength_nm) * math.sqrt(p.V0_over_Er)


def g1d_from_transverse(p: PhysicalParams) -> float:
    """k g_1D / E_R with g_1D = 2 hbar sqrt(omega_y omega_z) a_s, built in SI units.

    Equals :func:`g1d_dimensionless` when V3 == V0.
    """
    units = make_unit_system(p)
    hw_y, hw_z = transverse_frequencies(p)
    hbar = CONSTANTS["hbar"]
    omega_y = hw_y * units.recoil_energy_J / hbar
    omega_z = hw_z * units.recoil_energy_J / hbar
    g1d = 2.0 * hbar * math.sqrt(omega_y * omega_z) * p.scattering_length_nm * 1e-9
    return units.wavenumber * g1d / units.recoil_energy_J
