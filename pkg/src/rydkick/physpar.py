"""Hardware parameters and their reduction to oscillator units.

All downstream code works in units of the relative-motion harmonic
oscillator: hbar = mu = a_ho = 1, energies in hbar*omega and times in
1/omega, so one trap period is 2*pi.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from rydkick import constants as C


class DipoleOrientation(enum.Enum):
    """Orientation of the two Rydberg dipoles relative to the inter-atomic axis."""

    PERPENDICULAR = "perpendicular"  # repulsive, V+
    PARALLEL = "parallel"  # attractive, V- = -2 V+

    @property
    def factor(self) -> float:
        return 1.0 if self is DipoleOrientation.PERPENDICULAR else -2.0


def _check_quantum_numbers(n: int, q: int) -> None:
    if int(n) != n or int(q) != q:
        raise ValueError(f"quantum numbers must be integers, got n={n}, q={q}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= q <= n - 1:
        raise ValueError(f"q must lie in [0, n-1] = [0, {n - 1}], got {q}")


def dipole_moment(n: int, q: int) -> float:
    """Rydberg dipole moment (3/2) n q in units of e*a0."""
    _check_quantum_numbers(n, q)
    return 1.5 * n * q


@dataclass(frozen=True)
class PhysicalConfig:
    """Dimensional hardware parameters.

    Attributes
    ----------
    atom_mass : float
        Single-atom mass in kg (see :meth:`from_amu`).
    trap_freq : float
        Angular trap frequency omega of the hyperfine levels (rad/s).
    rydberg_trap_freq : float
        Angular trap frequency omega' felt in the Rydberg state (rad/s).
    n1, q1, n2, q2 : int
        Rydberg quantum numbers of the two atoms.
    rabi_freq : float
        Effective two-photon Rabi frequency Omega (rad/s).
    lattice_wavelength : float or None
        Lattice laser wavelength (m); neighbouring sites sit half a
        wavelength apart.
    """

    atom_mass: float
    trap_freq: float
    rydberg_trap_freq: float
    n1: int
    q1: int
    n2: int
    q2: int
    rabi_freq: float
    lattice_wavelength: float | None = None

    def __post_init__(self):
        _check_quantum_numbers(self.n1, self.q1)
        _check_quantum_numbers(self.n2, self.q2)
        for name in ("atom_mass", "trap_freq", "rydberg_trap_freq", "rabi_freq"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if self.lattice_wavelength is not None and not self.lattice_wavelength > 0:
            raise ValueError(
                f"lattice_wavelength must be > 0, got {self.lattice_wavelength}")

    @classmethod
    def from_amu(cls, mass_amu: float, **kwargs) -> "PhysicalConfig":
        return cls(atom_mass=mass_amu * C.ATOMIC_MASS_UNIT, **kwargs)

    @property
    def rabi_dimensionless(self) -> float:
        """Omega in units of the trap frequency."""
        return self.rabi_freq / self.trap_freq


@dataclass(frozen=True)
class DerivedScales:
    """Oscillator units derived from a :class:`PhysicalConfig`."""

    config: PhysicalConfig
    reduced_mass: float  # kg
    osc_length: float  # m
    alpha_plus_sq: float
    osc_period: float = 2 * math.pi  # dimensionless

    @property
    def mass_ratio_over_length(self) -> float:
        """(mu/m_e) / (a_ho/a0), the trap-only factor of the coupling."""
        return (self.reduced_mass / C.ELECTRON_MASS) / (self.osc_length / C.BOHR_RADIUS)

    def length_si(self, x: float) -> float:
        return x * self.osc_length

    def time_si(self, t: float) -> float:
        return t / self.config.trap_freq

    def energy_si(self, e: float) -> float:
        return e * C.HBAR * self.config.trap_freq

    def to_si(self) -> dict[str, float]:
        """Recover the trap inputs from the derived scales alone."""
        return {
            "atom_mass": 2.0 * self.reduced_mass,
            "trap_freq": C.HBAR / (self.reduced_mass * self.osc_length**2),
        }

    def lattice_separation(self) -> float:
        """Neighbouring-site distance lambda/2 in oscillator lengths."""
        if self.config.lattice_wavelength is None:
            raise ValueError("config has no lattice_wavelength")
        return 0.5 * self.config.lattice_wavelength / self.osc_length


def derive_scales(cfg: PhysicalConfig) -> DerivedScales:
    ratio = cfg.rydberg_trap_freq / cfg.trap_freq
    if abs(ratio - 1.0) > 0.5:
        warnings.warn(
            f"rydberg_trap_freq/trap_freq = {ratio:.3g}; kicks are simulated "
            "with the ground-state trap frequency", stacklevel=2)
    mu = 0.5 * cfg.atom_mass
    a_ho = math.sqrt(C.HBAR / (mu * cfg.trap_freq))
    nq = cfg.n1 * cfg.q1 * cfg.n2 * cfg.q2
    alpha_sq = 2.25 * nq * (mu / C.ELECTRON_MASS) / (a_ho / C.BOHR_RADIUS)
    return DerivedScales(config=cfg, reduced_mass=mu, osc_length=a_ho,
                         alpha_plus_sq=alpha_sq)


def dipole_potential(x, alpha_plus_sq: float, orient: DipoleOrientation):
    """Dipole-dipole energy in units of hbar*omega at relative distance ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("dipole potential requires x > 0 everywhere")
    v = orient.factor * alpha_plus_sq / x**3
    return float(v) if v.ndim == 0 else v


def rabi_margin(rabi: float, alpha_plus_sq: float, x0: float) -> float:
    """Omega / (2 alpha+^2 / x0^3), with ``rabi`` in units of the trap frequency.

    Returns ``inf`` for a vanishing coupling (always valid).
    """
    if x0 <= 0:
        raise ValueError(f"x0 must be > 0, got {x0}")
    shift = 2.0 * alpha_plus_sq / x0**3
    if shift == 0:
        return math.inf
    return rabi / shift


def config_rabi_margin(scales: DerivedScales, x0: float) -> float:
    return rabi_margin(scales.config.rabi_dimensionless, scales.alpha_plus_sq, x0)
