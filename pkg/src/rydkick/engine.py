"""Split-operator propagation of the relative-motion wavefunction.

Positions are measured from the origin of the relative coordinate, so the
trap centre sits at ``x0`` and the dipole potential diverges at x = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rydkick.physpar import DipoleOrientation, dipole_potential

EDGE_TOL = 1e-6
_EDGE_POINTS = 4

DEFAULT_HALF_WIDTH = 20.0
DEFAULT_POINTS = 2048
DEFAULT_FREE_DT = 1e-3 * 2 * math.pi
DEFAULT_KICK_STEPS = 200


class BoundaryLeakageWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid x_j = x_min + j*dx, j < n_points."""

    x_min: float
    x_max: float
    n_points: int = DEFAULT_POINTS
    dt: float = DEFAULT_FREE_DT

    def __post_init__(self):
        if not 0 < self.x_min < self.x_max:
            raise ValueError(
                f"grid needs 0 < x_min < x_max, got x_min={self.x_min}, x_max={self.x_max}")
        n = self.n_points
        if n < 256 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 256, got {n}")
        if self.dx > 0.1:
            raise ValueError(f"grid spacing {self.dx:.4g} exceeds 0.1 oscillator lengths")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n_points, self.dx)


def default_grid(x0: float, half_width: float = DEFAULT_HALF_WIDTH,
                 n_points: int = DEFAULT_POINTS, dt: float = DEFAULT_FREE_DT) -> GridSpec:
    """[x0 - half_width, x0 + half_width], with the lower edge kept at x >= x0/10."""
    return GridSpec(max(x0 - half_width, 0.1 * x0), x0 + half_width, n_points, dt)


@dataclass
class WaveFunction:
    grid: GridSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match the grid")

    def norm(self) -> float:
        # rectangle rule == trapezoid rule on a periodic grid
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes / math.sqrt(self.norm()))

    def edge_amplitude(self) -> float:
        a = np.abs(self.amplitudes)
        return float(max(a[:_EDGE_POINTS].max(), a[-_EDGE_POINTS:].max()))

    @property
    def leaked(self) -> bool:
        return self.edge_amplitude() >= EDGE_TOL

    def overlap(self, other: "WaveFunction") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.dx)

    def save_csv(self, path) -> None:
        """Write (x, Re psi, Im psi) rows."""
        data = np.column_stack([self.grid.x, self.amplitudes.real, self.amplitudes.imag])
        with open(Path(path), "w", newline="\n") as fh:
            fh.write("x,re_psi,im_psi\n")
            for row in data:
                fh.write(",".join(format(v, ".12g") for v in row) + "\n")


@dataclass
class FockVector:
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    @property
    def truncation_loss(self) -> float:
        return float(1.0 - self.populations.sum())


@dataclass(frozen=True)
class PotentialSpec:
    """Harmonic trap, quartic correction -lam (x-x0)^4 / 2 and optional dipole term."""

    x0: float
    harmonic: bool = True
    quartic: float = 0.0
    dipole: tuple[float, DipoleOrientation] | None = None

    def __post_init__(self):
        if self.quartic < 0:
            raise ValueError(f"quartic coefficient must be >= 0, got {self.quartic}")

    def values(self, x: np.ndarray) -> np.ndarray:
        d = x - self.x0
        v = np.zeros_like(x)
        if self.harmonic:
            v += 0.5 * d**2
        if self.quartic:
            v -= 0.5 * self.quartic * d**4
        if self.dipole is not None:
            alpha_sq, orient = self.dipole
            v += dipole_potential(x, alpha_sq, orient)
        return v

    def with_dipole(self, alpha_sq: float, orient: DipoleOrientation) -> "PotentialSpec":
        return replace(self, dipole=(alpha_sq, orient))


def hermite_functions(n_max: int, xi: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_n_max at ``xi``, shape (n_max+1, len(xi)).

    Uses psi_k = sqrt(2/k) xi psi_{k-1} - sqrt((k-1)/k) psi_{k-2}.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((n_max + 1,) + xi.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * xi**2)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for k in range(2, n_max + 1):
        out[k] = math.sqrt(2.0 / k) * xi * out[k - 1] - math.sqrt((k - 1) / k) * out[k - 2]
    return out


def init_fock_on_grid(k: int, grid: GridSpec, x0: float) -> WaveFunction:
    if k < 0:
        raise ValueError(f"Fock index must be >= 0, got {k}")
    psi = WaveFunction(grid, hermite_functions(k, grid.x - x0)[k])
    if psi.leaked:
        raise ValueError(f"Fock state {k} does not fit inside the grid")
    return psi


def coherent_on_grid(alpha: complex, grid: GridSpec, x0: float) -> WaveFunction:
    """D(alpha)|0> centred on x0: Gaussian at x0 + sqrt2 Re alpha with momentum sqrt2 Im alpha."""
    d = grid.x - x0
    xc, pc = math.sqrt(2) * alpha.real, math.sqrt(2) * alpha.imag
    amp = np.pi**-0.25 * np.exp(-0.5 * (d - xc) ** 2 + 1j * pc * (d - 0.5 * xc))
    return WaveFunction(grid, amp)


def evolve_split_step(psi: WaveFunction, pot: PotentialSpec, t_total: float,
                      dt: float | None = None) -> WaveFunction:
    """Strang-split propagation exp(-iV h/2) exp(-iT h) exp(-iV h/2) per step.

    The step is shortened so that an integer number of steps covers ``t_total``.
    A :class:`BoundaryLeakageWarning` is issued when the result touches the grid edge.
    """
    grid = psi.grid
    if t_total < 0:
        raise ValueError(f"t_total must be >= 0, got {t_total}")
    if t_total == 0:
        return WaveFunction(grid, psi.amplitudes.copy())
    dt = grid.dt if dt is None else dt
    n = max(1, math.ceil(t_total / dt - 1e-9))
    h = t_total / n
    if pot.dipole is not None and grid.x_min <= 0:
        raise ValueError("dipole potential requires x_min > 0")
    v = pot.values(grid.x)
    half_v = np.exp(-0.5j * h * v)
    full_v = half_v * half_v
    kin = np.exp(-0.5j * h * grid.k**2)
    fft, ifft = np.fft.fft, np.fft.ifft
    a = half_v * psi.amplitudes
    for _ in range(n - 1):
        a = full_v * ifft(kin * fft(a))
    a = half_v * ifft(kin * fft(a))
    out = WaveFunction(grid, a)
    if out.leaked:
        warnings.warn(f"wavefunction reached the grid edge (|psi| = {out.edge_amplitude():.2e})",
                      BoundaryLeakageWarning, stacklevel=2)
    return out


def evolve_harmonic_fock(v: FockVector, t: float) -> FockVector:
    k = np.arange(len(v.coeffs))
    return FockVector(v.coeffs * np.exp(-1j * (k + 0.5) * t))


def project_to_fock(psi: WaveFunction, n_max: int, x0: float) -> FockVector:
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    basis = hermite_functions(n_max, psi.grid.x - x0)
    return FockVector(basis @ psi.amplitudes * psi.grid.dx)


def from_fock(v: FockVector, grid: GridSpec, x0: float) -> WaveFunction:
    basis = hermite_functions(v.n_max, grid.x - x0)
    return WaveFunction(grid, v.coeffs @ basis)


OBSERVABLES = ("H0", "x", "x-x0", "dx", "V_dip")


def expectation(psi: WaveFunction, observable: str, x0: float,
                dipole: tuple[float, DipoleOrientation] | None = None) -> float:
    """Expectation value of one of :data:`OBSERVABLES` (``dx`` is the position spread)."""
    grid = psi.grid
    a = psi.amplitudes
    dens = np.abs(a) ** 2 * grid.dx
    norm = dens.sum()
    x = grid.x
    if observable == "x":
        return float(dens @ x / norm)
    if observable == "x-x0":
        return float(dens @ (x - x0) / norm)
    if observable == "dx":
        mean = dens @ x / norm
        return float(math.sqrt(max(dens @ (x - mean) ** 2 / norm, 0.0)))
    if observable == "H0":
        ak = np.fft.fft(a)
        kinetic = np.vdot(a, np.fft.ifft(0.5 * grid.k**2 * ak)) * grid.dx
        value = complex(kinetic) + dens @ (0.5 * (x - x0) ** 2)
        if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
            raise ArithmeticError(f"<H0> has imaginary part {value.imag:.3e}")
        return float(value.real / norm)
    if observable == "V_dip":
        if dipole is None:
            raise ValueError("V_dip needs the dipole (alpha_sq, orientation)")
        support = dens > 1e-30
        if np.any(x[support] <= 0):
            raise ValueError("wavefunction has support at x <= 0")
        return float(dens @ dipole_potential(x, *dipole) / norm)
    raise ValueError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
