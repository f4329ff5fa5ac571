"""Full gate simulation and quality metrics.

All phases are reported in the interaction picture of the trap: the free
factor exp(-i(k+1/2)tau) is removed from every Fock coefficient, so an ideal
gate maps |k> to exp(i phi)|k>.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from rydkick import engine, phasespace
from rydkick.parallel import ordered_map
from rydkick.engine import (BoundaryLeakageWarning, FockVector, GridSpec, PotentialSpec,
                            WaveFunction)
from rydkick.phasespace import FreeEvolution, PhaseBudget, ProtocolSchedule
from rydkick.physpar import DipoleOrientation, dipole_potential, rabi_margin

log = logging.getLogger(__name__)

TRUNCATION_WARN = 1e-4


@dataclass(frozen=True)
class GateParams:
    """Gate configuration in oscillator units.

    Exactly one of ``dt1`` and ``alpha_plus_sq`` is given; the other follows
    from the target phase.
    """

    theta: float
    x0: float
    dt1: float | None = None
    alpha_plus_sq: float | None = None
    phi_target: float = -math.pi
    quartic: float = 0.0
    grid: GridSpec | None = None
    n_max: int = 25
    kick_steps: int = engine.DEFAULT_KICK_STEPS
    impulse_exact: bool = False

    def __post_init__(self):
        if (self.dt1 is None) == (self.alpha_plus_sq is None):
            raise ValueError("give exactly one of dt1 and alpha_plus_sq")
        if self.dt1 is not None and self.dt1 < 0:
            raise ValueError(f"dt1 must be >= 0, got {self.dt1}")
        if self.alpha_plus_sq is not None and self.alpha_plus_sq < 0:
            raise ValueError(f"alpha_plus_sq must be >= 0, got {self.alpha_plus_sq}")
        if not 0 < self.theta <= math.pi / 2:
            raise ValueError(f"theta must lie in (0, pi/2], got {self.theta}")
        if not self.x0 > 0:
            raise ValueError(f"x0 must be > 0, got {self.x0}")
        if self.quartic < 0:
            raise ValueError(f"quartic coefficient must be >= 0, got {self.quartic}")
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")
        if self.kick_steps < 1:
            raise ValueError(f"kick_steps must be >= 1, got {self.kick_steps}")
        if self.grid is not None and self.grid.x_min <= 0:
            raise ValueError("grid.x_min must be > 0")

    @property
    def action(self) -> float:
        """alpha+^2 * dt1 required by the target phase."""
        return phasespace.kick_action(self.phi_target, self.theta, self.x0)

    def resolved(self) -> tuple[float, float]:
        """(alpha_plus_sq, dt1)."""
        if self.dt1 is not None:
            if self.dt1 == 0:
                if self.action > 0:
                    raise ValueError("dt1 = 0 cannot produce a non-zero phase")
                return 0.0, 0.0
            return self.action / self.dt1, self.dt1
        if self.action == 0:
            return self.alpha_plus_sq, 0.0
        if self.alpha_plus_sq == 0:
            raise ValueError("alpha_plus_sq = 0 cannot produce a non-zero phase")
        return self.alpha_plus_sq, phasespace.solve_kick_time(
            self.phi_target, self.theta, self.x0, self.alpha_plus_sq)

    def schedule(self) -> ProtocolSchedule:
        _, dt1 = self.resolved()
        sched, _ = phasespace.schedule_from_action(
            self.phi_target, self.theta, self.x0, self.action, dt1)
        return sched

    def budget(self) -> PhaseBudget:
        alpha_sq, _ = self.resolved()
        return phasespace.phase_budget(self.schedule(), alpha_sq)

    def grid_spec(self) -> GridSpec:
        return self.grid if self.grid is not None else engine.default_grid(self.x0)

    def base_potential(self) -> PotentialSpec:
        return PotentialSpec(x0=self.x0, quartic=self.quartic)


@dataclass
class GateOutcome:
    final_state: WaveFunction
    alpha_row: FockVector
    alpha_kk: complex
    phi_target: float
    k: int | None
    elapsed: float
    untrusted: bool

    @property
    def phi_kk(self) -> float:
        return float(np.angle(self.alpha_kk))

    @property
    def F_k(self) -> float:
        return fidelity_pure(self.alpha_kk, self.phi_target)

    @property
    def truncation_loss(self) -> float:
        return self.alpha_row.truncation_loss


def _kick_segment(psi: WaveFunction, params: GateParams, alpha_sq: float, kick) -> WaveFunction:
    if params.impulse_exact:
        # exp(-i u dt + i dp (x - x0)) with the linearised dipole potential
        x0 = params.x0
        u = dipole_potential(x0, alpha_sq, kick.orientation)
        dp = 3.0 * u / x0
        d = psi.grid.x - x0
        return WaveFunction(psi.grid, psi.amplitudes * np.exp(-1j * kick.duration * (u - dp * d)))
    pot = params.base_potential()
    if alpha_sq > 0:
        pot = pot.with_dipole(alpha_sq, kick.orientation)
    return engine.evolve_split_step(psi, pot, kick.duration, kick.duration / params.kick_steps)


def propagate(params: GateParams, psi: WaveFunction) -> tuple[WaveFunction, float, bool]:
    """Apply one full gate to ``psi``.

    Returns the final state, the elapsed trap time and whether the state
    touched the grid boundary at any segment end.
    """
    alpha_sq, _ = params.resolved()
    sched = params.schedule()
    free_pot = params.base_potential()
    elapsed = 0.0
    leaked = psi.leaked
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryLeakageWarning)
        for element in sched.train:
            if isinstance(element, FreeEvolution):
                psi = engine.evolve_split_step(psi, free_pot, element.angle)
                elapsed += element.angle
            else:
                psi = _kick_segment(psi, params, alpha_sq, element)
                if not params.impulse_exact:
                    elapsed += element.duration
            leaked = leaked or psi.leaked
    return psi, elapsed, leaked


def _interaction_row(psi: WaveFunction, params: GateParams, elapsed: float) -> FockVector:
    row = engine.project_to_fock(psi, params.n_max, params.x0)
    return engine.evolve_harmonic_fock(row, -elapsed)


def run_gate(params: GateParams, initial: int | WaveFunction = 0) -> GateOutcome:
    """Simulate the full three-kick gate on the |gg> motional branch.

    ``initial`` is a Fock level k or an arbitrary wavefunction on the
    parameter grid; for a wavefunction the diagonal overlap is taken with the
    initial state itself.
    """
    grid = params.grid_spec()
    if isinstance(initial, WaveFunction):
        k = None
        psi0 = initial
        c0 = engine.project_to_fock(psi0, params.n_max, params.x0).coeffs
    else:
        k = int(initial)
        if k > params.n_max:
            raise ValueError(f"level {k} exceeds n_max = {params.n_max}")
        psi0 = engine.init_fock_on_grid(k, grid, params.x0)
        c0 = None
    psi, elapsed, leaked = propagate(params, psi0)
    row = _interaction_row(psi, params, elapsed)
    alpha_kk = row.coeffs[k] if k is not None else complex(np.vdot(c0, row.coeffs))
    if leaked:
        log.warning("gate run touched the grid boundary (theta=%g, x0=%g)",
                    params.theta, params.x0)
    return GateOutcome(final_state=psi, alpha_row=row, alpha_kk=complex(alpha_kk),
                       phi_target=params.phi_target, k=k, elapsed=elapsed, untrusted=leaked)


def fidelity_pure(alpha_kk: complex, phi_target: float) -> float:
    """Worst-case single-level fidelity (1 + |a_kk| cos(phi - arg a_kk)) / 2."""
    mag = abs(alpha_kk)
    if mag == 0:
        return 0.5
    return 0.5 * (1.0 + mag * math.cos(phi_target - math.atan2(alpha_kk.imag, alpha_kk.real)))


def fidelity_state(psi_num, psi_id) -> float:
    """(1 + Re<psi_id|psi_num>) / 2 for two normalised states."""
    if isinstance(psi_num, WaveFunction):
        ov = psi_id.overlap(psi_num)
    else:
        a = getattr(psi_num, "coeffs", psi_num)
        b = getattr(psi_id, "coeffs", psi_id)
        ov = np.vdot(b, a)
    return 0.5 * (1.0 + float(np.real(ov)))


def internal_fidelity(c: np.ndarray, alpha_row: np.ndarray, k: int, phi_target: float) -> float:
    """Explicit overlap fidelity for internal amplitudes c = (c_gg, c_ge, c_eg, c_ee).

    Only |gg> picks up the motional row alpha_kk'; the other branches keep |k>.
    """
    c = np.asarray(c, dtype=complex)
    c = c / np.linalg.norm(c)
    g = abs(c[0]) ** 2
    vec = g * np.exp(-1j * phi_target) * np.asarray(alpha_row, dtype=complex)
    vec[k] += 1.0 - g
    return float(np.sum(np.abs(vec) ** 2))


@dataclass(frozen=True)
class MotionalDensity:
    """Diagonal relative-motion density operator in the Fock basis."""

    weights: np.ndarray
    label: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-6:
            raise ValueError(f"weights sum to {w.sum():.8f}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def entropy(self) -> float:
        return entropy(self.weights)


def entropy(weights) -> float:
    """-sum w ln w in units of k_B, with 0 ln 0 = 0."""
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def thermal_levels(kT: float, min_levels: int = 3) -> int:
    """Number of levels needed so that the highest has E_k >= 5 kT."""
    if not kT > 0:
        raise ValueError(f"temperature must be > 0, got {kT}")
    k_top = max(0, math.ceil(5.0 * kT - 0.5))
    return max(min_levels, k_top + 1)


def thermal_density(kT: float, n_levels: int | None = None) -> MotionalDensity:
    """Canonical weights 2 sinh(E0/kT) exp(-E_k/kT), renormalised over the kept levels."""
    n = thermal_levels(kT) if n_levels is None else n_levels
    energies = np.arange(n) + 0.5
    # shift by E0 before exponentiating; the normalisation absorbs the factor
    w = np.exp(-(energies - 0.5) / kT)
    return MotionalDensity(w / w.sum(), label=f"thermal(kT={kT:g})")


def _level_fidelity(params: GateParams, k: int) -> tuple[float, bool]:
    out = run_gate(params, k)
    return out.F_k, out.untrusted


def level_fidelities(params: GateParams, n_levels: int, jobs: int = 1) -> tuple[np.ndarray, bool]:
    """F_k for k = 0..n_levels-1 and whether any run was untrusted."""
    if n_levels - 1 > params.n_max:
        params = replace(params, n_max=n_levels - 1)
    res = ordered_map(partial(_level_fidelity, params), range(n_levels), jobs)
    return np.array([r[0] for r in res]), any(r[1] for r in res)


@dataclass(frozen=True)
class ThermalResult:
    kT: float
    fidelity: float
    n_levels: int
    untrusted: bool


def fidelity_thermal(params: GateParams, kT: float, jobs: int = 1,
                     level_F: np.ndarray | None = None) -> ThermalResult:
    rho = thermal_density(kT)
    n = len(rho.weights)
    untrusted = False
    if level_F is None or len(level_F) < n:
        level_F, untrusted = level_fidelities(params, n, jobs)
    return ThermalResult(kT, float(rho.weights @ level_F[:n]), n, untrusted)


@dataclass(frozen=True)
class CycleResult:
    n: int
    density: MotionalDensity
    entropy: float
    fidelity: float
    truncation_loss: float
    untrusted: bool


def iterate_cycles(params: GateParams, n_cycles: int, jobs: int = 1,
                   level_F: np.ndarray | None = None) -> list[CycleResult]:
    """Apply the gate repeatedly to |0> and report the diagonal motional state after each."""
    if n_cycles < 1:
        raise ValueError(f"n_cycles must be >= 1, got {n_cycles}")
    n_levels = params.n_max + 1
    levels_untrusted = False
    if level_F is None:
        level_F, levels_untrusted = level_fidelities(params, n_levels, jobs)
    grid = params.grid_spec()
    psi = engine.init_fock_on_grid(0, grid, params.x0)
    untrusted = False
    results = []
    for n in range(1, n_cycles + 1):
        psi, _, leaked = propagate(params, psi)
        untrusted = untrusted or leaked
        pops = engine.project_to_fock(psi, params.n_max, params.x0).populations
        loss = float(1.0 - pops.sum())
        if loss > TRUNCATION_WARN:
            log.warning("cycle %d: Fock truncation loss %.2e exceeds %.0e", n, loss,
                        TRUNCATION_WARN)
        rho = MotionalDensity(pops / pops.sum(), label=f"cycle(N={n})")
        results.append(CycleResult(n=n, density=rho, entropy=rho.entropy,
                                   fidelity=float(rho.weights @ level_F[:n_levels]),
                                   truncation_loss=loss,
                                   untrusted=untrusted or levels_untrusted))
    return results


FACTOR = 10.0


@dataclass(frozen=True)
class ValidityReport:
    """Validity margins of the kick approximations.

    The first three are "much less than one" ratios, the next three "much
    greater than one" ratios; ``rabi_margin`` is None without hardware data.
    """

    impulse_margin: float
    phase_margin: float
    linear_margin: float
    fast_x0_margin: float
    fast_dt_margin: float
    rabi_margin: float | None
    r_bound: float

    SMALL = ("impulse_margin", "phase_margin", "linear_margin")
    LARGE = ("fast_x0_margin", "fast_dt_margin", "rabi_margin")

    def status(self) -> dict[str, bool]:
        """PASS (True) when a margin beats its bound by the factor-ten convention."""
        out = {}
        for name in self.SMALL:
            out[name] = getattr(self, name) <= 1.0 / FACTOR * (1 + 1e-9)
        for name in self.LARGE:
            value = getattr(self, name)
            if value is not None:
                out[name] = value >= FACTOR * (1 - 1e-9)
        return out


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num > 0 else 0.0
    return num / den


def check_validity(params: GateParams, rabi: float | None = None) -> ValidityReport:
    """Margins estimated for a ground-state start, bounded by the coherent radius R = p1.

    ``rabi`` is the Rabi frequency in units of the trap frequency.
    """
    phi = abs(params.phi_target)
    if params.alpha_plus_sq == 0 and params.action > 0:
        alpha_sq, dt1 = 0.0, math.inf
    else:
        alpha_sq, dt1 = params.resolved()
    r = phasespace.first_kick_momentum(params.action, params.x0)
    h0 = r**2 + 0.5
    v_plus = alpha_sq / params.x0**3
    return ValidityReport(
        impulse_margin=_ratio(h0, v_plus),
        phase_margin=_ratio(h0 * dt1, phi),
        linear_margin=(math.sqrt(2) * r + 1 / math.sqrt(2)) / params.x0,
        fast_x0_margin=params.x0 / math.sqrt(phi / params.theta) if phi else math.inf,
        fast_dt_margin=_ratio(2 * params.theta, dt1),
        rabi_margin=None if rabi is None else rabi_margin(rabi, alpha_sq, params.x0),
        r_bound=r,
    )
