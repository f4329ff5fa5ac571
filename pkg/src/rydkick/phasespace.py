"""Closed-form kick protocol design.

Displacements are labelled by complex alpha with D(alpha) = exp(alpha a^+ - alpha^* a).
A momentum kick p corresponds to D(i p/sqrt 2); ``p`` in this module
always means the scaled momentum p/sqrt 2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from rydkick.physpar import DipoleOrientation

CLOSURE_TOL = 1e-12
_SIN2_SWITCH = 1e-8


@dataclass(frozen=True)
class Displacement:
    """D(alpha) times exp(i*phase); the phase is kept unreduced."""

    alpha: complex = 0j
    phase: float = 0.0


def compose(a: Displacement, b: Displacement) -> Displacement:
    """Operator product ``a @ b`` using D(x)D(y) = D(x+y) exp(i Im(x y*))."""
    extra = (a.alpha * b.alpha.conjugate()).imag
    return Displacement(a.alpha + b.alpha, a.phase + b.phase + extra)


def rotate(d: Displacement, t: float) -> Displacement:
    """Move D past a free evolution: U(t) D(alpha) = D(exp(-i t) alpha) U(t)."""
    return Displacement(d.alpha * cmath.exp(-1j * t), d.phase)


@dataclass(frozen=True)
class Kick:
    p: float
    duration: float = 0.0
    orientation: DipoleOrientation = DipoleOrientation.PERPENDICULAR

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"kick duration must be >= 0, got {self.duration}")


@dataclass(frozen=True)
class FreeEvolution:
    angle: float

    def __post_init__(self):
        if self.angle < 0:
            raise ValueError(f"free evolution angle must be >= 0, got {self.angle}")


PulseElement = Union[Kick, FreeEvolution]


@dataclass(frozen=True)
class PulseTrain:
    """Time-ordered pulse elements (first element acts first)."""

    elements: tuple[PulseElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    @property
    def kicks(self) -> list[Kick]:
        return [e for e in self.elements if isinstance(e, Kick)]

    @property
    def closed(self) -> bool:
        net, _, _ = reduce_train(self)
        return abs(net.alpha) < CLOSURE_TOL

    def vertices(self) -> list[complex]:
        """Rotating-frame phase-space corners visited by the train, starting at 0."""
        pts = [0j]
        t = 0.0
        for e in self.elements:
            if isinstance(e, FreeEvolution):
                t += e.angle
            else:
                pts.append(pts[-1] + 1j * e.p * cmath.exp(1j * t))
        return pts


def reduce_train(train: PulseTrain | Sequence[PulseElement]):
    """Rewrite a train as U_ho(T) D(net) exp(i phi_geom).

    Returns
    -------
    net : Displacement
        Net displacement in the rotating frame (its ``phase`` equals phi_geom).
    phi_geom : float
    total_rotation : float
        Total free-evolution angle T.
    """
    acc = Displacement()
    t = 0.0
    for e in train:
        if isinstance(e, FreeEvolution):
            t += e.angle
        else:
            # D(g) U(t) = U(t) D(exp(i t) g)
            kick = Displacement(1j * e.p * cmath.exp(1j * t))
            acc = compose(kick, acc)
    return acc, acc.phase, t


def enclosed_area(vertices: Sequence[complex]) -> float:
    """Oriented polygon area in the alpha plane, positive for clockwise circulation.

    Clockwise is the sense of free rotation U_ho(t), so the kick triangle of
    the gate has positive area.
    """
    z = np.asarray(vertices, dtype=complex)
    x, y = z.real, z.imag
    return -0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _check_theta(theta: float) -> None:
    if not 0 < theta <= math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2], got {theta}")


def close_triangle(p1: float, theta: float) -> tuple[float, float]:
    """Second and third kick strengths closing the symmetric triangle."""
    _check_theta(theta)
    return 2.0 * p1 * math.cos(theta), p1


def solve_kick_time(phi_target: float, theta: float, x0: float,
                    alpha_plus_sq: float) -> float:
    """Duration of the first kick giving total phase ``phi_target``.

    Solves -2 (a/x0^3) t (1 - cos th) - (9/2)(a^2/x0^8) t^2 sin 2th = -|phi|
    for the non-negative root t, with a = alpha+^2.
    """
    _check_theta(theta)
    if x0 <= 0:
        raise ValueError(f"x0 must be > 0, got {x0}")
    if alpha_plus_sq <= 0:
        raise ValueError(f"alpha_plus_sq must be > 0, got {alpha_plus_sq}")
    return kick_action(phi_target, theta, x0) / alpha_plus_sq


def kick_action(phi_target: float, theta: float, x0: float) -> float:
    """alpha+^2 * dt1 for the given target phase (independent of alpha+^2)."""
    _check_theta(theta)
    phi = abs(phi_target)
    if phi == 0:
        return 0.0
    s2 = math.sin(2 * theta)
    if abs(s2) < _SIN2_SWITCH:
        return phi * x0**3 / 2
    one_minus_c = 1.0 - math.cos(theta)
    b = 4.5 * s2 * phi / x0**2
    # (2/9) x0^5/s2 [c - 1 + sqrt((1-c)^2 + b)], rationalised to avoid cancellation
    return phi * x0**3 / (math.sqrt(one_minus_c**2 + b) + one_minus_c)


def first_kick_momentum(action: float, x0: float) -> float:
    """p1 = (3/sqrt 2) alpha+^2 dt1 / x0^4 from the linearised dipole force."""
    return 3.0 / math.sqrt(2.0) * action / x0**4


@dataclass(frozen=True)
class ProtocolSchedule:
    theta: float
    x0: float
    dt1: float
    dt2: float
    p1: float
    p2: float
    p3: float
    phi_target: float

    @property
    def train(self) -> PulseTrain:
        P, A = DipoleOrientation.PERPENDICULAR, DipoleOrientation.PARALLEL
        return PulseTrain((
            Kick(self.p1, self.dt1, P),
            FreeEvolution(self.theta),
            Kick(-self.p2, self.dt2, A),
            FreeEvolution(self.theta),
            Kick(self.p3, self.dt1, P),
        ))


@dataclass(frozen=True)
class PhaseBudget:
    phi_dyn: float
    phi_geom: float
    gate_time: float

    @property
    def phi_total(self) -> float:
        return self.phi_dyn + self.phi_geom


def gate_time(dt1: float, theta: float) -> float:
    return dt1 * (2.0 + math.cos(theta)) + 2.0 * theta


def phase_budget(schedule: ProtocolSchedule, alpha_plus_sq: float) -> PhaseBudget:
    th = schedule.theta
    phi_dyn = -2.0 * alpha_plus_sq / schedule.x0**3 * schedule.dt1 * (1.0 - math.cos(th))
    phi_geom = -schedule.p1**2 * math.sin(2 * th)
    return PhaseBudget(phi_dyn, phi_geom, gate_time(schedule.dt1, th))


def build_schedule(phi_target: float, theta: float, x0: float,
                   alpha_plus_sq: float) -> tuple[ProtocolSchedule, PulseTrain]:
    dt1 = solve_kick_time(phi_target, theta, x0, alpha_plus_sq)
    return schedule_from_action(phi_target, theta, x0, alpha_plus_sq * dt1, dt1)


def schedule_from_action(phi_target: float, theta: float, x0: float,
                         action: float, dt1: float) -> tuple[ProtocolSchedule, PulseTrain]:
    """Schedule for a given alpha+^2*dt1 product and first-kick duration."""
    p1 = first_kick_momentum(action, x0)
    p2, p3 = close_triangle(p1, theta)
    sched = ProtocolSchedule(theta=theta, x0=x0, dt1=dt1, dt2=dt1 * math.cos(theta),
                             p1=p1, p2=p2, p3=p3, phi_target=phi_target)
    return sched, sched.train


@dataclass(frozen=True)
class FastGateDesign:
    theta: float
    x0: float
    dt1: float
    gate_time: float


def factor_ten_design(alpha_plus_sq: float, phi_target: float = -math.pi) -> FastGateDesign:
    """Fastest gate meeting both fast-gate conditions by a factor of ten.

    Uses x0 = 10 sqrt(|phi|/theta), dt1 = theta/5 and the small-theta coupling
    alpha+^2 = (10^5 / 6 theta) (|phi|/theta)^(5/2), solved for theta.
    """
    phi = abs(phi_target)
    theta = ((10.0 * math.sqrt(phi)) ** 5 / (6.0 * alpha_plus_sq)) ** (2.0 / 7.0)
    dt1 = theta / 5.0
    return FastGateDesign(theta=theta, x0=10.0 * math.sqrt(phi / theta), dt1=dt1,
                          gate_time=gate_time(dt1, theta))
