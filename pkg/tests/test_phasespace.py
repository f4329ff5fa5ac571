import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import displacement_matrix, free_matrix, train_matrix
from rydkick.phasespace import (Displacement, FreeEvolution, Kick, PulseTrain, build_schedule,
                                close_triangle, compose, enclosed_area, factor_ten_design,
                                phase_budget, reduce_train, rotate, schedule_from_action,
                                solve_kick_time)
from rydkick.physpar import DipoleOrientation

T_HO = 2 * math.pi
PI = math.pi


def oracle_compose_phase(a, b, cutoff=60):
    """Phase of D(a)D(b) relative to D(a+b), read from the vacuum amplitude."""
    prod = displacement_matrix(a, cutoff) @ displacement_matrix(b, cutoff)
    return cmath.phase(prod[0, 0])


def wrap(phi):
    return (phi + PI) % (2 * PI) - PI


def test_compose_identity():
    d = Displacement(0.3 - 0.7j, 1.25)
    assert compose(d, Displacement()) == d


@pytest.mark.parametrize("a, b, increment", [(1j, 1, 1.0), (1, 1j, -1.0)])
def test_compose_examples(a, b, increment):
    d = compose(Displacement(a), Displacement(b))
    assert d.alpha == pytest.approx(1 + 1j)
    assert d.phase == pytest.approx(increment)
    assert oracle_compose_phase(a, b) == pytest.approx(increment, abs=1e-10)


def test_compose_accumulates_input_phases():
    d = compose(Displacement(1j, 0.5), Displacement(1, -0.25))
    assert d.phase == pytest.approx(1.25)


@given(st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2),
       st.complex_numbers(max_magnitude=2))
def test_compose_associative(a, b, c):
    A, B, C = Displacement(a), Displacement(b), Displacement(c)
    left = compose(compose(A, B), C)
    right = compose(A, compose(B, C))
    assert left.alpha == pytest.approx(right.alpha, abs=1e-12)
    assert left.phase == pytest.approx(right.phase, abs=1e-10)


def test_rotate():
    d = Displacement(0.4 + 0.2j, 0.7)
    assert rotate(d, 0.0) == d
    q = rotate(Displacement(1.0), PI / 2)
    assert q.alpha == pytest.approx(-1j)
    assert q.phase == 0.0
    assert rotate(rotate(d, 0.3), 0.3).alpha == pytest.approx(rotate(d, 0.6).alpha)


def test_rotate_matches_operator_identity():
    t, alpha, n = 0.9, 0.6 - 0.3j, 50
    lhs = free_matrix(t, n) @ displacement_matrix(alpha, n)
    rhs = displacement_matrix(rotate(Displacement(alpha), t).alpha, n) @ free_matrix(t, n)
    assert np.allclose(lhs[:30, :30], rhs[:30, :30], atol=1e-10)


def symmetric_train(p1, theta):
    p2, p3 = close_triangle(p1, theta)
    return PulseTrain([Kick(p1), FreeEvolution(theta), Kick(-p2), FreeEvolution(theta), Kick(p3)])


def test_reduce_symmetric_triangle():
    net, phi_geom, rot = reduce_train(symmetric_train(1.0, PI / 4))
    assert abs(net.alpha) < 1e-12
    assert phi_geom == pytest.approx(-1.0, abs=1e-14)
    assert rot == pytest.approx(PI / 2)
    vac = train_matrix(symmetric_train(1.0, PI / 4), 80)[0, 0]
    assert wrap(cmath.phase(vac) + rot / 2) == pytest.approx(-1.0, abs=1e-8)


def test_reduce_zero_kicks():
    net, phi_geom, _ = reduce_train([Kick(0.0), FreeEvolution(1.0), Kick(0.0)])
    assert net.alpha == 0 and phi_geom == 0


def random_train(rng):
    n = rng.integers(1, 7)
    elems = []
    for i in range(n):
        if i % 2 == 0:
            elems.append(Kick(rng.uniform(-2, 2)))
        else:
            elems.append(FreeEvolution(rng.uniform(0, PI)))
    return PulseTrain(elems)


def test_algebra_against_fock_oracle():
    rng = np.random.default_rng(20240611)
    cutoff = 80
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    for _ in range(200):
        train = random_train(rng)
        net, phi_geom, rot = reduce_train(train)
        state = free_matrix(-rot, cutoff) @ train_matrix(train, cutoff)[:, 0]
        label = np.vdot(state, a @ state)
        assert abs(label - net.alpha) < 1e-8
        assert abs(wrap(cmath.phase(state[0]) - phi_geom)) < 1e-6


def closed_generic(p1, th1, th2):
    """Solve p1 - p2 e^{i th1} + p3 e^{i(th1+th2)} = 0 for real p2, p3."""
    m = np.array([[-math.cos(th1), math.cos(th1 + th2)],
                  [-math.sin(th1), math.sin(th1 + th2)]])
    p2, p3 = np.linalg.solve(m, [-p1, 0.0])
    return PulseTrain([Kick(p1), FreeEvolution(th1), Kick(-p2), FreeEvolution(th2), Kick(p3)])


@given(st.floats(-2, 2), st.floats(0.05, PI / 2 - 0.05))
def test_geometric_phase_is_minus_twice_area_symmetric(p1, theta):
    train = symmetric_train(p1, theta)
    net, phi_geom, _ = reduce_train(train)
    assert abs(net.alpha) < 1e-12
    assert phi_geom == pytest.approx(-2 * enclosed_area(train.vertices()[:-1]), abs=1e-10)
    assert phi_geom == pytest.approx(-p1**2 * math.sin(2 * theta), abs=1e-12)


@given(st.floats(0.1, 2), st.floats(0.1, 1.4), st.floats(0.1, 1.4))
def test_geometric_phase_is_minus_twice_area_generic(p1, th1, th2):
    train = closed_generic(p1, th1, th2)
    net, phi_geom, _ = reduce_train(train)
    assert abs(net.alpha) < 1e-10
    assert phi_geom == pytest.approx(-2 * enclosed_area(train.vertices()[:-1]), abs=1e-10)


@given(st.floats(1e-3, 3), st.floats(0.01, PI / 2 - 0.01))
def test_geometric_phase_sign(p1, theta):
    _, phi_geom, _ = reduce_train(symmetric_train(p1, theta))
    assert phi_geom <= 0


def test_close_triangle_examples():
    p2, p3 = close_triangle(1.0, PI / 3)
    assert (p2, p3) == (pytest.approx(1.0), 1.0)
    assert abs(1 - p2 * cmath.exp(1j * PI / 3) + p3 * cmath.exp(2j * PI / 3)) < 1e-12
    assert close_triangle(0.0, 0.4) == (0.0, 0.0)
    p2, p3 = close_triangle(1.0, PI / 2)
    assert p2 == pytest.approx(0.0, abs=1e-15) and p3 == 1.0
    assert symmetric_train(1.0, PI / 2).closed


@pytest.mark.parametrize("theta", [0.0, -0.1, PI / 2 + 1e-6, PI])
def test_close_triangle_domain(theta):
    with pytest.raises(ValueError):
        close_triangle(1.0, theta)


def total_phase_of_action(action, theta, x0):
    """Total phase for a given alpha+^2*dt1 product."""
    return (-2 * action / x0**3 * (1 - math.cos(theta))
            - 4.5 * action**2 / x0**8 * math.sin(2 * theta))


def test_solve_zero_phase():
    assert solve_kick_time(0.0, 0.3, 20.0, 1e8) == 0.0


def test_solve_near_half_pi():
    x0, alpha = 30.0, 1e8
    theta = PI / 2 - 1e-6
    got = alpha * solve_kick_time(-PI, theta, x0, alpha)
    assert got == pytest.approx(PI * x0**3 / 2, rel=1e-4)
    # direct (unrationalised) root at the same angle
    s, c = math.sin(2 * theta), math.cos(theta)
    direct = 2 / 9 * x0**5 / s * (c - 1 + math.sqrt((c - 1) ** 2 + 4.5 * s / x0**2 * PI))
    assert got == pytest.approx(direct, rel=1e-4)


def test_solve_fast_limit():
    x0, theta = 40.0, 1e-4
    got = solve_kick_time(-PI, theta, x0, 1.0)
    assert got == pytest.approx(x0**4 / 3 * math.sqrt(PI / theta), rel=0.01)


def test_solve_continuous_at_switch():
    x0, alpha = 25.0, 3e7
    eps = 0.5e-8  # switch where sin(2 theta) ~ 2 eps = 1e-8
    inside = solve_kick_time(-PI, PI / 2 - 0.9 * eps, x0, alpha)
    outside = solve_kick_time(-PI, PI / 2 - 1.1 * eps, x0, alpha)
    assert inside == pytest.approx(outside, rel=1e-6)


@settings(max_examples=300)
@given(st.floats(1e-3, 2 * PI), st.floats(1e-4, PI / 2), st.floats(2, 200),
       st.floats(1e2, 1e12))
def test_solve_back_substitution(phi, theta, x0, alpha):
    dt1 = solve_kick_time(-phi, theta, x0, alpha)
    assert dt1 >= 0
    assert total_phase_of_action(alpha * dt1, theta, x0) == pytest.approx(-phi, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("args", [(-PI, 0.0, 10.0, 1.0), (-PI, 2.0, 10.0, 1.0),
                                  (-PI, 0.5, -1.0, 1.0), (-PI, 0.5, 10.0, 0.0)])
def test_solve_domain(args):
    with pytest.raises(ValueError):
        solve_kick_time(*args)


def test_build_schedule_structure():
    sched, train = build_schedule(-PI, 0.1 * T_HO, 40.0, 7.9e8)
    kinds = [type(e).__name__ for e in train]
    assert kinds == ["Kick", "FreeEvolution", "Kick", "FreeEvolution", "Kick"]
    P, A = DipoleOrientation.PERPENDICULAR, DipoleOrientation.PARALLEL
    assert [k.orientation for k in train.kicks] == [P, A, P]
    assert [math.copysign(1, k.p) for k in train.kicks] == [1, -1, 1]
    assert sched.dt2 == pytest.approx(sched.dt1 * math.cos(sched.theta), rel=1e-12)
    assert sched.p2 == pytest.approx(2 * sched.p1 * math.cos(sched.theta), rel=1e-12)
    assert sched.p3 == sched.p1
    assert train.closed


def test_build_schedule_p1_matches_scalar_script():
    # frozen from a standalone evaluation of the kick-time root and p1 = (3/sqrt2) a dt1 / x0^4
    sched, _ = build_schedule(-PI, 0.1 * T_HO, 40.0, 1e9)
    assert 1e9 * sched.dt1 == pytest.approx(499127.51052642113, rel=1e-12)
    assert sched.p1 == pytest.approx(0.4135973992617097, rel=1e-12)


@given(st.floats(0.1, 2 * PI), st.floats(1e-3, PI / 2), st.floats(3, 100), st.floats(1e3, 1e11))
def test_build_schedule_always_closed(phi, theta, x0, alpha):
    sched, train = build_schedule(-phi, theta, x0, alpha)
    net, phi_geom, _ = reduce_train(train)
    assert abs(net.alpha) < 1e-12 * max(1.0, sched.p1)
    budget = phase_budget(sched, alpha)
    assert phi_geom == pytest.approx(budget.phi_geom, rel=1e-9, abs=1e-14)
    assert budget.phi_total == pytest.approx(-phi, rel=1e-9)


def test_phase_budget_zero_kick():
    sched, _ = schedule_from_action(0.0, 0.4, 20.0, 0.0, 0.0)
    b = phase_budget(sched, 1e6)
    assert b.phi_dyn == 0 and b.phi_geom == 0
    assert b.gate_time == pytest.approx(0.8)


def test_phase_budget_gate_time():
    sched, _ = build_schedule(-PI, 0.3, 20.0, 1e8)
    b = phase_budget(sched, 1e8)
    assert b.gate_time == pytest.approx(sched.dt1 * (2 + math.cos(0.3)) + 0.6, rel=1e-14)


def test_fast_gate_phase_split():
    x0, theta, alpha = 40.0, 1e-4, 1e10
    sched, _ = build_schedule(-PI, theta, x0, alpha)
    b = phase_budget(sched, alpha)
    assert b.phi_dyn == pytest.approx(-(x0 / 3) * theta**1.5 * math.sqrt(PI), rel=0.01)
    assert b.phi_geom == pytest.approx(-PI, rel=1e-3)


def test_rb_design_point():
    d = factor_ten_design(1.2e9, -PI)
    assert d.theta == pytest.approx(0.09, abs=0.005)
    assert d.x0 == pytest.approx(58, abs=1)
    assert 2 * d.theta / T_HO == pytest.approx(0.03, abs=0.005)
    assert d.dt1 == pytest.approx(d.theta / 5)
