import math

import numpy as np
import pytest
from scipy.linalg import expm

T_HO = 2 * math.pi


def annihilation(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def displacement_matrix(alpha, cutoff):
    a = annihilation(cutoff)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def free_matrix(t, cutoff):
    return np.diag(np.exp(-1j * (np.arange(cutoff) + 0.5) * t))


def train_matrix(train, cutoff):
    """Time-ordered product of truncated-Fock operators for a pulse train."""
    from rydkick.phasespace import FreeEvolution

    op = np.eye(cutoff, dtype=complex)
    for e in train:
        if isinstance(e, FreeEvolution):
            op = free_matrix(e.angle, cutoff) @ op
        else:
            op = displacement_matrix(1j * e.p, cutoff) @ op
    return op


@pytest.fixture
def ref_params():
    from rydkick.gate import GateParams

    def make(theta_T, x0, **kw):
        return GateParams(theta=theta_T * T_HO, x0=x0, dt1=1e-4 * T_HO, **kw)

    return make


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; lines are echoed and repeated in the terminal summary."""
    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
