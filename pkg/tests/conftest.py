"""Random system generators shared by the test modules."""

from __future__ import annotations

import numpy as np
import pytest

from netctrl.sysmodel import make_system


def random_matrix(rng, n, radius=None):
    """Dense Gaussian matrix, optionally rescaled to a given spectral radius."""
    A = rng.standard_normal((n, n))
    if radius is not None:
        A *= radius / np.max(np.abs(np.linalg.eigvals(A)))
    return A


def random_spd(rng, n, floor=0.1):
    G = rng.standard_normal((n, n))
    return G @ G.T / n + floor * np.eye(n)


def random_system(rng, n, radius=None, catalog="unit", m=None, weighted=False, **kw):
    """Random NetworkSystem.

    catalog="unit" uses e_1..e_n; "random" draws ``m`` Gaussian input vectors.
    ``weighted`` draws random SPD Q, QT, R instead of identities.
    """
    A = random_matrix(rng, n, radius)
    cat = None
    M = n
    if catalog == "random":
        M = m or n
        cat = list(rng.standard_normal((M, n)))
    if weighted:
        kw.setdefault("Q", random_spd(rng, n))
        kw.setdefault("QT", random_spd(rng, n))
        kw.setdefault("R", random_spd(rng, M, floor=0.5))
    return make_system(A, cat, **kw)


def random_unstable_diagonalizable(rng, n):
    """Real diagonalizable A with at least one eigenvalue outside the unit circle.

    Built as V diag(lam) V^{-1} with real eigenvalues in +-[0.3, 2.5] so both
    stable and unstable modes are present and cond(V) stays moderate.
    """
    while True:
        mags = rng.uniform(0.3, 2.5, n)
        mags[0] = rng.uniform(1.1, 2.5)
        lam = mags * rng.choice([-1.0, 1.0], n)
        V = np.eye(n) + 0.4 * rng.standard_normal((n, n))
        if np.linalg.cond(V) < 50:
            return V @ np.diag(lam) @ np.linalg.inv(V)


def random_stable(rng, n, normal=False):
    if normal:
        Qm, _ = np.linalg.qr(rng.standard_normal((n, n)))
        return Qm @ np.diag(rng.uniform(-0.95, 0.95, n)) @ Qm.T
    return random_matrix(rng, n, radius=rng.uniform(0.2, 0.95))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_unstable():
    """A=2, B=1, Q=R=QT=W=X0=1."""
    return make_system([[2.0]])


@pytest.fixture
def scalar_stable():
    return make_system([[0.5]])


# --- acceptance reporting ----------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, title, ok, detail, elapsed, limit):
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        line = f"[acceptance {number:>2}] {status}  {title}: {detail} ({elapsed:.2f}s, limit {limit:g}s)"
        lines.append(line)
        print(line)
        assert ok, line
        assert within, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("]")[0].split()[-1])):
            terminalreporter.write_line(line)
