"""Controllability Gramians of the inverse dynamics (A^{-1}, B_S).

For vanishing state cost the inverse Riccati matrix obeys a Gramian-type
recursion in A^{-1}; the minimum eigenvalue of that Gramian drives the lower
bound on the optimal cost of unstable networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import Defective, DomainError, SingularDynamics
from .sysmodel import DEFECTIVE_COND, INVERTIBILITY_RTOL, NetworkSystem, as_actuator_set

GRAMIAN_INCREMENT_TOL = 1e-12
GRAMIAN_MAX_STAGES = 10**5


@dataclass
class GramianResult:
    """Xbar is the T-stage Gramian sum_{tau<T} A^{-tau} B B' A^{-tau'};
    X_full is the recursion state X_T, which also carries the stage-T input
    term and the transported terminal term A^{-T} QT^{-1} A^{-T'}."""

    Xbar: np.ndarray
    X_full: np.ndarray
    T: int
    hit_cap: bool = False


def _inverse_dynamics(sys: NetworkSystem) -> np.ndarray:
    s = np.linalg.svd(sys.A, compute_uv=False)
    if s[-1] < INVERTIBILITY_RTOL * s[0]:
        raise SingularDynamics("A^{-1} needed but A is numerically singular")
    return np.linalg.inv(sys.A)


def inverse_gramian(sys: NetworkSystem, S: Iterable[int], T: int, QT: np.ndarray | None = None) -> GramianResult:
    """Run X_{tau+1} = A^{-1} X_tau A^{-T} + B B' from X_0 = QT^{-1} + B B'.

    Input weights are taken as R_S = I; fold any other weighting into the
    catalog columns.
    """
    S = as_actuator_set(S, sys.M)
    if T < 0:
        raise ValueError(f"stage count must be >= 0, got {T}")
    Ainv = _inverse_dynamics(sys)
    B = sys.input_matrix(S)
    BB = B @ B.T
    QT = sys.QT if QT is None else np.atleast_2d(np.asarray(QT, dtype=float))

    X = np.linalg.inv(QT) + BB
    Xbar = np.zeros_like(BB)
    term = BB.copy()
    for _ in range(T):
        X = Ainv @ X @ Ainv.T + BB
        Xbar = Xbar + term
        term = Ainv @ term @ Ainv.T
    return GramianResult(Xbar=(Xbar + Xbar.T) / 2, X_full=(X + X.T) / 2, T=int(T))


def inverse_gramian_closed_form(sys: NetworkSystem, S: Iterable[int], T: int, QT: np.ndarray | None = None) -> np.ndarray:
    """X_T as an explicit sum: sum_{tau=0..T} A^{-tau} BB' A^{-tau'} + A^{-T} QT^{-1} A^{-T'}."""
    S = as_actuator_set(S, sys.M)
    Ainv = _inverse_dynamics(sys)
    B = sys.input_matrix(S)
    QT = sys.QT if QT is None else np.atleast_2d(np.asarray(QT, dtype=float))
    X = np.zeros((sys.n, sys.n))
    for tau in range(T + 1):
        Ft = np.linalg.matrix_power(Ainv, tau) @ B
        X += Ft @ Ft.T
    AT = np.linalg.matrix_power(Ainv, T)
    X += AT @ np.linalg.inv(QT) @ AT.T
    return (X + X.T) / 2


def inverse_gramian_limit(sys: NetworkSystem, S: Iterable[int], max_stages: int = GRAMIAN_MAX_STAGES) -> GramianResult:
    """Approximate Xbar_inf by summing until the increment drops below 1e-12.

    ``hit_cap`` is set when ``max_stages`` terms were summed without meeting
    the increment tolerance (the inverse dynamics have non-decaying modes).
    """
    S = as_actuator_set(S, sys.M)
    Ainv = _inverse_dynamics(sys)
    B = sys.input_matrix(S)
    Xbar = np.zeros((sys.n, sys.n))
    F = B.copy()
    T = 0
    hit_cap = True
    while T < max_stages:
        inc = F @ F.T
        Xbar += inc
        T += 1
        F = Ainv @ F
        if np.linalg.norm(inc) <= GRAMIAN_INCREMENT_TOL * max(1.0, np.linalg.norm(Xbar)):
            hit_cap = False
            break
    Xbar = (Xbar + Xbar.T) / 2
    return GramianResult(Xbar=Xbar, X_full=Xbar, T=T, hit_cap=hit_cap)


@dataclass
class GramianBound:
    bound: float
    n_bar: int
    cond_V: float
    mu: float
    k: int


def gramian_min_eig_bound(sys: NetworkSystem, k: int, mu: float) -> GramianBound:
    """Upper bound on lambda_min of the k-input Gramian of (A^{-1}, B_S).

    bound = cond(V)^2 mu^{2(n_bar/k - 1)} / (1 - mu^2), where n_bar counts
    eigenvalues of A^{-1} with magnitude at most mu and V diagonalizes A.

    Raises:
        Defective: cond(V) >= 1e12.
        DomainError: mu outside [|lambda_min(A^{-1})|, 1).
    """
    if k < 1:
        raise ValueError(f"subset size must be >= 1, got {k}")
    cond = sys.cond_V
    if not cond < DEFECTIVE_COND:
        raise Defective(f"eigenvector matrix condition number {cond:.3e} exceeds {DEFECTIVE_COND:.0e}")
    inv_mags = 1.0 / np.abs(sys.eig[0])
    lo = float(inv_mags.min())
    if not (lo * (1 - 1e-12) <= mu < 1.0):
        raise DomainError(f"mu must lie in [{lo:.6g}, 1), got {mu}")
    n_bar = int(np.sum(inv_mags <= mu * (1 + 1e-12)))
    bound = cond**2 * mu ** (2 * (n_bar / k - 1)) / (1 - mu**2)
    return GramianBound(bound=float(bound), n_bar=n_bar, cond_V=cond, mu=float(mu), k=int(k))


def min_eig(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((X + X.T) / 2)[0])

