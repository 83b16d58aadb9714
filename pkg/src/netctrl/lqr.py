"""Optimal LQR/LQG cost matrices for a network driven by an actuator subset.

Four routes to the cost matrix are provided and cross-checked in the tests:
the batch least-squares formula, the backward Riccati recursion, the
algebraic Riccati equation (fixed-point or doubling iteration), and the
Lyapunov equation for the unactuated case.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import NoConvergence, NotStabilizable, TooLarge, Unstable
from .sysmodel import NetworkSystem, as_actuator_set, is_stabilizable, psd_sqrt, spectral_radius

log = logging.getLogger(__name__)

ARE_TOL = 1e-11
FIXED_POINT_MAX_ITER = 10**6
DOUBLING_MAX_ITER = 100
BATCH_MAX_TN = 5000
DIVERGENCE_NORM = 1e12


@dataclass
class CostSolution:
    """Optimal cost matrix plus solver diagnostics.

    ``horizon`` is an int for finite-horizon problems and ``"infinite"`` for
    ARE solutions. ``residual`` is the relative Frobenius residual of the
    Riccati equation at ``P`` (zero for closed-form routes).
    """

    P: np.ndarray
    horizon: int | str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "P": [float(x) for x in self.P.ravel()],
            "n": int(self.P.shape[0]),
            "horizon": self.horizon,
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
            "method": self.method,
        }


@dataclass
class CostFunctionals:
    lambda_max: float
    trace: float
    average: float


@dataclass
class BatchMatrices:
    """Stacked matrices of the batch least-squares LQR problem.

    G is ((T+1)n x n), H is ((T+1)n x Tn), Bdiag is (Tn x T|S|). G and H
    already carry the cost weighting Q^{1/2} (QT^{1/2} on the last block).
    """

    G: np.ndarray
    H: np.ndarray
    Bdiag: np.ndarray


def _sym(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2


def influence_matrix(sys: NetworkSystem, S: Sequence[int]) -> np.ndarray:
    """B_S R_S^{-1} B_S^T."""
    n = sys.n
    if len(S) == 0:
        return np.zeros((n, n))
    B = sys.input_matrix(S)
    c = sla.cho_factor(sys.input_cost(S))
    return _sym(B @ sla.cho_solve(c, B.T))


def riccati_step(A, B, R, Q, P) -> np.ndarray:
    """One backward step P -> Q + A'PA - A'PB (R + B'PB)^{-1} B'PA."""
    AtPA = A.T @ P @ A
    if B.shape[1] == 0:
        return _sym(Q + AtPA)
    BtPA = B.T @ P @ A
    c = sla.cho_factor(R + B.T @ P @ B)
    return _sym(Q + AtPA - BtPA.T @ sla.cho_solve(c, BtPA))


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = np.linalg.norm(new)
    diff = np.linalg.norm(new - old)
    return float(diff / scale) if scale > 0 else float(diff)


def riccati_residual(sys: NetworkSystem, S: Sequence[int], P: np.ndarray) -> float:
    """Relative Frobenius residual ||P - F(P)|| / ||P|| of the ARE."""
    S = as_actuator_set(S, sys.M)
    F = riccati_step(sys.A, sys.input_matrix(S), sys.input_cost(S), sys.Q, P)
    return _relative_change(P, F) if np.linalg.norm(P) > 0 else float(np.linalg.norm(F))


def riccati_recursion(sys: NetworkSystem, S: Iterable[int], T: int) -> list[np.ndarray]:
    """Backward Riccati recursion from P_T = QT.

    Returns the list ``[P_0, P_1, ..., P_T]``.
    """
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    S = as_actuator_set(S, sys.M)
    A, B, R, Q = sys.A, sys.input_matrix(S), sys.input_cost(S), sys.Q
    Ps = [np.array(sys.QT)]
    for _ in range(T):
        Ps.append(riccati_step(A, B, R, Q, Ps[-1]))
    return Ps[::-1]


def _fixed_point(sys, S, tol, max_iter):
    A, B, R, Q = sys.A, sys.input_matrix(S), sys.input_cost(S), sys.Q
    P = np.array(sys.QT)
    change = np.inf
    it = 0
    while it < max_iter:
        it += 1
        P_new = riccati_step(A, B, R, Q, P)
        change = _relative_change(P_new, P)
        P = P_new
        if change <= tol:
            break
        if not np.all(np.isfinite(P)):
            break
    return P, it, change <= tol


def _doubling(sys, S, tol, max_iter):
    """Structure-preserving doubling; iterate k equals fixed-point step 2^k - 1 from P = 0."""
    n = sys.n
    I = np.eye(n)
    Ak = np.array(sys.A)
    G = influence_matrix(sys, S)
    H = np.array(sys.Q)
    ok = False
    it = 0
    while it < max_iter:
        it += 1
        Wm = I + G @ H
        X1 = np.linalg.solve(Wm, Ak)
        X2 = np.linalg.solve(Wm, G)
        H_new = _sym(H + Ak.T @ H @ X1)
        G = _sym(G + Ak @ X2 @ Ak.T)
        Ak = Ak @ X1
        change = _relative_change(H_new, H)
        H = H_new
        if not np.all(np.isfinite(H)):
            break
        if change <= tol:
            ok = True
            break
    return H, it, ok


def solve_are(
    sys: NetworkSystem,
    S: Iterable[int],
    tol: float = ARE_TOL,
    max_iter: int | None = None,
    method: str = "doubling",
    check: bool = True,
) -> CostSolution:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    ``method="fixed_point"`` iterates the Riccati recursion from P = QT until
    the relative change drops below ``tol`` (at most 10**6 steps by default).
    ``method="doubling"`` runs the structure-preserving doubling algorithm,
    whose k-th iterate equals 2**k - 1 recursion steps, so it reaches the same
    limit in a few dozen iterations even when the closed loop is nearly
    marginal.

    Raises:
        NotStabilizable: some mode with |lambda| >= 1 is not reached by B_S.
        NoConvergence: iteration budget exhausted; ``exc.solution`` carries
            the last iterate with ``converged=False``.
    """
    S = as_actuator_set(S, sys.M)
    if check and not is_stabilizable(sys, S):
        raise NotStabilizable(f"(A, B_S) is not stabilizable for S={list(S)}")
    if method == "fixed_point":
        P, it, ok = _fixed_point(sys, S, tol, FIXED_POINT_MAX_ITER if max_iter is None else max_iter)
    elif method == "doubling":
        P, it, ok = _doubling(sys, S, tol, DOUBLING_MAX_ITER if max_iter is None else max_iter)
    else:
        raise ValueError(f"unknown ARE method {method!r}")
    residual = riccati_residual(sys, S, P) if np.all(np.isfinite(P)) else np.inf
    sol = CostSolution(P=P, horizon="infinite", iterations=it, residual=residual, converged=ok, method=method)
    if not ok:
        raise NoConvergence(
            f"ARE {method} iteration stopped after {it} iterations (residual {residual:.3e})", sol
        )
    return sol


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve P = A'PA + Q for Schur stable A.

    A does not need to be invertible here.
    """
    A = np.atleast_2d(np.array(A, dtype=float))
    Q = np.atleast_2d(np.array(Q, dtype=float))
    if spectral_radius(A) >= 1.0 - 1e-12:
        raise Unstable(f"Lyapunov solve needs a Schur stable matrix (radius {spectral_radius(A):.6g})")
    P = _sym(sla.solve_discrete_lyapunov(A.T, Q))
    # one step of iterative refinement against the residual
    Rres = Q + A.T @ P @ A - P
    if np.linalg.norm(Rres) > 1e-12 * max(np.linalg.norm(Q), 1e-300):
        P = _sym(P + sla.solve_discrete_lyapunov(A.T, Rres))
    return P


def batch_matrices(sys: NetworkSystem, S: Iterable[int], T: int) -> BatchMatrices:
    S = as_actuator_set(S, sys.M)
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    n, k = sys.n, len(S)
    if T * n > BATCH_MAX_TN:
        raise TooLarge(f"batch formulation limited to T*n <= {BATCH_MAX_TN}, got {T * n}")
    A = sys.A
    powers = [np.eye(n)]
    for _ in range(T):
        powers.append(A @ powers[-1])
    q_half, qt_half = psd_sqrt(sys.Q), psd_sqrt(sys.QT)
    weights = [q_half] * T + [qt_half]

    G = np.vstack([weights[t] @ powers[t] for t in range(T + 1)])
    H = np.zeros(((T + 1) * n, T * n))
    for t in range(1, T + 1):
        for j in range(t):
            H[t * n:(t + 1) * n, j * n:(j + 1) * n] = weights[t] @ powers[t - 1 - j]
    if k:
        w, U = np.linalg.eigh(sys.input_cost(S))
        BR = sys.input_matrix(S) @ (U / np.sqrt(w)) @ U.T
        Bdiag = np.kron(np.eye(T), BR)
    else:
        Bdiag = np.zeros((T * n, 0))
    return BatchMatrices(G=G, H=H, Bdiag=Bdiag)


def batch_cost_matrix(sys: NetworkSystem, S: Iterable[int], T: int) -> CostSolution:
    """P_0 = G'(I + H B B' H')^{-1} G from the stacked least-squares problem."""
    bm = batch_matrices(sys, S, T)
    HB = bm.H @ bm.Bdiag
    M = np.eye(HB.shape[0]) + HB @ HB.T
    c = sla.cho_factor(M)
    P0 = _sym(bm.G.T @ sla.cho_solve(c, bm.G))
    return CostSolution(P=P0, horizon=int(T), method="batch")


def cost_functionals(P: np.ndarray, X0: np.ndarray) -> CostFunctionals:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    return CostFunctionals(
        lambda_max=float(np.linalg.eigvalsh(_sym(P))[-1]),
        trace=float(np.trace(P)),
        average=float(np.sum(P * X0.T)),
    )


def lqg_cost(sys: NetworkSystem, S: Iterable[int], T: int, x0) -> float:
    """Finite-horizon LQG cost x0'P_0 x0 + sum_{t=1..T} tr(P_t W)."""
    Ps = riccati_recursion(sys, S, T)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    return float(x0 @ Ps[0] @ x0 + sum(np.sum(P * sys.W) for P in Ps[1:]))


def lqg_steady_state(sys: NetworkSystem, S: Iterable[int], **are_kwargs) -> float:
    """Steady-state average stage cost tr(P W)."""
    P = solve_are(sys, S, **are_kwargs).P
    return float(np.sum(P * sys.W))


def optimal_gain(sys: NetworkSystem, S: Sequence[int], P: np.ndarray) -> np.ndarray:
    """K such that u = -K x minimizes the Riccati step at cost matrix P."""
    S = as_actuator_set(S, sys.M)
    B = sys.input_matrix(S)
    if B.shape[1] == 0:
        return np.zeros((0, sys.n))
    c = sla.cho_factor(sys.input_cost(S) + B.T @ P @ B)
    return sla.cho_solve(c, B.T @ P @ sys.A)


@dataclass
class SimulationResult:
    """Empirical average stage cost with a batch-means standard error."""

    mean: float
    stderr: float
    steps: int


def simulate_closed_loop(
    sys: NetworkSystem,
    S: Iterable[int],
    T_sim: int,
    burn_in: int = 1000,
    seed: int = 0,
    x0=None,
    n_batches: int = 40,
) -> SimulationResult:
    """Run the optimal stationary feedback under Gaussian disturbances N(0, W).

    The average of x'Qx + u'Ru over steps ``burn_in <= t < T_sim`` converges
    to tr(PW).
    """
    S = as_actuator_set(S, sys.M)
    if not 0 <= burn_in < T_sim:
        raise ValueError("need 0 <= burn_in < T_sim")
    P = solve_are(sys, S).P
    K = optimal_gain(sys, S, P)
    B = sys.input_matrix(S)
    A_cl = sys.A - B @ K
    stage = sys.Q + K.T @ sys.input_cost(S) @ K
    rng = np.random.default_rng(seed)
    L = psd_sqrt(sys.W)
    noise = rng.standard_normal((T_sim, sys.n)) @ L.T

    X = np.empty((T_sim, sys.n))
    x = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    for t in range(T_sim):
        X[t] = x
        x = A_cl @ x + noise[t]
        if not np.all(np.abs(x) < DIVERGENCE_NORM):
            raise RuntimeError(f"closed-loop state diverged at step {t}; the optimal loop must be stable")
    costs = np.einsum("ti,ij,tj->t", X[burn_in:], stage, X[burn_in:])
    mean = float(costs.mean())
    nb = min(n_batches, costs.size)
    if nb >= 2:
        usable = costs[: (costs.size // nb) * nb].reshape(nb, -1).mean(axis=1)
        stderr = float(usable.std(ddof=1) / np.sqrt(nb))
    else:
        stderr = float("nan")
    return SimulationResult(mean=mean, stderr=stderr, steps=int(costs.size))
