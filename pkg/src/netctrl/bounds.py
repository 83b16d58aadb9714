"""Closed-form performance bounds on optimal feedback cost.

Unstable networks get a lower bound on the worst-case cost lambda_max(P)
for any k actuators; stable networks get an upper bound on the ratio
tr(P_worst) / tr(P_opt) between the worst and best k-subsets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    Defective,
    NotSymmetric,
    NotUnstable,
    QNotPositiveDefinite,
    Unstable,
)
from .lqr import influence_matrix, solve_lyapunov
from .sysmodel import (
    DEFECTIVE_COND,
    STABLE_MARGIN,
    NetworkSystem,
    as_actuator_set,
    is_detectable,
    is_symmetric,
    psd_sqrt,
)

ETA_GRID_POINTS = 20
LAMBDA1_ENUM_CAP = 10**5
EXHAUSTIVE_RATIO_CAP = 10**5
NORMAL_RTOL = 1e-10


@dataclass
class UnstableBoundReport:
    """Lower bound on lambda_max(P) valid for every k-actuator subset.

    ``per_eta`` lists ``(eta, n_bar, bound)`` for every candidate eta that
    was evaluated. ``hypotheses_met`` is False when (A, Q^{1/2}) is not
    detectable; the numbers are still reported.
    """

    bound: float
    eta: float
    n_bar: int
    cond_V: float
    k: int
    per_eta: list[tuple[float, int, float]] = field(default_factory=list)
    detectable: bool = True
    hypotheses_met: bool = True
    terms: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "eta": self.eta,
            "n_bar": self.n_bar,
            "cond_V": self.cond_V,
            "k": self.k,
            "per_eta": [list(row) for row in self.per_eta],
            "detectable": self.detectable,
            "hypotheses_met": self.hypotheses_met,
            "terms": dict(self.terms),
        }


@dataclass
class StableBoundReport:
    alpha: float
    T_transform: np.ndarray
    sigma1_D: float
    lambda1_max: float
    lambda1_exact: bool
    bound: float
    simple_bound: float | None
    k: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "T_transform": [float(x) for x in self.T_transform.ravel()],
            "sigma1_D": self.sigma1_D,
            "lambda1_max": self.lambda1_max,
            "lambda1_exact": self.lambda1_exact,
            "bound": self.bound,
            "simple_bound": self.simple_bound,
            "k": self.k,
        }


def unstable_bound_value(eta: float, n_bar: int, k: int, cond_V: float) -> float:
    """cond(V)^{-2} (eta^2 - 1)/eta^2 eta^{2(n_bar/k - 1)}."""
    return (eta**2 - 1.0) / eta**2 * eta ** (2.0 * (n_bar / k - 1.0)) / cond_V**2


def _count_at_least(mags: np.ndarray, eta: float) -> int:
    return int(np.sum(mags >= eta * (1.0 - 1e-12)))


def _eta_candidates(mags: np.ndarray, k: int) -> list[float]:
    lam_max = float(mags.max())
    cands = {float(m) for m in mags if m > 1.0}
    cands.update(lam_max ** (j / ETA_GRID_POINTS) for j in range(1, ETA_GRID_POINTS + 1))
    # when n_bar < k the bound peaks strictly inside a band of constant n_bar,
    # at eta^2 = c / (c + 1) with c = n_bar/k - 2
    for n_bar in range(1, len(mags) + 1):
        c = n_bar / k - 2.0
        if c < -1.0:
            eta = math.sqrt(c / (c + 1.0))
            if 1.0 < eta <= lam_max and _count_at_least(mags, eta) == n_bar:
                cands.add(eta)
    return sorted(cands)


def unstable_lower_bound(sys: NetworkSystem, k: int) -> UnstableBoundReport:
    """Largest lower bound on lambda_max(P) over admissible eta.

    For eta in (1, |lambda_max(A)|] with n_bar = #{|lambda_i(A)| >= eta},
    every k-subset satisfies
    lambda_max(P) >= cond(V)^{-2} (eta^2 - 1)/eta^2 eta^{2(n_bar/k - 1)}.
    The candidate etas are the unstable eigenvalue magnitudes, 20 geometric
    points in (1, |lambda_max|], and the interior maximizers of each band.

    Raises:
        NotUnstable: spectral radius <= 1.
        Defective: cond(V) >= 1e12.
    """
    if k < 1:
        raise ValueError(f"subset size must be >= 1, got {k}")
    if not sys.spectral_radius > 1.0:
        raise NotUnstable(f"A is not Schur unstable (spectral radius {sys.spectral_radius:.6g})")
    cond = sys.cond_V
    if not cond < DEFECTIVE_COND:
        raise Defective(f"eigenvector matrix condition number {cond:.3e} exceeds {DEFECTIVE_COND:.0e}")
    mags = np.abs(sys.eig[0])
    table = []
    for eta in _eta_candidates(mags, k):
        n_bar = _count_at_least(mags, eta)
        table.append((eta, n_bar, unstable_bound_value(eta, n_bar, k, cond)))
    eta, n_bar, best = max(table, key=lambda row: row[2])
    detectable = is_detectable(sys)
    return UnstableBoundReport(
        bound=best,
        eta=eta,
        n_bar=n_bar,
        cond_V=cond,
        k=int(k),
        per_eta=table,
        detectable=detectable,
        hypotheses_met=detectable,
    )


def symmetric_unstable_bound(sys: NetworkSystem, k: int) -> UnstableBoundReport:
    """Bound for symmetric unstable A, where cond(V) = 1.

    max{(l^2 - 1)/l^2, (u^2 - 1)/u^2 u^{2(n_bar/k - 1)}} with l the largest
    eigenvalue magnitude, u the smallest unstable magnitude and n_bar the
    number of unstable eigenvalues.
    """
    if k < 1:
        raise ValueError(f"subset size must be >= 1, got {k}")
    if not is_symmetric(sys.A):
        raise NotSymmetric("symmetric bound requested for a non-symmetric A")
    if not sys.spectral_radius > 1.0:
        raise NotUnstable(f"A is not Schur unstable (spectral radius {sys.spectral_radius:.6g})")
    mags = np.abs(sys.eig[0])
    lam_max = float(mags.max())
    lam_u = float(mags[mags > 1.0].min())
    n_bar = _count_at_least(mags, lam_u)
    first = (lam_max**2 - 1.0) / lam_max**2
    second = unstable_bound_value(lam_u, n_bar, k, 1.0)
    detectable = is_detectable(sys)
    eta = lam_max if first >= second else lam_u
    return UnstableBoundReport(
        bound=max(first, second),
        eta=eta,
        n_bar=_count_at_least(mags, eta),
        cond_V=1.0,
        k=int(k),
        per_eta=[(lam_max, _count_at_least(mags, lam_max), first), (lam_u, n_bar, second)],
        detectable=detectable,
        hypotheses_met=detectable,
        terms={"lambda_max": first, "lambda_u": second},
    )


def is_normal(A: np.ndarray, rtol: float = NORMAL_RTOL) -> bool:
    A = np.asarray(A, dtype=float)
    return bool(np.linalg.norm(A.T @ A - A @ A.T) <= rtol * np.linalg.norm(A) ** 2)


def stability_transform(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Similarity T with sigma_1(T A T^{-1}) < 1, and the constant alpha_A.

    T is the symmetric square root of M solving M = A'MA + I, which gives
    sigma_1(TAT^{-1})^2 = 1 - 1/lambda_max(M). Normal matrices use T = I.
    alpha_A = sigma_1(T)^2 / (sigma_n(T)^2 (1 - sigma_1(TAT^{-1})^2)).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius >= 1.0 - STABLE_MARGIN:
        raise Unstable(f"stability transform needs a Schur stable matrix (radius {radius:.6g})")
    if is_normal(A):
        T = np.eye(n)
    else:
        T = psd_sqrt(solve_lyapunov(A, np.eye(n)))
    sigma1_D = transformed_norm(A, T)
    if not sigma1_D < 1.0:
        raise Unstable(f"transform failed to contract: sigma_1(TAT^-1) = {sigma1_D:.6g}")
    sT = np.linalg.svd(T, compute_uv=False)
    alpha = sT[0] ** 2 / (sT[-1] ** 2 * (1.0 - sigma1_D**2))
    return T, float(alpha)


def transformed_norm(A: np.ndarray, T: np.ndarray) -> float:
    """sigma_1(T A T^{-1})."""
    D = T @ A @ np.linalg.inv(T)
    return float(np.linalg.norm(D, 2))


def actuator_influence(sys: NetworkSystem, S) -> np.ndarray:
    """R(S) = B_S R_S^{-1} B_S^T."""
    return influence_matrix(sys, as_actuator_set(S, sys.M))


def max_influence_eigenvalue(sys: NetworkSystem, k: int, cap: int = LAMBDA1_ENUM_CAP) -> tuple[float, bool]:
    """lambda_1^max over subsets of size <= k, and whether it is exact.

    R(S) grows with S, so the maximum is attained on subsets of size
    min(k, M). Above ``cap`` subsets the full-catalog value is returned as a
    valid upper bound instead.
    """
    size = min(k, sys.M)
    if size == 0:
        return 0.0, True
    if math.comb(sys.M, size) > cap:
        return float(np.linalg.eigvalsh(influence_matrix(sys, tuple(range(sys.M))))[-1]), False
    gram = sys.catalog.T @ sys.catalog
    best = 0.0
    for S in combinations(range(sys.M), size):
        idx = np.ix_(S, S)
        val = sla.eigh(gram[idx], sys.R[idx], eigvals_only=True)[-1]
        best = max(best, float(val))
    return best, True


def stable_bound_value(alpha: float, lambda1_max: float, Q: np.ndarray, sigma_n_A: float) -> float:
    lam_n = float(np.linalg.eigvalsh(Q)[0])
    trQ = float(np.trace(Q))
    gain = (1.0 + lambda1_max * lam_n) * trQ
    return alpha * gain / (sigma_n_A**2 * lam_n + gain)


def stable_ratio_bound(sys: NetworkSystem, k: int) -> StableBoundReport:
    """Upper bound on tr(P_worst)/tr(P_opt) over k-subsets of a stable network.

    r <= alpha_A (1 + l1 q_n) tr(Q) / (sigma_n(A)^2 q_n + (1 + l1 q_n) tr(Q)),
    with l1 = lambda_1^max and q_n = lambda_min(Q). When A is normal the
    simpler 1/(1 - lambda_1(A)^2) is reported as ``simple_bound``.
    """
    if sys.spectral_radius >= 1.0 - STABLE_MARGIN:
        raise Unstable(f"ratio bound needs a Schur stable A (radius {sys.spectral_radius:.6g})")
    if not float(np.linalg.eigvalsh(sys.Q)[0]) > 0.0:
        raise QNotPositiveDefinite("ratio bound needs Q positive definite")
    T, alpha = stability_transform(sys.A)
    sigma1_D = transformed_norm(sys.A, T)
    lam1, exact = max_influence_eigenvalue(sys, k)
    sigma_n_A = float(np.linalg.svd(sys.A, compute_uv=False)[-1])
    simple = None
    if is_normal(sys.A):
        simple = 1.0 / (1.0 - sys.spectral_radius**2)
    return StableBoundReport(
        alpha=alpha,
        T_transform=T,
        sigma1_D=sigma1_D,
        lambda1_max=lam1,
        lambda1_exact=exact,
        bound=stable_bound_value(alpha, lam1, sys.Q, sigma_n_A),
        simple_bound=simple,
        k=int(k),
    )


def empirical_ratio(sys: NetworkSystem, k: int) -> float:
    """tr(P_worst)/tr(P_opt) over k-actuator subsets of a stable network.

    Exact by enumeration up to 10**5 subsets; above that the greedy and
    anti-greedy selections give an inner estimate and a warning is issued.
    """
    from .selection import exhaustive_select, greedy_select

    if sys.spectral_radius >= 1.0 - STABLE_MARGIN:
        raise Unstable(f"empirical ratio needs a Schur stable A (radius {sys.spectral_radius:.6g})")
    if math.comb(sys.M, k) <= EXHAUSTIVE_RATIO_CAP:
        best, worst = exhaustive_select(sys, k, "trace")
    else:
        warnings.warn(
            f"C({sys.M},{k}) subsets exceed {EXHAUSTIVE_RATIO_CAP}; ratio is a heuristic greedy estimate",
            stacklevel=2,
        )
        best = greedy_select(sys, k, "trace", "minimize")
        worst = greedy_select(sys, k, "trace", "maximize")
    return worst.objective_value / best.objective_value
