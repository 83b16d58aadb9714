"""Linear network systems: containers, generators and structural checks.

A :class:`NetworkSystem` bundles the dynamics ``x[t+1] = A x[t] + B_S u[t] + w[t]``
with a catalog of candidate input columns and the quadratic cost data used by
every solver in the package. Actuator subsets are plain sorted tuples of
catalog indices (see :func:`as_actuator_set`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DegenerateEnsemble, InvalidSystem, SingularDynamics

ActuatorSet = tuple[int, ...]

SYM_RTOL = 1e-10
EIG_ATOL = 1e-10
INVERTIBILITY_RTOL = 1e-12
PBH_TOL = 1e-9
STABLE_MARGIN = 1e-12
DEFECTIVE_COND = 1e12
# eigenvalues closer than this (relative) are treated as one repeated mode
_CLUSTER_RTOL = 1e-8
_NULL_RTOL = 1e-8
_ER_MAX_ATTEMPTS = 100


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, clipping tiny negative eigenvalues."""
    w, U = np.linalg.eigh((M + M.T) / 2)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def spectral_radius(A: np.ndarray) -> float:
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def is_symmetric(M: np.ndarray, rtol: float = SYM_RTOL) -> bool:
    scale = np.linalg.norm(M)
    return bool(np.linalg.norm(M - M.T) <= rtol * max(scale, np.finfo(float).tiny))


def eigenvector_condition(V: np.ndarray) -> float:
    """cond(V) = sigma_1 / sigma_n for a (possibly complex) eigenvector matrix."""
    s = np.linalg.svd(V, compute_uv=False)
    if s[-1] == 0.0:
        return math.inf
    return float(s[0] / s[-1])


def _check_square(name: str, M: np.ndarray, n: int) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim == 0 and n == 1:
        M = M.reshape(1, 1)
    if M.shape != (n, n):
        raise InvalidSystem(f"{name} must be {n}x{n}, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidSystem(f"{name} has non-finite entries")
    return M


def _check_psd(name: str, M: np.ndarray, definite: bool) -> np.ndarray:
    if not is_symmetric(M):
        raise InvalidSystem(f"{name} is not symmetric")
    M = (M + M.T) / 2
    lam_min = float(np.linalg.eigvalsh(M)[0]) if M.size else 0.0
    if definite:
        if lam_min <= 0.0:
            raise InvalidSystem(f"{name} must be positive definite (min eigenvalue {lam_min:.3e})")
    elif lam_min < -EIG_ATOL:
        raise InvalidSystem(f"{name} must be positive semidefinite (min eigenvalue {lam_min:.3e})")
    return M


def _frozen(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class ModeSpace:
    """Orthonormal bases of the right/left eigenspaces of one unstable mode."""

    eigenvalue: complex
    right: np.ndarray
    left: np.ndarray


@dataclass(frozen=True, eq=False)
class NetworkSystem:
    """Discrete-time linear network with an actuator catalog and cost data.

    Attributes:
        A: n x n dynamics matrix.
        catalog: n x M matrix whose columns are the candidate inputs b_1..b_M.
        Q: state cost, PSD.
        QT: terminal cost, PD.
        R: M x M input cost over the full catalog, PD. ``R_S`` is its
            principal submatrix on S.
        X0: initial-state covariance, PSD.
        W: disturbance covariance, PSD.
        require_invertible: reject numerically singular A. Cost solvers do
            not need A^{-1}; only set this to False for systems such as the
            n = 50 path (whose A has a zero eigenvalue) that are used for
            cost computations alone.
    """

    A: np.ndarray
    catalog: np.ndarray
    Q: np.ndarray
    QT: np.ndarray
    R: np.ndarray
    X0: np.ndarray
    W: np.ndarray
    require_invertible: bool = True

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidSystem(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        A = _check_square("A", A, n)

        catalog = np.array(self.catalog, dtype=float)
        if catalog.ndim == 1 and n == 1:
            catalog = catalog.reshape(1, -1)
        if catalog.ndim != 2 or catalog.shape[0] != n or catalog.shape[1] < 1:
            raise InvalidSystem(
                f"catalog must be an n x M matrix with n={n} and M >= 1, got shape {catalog.shape}"
            )
        M = catalog.shape[1]

        s = np.linalg.svd(A, compute_uv=False)
        if self.require_invertible and (s[-1] < INVERTIBILITY_RTOL * s[0] or s[0] == 0.0):
            raise SingularDynamics(
                f"A is numerically singular (sigma_min/sigma_max = {s[-1] / max(s[0], 1e-300):.3e})"
            )

        values = {
            "A": A,
            "catalog": catalog,
            "Q": _check_psd("Q", _check_square("Q", self.Q, n), definite=False),
            "QT": _check_psd("QT", _check_square("QT", self.QT, n), definite=True),
            "R": _check_psd("R", _check_square("R", self.R, M), definite=True),
            "X0": _check_psd("X0", _check_square("X0", self.X0, n), definite=False),
            "W": _check_psd("W", _check_square("W", self.W, n), definite=False),
        }
        for name, value in values.items():
            object.__setattr__(self, name, _frozen(value))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def M(self) -> int:
        return self.catalog.shape[1]

    def input_matrix(self, S: Iterable[int]) -> np.ndarray:
        """B_S, the catalog columns indexed by S (n x |S|)."""
        return self.catalog[:, list(S)]

    def input_cost(self, S: Iterable[int]) -> np.ndarray:
        idx = list(S)
        return self.R[np.ix_(idx, idx)]

    @property
    def invertible(self) -> bool:
        s = np.linalg.svd(self.A, compute_uv=False)
        return bool(s[0] > 0.0 and s[-1] >= INVERTIBILITY_RTOL * s[0])

    def replace(self, **changes) -> "NetworkSystem":
        fields = dict(A=self.A, catalog=self.catalog, Q=self.Q, QT=self.QT, R=self.R, X0=self.X0, W=self.W,
                      require_invertible=self.require_invertible)
        fields.update(changes)
        return NetworkSystem(**fields)

    @cached_property
    def Q_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.Q)

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues sorted by decreasing magnitude and matching unit-norm eigenvectors."""
        if is_symmetric(self.A):
            w, V = np.linalg.eigh((self.A + self.A.T) / 2)
        else:
            w, V = np.linalg.eig(self.A)
        order = np.argsort(-np.abs(w), kind="stable")
        return w[order], V[:, order]

    @cached_property
    def cond_V(self) -> float:
        return eigenvector_condition(self.eig[1])

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eig[0])))

    @cached_property
    def unstable_modes(self) -> tuple[ModeSpace, ...]:
        """Eigenspaces of every eigenvalue with |lambda| >= 1 - STABLE_MARGIN."""
        w = self.eig[0]
        unstable = [complex(x) for x in w if abs(x) >= 1.0 - STABLE_MARGIN]
        clusters: list[complex] = []
        for lam in unstable:
            if not any(abs(lam - c) <= _CLUSTER_RTOL * max(1.0, abs(c)) for c in clusters):
                clusters.append(lam)
        scale = max(1.0, float(np.linalg.norm(self.A, 2)))
        modes = []
        for lam in clusters:
            shifted = self.A.astype(complex) - lam * np.eye(self.n)
            modes.append(
                ModeSpace(lam, _null_space(shifted, scale), _null_space(shifted.conj().T, scale))
            )
        return tuple(modes)


def _null_space(M: np.ndarray, scale: float) -> np.ndarray:
    _, s, Vh = np.linalg.svd(M)
    rank_def = max(1, int(np.sum(s <= _NULL_RTOL * scale)))
    return Vh[-rank_def:].conj().T


def _subspace_reached(C: np.ndarray, N: np.ndarray, tol: float = PBH_TOL) -> bool:
    """True when ||C v|| > tol ||v|| for every v in span(N) (N orthonormal)."""
    if C.shape[0] == 0:
        return False
    CN = C.astype(complex) @ N
    if CN.shape[0] < CN.shape[1]:
        return False
    s = np.linalg.svd(CN, compute_uv=False)
    return bool(s[-1] > tol)


def as_actuator_set(S: Iterable[int] | None, M: int) -> ActuatorSet:
    """Normalize S into a strictly increasing tuple of catalog indices."""
    if S is None:
        return ()
    idx = [int(i) for i in S]
    if len(set(idx)) != len(idx):
        raise ValueError(f"actuator set has duplicates: {idx}")
    for i in idx:
        if not 0 <= i < M:
            raise ValueError(f"actuator index {i} outside [0, {M})")
    return tuple(sorted(idx))


def is_stabilizable(sys: NetworkSystem, S: Sequence[int]) -> bool:
    B = sys.input_matrix(S)
    return all(_subspace_reached(B.T, mode.left) for mode in sys.unstable_modes)


def is_detectable(sys: NetworkSystem) -> bool:
    return all(_subspace_reached(sys.Q_sqrt, mode.right) for mode in sys.unstable_modes)


@dataclass(frozen=True)
class SystemDiagnostics:
    invertibility_margin: float
    detectable: bool
    stabilizable: bool
    stable: bool
    diagonalizable: bool
    spectral_radius: float
    cond_V: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def validate_system(sys: NetworkSystem, S: Iterable[int] | None = ()) -> SystemDiagnostics:
    """Structural diagnostics for ``sys`` driven by actuator subset ``S``.

    Detectability of (A, Q^{1/2}) and stabilizability of (A, B_S) use an
    eigenspace test on every mode with |lambda| >= 1: the mode must not lie in
    the null space of Q^{1/2} (right eigenvectors) or of B_S^T (left
    eigenvectors), at tolerance 1e-9. Never raises; solvers read the flags.
    """
    S = as_actuator_set(S, sys.M)
    s = np.linalg.svd(sys.A, compute_uv=False)
    return SystemDiagnostics(
        invertibility_margin=float(s[-1] / s[0]) if s[0] > 0 else 0.0,
        detectable=is_detectable(sys),
        stabilizable=is_stabilizable(sys, S),
        stable=bool(sys.spectral_radius < 1.0 - STABLE_MARGIN),
        diagonalizable=bool(sys.cond_V < DEFECTIVE_COND),
        spectral_radius=sys.spectral_radius,
        cond_V=sys.cond_V,
    )


def make_system(
    A,
    catalog=None,
    Q=None,
    QT=None,
    R=None,
    X0=None,
    W=None,
    require_invertible: bool = True,
) -> NetworkSystem:
    """Build a system, defaulting every omitted matrix to the identity.

    ``catalog`` defaults to the unit vectors e_1..e_n; otherwise it is a list
    of n-vectors, one per candidate actuator.
    """
    A = np.atleast_2d(np.array(A, dtype=float))
    n = A.shape[0]
    eye = np.eye(n)
    if catalog is None:
        cat = eye
    else:
        cat = np.array(catalog, dtype=float).reshape(-1, n).T
    M = cat.shape[1]
    return NetworkSystem(
        A=A,
        catalog=cat,
        Q=eye if Q is None else np.atleast_2d(np.array(Q, dtype=float)),
        QT=eye if QT is None else np.atleast_2d(np.array(QT, dtype=float)),
        R=np.eye(M) if R is None else np.atleast_2d(np.array(R, dtype=float)),
        X0=eye if X0 is None else np.atleast_2d(np.array(X0, dtype=float)),
        W=eye if W is None else np.atleast_2d(np.array(W, dtype=float)),
        require_invertible=require_invertible,
    )


def path_matrix(n: int, rho: float) -> np.ndarray:
    """(rho/3) times the tridiagonal all-ones matrix of an n-node path."""
    return (rho / 3.0) * (np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1))


def build_path_system(n: int, rho: float, require_invertible: bool = True) -> NetworkSystem:
    """Undirected path network with self loops, weight rho/3 per edge.

    The eigenvalues are (rho/3)(1 + 2 cos(j pi/(n+1))), so A is singular
    exactly when 3 divides n + 1 (n = 2, 5, ..., 50, ...).

    Raises:
        ValueError: if n < 2 or rho <= 0.
        SingularDynamics: if A is numerically singular and
            ``require_invertible`` is set.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"path system needs n >= 2, got {n}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return make_system(path_matrix(int(n), float(rho)), require_invertible=require_invertible)


def spectral_scale(A: np.ndarray, target: float) -> np.ndarray:
    """Rescale A so that its spectral radius equals ``target``."""
    A = np.atleast_2d(np.array(A, dtype=float))
    if not target > 0:
        raise ValueError(f"target must be positive, got {target}")
    radius = spectral_radius(A)
    if radius == 0.0:
        raise ValueError("cannot rescale a matrix with zero spectral radius")
    return A * (target / radius)


def er_adjacency(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return (upper | upper.T).astype(float)


def build_er_system(n: int, p: float, seed: int, scale_to: float | None = 1.0) -> NetworkSystem:
    """Erdos-Renyi G(n, p) adjacency dynamics, optionally rescaled.

    Draws are repeated from the same seeded stream until the adjacency matrix
    is invertible and has no isolated node, up to 100 attempts.

    Args:
        n: node count.
        p: edge probability, strictly between 0 and 1.
        seed: seed for ``numpy.random.default_rng``.
        scale_to: target spectral radius; ``None`` keeps the raw 0/1 matrix.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"edge probability must lie in (0, 1), got {p}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    rng = np.random.default_rng(seed)
    for _ in range(_ER_MAX_ATTEMPTS):
        adj = er_adjacency(n, p, rng)
        if np.any(adj.sum(axis=1) == 0):
            continue
        s = np.linalg.svd(adj, compute_uv=False)
        if s[-1] < INVERTIBILITY_RTOL * s[0]:
            continue
        A = adj if scale_to is None else spectral_scale(adj, scale_to)
        return make_system(A)
    hint = ""
    if p * (n - 1) < 1.0:
        hint = f" (expected degree {p * (n - 1):.3g} < 1 makes singular draws near certain)"
    raise DegenerateEnsemble(
        f"no invertible, isolate-free G({n}, {p}) draw in {_ER_MAX_ATTEMPTS} attempts{hint}"
    )


# --- JSON system files -------------------------------------------------------

_MATRIX_FIELDS = ("Q", "QT", "R", "X0", "W")


def _encode_matrix(M: np.ndarray) -> list[float] | str:
    if M.shape[0] == M.shape[1] and np.array_equal(M, np.eye(M.shape[0])):
        return "identity"
    return [float(x) for x in M.ravel()]


def _decode_matrix(value, size: int, name: str) -> np.ndarray:
    if isinstance(value, str):
        if value != "identity":
            raise InvalidSystem(f"{name}: unknown matrix keyword {value!r}")
        return np.eye(size)
    arr = np.array(value, dtype=float)
    if arr.size != size * size:
        raise InvalidSystem(f"{name}: expected {size * size} entries, got {arr.size}")
    return arr.reshape(size, size)


def system_to_dict(sys: NetworkSystem) -> dict:
    catalog = "identity" if np.array_equal(sys.catalog, np.eye(sys.n)) else sys.catalog.T.tolist()
    doc = {"n": sys.n, "A": [float(x) for x in sys.A.ravel()], "catalog": catalog}
    for name in _MATRIX_FIELDS:
        doc[name] = _encode_matrix(getattr(sys, name))
    if not sys.require_invertible:
        doc["allow_singular"] = True
    return doc


def system_from_dict(doc: dict) -> NetworkSystem:
    try:
        n = int(doc["n"])
        A = np.array(doc["A"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSystem(f"system document needs integer 'n' and array 'A': {exc}") from exc
    if A.size != n * n:
        raise InvalidSystem(f"A: expected {n * n} entries, got {A.size}")
    A = A.reshape(n, n)
    cat = doc.get("catalog", "identity")
    if isinstance(cat, str):
        if cat != "identity":
            raise InvalidSystem(f"catalog: unknown keyword {cat!r}")
        catalog = np.eye(n)
    else:
        vecs = np.array(cat, dtype=float)
        if vecs.ndim != 2 or vecs.shape[1] != n:
            raise InvalidSystem(f"catalog vectors must all have dimension {n}")
        catalog = vecs.T
    M = catalog.shape[1]
    mats = {
        name: _decode_matrix(doc.get(name, "identity"), M if name == "R" else n, name)
        for name in _MATRIX_FIELDS
    }
    return NetworkSystem(A=A, catalog=catalog, require_invertible=not doc.get("allow_singular", False), **mats)


def save_system(sys: NetworkSystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=1) + "\n")


def load_system(path) -> NetworkSystem:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read system file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidSystem(f"{path}: not valid JSON ({exc})") from exc
    return system_from_dict(doc)
