from itertools import combinations

import numpy as np
import pytest

from netctrl.exceptions import Defective, DomainError, SingularDynamics
from netctrl.gramian import (
    gramian_min_eig_bound,
    inverse_gramian,
    inverse_gramian_closed_form,
    inverse_gramian_limit,
    min_eig,
)
from netctrl.lqr import riccati_recursion, solve_are
from netctrl.sysmodel import is_stabilizable, make_system


def all_unstable(rng, n):
    """Diagonalizable A with every |eigenvalue| in [1.2, 2.5]."""
    lam = rng.uniform(1.2, 2.5, n) * rng.choice([-1.0, 1.0], n)
    V = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    return V @ np.diag(lam) @ np.linalg.inv(V)


def well_conditioned(rng, n):
    while True:
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.8, 1.3) / np.max(np.abs(np.linalg.eigvals(A)))
        if np.linalg.cond(A) < 30:
            return A


class TestRecursion:
    def test_scalar_two_stages(self):
        res = inverse_gramian(make_system([[2.0]]), [0], 2)
        assert res.Xbar[0, 0] == pytest.approx(1.25)

    def test_scalar_limit(self):
        res = inverse_gramian_limit(make_system([[2.0]]), [0])
        assert res.Xbar[0, 0] == pytest.approx(4 / 3, abs=1e-11)
        assert not res.hit_cap

    def test_limit_cap_flag(self):
        # A^{-1} = 2 never decays
        res = inverse_gramian_limit(make_system([[0.5]]), [0], max_stages=50)
        assert res.hit_cap and res.T == 50

    def test_no_inputs(self, rng):
        A = well_conditioned(rng, 3)
        sys = make_system(A, QT=np.diag([1.0, 2.0, 4.0]))
        res = inverse_gramian(sys, [], 5)
        assert np.all(res.Xbar == 0)
        Ainv5 = np.linalg.matrix_power(np.linalg.inv(A), 5)
        np.testing.assert_allclose(res.X_full, Ainv5 @ np.linalg.inv(sys.QT) @ Ainv5.T, rtol=1e-10)

    def test_matches_closed_form(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 6))
            sys = make_system(well_conditioned(rng, n))
            S = tuple(sorted(rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False)))
            T = int(rng.integers(0, 51))
            X = inverse_gramian(sys, S, T).X_full
            Y = inverse_gramian_closed_form(sys, S, T)
            assert np.linalg.norm(X - Y) <= 1e-9 * np.linalg.norm(Y)

    def test_psd_and_monotone(self, rng):
        sys = make_system(well_conditioned(rng, 4))
        prev = None
        for T in range(0, 15):
            Xbar = inverse_gramian(sys, [0, 2], T).Xbar
            assert min_eig(Xbar) >= -1e-9 * max(1.0, np.linalg.norm(Xbar))
            if prev is not None:
                assert min_eig(Xbar - prev) >= -1e-10 * max(1.0, np.linalg.norm(Xbar))
            prev = Xbar

    def test_singular(self):
        sys = make_system(np.diag([1.0, 0.0]), require_invertible=False)
        with pytest.raises(SingularDynamics):
            inverse_gramian(sys, [0], 3)


class TestDuality:
    def test_inverse_cost_is_gramian(self, rng):
        # with vanishing Q, P_0^{-1} = X_T - B B'
        checked = 0
        for _ in range(20):
            n = int(rng.integers(1, 5))
            sys = make_system(all_unstable(rng, n), Q=1e-10 * np.eye(n))
            S = tuple(range(int(rng.integers(1, n + 1))))
            T = 8
            P0 = riccati_recursion(sys, S, T)[0]
            B = sys.input_matrix(S)
            lhs = np.linalg.inv(P0)
            rhs = inverse_gramian(sys, S, T).X_full - B @ B.T
            assert np.linalg.norm(lhs - rhs) <= 1e-5 * np.linalg.norm(rhs)
            checked += 1
        assert checked == 20

    def test_pivot_inequality(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            sys = make_system(all_unstable(rng, n), Q=1e-10 * np.eye(n))
            S = tuple(range(n))
            if not is_stabilizable(sys, S):
                continue
            lam_max = np.linalg.eigvalsh(solve_are(sys, S).P)[-1]
            Xbar = inverse_gramian_limit(sys, S).Xbar
            assert lam_max >= (1 - 1e-6) / min_eig(Xbar)


class TestBound:
    def test_scalar(self):
        b = gramian_min_eig_bound(make_system([[2.0]]), 1, 0.5)
        assert b.n_bar == 1
        assert b.bound == pytest.approx(4 / 3)
        assert min_eig(inverse_gramian_limit(make_system([[2.0]]), [0]).Xbar) <= b.bound + 1e-12

    def test_repeated(self):
        b = gramian_min_eig_bound(make_system(np.diag([2.0, 2.0])), 1, 0.5)
        assert b.n_bar == 2
        assert b.bound == pytest.approx(1 / 3)

    def test_triangular_exhaustive(self):
        sys = make_system([[2.0, 0.0], [1.0, 1.5]])
        b = gramian_min_eig_bound(sys, 1, 1 / 1.5)
        assert b.cond_V**2 == pytest.approx(9 + 4 * np.sqrt(5), rel=1e-10)
        for S in ([0], [1]):
            assert min_eig(inverse_gramian_limit(sys, S).Xbar) <= b.bound

    def test_exhaustive_random(self, rng):
        for _ in range(15):
            n = int(rng.integers(2, 6))
            sys = make_system(all_unstable(rng, n))
            inv_mags = np.sort(1 / np.abs(sys.eig[0]))
            for k in range(1, n + 1):
                for mu in inv_mags:
                    b = gramian_min_eig_bound(sys, k, float(mu)).bound
                    for S in combinations(range(n), k):
                        assert min_eig(inverse_gramian_limit(sys, S).Xbar) <= b * (1 + 1e-9)

    def test_domain(self):
        sys = make_system(np.diag([2.0, 4.0]))
        with pytest.raises(DomainError):
            gramian_min_eig_bound(sys, 1, 0.1)
        with pytest.raises(DomainError):
            gramian_min_eig_bound(sys, 1, 1.0)

    def test_defective(self):
        with pytest.raises(Defective):
            gramian_min_eig_bound(make_system([[2.0, 1.0], [0.0, 2.0]]), 1, 0.5)
