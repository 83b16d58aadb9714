from collections import Counter
from itertools import combinations

import numpy as np
import pytest
import scipy.linalg as sla

from netctrl.exceptions import AllInfeasible, InfeasibleAtK, TooLarge
from netctrl.experiments import ExperimentConfig, experiment_system
from netctrl.selection import (
    SENTINEL,
    canonical_objective,
    draw_subset,
    exhaustive_select,
    greedy_select,
    objective_value,
    random_subsets,
    trial_rng,
)
from netctrl.sysmodel import build_path_system, make_system

from conftest import random_system


def scipy_trace(sys, S):
    return float(np.trace(sla.solve_discrete_are(sys.A, sys.input_matrix(S), sys.Q, sys.input_cost(S))))


@pytest.fixture(scope="module")
def marginal_path():
    return experiment_system("path", 100, ExperimentConfig(kind="fig4"))


class TestObjective:
    def test_matches_scipy(self, rng):
        sys = random_system(rng, 5, radius=1.2)
        for S in ((0, 1, 2, 3, 4), (0, 2, 3, 4)):
            try:
                ref = scipy_trace(sys, S)
            except (np.linalg.LinAlgError, ValueError):
                continue
            assert objective_value(sys, S) == pytest.approx(ref, rel=1e-9)

    def test_sentinel(self):
        assert objective_value(make_system(np.diag([2.0, 1.5])), [0]) == SENTINEL

    def test_aliases(self):
        assert canonical_objective("lmax") == "lambda_max"
        assert canonical_objective("avg") == "average"
        with pytest.raises(ValueError):
            canonical_objective("median")


class TestGreedy:
    def test_middle_of_path(self, marginal_path):
        res = greedy_select(marginal_path, 1)
        assert res.subset[0] in (49, 50)
        assert res.subset == (49,)  # lowest-index tie-break

    def test_end_of_path(self, marginal_path):
        assert greedy_select(marginal_path, 1, direction="maximize").subset[0] in (0, 99)

    def test_k1_equals_exhaustive(self, rng):
        for _ in range(10):
            sys = random_system(rng, 5, radius=float(rng.uniform(0.5, 1.1)))
            best, worst = exhaustive_select(sys, 1)
            assert greedy_select(sys, 1).subset == best.subset
            assert greedy_select(sys, 1, direction="maximize").subset == worst.subset

    def test_value_is_reevaluated_cost(self, rng):
        sys = random_system(rng, 6, radius=1.1)
        res = greedy_select(sys, 3)
        assert len(res.subset) == 3 and len(res.trace_log) == 3
        assert res.objective_value == pytest.approx(objective_value(sys, res.subset), rel=1e-10)
        assert [v for _, v in res.trace_log] == sorted([v for _, v in res.trace_log], reverse=True)

    def test_parallel_matches_sequential(self, rng):
        sys = random_system(rng, 8, radius=1.05)
        a = greedy_select(sys, 4, "lmax", n_jobs=1)
        b = greedy_select(sys, 4, "lmax", n_jobs=4)
        assert a.subset == b.subset and a.trace_log == b.trace_log

    def test_symmetric_tie_goes_low(self):
        sys = build_path_system(4, 0.9)
        assert greedy_select(sys, 1).subset == (1,)
        assert greedy_select(sys, 1, direction="maximize").subset == (0,)

    def test_infeasible_minimizer(self):
        sys = make_system(np.diag([2.0, 2.0, 2.0]))
        with pytest.raises(InfeasibleAtK):
            greedy_select(sys, 2)

    def test_antigreedy_skips_sentinel(self):
        sys = make_system(np.diag([2.0, 1.5, 0.5]))
        res = greedy_select(sys, 2, direction="maximize")
        assert res.feasible and res.objective_value < SENTINEL

    def test_bad_arguments(self, scalar_stable):
        with pytest.raises(ValueError):
            greedy_select(scalar_stable, 2)
        with pytest.raises(ValueError):
            greedy_select(scalar_stable, 1, direction="sideways")


class TestExhaustive:
    def test_single_subset(self):
        sys = make_system(np.array([[0.5, 0.1], [0.0, 0.2]]), catalog=[[1.0, 0.0]])
        best, worst = exhaustive_select(sys, 1)
        assert best.subset == worst.subset == (0,)

    def test_full_catalog(self, rng):
        sys = random_system(rng, 4, radius=0.9)
        best, worst = exhaustive_select(sys, 4)
        assert best.subset == worst.subset == (0, 1, 2, 3)

    def test_path_three(self):
        sys = build_path_system(3, 0.9)
        best, worst = exhaustive_select(sys, 1)
        assert best.subset == (1,)
        assert worst.subset == (0,)
        values = [scipy_trace(sys, (i,)) for i in range(3)]
        assert best.objective_value == pytest.approx(min(values), rel=1e-10)

    def test_matches_brute_force(self, rng):
        sys = random_system(rng, 6, radius=1.1, weighted=True)
        vals = {S: objective_value(sys, S, "avg") for S in combinations(range(6), 2)}
        feasible = {S: v for S, v in vals.items() if v < SENTINEL}
        best, worst = exhaustive_select(sys, 2, "avg")
        assert best.objective_value == min(feasible.values())
        assert worst.objective_value == max(feasible.values())
        assert best.infeasible_count == len(vals) - len(feasible)

    def test_errors(self):
        with pytest.raises(AllInfeasible):
            exhaustive_select(make_system(np.diag([2.0, 2.0])), 1)
        with pytest.raises(TooLarge):
            exhaustive_select(make_system(0.5 * np.eye(40)), 20)


class TestRandom:
    def test_forced_full_set(self, rng):
        sys = random_system(rng, 3, radius=0.8)
        assert all(d.subset == (0, 1, 2) for d in random_subsets(sys, 3, 5, seed=1))

    def test_seeded(self, rng):
        sys = random_system(rng, 6, radius=1.0)
        a = [d.value for d in random_subsets(sys, 2, 20, seed=4)]
        b = [d.value for d in random_subsets(sys, 2, 20, seed=4)]
        c = [d.value for d in random_subsets(sys, 2, 20, seed=4, n_jobs=3)]
        assert a == b == c

    def test_streams_differ(self):
        a = draw_subset(trial_rng(0, 1, 5), 50, 5)
        b = draw_subset(trial_rng(0, 2, 5), 50, 5)
        assert a != b

    def test_uniform_membership(self):
        counts = Counter()
        trials, M, k = 4000, 10, 3
        for i in range(trials):
            counts.update(draw_subset(trial_rng(9, i), M, k))
        freq = np.array([counts[j] for j in range(M)]) / trials
        # each index appears with probability k/M; binomial sd ~ 0.007
        assert np.max(np.abs(freq - k / M)) < 0.03

    def test_random_not_better_than_optimum(self):
        sys = build_path_system(7, 0.9)
        best, _ = exhaustive_select(sys, 2)
        draws = random_subsets(sys, 2, 30, seed=0)
        assert min(d.value for d in draws) >= best.objective_value * (1 - 1e-12)

    def test_infeasible_draws_flagged(self):
        sys = make_system(np.diag([2.0, 0.5, 0.5]))
        draws = random_subsets(sys, 1, 30, seed=0)
        assert any(not d.feasible for d in draws)
        assert all(d.feasible == (0 in d.subset) for d in draws)

    def test_k_range(self, scalar_stable):
        with pytest.raises(ValueError):
            random_subsets(scalar_stable, 2, 1, seed=0)
