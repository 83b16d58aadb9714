"""Actuator subset selection on infinite-horizon cost objectives."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .exceptions import AllInfeasible, InfeasibleAtK, NoConvergence, NotStabilizable, TooLarge
from .lqr import cost_functionals, solve_are
from .sysmodel import ActuatorSet, NetworkSystem, as_actuator_set

SENTINEL = 1e300
EXHAUSTIVE_CAP = 10**6
# values this close (relative) count as ties and go to the lowest index
TIE_RTOL = 1e-12

OBJECTIVES = ("trace", "lambda_max", "average")
_ALIASES = {"lmax": "lambda_max", "avg": "average", "tr": "trace"}


def canonical_objective(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in OBJECTIVES:
        raise ValueError(f"unknown objective {name!r}; expected one of {OBJECTIVES}")
    return name


@dataclass
class SelectionResult:
    subset: ActuatorSet
    objective_value: float
    objective: str
    method: str
    trace_log: list[tuple[int, float]] = field(default_factory=list)
    feasible: bool = True
    infeasible_count: int = 0

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "objective_value": self.objective_value,
            "objective": self.objective,
            "method": self.method,
            "trace_log": [list(step) for step in self.trace_log],
            "feasible": self.feasible,
            "infeasible_count": self.infeasible_count,
        }


def objective_value(sys: NetworkSystem, S: Sequence[int], objective: str = "trace") -> float:
    """Infinite-horizon cost of S, or SENTINEL when (A, B_S) is not stabilizable."""
    objective = canonical_objective(objective)
    try:
        P = solve_are(sys, S).P
    except NotStabilizable:
        return SENTINEL
    except NoConvergence as exc:
        # keep the lower-bounding last iterate rather than dropping the subset
        P = exc.solution.P
    f = cost_functionals(P, sys.X0)
    return {"trace": f.trace, "lambda_max": f.lambda_max, "average": f.average}[objective]


def _ties(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def _score_all(sys, base: list[int], candidates: list[int], objective: str, n_jobs: int) -> list[float]:
    subsets = [tuple(sorted(base + [c])) for c in candidates]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(lambda S: objective_value(sys, S, objective), subsets))
    return [objective_value(sys, S, objective) for S in subsets]


def greedy_select(
    sys: NetworkSystem,
    k: int,
    objective: str = "trace",
    direction: str = "minimize",
    n_jobs: int = 1,
) -> SelectionResult:
    """Grow a subset one actuator at a time from the empty set.

    ``direction="minimize"`` is the usual greedy; ``"maximize"`` is the
    anti-greedy that adds the most harmful actuator. Non-stabilizing
    candidates score SENTINEL: the minimizer avoids them, the maximizer skips
    them unless nothing else is left. Ties go to the lowest catalog index.

    Raises:
        InfeasibleAtK: the minimizer ends on a non-stabilizing subset.
    """
    objective = canonical_objective(objective)
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be 'minimize' or 'maximize', got {direction!r}")
    if not 1 <= k <= sys.M:
        raise ValueError(f"k must lie in [1, {sys.M}], got {k}")
    chosen: list[int] = []
    log: list[tuple[int, float]] = []
    value = SENTINEL
    for _ in range(k):
        candidates = [i for i in range(sys.M) if i not in chosen]
        scores = _score_all(sys, chosen, candidates, objective, n_jobs)
        if direction == "minimize":
            pool = list(range(len(candidates)))
            target = min(scores)
        else:
            pool = [j for j in range(len(candidates)) if scores[j] < SENTINEL] or list(range(len(candidates)))
            target = max(scores[j] for j in pool)
        # candidates are in increasing index order, so the first tie wins
        pick = next(j for j in pool if _ties(scores[j], target))
        chosen.append(candidates[pick])
        value = scores[pick]
        log.append((candidates[pick], value))
    feasible = value < SENTINEL
    if direction == "minimize" and not feasible:
        raise InfeasibleAtK(f"greedy found no stabilizing subset of size {k}")
    return SelectionResult(
        subset=as_actuator_set(chosen, sys.M),
        objective_value=value,
        objective=objective,
        method="greedy" if direction == "minimize" else "anti_greedy",
        trace_log=log,
        feasible=feasible,
    )


def exhaustive_select(sys: NetworkSystem, k: int, objective: str = "trace") -> tuple[SelectionResult, SelectionResult]:
    """Exact best and worst stabilizing k-subsets by enumeration.

    Subsets are visited in lexicographic order and the first extreme wins
    ties.
    """
    objective = canonical_objective(objective)
    if not 0 <= k <= sys.M:
        raise ValueError(f"k must lie in [0, {sys.M}], got {k}")
    count = math.comb(sys.M, k)
    if count > EXHAUSTIVE_CAP:
        raise TooLarge(f"C({sys.M},{k}) = {count} subsets exceeds the cap {EXHAUSTIVE_CAP}")
    best = worst = None
    infeasible = 0
    for S in combinations(range(sys.M), k):
        v = objective_value(sys, S, objective)
        if v >= SENTINEL:
            infeasible += 1
            continue
        if best is None or (v < best[1] and not _ties(v, best[1])):
            best = (S, v)
        if worst is None or (v > worst[1] and not _ties(v, worst[1])):
            worst = (S, v)
    if best is None:
        raise AllInfeasible(f"no stabilizing subset of size {k}")
    results = []
    for (S, v), method in ((best, "exhaustive_best"), (worst, "exhaustive_worst")):
        results.append(
            SelectionResult(subset=tuple(S), objective_value=v, objective=objective, method=method,
                            infeasible_count=infeasible)
        )
    return results[0], results[1]


@dataclass
class RandomDraw:
    subset: ActuatorSet
    value: float
    feasible: bool


def trial_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one (seed, stream...) cell."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def draw_subset(rng: np.random.Generator, M: int, k: int) -> ActuatorSet:
    """Uniform k-subset: the first k entries of a Fisher-Yates shuffle."""
    return tuple(sorted(int(i) for i in rng.permutation(M)[:k]))


def random_subsets(
    sys: NetworkSystem,
    k: int,
    trials: int,
    seed: int,
    objective: str = "trace",
    n_jobs: int = 1,
    stream: Sequence[int] = (),
) -> list[RandomDraw]:
    """Evaluate ``trials`` uniformly drawn k-subsets.

    Trial i draws from its own generator keyed by ``(seed, *stream, i)``, so
    results do not depend on ``n_jobs`` or on evaluation order.
    """
    objective = canonical_objective(objective)
    if not 0 <= k <= sys.M:
        raise ValueError(f"k must lie in [0, {sys.M}], got {k}")

    def one(i):
        S = draw_subset(trial_rng(seed, *stream, i), sys.M, k)
        v = objective_value(sys, S, objective)
        return RandomDraw(subset=S, value=v, feasible=v < SENTINEL)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(one, range(trials)))
    return [one(i) for i in range(trials)]
