"""Seeded reproductions of the four actuator-selection experiments.

Each ``run_figN`` returns an :class:`ExperimentResult` of named column
tables; :func:`emit` writes them as CSV (one file per table) or as a single
JSON document. Every random draw comes from a generator keyed by
``(seed, cell...)`` so reruns and parallel runs give identical tables.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .exceptions import EmptyInput, NoConvergence, NotStabilizable
from .lqr import cost_functionals, solve_are
from .selection import (
    canonical_objective,
    greedy_select,
    random_subsets,
    trial_rng,
)
from .sysmodel import NetworkSystem, build_er_system, make_system, path_matrix, spectral_scale

KINDS = ("fig1", "fig2", "fig3", "fig4")
_GRAPH_CODE = {"path": 1, "er": 2}
_DEFAULTS = {
    "fig1": dict(n=50, graph=["path"], m_list=None),
    "fig2": dict(n=100, graph=["path", "er"], m_list=[1, 5, 10, 30]),
    "fig3": dict(n=100, graph=["path", "er"], m_list=[1, 5, 10, 30]),
    "fig4": dict(n=100, graph=["path"], m_list=[1, 10]),
}


@dataclass
class ExperimentConfig:
    kind: str
    n: int | None = None
    rho_list: list[float] = field(default_factory=lambda: [0.9, 0.99, 1.0, 1.003, 1.005])
    graph: list[str] | str | None = None
    p: float = 0.1
    m_list: list[int] | None = None
    trials: int = 1000
    seed: int = 0
    objective: str = "trace"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        defaults = _DEFAULTS[self.kind]
        if self.n is None:
            self.n = defaults["n"]
        if self.graph is None:
            self.graph = list(defaults["graph"])
        elif isinstance(self.graph, str):
            self.graph = ["path", "er"] if self.graph == "both" else [self.graph]
        if self.m_list is None:
            self.m_list = list(defaults["m_list"] or range(1, self.n + 1))
        self.objective = canonical_objective(self.objective)
        self.rho_list = [float(r) for r in self.rho_list]
        self.m_list = [int(m) for m in self.m_list]
        self.validate()

    def validate(self) -> None:
        if any(g not in _GRAPH_CODE for g in self.graph):
            raise ValueError(f"graph must be 'path', 'er' or 'both', got {self.graph}")
        if self.kind in ("fig1", "fig4") and self.graph != ["path"]:
            raise ValueError(f"{self.kind} is defined on the path graph only")
        if any(not 1 <= m <= self.n for m in self.m_list):
            raise ValueError(f"m_list entries must lie in [1, n={self.n}], got {self.m_list}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "ExperimentConfig":
        fields = dict(doc)
        fields.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(fields) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**fields)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BoxStats:
    min: float
    q1: float
    mean: float
    q3: float
    max: float
    count: int


def summarize_box(values: Sequence[float]) -> BoxStats:
    """Five-number box summary with R-7 (linear interpolation) quartiles."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyInput("cannot summarize an empty sample")
    q1, q3 = np.percentile(x, [25, 75], method="linear")
    return BoxStats(
        min=float(x.min()), q1=float(q1), mean=float(x.mean()), q3=float(q3), max=float(x.max()), count=int(x.size)
    )


@dataclass
class ExperimentResult:
    kind: str
    config: dict
    tables: dict[str, dict[str, list]]
    provenance: dict
    failed_cells: int = 0


def _table(*columns: str) -> dict[str, list]:
    return {c: [] for c in columns}


def _append(table: dict[str, list], **row) -> None:
    for key, col in table.items():
        col.append(row[key])


def _fmt_subset(S) -> str:
    return " ".join(str(i) for i in S)


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "version": f"netctrl {__version__}"}


def experiment_system(graph: str, n: int, cfg: ExperimentConfig) -> NetworkSystem:
    """Marginally stable (spectral radius 1) path or Erdos-Renyi system."""
    if graph == "path":
        # only costs are computed here, so singular path lengths are allowed
        return make_system(spectral_scale(path_matrix(n, 3.0), 1.0), require_invertible=False)
    er_seed = int(np.random.SeedSequence([cfg.seed, _GRAPH_CODE["er"]]).generate_state(1)[0])
    return build_er_system(n, cfg.p, er_seed, scale_to=1.0)


def evenly_spaced(n: int, m: int) -> tuple[int, ...]:
    """Node floor((i + 1/2) n / m) for i < m: the node holding each cell's midpoint."""
    return tuple(int(math.floor((i + 0.5) * n / m)) for i in range(m))


def _solve_cell(sys: NetworkSystem, S):
    """(P, flag) for one cell; flag is '', 'noconv' or 'failed'."""
    try:
        return solve_are(sys, S).P, ""
    except NoConvergence as exc:
        return exc.solution.P, "noconv"
    except NotStabilizable:
        return None, "failed"


def run_fig1(cfg: ExperimentConfig) -> ExperimentResult:
    """Cost against the number of evenly spaced actuators on a path, per rho."""
    if cfg.kind != "fig1":
        raise ValueError("run_fig1 needs a fig1 config")
    table = _table("rho", "m", "actuators", "trace", "lambda_max", "average", "flags")
    failed = 0
    for rho in cfg.rho_list:
        # 3 | n+1 makes the path singular (n = 50 included); costs do not need A^{-1}
        sys = make_system(path_matrix(cfg.n, rho), require_invertible=False)
        for m in cfg.m_list:
            S = evenly_spaced(cfg.n, m)
            P, flag = _solve_cell(sys, S)
            if P is None:
                failed += 1
                f = (math.nan, math.nan, math.nan)
            else:
                fn = cost_functionals(P, sys.X0)
                f = (fn.trace, fn.lambda_max, fn.average)
            _append(table, rho=rho, m=m, actuators=_fmt_subset(S), trace=f[0], lambda_max=f[1], average=f[2], flags=flag)
    return ExperimentResult("fig1", cfg.to_dict(), {"costs": table}, _provenance(cfg), failed)


def run_fig2(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    """Box statistics of the trace cost over uniformly random m-subsets."""
    if cfg.kind != "fig2":
        raise ValueError("run_fig2 needs a fig2 config")
    box = _table("graph", "m", "count", "min", "q1", "mean", "q3", "max", "infeasible")
    samples = _table("graph", "m", "trial", "actuators", "value", "flags")
    failed = 0
    for graph in cfg.graph:
        sys = experiment_system(graph, cfg.n, cfg)
        for m in cfg.m_list:
            draws = random_subsets(
                sys, m, cfg.trials, cfg.seed, cfg.objective, n_jobs=n_jobs, stream=(_GRAPH_CODE[graph], m)
            )
            ok = [d.value for d in draws if d.feasible]
            bad = len(draws) - len(ok)
            failed += bad
            for i, d in enumerate(draws):
                _append(samples, graph=graph, m=m, trial=i, actuators=_fmt_subset(d.subset),
                        value=d.value if d.feasible else math.nan, flags="" if d.feasible else "failed")
            stats = summarize_box(ok) if ok else BoxStats(*(math.nan,) * 5, count=0)
            _append(box, graph=graph, m=m, count=stats.count, min=stats.min, q1=stats.q1, mean=stats.mean,
                    q3=stats.q3, max=stats.max, infeasible=bad)
    return ExperimentResult("fig2", cfg.to_dict(), {"box": box, "samples": samples}, _provenance(cfg), failed)


def _greedy_prefixes(sys, m_max, objective, direction, n_jobs):
    result = greedy_select(sys, m_max, objective, direction, n_jobs=n_jobs)
    order = [idx for idx, _ in result.trace_log]
    return {m: tuple(sorted(order[:m])) for m in range(1, m_max + 1)}


def unit_directions(rng: np.random.Generator, trials: int, n: int) -> np.ndarray:
    x = rng.standard_normal((trials, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def run_fig3(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    """Cost x0'P x0 over random unit x0 for greedy and anti-greedy subsets.

    Greedy selection is incremental, so one run to max(m_list) yields every
    smaller m as a prefix.
    """
    if cfg.kind != "fig3":
        raise ValueError("run_fig3 needs a fig3 config")
    box = _table("graph", "selection", "m", "actuators", "count", "min", "q1", "mean", "q3", "max",
                 "lambda_min_P", "lambda_max_P")
    failed = 0
    m_max = max(cfg.m_list)
    for graph in cfg.graph:
        sys = experiment_system(graph, cfg.n, cfg)
        x0 = unit_directions(trial_rng(cfg.seed, _GRAPH_CODE[graph], 0), cfg.trials, cfg.n)
        for selection, direction in (("greedy", "minimize"), ("anti_greedy", "maximize")):
            prefixes = _greedy_prefixes(sys, m_max, cfg.objective, direction, n_jobs)
            for m in cfg.m_list:
                S = prefixes[m]
                P, flag = _solve_cell(sys, S)
                if P is None:
                    failed += 1
                    continue
                costs = np.einsum("ti,ij,tj->t", x0, P, x0)
                lam = np.linalg.eigvalsh(P)
                stats = summarize_box(costs)
                _append(box, graph=graph, selection=selection, m=m, actuators=_fmt_subset(S), count=stats.count,
                        min=stats.min, q1=stats.q1, mean=stats.mean, q3=stats.q3, max=stats.max,
                        lambda_min_P=float(lam[0]), lambda_max_P=float(lam[-1]))
    return ExperimentResult("fig3", cfg.to_dict(), {"box": box}, _provenance(cfg), failed)


def leading_modes(M: np.ndarray, count: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """First ``count`` eigenpairs of a symmetric M by descending |eigenvalue|.

    Each eigenvector has unit norm and its largest-magnitude entry positive.
    """
    w, V = np.linalg.eigh((M + M.T) / 2)
    order = np.argsort(-np.abs(w), kind="stable")[:count]
    w, V = w[order], V[:, order]
    for j in range(V.shape[1]):
        pivot = int(np.argmax(np.abs(V[:, j])))
        if V[pivot, j] < 0:
            V[:, j] = -V[:, j]
    return w, V


def run_fig4(cfg: ExperimentConfig, n_jobs: int = 1, modes: int = 5) -> ExperimentResult:
    """Leading modes of A and of P for best and worst greedy subsets."""
    if cfg.kind != "fig4":
        raise ValueError("run_fig4 needs a fig4 config")
    mode_table = _table("source", "m", "mode", "eigenvalue", "node", "value")
    summary = _table("m", "best", "worst", "lambda1_best", "lambda1_worst", "ratio")
    sys = experiment_system("path", cfg.n, cfg)
    failed = 0

    def add_modes(source, m, M):
        w, V = leading_modes(M, modes)
        for j in range(len(w)):
            for node in range(cfg.n):
                _append(mode_table, source=source, m=m, mode=j + 1, eigenvalue=float(w[j]), node=node,
                        value=float(V[node, j]))

    add_modes("A", 0, np.array(sys.A))
    m_max = max(cfg.m_list)
    best = _greedy_prefixes(sys, m_max, cfg.objective, "minimize", n_jobs)
    worst = _greedy_prefixes(sys, m_max, cfg.objective, "maximize", n_jobs)
    for m in cfg.m_list:
        lam1 = {}
        for label, S in (("best", best[m]), ("worst", worst[m])):
            P, flag = _solve_cell(sys, S)
            if P is None:
                failed += 1
                lam1[label] = math.nan
                continue
            lam1[label] = float(np.linalg.eigvalsh(P)[-1])
            add_modes(f"P_{label}", m, P)
        _append(summary, m=m, best=_fmt_subset(best[m]), worst=_fmt_subset(worst[m]),
                lambda1_best=lam1["best"], lambda1_worst=lam1["worst"], ratio=lam1["worst"] / lam1["best"])
    return ExperimentResult("fig4", cfg.to_dict(), {"summary": summary, "modes": mode_table}, _provenance(cfg), failed)


RUNNERS = {"fig1": run_fig1, "fig2": run_fig2, "fig3": run_fig3, "fig4": run_fig4}


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    if cfg.kind == "fig1":
        return run_fig1(cfg)
    return RUNNERS[cfg.kind](cfg, n_jobs=n_jobs)


# --- output ------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit(result: ExperimentResult, fmt: str, out_dir) -> list[Path]:
    """Write ``result`` under ``out_dir`` and return the written paths.

    CSV gives one ``<kind>_<table>.csv`` per table, each starting with
    ``#``-prefixed metadata lines. JSON gives a single ``<kind>.json``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path = out / f"{result.kind}.json"
            doc = {
                "kind": result.kind,
                "config": result.config,
                "provenance": result.provenance,
                "failed_cells": result.failed_cells,
                "tables": result.tables,
            }
            if "box" in result.tables:
                doc["box_stats"] = box_objects(result.tables["box"])
            path.write_text(json.dumps(doc, indent=1, allow_nan=True) + "\n")
            return [path]
        if fmt != "csv":
            raise ValueError(f"unknown output format {fmt!r}")
        paths = []
        for name, table in result.tables.items():
            path = out / f"{result.kind}_{name}.csv"
            with path.open("w", newline="") as fh:
                fh.write(f"# kind: {result.kind}\n")
                fh.write(f"# table: {name}\n")
                fh.write(f"# seed: {result.provenance['seed']}\n")
                fh.write(f"# version: {result.provenance['version']}\n")
                fh.write(f"# config: {json.dumps(result.config, sort_keys=True)}\n")
                writer = csv.writer(fh, lineterminator="\n")
                cols = list(table)
                writer.writerow(cols)
                for row in zip(*(table[c] for c in cols)):
                    writer.writerow([_cell(v) for v in row])
            paths.append(path)
        return paths
    except OSError as exc:
        raise OSError(f"cannot write experiment output under {out}: {exc}") from exc


def box_objects(box: dict[str, list]) -> list[dict]:
    """Row-wise view of a box table, one object per (graph, selection, m)."""
    cols = list(box)
    return [dict(zip(cols, row)) for row in zip(*(box[c] for c in cols))]


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_csv_table(path) -> tuple[dict[str, str], dict[str, list]]:
    """Parse a CSV written by :func:`emit` back into (metadata, columns)."""
    meta: dict[str, str] = {}
    lines = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    table: dict[str, list] = {c: [] for c in header}
    for row in reader:
        for c, v in zip(header, row):
            table[c].append(_parse_value(v))
    return meta, table

