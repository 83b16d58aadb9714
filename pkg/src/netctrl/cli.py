"""Command line interface: ``netctrl gen|cost|bound|select|experiment``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    empirical_ratio,
    is_normal,
    stable_ratio_bound,
    symmetric_unstable_bound,
    unstable_lower_bound,
)
from .exceptions import NetCtrlError, NoConvergence
from .experiments import ExperimentConfig, emit, run_experiment
from .lqr import CostSolution, cost_functionals, riccati_recursion, solve_are
from .selection import exhaustive_select, greedy_select, random_subsets
from .sysmodel import (
    build_er_system,
    build_path_system,
    is_symmetric,
    load_system,
    system_to_dict,
    validate_system,
)

log = logging.getLogger("netctrl")


def _parse_actuators(text: str, M: int) -> tuple[int, ...]:
    text = text.strip().lower()
    if text == "all":
        return tuple(range(M))
    if text in ("none", ""):
        return ()
    return tuple(int(tok) for tok in text.split(","))


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        _sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc


def _num(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _csv_document(meta: dict, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {_num(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (list, tuple)):
        out.append([prefix, json.dumps(obj)])
    else:
        out.append([prefix, obj])


# --- subcommands -------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.graph == "path":
        system = build_path_system(args.n, args.rho, require_invertible=not args.allow_singular)
    else:
        scale = None if args.scale_to in ("none", "raw") else float(args.scale_to)
        system = build_er_system(args.n, args.p, args.seed, scale_to=scale)
    _write(json.dumps(system_to_dict(system), indent=1) + "\n", args.out)
    return 0


def cmd_cost(args) -> int:
    system = load_system(args.system)
    S = _parse_actuators(args.actuators, system.M)
    exit_code = 0
    if args.horizon in ("inf", "infinite"):
        try:
            sol = solve_are(system, S, tol=args.tol, method=args.method)
        except NoConvergence as exc:
            log.warning("%s; reporting last iterate", exc)
            sol = exc.solution
            exit_code = 2
    else:
        T = int(args.horizon)
        P0 = riccati_recursion(system, S, T)[0]
        sol = CostSolution(P=P0, horizon=T, iterations=T, method="recursion")
    f = cost_functionals(sol.P, system.X0)
    doc = sol.to_dict()
    doc.update(actuators=list(S), lambda_max=f.lambda_max, trace=f.trace, average=f.average)
    if args.format == "json":
        _write(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        meta = {k: doc[k] for k in ("horizon", "iterations", "residual", "converged", "method",
                                    "lambda_max", "trace", "average")}
        meta["actuators"] = " ".join(map(str, S))
        header = [f"p{j}" for j in range(system.n)]
        _write(_csv_document(meta, header, sol.P.tolist()), args.out)
    return exit_code


def _hypotheses(system) -> dict:
    diag = validate_system(system, ())
    q_min = float(np.linalg.eigvalsh(system.Q)[0])
    return {
        "detectable": diag.detectable,
        "stable": diag.stable,
        "unstable": system.spectral_radius > 1.0,
        "diagonalizable": diag.diagonalizable,
        "symmetric": is_symmetric(system.A),
        "normal": is_normal(system.A),
        "Q_positive_definite": q_min > 0,
        "invertibility_margin": diag.invertibility_margin,
        "spectral_radius": diag.spectral_radius,
        "cond_V": diag.cond_V if math.isfinite(diag.cond_V) else None,
    }


def cmd_bound(args) -> int:
    system = load_system(args.system)
    which = ["unstable", "symmetric", "stable"] if args.which == "all" else [args.which]
    doc = {"k": args.k, "hypotheses": _hypotheses(system), "reports": {}, "errors": {}}
    for name in which:
        try:
            if name == "unstable":
                doc["reports"][name] = unstable_lower_bound(system, args.k).to_dict()
            elif name == "symmetric":
                doc["reports"][name] = symmetric_unstable_bound(system, args.k).to_dict()
            else:
                rep = stable_ratio_bound(system, args.k).to_dict()
                if args.empirical:
                    rep["empirical_ratio"] = empirical_ratio(system, args.k)
                doc["reports"][name] = rep
        except NetCtrlError as exc:
            if args.which != "all":
                raise
            doc["errors"][name] = f"{type(exc).__name__}: {exc}"
    if args.format == "json":
        _write(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        rows: list = []
        _flatten("", doc, rows)
        _write(_csv_document({"command": "bound", "k": args.k}, ["key", "value"], rows), args.out)
    return 0


def cmd_select(args) -> int:
    system = load_system(args.system)
    if args.method == "random":
        draws = random_subsets(system, args.k, args.trials, args.seed, args.objective)
        if args.format == "json":
            doc = {"method": "random", "k": args.k, "seed": args.seed, "objective": args.objective,
                   "draws": [{"subset": list(d.subset), "value": d.value, "feasible": d.feasible} for d in draws]}
            _write(json.dumps(doc, indent=1) + "\n", args.out)
        else:
            rows = [[i, " ".join(map(str, d.subset)), d.value, d.feasible] for i, d in enumerate(draws)]
            meta = {"method": "random", "k": args.k, "seed": args.seed, "objective": args.objective}
            _write(_csv_document(meta, ["trial", "subset", "value", "feasible"], rows), args.out)
        return 0
    if args.method == "exhaustive":
        results = list(exhaustive_select(system, args.k, args.objective))
    else:
        direction = "minimize" if args.method == "greedy" else "maximize"
        results = [greedy_select(system, args.k, args.objective, direction)]
    if args.format == "json":
        _write(json.dumps([r.to_dict() for r in results], indent=1) + "\n", args.out)
    else:
        rows = [[r.method, " ".join(map(str, r.subset)), r.objective_value, r.objective, r.feasible] for r in results]
        _write(_csv_document({"k": args.k}, ["method", "subset", "value", "objective", "feasible"], rows), args.out)
    return 0


def cmd_experiment(args) -> int:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
    doc.pop("kind", None)
    cfg = ExperimentConfig.from_dict(doc, kind=args.kind, seed=args.seed, trials=args.trials)
    result = run_experiment(cfg, n_jobs=args.n_jobs)
    for path in emit(result, args.format, args.out):
        log.info("wrote %s", path)
    if result.failed_cells:
        log.warning("%d cell(s) failed; results were still written", result.failed_cells)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netctrl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"netctrl {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a path or Erdos-Renyi system file")
    p.add_argument("--graph", choices=["path", "er"], default="path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0, help="path scaling factor")
    p.add_argument("--p", type=float, default=0.1, help="ER edge probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-to", default="1", help="ER target spectral radius, or 'none'")
    p.add_argument("--allow-singular", action="store_true", help="accept a singular path matrix")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    def io_flags(p):
        p.add_argument("--system", required=True)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"], default="json")

    p = sub.add_parser("cost", help="optimal cost matrix and functionals")
    io_flags(p)
    p.add_argument("--actuators", default="all", help="comma list of catalog indices, 'all' or 'none'")
    p.add_argument("--horizon", default="inf", help="integer horizon or 'inf'")
    p.add_argument("--tol", type=float, default=1e-11)
    p.add_argument("--method", choices=["doubling", "fixed_point"], default="doubling")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("bound", help="evaluate performance bounds")
    io_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--which", choices=["unstable", "symmetric", "stable", "all"], default="all")
    p.add_argument("--empirical", action="store_true", help="also enumerate the exact stable ratio")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("select", help="actuator subset selection")
    io_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=["greedy", "antigreedy", "exhaustive", "random"], default="greedy")
    p.add_argument("--objective", choices=["trace", "lmax", "avg"], default="trace")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("experiment", help="run a seeded experiment")
    p.add_argument("kind", choices=["fig1", "fig2", "fig3", "fig4"])
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (NetCtrlError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
