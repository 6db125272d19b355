"""Experiment grid: domains x problems x runs x modes, per-task CSV rows and summaries."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .core import Domain, DomainError
from .domains import build
from .engine import PlannerSelector, PolicySelector, ReactiveSelector, RunReport, rae_run
from .planner import PlannerConfig
from .sim import Problem, Rng

MODES = ("reactive", "upom", "lm1", "lm2", "upom+nnH")
CSV_COLUMNS = ("domain", "problem_id", "run_id", "mode", "task_id", "success", "cost", "efficiency",
               "planning_time_s", "rollouts", "seed")
OUTPUT_ENV = "REFINEMENT_ACTING_OUTPUT"


class SpecError(ValueError):
    """Invalid run specification (flags, files, models)."""


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def suite_problems(domain: Domain, suite: str, seed: int, limit: int | None = None) -> list[Problem]:
    """``s<N>`` draws N problems from the domain generator; anything else is a directory of problem files."""
    if suite.startswith("s") and suite[1:].isdigit():
        n = int(suite[1:])
        if limit is not None:
            n = min(n, limit)
        if domain.generator is None:
            raise SpecError(f"domain {domain.name} has no problem generator")
        return [domain.generator(Rng(seed, f"gen/{i}"), i) for i in range(n)]
    path = Path(suite)
    if not path.is_dir():
        raise SpecError(f"suite {suite!r} is neither s<N> nor a directory")
    files = sorted(path.glob("*.json"))
    if limit is not None:
        files = files[:limit]
    try:
        return [Problem.loads(f.read_text(), domain) for f in files]
    except (DomainError, ValueError, KeyError) as exc:
        raise SpecError(f"bad problem file in {suite}: {exc}") from None


@dataclass
class RunSpec:
    """Everything a worker needs to reproduce one (problem, run, mode) cell."""

    domain: str
    problem: dict
    mode: str
    run_id: int
    seed: int
    n_ro: int = 1000
    d_max: float = math.inf
    c: float | str = "auto"
    time_budget: float | None = None
    model: str | None = None
    max_ticks: int = 1000


def make_selector(spec: RunSpec, domain: Domain):
    if spec.mode == "reactive":
        return ReactiveSelector()
    cfg = PlannerConfig(n_ro=spec.n_ro, d_max=spec.d_max, c=spec.c, time_budget=spec.time_budget)
    if spec.mode == "upom":
        return PlannerSelector(cfg, "upom")
    from .learn import LearnedHeuristic, MethodPolicy, load_model

    if spec.model is None:
        raise SpecError(f"mode {spec.mode} needs --model")
    key = (spec.model, domain.name)
    model = _MODELS.get(key)
    if model is None:
        model = _MODELS[key] = load_model(spec.model, domain)
    if spec.mode in ("lm1", "lm2"):
        if not isinstance(model, MethodPolicy):
            raise SpecError(f"mode {spec.mode} needs a policy model")
        return PolicySelector(model, spec.mode)
    if not isinstance(model, LearnedHeuristic):
        raise SpecError("mode upom+nnH needs a heuristic model")
    cfg.heuristic = model
    return PlannerSelector(cfg, spec.mode)


_DOMAINS: dict = {}
_MODELS: dict = {}


def execute(spec: RunSpec) -> RunReport:
    domain = _DOMAINS.get(spec.domain)
    if domain is None:
        domain = _DOMAINS[spec.domain] = build(spec.domain)
    problem = Problem.from_dict(spec.problem, domain)
    return rae_run(domain, problem, make_selector(spec, domain), seed=spec.seed, run_id=spec.run_id,
                   max_ticks=spec.max_ticks)


def run_grid(specs: list[RunSpec], workers: int = 1) -> list[RunReport]:
    """Execute cells, in parallel if asked; results come back in ``specs`` order."""
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(execute, specs, chunksize=max(1, len(specs) // (4 * workers))))
    return [execute(s) for s in specs]


def _num(x: float) -> str:
    return repr(float(x))


def report_rows(report: RunReport, timing: bool = False) -> list[dict]:
    rows = []
    for t in report.tasks:
        rows.append({"domain": report.domain, "problem_id": report.problem_id, "run_id": report.run_id,
                     "mode": report.mode, "task_id": t.task_id, "success": int(t.success),
                     "cost": _num(t.cost), "efficiency": _num(t.efficiency),
                     "planning_time_s": _num(t.planning_time) if timing else "",
                     "rollouts": t.rollouts, "seed": report.seed})
    return rows


def write_csv(rows, path, append: bool = False) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as f:
        w = csv.DictWriter(f, CSV_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    """Parse and type-check a results file; errors name the offending line."""
    text = Path(path).read_text()
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise SpecError(f"{path}:1: header {reader.fieldnames} does not match {list(CSV_COLUMNS)}")
    rows = []
    for line, raw in enumerate(reader, 2):
        try:
            row = dict(raw)
            if None in row or any(row[k] is None for k in CSV_COLUMNS):
                raise ValueError("wrong number of fields")
            row["run_id"] = int(row["run_id"])
            row["task_id"] = int(row["task_id"])
            row["success"] = int(row["success"])
            if row["success"] not in (0, 1):
                raise ValueError("success must be 0 or 1")
            row["cost"] = float(row["cost"])
            row["efficiency"] = float(row["efficiency"])
            row["planning_time_s"] = float(row["planning_time_s"]) if row["planning_time_s"] else None
            row["rollouts"] = int(row["rollouts"])
            row["seed"] = int(row["seed"])
        except ValueError as exc:
            raise SpecError(f"{path}:{line}: {exc}") from None
        rows.append(row)
    return rows


@dataclass
class Summary:
    domain: str
    mode: str
    n: int
    efficiency: float
    efficiency_ci: float
    success_ratio: float
    success_ci: float
    planning_time: float | None


def _mean_ci(xs: list[float]) -> tuple[float, float]:
    n = len(xs)
    m = sum(xs) / n
    if n < 2:
        return m, 0.0
    var = sum((x - m) ** 2 for x in xs) / (n - 1)
    return m, 1.96 * math.sqrt(var / n)


def summarize(rows: list[dict]) -> list[Summary]:
    """Per (domain, mode) means over task rows with normal-approximation 95% half-widths."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["domain"], r["mode"]), []).append(r)
    out = []
    for (dom, mode), rs in groups.items():
        eff, eci = _mean_ci([r["efficiency"] for r in rs])
        suc, sci = _mean_ci([float(r["success"]) for r in rs])
        times = [r["planning_time_s"] for r in rs if r["planning_time_s"] is not None]
        out.append(Summary(dom, mode, len(rs), eff, eci, suc, sci, sum(times) / len(times) if times else None))
    return out


def format_summary(summaries: list[Summary]) -> str:
    head = f"{'domain':<12} {'mode':<10} {'tasks':>6} {'efficiency':>18} {'success':>16} {'plan_s/task':>12}"
    lines = [head]
    for s in summaries:
        pt = "-" if s.planning_time is None else f"{s.planning_time:.4f}"
        lines.append(f"{s.domain:<12} {s.mode:<10} {s.n:>6} {s.efficiency:>9.4f} ±{s.efficiency_ci:<7.4f} "
                     f"{s.success_ratio:>7.3f} ±{s.success_ci:<6.3f} {pt:>12}")
    return "\n".join(lines)
