"""Training records harvested from simulated acting runs."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from ..core import Domain, DomainError, State, Task
from ..engine import PlannerSelector, rae_run
from ..planner import PlannerConfig
from ..sim import Rng

STRATEGIES = ("lm1", "lm2", "lh")


@dataclass(frozen=True)
class LmRecord:
    """Context ``(state, task)`` labelled with the chosen method template."""

    state: State
    task: Task
    method: str
    success: bool | None

    def to_dict(self) -> dict:
        return {"kind": "lm", "state": self.state.canonical(), "task": [self.task.name, list(self.task.args)],
                "method": self.method, "success": self.success}


@dataclass(frozen=True)
class LhRecord:
    """Context ``(state, task, method)`` labelled with the planner's utility estimate."""

    state: State
    task: Task
    method: str
    u: float

    def to_dict(self) -> dict:
        return {"kind": "lh", "state": self.state.canonical(), "task": [self.task.name, list(self.task.args)],
                "method": self.method, "u": self.u}


def generate_data(domain: Domain, n_tasks: int, strategy: str, cfg: PlannerConfig | None = None,
                  rng: Rng | None = None, max_ticks: int = 1000) -> list:
    """Act on generated problems with the planner and keep one record per method choice.

    Problems are drawn until at least ``n_tasks`` root tasks have been acted on.
    ``lm1`` keeps choices whose method went on to succeed, ``lm2`` keeps every
    choice, ``lh`` keeps every choice with the root Q of the chosen method.
    """
    strategy = strategy.lower()
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if domain.generator is None:
        raise DomainError(f"domain {domain.name} has no problem generator")
    rng = rng or Rng(0, "data")
    # every choice must be planned, or lone candidates would carry no estimate
    cfg = replace(cfg or PlannerConfig(), skip_single=False)
    records, seen, index = [], 0, 0
    while seen < n_tasks:
        problem = domain.generator(rng.split(f"problem/{index}"), index)
        report = rae_run(domain, problem, PlannerSelector(cfg), seed=rng.seed, run_id=index, max_ticks=max_ticks)
        seen += len(report.tasks)
        index += 1
        for d in report.decisions:
            if strategy == "lm1" and d.success is not True:
                continue
            if strategy == "lh":
                if d.q is not None:
                    records.append(LhRecord(d.state, d.task, d.method.name, float(d.q)))
            else:
                records.append(LmRecord(d.state, d.task, d.method.name, d.success))
    return records


def save_records(records, path) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


def load_records(path, domain: Domain) -> list:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            state = domain.space.state({(name, tuple(args)): val for name, args, val in d["state"]})
            task = Task(d["task"][0], tuple(d["task"][1]))
            if d["kind"] == "lm":
                out.append(LmRecord(state, task, d["method"], d["success"]))
            else:
                out.append(LhRecord(state, task, d["method"], float(d["u"])))
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise ValueError(f"{path}:{n}: bad record ({exc})") from None
    return out
