"""The refinement acting loop: an agenda of refinement stacks progressed round-robin."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from .core import Domain, Frame, MethodInstance, RefinementStack, State, Task, applicable
from .interp import ACT, ASSIGN, FAIL, SUB, assign_step, current_op, ground_op, next_stack, start_frame
from .planner import Planner, PlannerConfig, SelectionFailure
from .sim import ActionHandle, Environment, Problem, Rng, Status
from .utility import efficiency

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Selectors
# ---------------------------------------------------------------------------

@dataclass
class Choice:
    method: MethodInstance | None
    q: float | None = None
    rollouts: int = 0
    elapsed: float = 0.0
    stats: Any = None


class ReactiveSelector:
    """First applicable instance, in the domain's declaration order, not yet tried."""

    mode = "reactive"

    def bind(self, domain: Domain, rng: Rng) -> None:
        self.domain = domain

    def choose(self, state: State, task: Task, below: Sequence[Frame], tried: Sequence[MethodInstance]) -> Choice:
        return Choice(reactive_select(state, task, self.domain, tried))


def reactive_select(state: State, task: Task, domain: Domain, tried: Sequence[MethodInstance] = ()):
    for m in applicable(state, task, domain):
        if m not in tried:
            return m
    return None


class PlannerSelector:
    """Delegates each choice to the rollout planner."""

    def __init__(self, cfg: PlannerConfig | None = None, mode: str = "upom"):
        self.cfg = cfg or PlannerConfig()
        self.mode = mode

    def bind(self, domain: Domain, rng: Rng) -> None:
        self.planner = Planner(domain, self.cfg, rng)

    def choose(self, state, task, below, tried) -> Choice:
        try:
            r = self.planner.select(state, task, below, exclude=tried)
        except SelectionFailure:
            return Choice(None)
        return Choice(r.method, r.q, r.rollouts, r.elapsed, r.stats)


class PolicySelector:
    """Learned method policy: predict a template, pick one of its applicable instances at random.

    Falls back to declaration order when the predicted template has no untried
    applicable instance.
    """

    def __init__(self, policy, mode: str = "lm"):
        self.policy = policy
        self.mode = mode

    def bind(self, domain: Domain, rng: Rng) -> None:
        self.domain = domain
        self.rng = rng

    def choose(self, state, task, below, tried) -> Choice:
        t0 = time.perf_counter()
        options = [m for m in applicable(state, task, self.domain) if m not in tried]
        if not options:
            return Choice(None)
        name = self.policy.predict_method(state, task)
        same = [m for m in options if m.name == name]
        m = self.rng.choice(same) if same else options[0]
        return Choice(m, elapsed=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class Decision:
    """One method choice made while acting; ``success`` is set when the method finishes."""

    root: int
    state: State
    task: Task
    method: MethodInstance
    q: float | None
    success: bool | None = None


@dataclass
class TaskReport:
    task_id: int
    task: Task
    arrival: int
    success: bool = False
    cost: float = 0.0
    planning_time: float = 0.0
    rollouts: int = 0
    finished: int | None = None
    event: bool = False

    @property
    def efficiency(self) -> float:
        return efficiency(self.cost, self.success)


@dataclass
class RunReport:
    domain: str
    problem_id: str
    run_id: int
    mode: str
    seed: int
    tasks: list[TaskReport]
    trace: list[str]
    decisions: list[Decision]
    mutations: list
    ticks: int

    @property
    def success_ratio(self) -> float:
        return sum(t.success for t in self.tasks) / len(self.tasks) if self.tasks else 0.0


@dataclass
class _Entry:
    report: TaskReport
    stack: RefinementStack
    tried: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    pending: ActionHandle | None = None
    done: bool = False


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class Rae:
    """Acting engine for one problem.

    Each tick: admit arrivals and due events, progress every stack by one
    step in agenda order, then advance the clock.
    """

    def __init__(self, domain: Domain, problem: Problem, selector, seed: int = 0, run_id: int = 0,
                 max_ticks: int = 1000):
        self.domain = domain
        self.problem = problem
        self.selector = selector
        self.seed = seed
        self.run_id = run_id
        self.max_ticks = max_ticks
        root = Rng(seed, f"run/{problem.id}/{run_id}")
        self.env = Environment(domain, problem.state, root.split("env"), problem.events)
        selector.bind(domain, root.split("select"))
        self.arrivals = sorted(((at, i, t) for i, (t, at) in enumerate(problem.tasks)), key=lambda x: (x[0], x[1]))
        self.agenda: list[_Entry] = []
        self.reports: list[TaskReport] = []
        self.trace: list[str] = []
        self.decisions: list[Decision] = []

    @property
    def state(self) -> State:
        return self.env.state

    def _log(self, entry: _Entry | None, msg: str) -> None:
        who = "" if entry is None else f" #{entry.report.task_id}"
        self.trace.append(f"{self.env.clock.tick}{who} {msg}")

    # -- main loop -----------------------------------------------------------
    def run(self) -> RunReport:
        clock = self.env.clock
        while True:
            self._admit()
            if not self.agenda and not self.arrivals and not any(e.task for e in self.env.schedule):
                break
            if clock.tick >= self.max_ticks:
                for e in self.agenda:
                    self._log(e, "timeout")
                    self._finish(e, False)
                self.agenda = []
                break
            for e in list(self.agenda):
                self.progress(e)
            self.agenda = [e for e in self.agenda if not e.done]
            clock.advance()
        return RunReport(self.domain.name, self.problem.id, self.run_id, getattr(self.selector, "mode", "?"),
                         self.seed, self.reports, self.trace, self.decisions, self.env.mutations, clock.tick)

    def _admit(self) -> None:
        tick = self.env.clock.tick
        while self.arrivals and self.arrivals[0][0] <= tick:
            at, _, task = self.arrivals.pop(0)
            self._new_entry(task, at, event=False)
        for ev in self.env.due_events():
            if ev.task is not None:
                self._new_entry(ev.task, ev.tick, event=True)
            else:
                self.env.apply_event(ev)
                self._log(None, "event " + ", ".join(f"{k[0]}{k[1]}={v!r}" for k, v in ev.changes))

    def _new_entry(self, task: Task, at: int, event: bool) -> None:
        rep = TaskReport(len(self.reports), task, at, event=event)
        self.reports.append(rep)
        e = _Entry(rep, RefinementStack((Frame(task),)), [[]], [None])
        self.agenda.append(e)
        self._log(e, f"{'event' if event else 'arrive'} {task}")

    # -- one step --------------------------------------------------------------
    def progress(self, e: _Entry) -> None:
        """Advance one stack by a single step."""
        top = e.stack.top()
        if top.method is None:
            self._select(e)
            return
        op = current_op(self.domain, e.stack, self.state)
        if op is None:  # defensive: frames are popped as soon as their body ends
            self._complete(e, RefinementStack(e.stack))
            return
        if op.kind == ACT:
            if e.pending is None:
                action = ground_op(self.domain, e.stack, self.state, op)
                e.pending = self.env.start(action)
                self._log(e, f"start {action}")
                return
            res = self.env.execute(e.pending)
            if res.status is Status.RUNNING:
                return
            action, e.pending = e.pending.action, None
            e.report.cost += res.cost
            if res.status is Status.FAILED:
                self._log(e, f"failed {action}")
                self.retry(e)
                return
            self._log(e, f"done {action} cost={res.cost:g}")
            raised = self._raised(action, res)
            self._complete(e, next_stack(self.domain, e.stack, self.state))
            if raised is not None:
                self._new_entry(raised, self.env.clock.tick, event=True)
        elif op.kind == SUB:
            sub = ground_op(self.domain, e.stack, self.state, op)
            e.stack = e.stack.push(Frame(sub))
            e.tried.append([])
            e.decisions.append(None)
            self._log(e, f"subtask {sub}")
        elif op.kind == ASSIGN:
            self._complete(e, assign_step(self.domain, e.stack, self.state))
        elif op.kind == FAIL:
            self._log(e, f"fail in {top.method}")
            self.retry(e)

    def _raised(self, action, res) -> Task | None:
        spec = self.domain.actions[action.name]
        if spec.raises is None:
            return None
        return spec.raises.ground(res.state, dict(zip(spec.params, action.args)))

    def _choose(self, e: _Entry, task: Task, depth: int) -> MethodInstance | None:
        ch = self.selector.choose(self.state, task, e.stack[:depth], e.tried[depth])
        e.report.planning_time += ch.elapsed
        e.report.rollouts += ch.rollouts
        if ch.method is None:
            return None
        d = Decision(e.report.task_id, self.state, task, ch.method, ch.q)
        e.decisions[depth] = len(self.decisions)
        self.decisions.append(d)
        return ch.method

    def _select(self, e: _Entry) -> None:
        depth = len(e.stack) - 1
        task = e.stack[depth].task
        m = self._choose(e, task, depth)
        if m is None:
            self._log(e, f"no method for {task}")
            self._frame_failed(e)
            return
        self._log(e, f"select {m} for {task}")
        self._complete(e, start_frame(self.domain, e.stack[:depth], task, m, self.state))

    def retry(self, e: _Entry) -> None:
        """The top frame's method failed: try another applicable instance, else fail the frame."""
        depth = len(e.stack) - 1
        frame = e.stack[depth]
        e.tried[depth].append(frame.method)
        self._resolve_decision(e, depth, False)
        m = self._choose(e, frame.task, depth)
        if m is None:
            self._log(e, f"no alternative for {frame.task}")
            self._frame_failed(e)
            return
        self._log(e, f"retry {frame.task} with {m}")
        self._complete(e, start_frame(self.domain, e.stack[:depth], frame.task, m, self.state))

    def _frame_failed(self, e: _Entry) -> None:
        e.stack = e.stack.pop()
        e.tried.pop()
        e.decisions.pop()
        if not e.stack:
            self._log(e, "root failed")
            self._finish(e, False)
        else:
            self.retry(e)

    def _complete(self, e: _Entry, new: RefinementStack) -> None:
        # frames missing from ``new`` finished successfully
        keep = len(new)
        for depth in range(keep, len(e.stack)):
            self._resolve_decision(e, depth, True)
        del e.tried[keep:]
        del e.decisions[keep:]
        e.stack = new
        if not new:
            self._log(e, "root succeeded")
            self._finish(e, True)

    def _resolve_decision(self, e: _Entry, depth: int, ok: bool) -> None:
        if depth < len(e.decisions) and e.decisions[depth] is not None:
            self.decisions[e.decisions[depth]].success = ok
            e.decisions[depth] = None

    def _finish(self, e: _Entry, ok: bool) -> None:
        e.done = True
        e.report.success = ok
        e.report.finished = self.env.clock.tick


def rae_run(domain: Domain, problem: Problem, selector, seed: int = 0, run_id: int = 0,
            max_ticks: int = 1000) -> RunReport:
    return Rae(domain, problem, selector, seed, run_id, max_ticks).run()
