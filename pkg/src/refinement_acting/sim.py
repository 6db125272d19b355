"""Nondeterministic environment: outcome sampling, timed execution, exogenous events."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

from .core import Domain, DomainError, GroundAction, State, Task

PROBLEM_FORMAT = "refinement-acting/problem"
PROBLEM_VERSION = 1


class Rng:
    """Seeded random stream; ``split`` derives independent labelled sub-streams.

    ``draws`` counts consumed numbers so tests can check streams stay disjoint.
    """

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed)
        self.label = label
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        self._r = random.Random(int.from_bytes(digest[:8], "big"))
        self.draws = 0

    def split(self, label: str) -> "Rng":
        return Rng(self.seed, f"{self.label}/{label}")

    def random(self) -> float:
        self.draws += 1
        return self._r.random()

    def randrange(self, n: int) -> int:
        self.draws += 1
        return self._r.randrange(n)

    def randint(self, a: int, b: int) -> int:
        return a + self.randrange(b - a + 1)

    def choice(self, seq: Sequence):
        return seq[self.randrange(len(seq))]

    def sample(self, seq: Sequence, k: int) -> list:
        self.draws += 1
        return self._r.sample(list(seq), k)

    def __repr__(self):
        return f"Rng(seed={self.seed}, label={self.label!r}, draws={self.draws})"


FAILED = None  # sample() result for a failed outcome


class GroundOutcome(NamedTuple):
    prob: float
    state: State | None  # None when the outcome is a failure
    cost: float


# cost charged for attempting an action whose precondition does not hold
PRE_FAIL_COST = 1.0


def action_spec(domain: Domain, action: GroundAction):
    spec = domain.actions.get(action.name)
    if spec is None:
        raise DomainError(f"undeclared action {action.name}")
    if len(action.args) != len(spec.params):
        raise DomainError(f"action {action}: expected {len(spec.params)} arguments")
    return spec


def ground_outcomes(domain: Domain, state: State, action: GroundAction) -> tuple[GroundOutcome, ...]:
    """Resulting states and costs of every declared outcome of ``action`` in ``state``.

    An action whose precondition is false fails with certainty at ``PRE_FAIL_COST``.
    """
    spec = action_spec(domain, action)
    env = dict(zip(spec.params, action.args))
    if spec.pre is not None and not spec.pre.ev(state, env):
        return (GroundOutcome(1.0, None, PRE_FAIL_COST),)
    out = []
    for o in spec.outcomes:
        cost = _cost(o.cost, state, env, allow_zero=o.failed)
        if o.failed:
            out.append(GroundOutcome(o.prob, None, cost))
        else:
            changes = [(e.target.key(state, env), e.value.ev(state, env) if hasattr(e.value, "ev") else e.value)
                       for e in o.effects]
            out.append(GroundOutcome(o.prob, state.update(changes), cost))
    return tuple(out)


def _cost(cost, state, env, allow_zero=False) -> float:
    value = float(cost.ev(state, env) if hasattr(cost, "ev") else cost)
    if value < 0 or (value == 0 and not allow_zero):
        raise DomainError(f"action cost must be positive, got {value}")
    return value


def pick(outcomes: Sequence[GroundOutcome], r: float) -> int:
    """Index of the outcome selected by a uniform draw ``r`` in [0, 1)."""
    acc = 0.0
    for i, o in enumerate(outcomes):
        acc += o.prob
        if r < acc:
            return i
    # rounding slack: fall back to the last outcome with non-zero probability
    for i in range(len(outcomes) - 1, -1, -1):
        if outcomes[i].prob > 0:
            return i
    return len(outcomes) - 1


def sample(domain: Domain, state: State, action: GroundAction, rng: Rng) -> tuple[State | None, float]:
    """Draw one outcome; returns ``(next_state or FAILED, cost)``."""
    outs = ground_outcomes(domain, state, action)
    o = outs[pick(outs, rng.random())]
    return o.state, o.cost


# ---------------------------------------------------------------------------
# Acting environment
# ---------------------------------------------------------------------------

class Status(Enum):
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


class Execution(NamedTuple):
    status: Status
    state: State | None = None
    cost: float = 0.0


@dataclass
class EnvClock:
    tick: int = 0

    def advance(self) -> int:
        self.tick += 1
        return self.tick


@dataclass(frozen=True)
class ExoEvent:
    """Either an incoming event task or a direct state change at ``tick``."""

    tick: int
    task: Task | None = None
    changes: tuple = ()

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("event ticks are non-negative")
        if (self.task is None) == (not self.changes):
            raise ValueError("an event carries either a task or state changes")
        object.__setattr__(self, "changes", tuple((tuple((k[0], tuple(k[1]))), val) for k, val in self.changes))


def pending_events(clock: EnvClock, schedule: list[ExoEvent]) -> list[ExoEvent]:
    """Remove and return the events due at or before the current tick."""
    due = 0
    while due < len(schedule) and schedule[due].tick <= clock.tick:
        due += 1
    out = schedule[:due]
    del schedule[:due]
    return out


@dataclass
class ActionHandle:
    action: GroundAction
    started: int
    duration: int


class Environment:
    """The world the actor acts in: owns the true state and a private random stream."""

    def __init__(self, domain: Domain, state: State, rng: Rng, events: Sequence[ExoEvent] = ()):
        self.domain = domain
        self.state = state
        self.rng = rng
        self.clock = EnvClock()
        self.schedule = sorted(events, key=lambda e: e.tick)
        self.mutations: list[tuple[int, str, list]] = []

    def start(self, action: GroundAction) -> ActionHandle:
        spec = action_spec(self.domain, action)
        return ActionHandle(action, self.clock.tick, int(spec.duration))

    def execute(self, handle: ActionHandle) -> Execution:
        """Poll a started action; its outcome is drawn when its duration has elapsed."""
        if self.clock.tick - handle.started < handle.duration:
            return Execution(Status.RUNNING)
        new, cost = sample(self.domain, self.state, handle.action, self.rng)
        if new is FAILED:
            return Execution(Status.FAILED, None, cost)
        self._mutate(new, f"action {handle.action}")
        return Execution(Status.DONE, new, cost)

    def due_events(self) -> list[ExoEvent]:
        return pending_events(self.clock, self.schedule)

    def apply_event(self, event: ExoEvent) -> None:
        self._mutate(self.state.update(event.changes), "event")

    def _mutate(self, new: State, source: str) -> None:
        changes = self.state.diff(new)
        if changes:
            self.mutations.append((self.clock.tick, source, changes))
        self.state = new


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """Initial state, root tasks with arrival ticks, and an exogenous-event schedule."""

    id: str
    domain: str
    state: State
    tasks: list[tuple[Task, int]]
    events: list[ExoEvent] = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "format": PROBLEM_FORMAT,
            "version": PROBLEM_VERSION,
            "id": self.id,
            "domain": self.domain,
            "seed": self.seed,
            "initial_state": self.state.canonical(),
            "tasks": [{"name": t.name, "args": list(t.args), "arrival": at} for t, at in self.tasks],
            "events": [
                {"tick": e.tick,
                 "task": None if e.task is None else {"name": e.task.name, "args": list(e.task.args)},
                 "changes": [[k[0], list(k[1]), val] for k, val in e.changes]}
                for e in self.events
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, domain: Domain) -> "Problem":
        if data.get("format") != PROBLEM_FORMAT:
            raise DomainError("not a problem file")
        if data.get("version") != PROBLEM_VERSION:
            raise DomainError(f"unsupported problem file version {data.get('version')}")
        if data["domain"] != domain.name:
            raise DomainError(f"problem is for domain {data['domain']}, not {domain.name}")
        state = domain.space.state({(n, tuple(a)): val for n, a, val in data["initial_state"]})
        tasks = [(Task(t["name"], tuple(t["args"])), int(t["arrival"])) for t in data["tasks"]]
        for t, _ in tasks:
            domain.check_task(t)
        events = []
        for e in data.get("events", []):
            task = None if e["task"] is None else Task(e["task"]["name"], tuple(e["task"]["args"]))
            events.append(ExoEvent(int(e["tick"]), task, tuple(((n, tuple(a)), val) for n, a, val in e["changes"])))
        return cls(data["id"], data["domain"], state, tasks, events, int(data.get("seed", 0)))

    @classmethod
    def loads(cls, text: str, domain: Domain) -> "Problem":
        return cls.from_dict(json.loads(text), domain)
