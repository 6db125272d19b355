"""Domain vocabulary: states, tasks, actions, method templates and refinement stacks."""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence


class DomainError(ValueError):
    """A domain definition or a value violates its declarations."""


class EmptyStackError(IndexError):
    pass


class InterpreterError(RuntimeError):
    """Internal inconsistency while interpreting a method body."""


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateVarDecl:
    """One grounded state variable, e.g. ``loc(r1)`` ranging over locations."""

    name: str
    args: tuple = ()
    range: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "range", tuple(self.range))
        if not self.range:
            raise DomainError(f"state variable {self.label} has an empty range")
        if len(set(self.range)) != len(self.range):
            raise DomainError(f"state variable {self.label} has duplicate values")

    @property
    def key(self) -> tuple:
        return (self.name, self.args)

    @property
    def label(self) -> str:
        return f"{self.name}({', '.join(map(str, self.args))})"


class StateSpace:
    """Declared state variables plus rigid (never changing) relations."""

    def __init__(self, decls: Iterable[StateVarDecl], rigids: Mapping[str, Any] | None = None):
        self.decls = tuple(decls)
        self.index: dict[tuple, int] = {}
        for i, d in enumerate(self.decls):
            if d.key in self.index:
                raise DomainError(f"state variable {d.label} declared twice")
            self.index[d.key] = i
        self.allowed = tuple(frozenset(d.range) for d in self.decls)
        self.rigids = dict(rigids or {})

    def __len__(self):
        return len(self.decls)

    @property
    def max_range(self) -> int:
        return max((len(d.range) for d in self.decls), default=0)

    def rigid(self, name: str, args: tuple):
        try:
            rel = self.rigids[name]
        except KeyError:
            raise DomainError(f"undeclared rigid relation {name!r}") from None
        if callable(rel):
            return rel(*args)
        if not args:
            return rel
        try:
            return rel[args if len(args) > 1 else args[0]]
        except KeyError:
            raise DomainError(f"rigid relation {name}{args} is undefined") from None

    def state(self, assignment: Mapping[tuple, Any]) -> "State":
        """Build a total state; every declared variable must be assigned."""
        missing = [d.label for d in self.decls if d.key not in assignment]
        if missing:
            raise DomainError(f"state assignment is not total, missing {missing[:5]}")
        extra = [k for k in assignment if k not in self.index]
        if extra:
            raise DomainError(f"assignment to undeclared variables {extra[:5]}")
        values = tuple(assignment[d.key] for d in self.decls)
        for d, val, ok in zip(self.decls, values, self.allowed):
            if val not in ok:
                raise DomainError(f"{val!r} is outside the range of {d.label}")
        return State(self, values)


class State:
    """Immutable total assignment of the declared state variables."""

    __slots__ = ("space", "values", "_hash")

    def __init__(self, space: StateSpace, values: tuple):
        self.space = space
        self.values = values
        self._hash = hash(values)

    def __getitem__(self, key: tuple):
        try:
            return self.values[self.space.index[key]]
        except KeyError:
            raise DomainError(f"undeclared state variable {key[0]}{key[1]}") from None

    def get(self, name: str, *args):
        return self[(name, tuple(args))]

    def update(self, changes: Iterable[tuple[tuple, Any]]) -> "State":
        values = list(self.values)
        index, allowed = self.space.index, self.space.allowed
        for key, val in changes:
            try:
                i = index[key]
            except KeyError:
                raise DomainError(f"effect on undeclared state variable {key[0]}{key[1]}") from None
            if val not in allowed[i]:
                raise DomainError(f"{val!r} is outside the range of {key[0]}{key[1]}")
            values[i] = val
        return State(self.space, tuple(values))

    def diff(self, other: "State") -> list[tuple[tuple, Any, Any]]:
        return [(d.key, a, b) for d, a, b in zip(self.space.decls, self.values, other.values) if a != b]

    def as_dict(self) -> dict:
        return {d.key: v for d, v in zip(self.space.decls, self.values)}

    def canonical(self) -> list:
        return [[d.name, list(d.args), v] for d, v in zip(self.space.decls, self.values)]

    def __eq__(self, other):
        return isinstance(other, State) and self.values == other.values

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{d.label}={v!r}" for d, v in zip(self.space.decls, self.values))
        return f"State({inner})"


# ---------------------------------------------------------------------------
# Tasks, actions, methods
# ---------------------------------------------------------------------------

class Task(NamedTuple):
    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class TaskDecl:
    name: str
    params: tuple = ()
    ranges: tuple | None = None
    event: bool = False

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if self.ranges is not None:
            object.__setattr__(self, "ranges", tuple(tuple(r) for r in self.ranges))
            if len(self.ranges) != len(self.params):
                raise DomainError(f"task {self.name}: one range per parameter required")


class GroundAction(NamedTuple):
    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Effect:
    """Set the state variable addressed by ``target`` (an ``sv`` expression) to ``value``."""

    target: Any
    value: Any


@dataclass(frozen=True)
class Outcome:
    """One nondeterministic outcome of an action.

    For a failed outcome, ``cost`` is only charged to the acting ledger; planning
    treats the outcome as U(Failure).
    """

    prob: float
    effects: tuple = ()
    cost: Any = 1.0
    failed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(self.effects))


@dataclass(frozen=True, eq=False)
class ActionSpec:
    name: str
    params: tuple
    outcomes: tuple
    pre: Any = None
    duration: int = 1
    raises: Any = None  # optional Subtask grounded on success and queued as an event

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.outcomes:
            raise DomainError(f"action {self.name}: no outcomes")
        total = math.fsum(o.prob for o in self.outcomes)
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"action {self.name}: outcome probabilities sum to {total}")
        for i, o in enumerate(self.outcomes):
            if not 0.0 <= o.prob <= 1.0:
                raise DomainError(f"action {self.name} outcome {i}: probability {o.prob}")
            if isinstance(o.cost, (int, float)) and not o.failed and o.cost <= 0:
                raise DomainError(f"action {self.name} outcome {i}: cost must be positive")
        if int(self.duration) < 1:
            raise DomainError(f"action {self.name}: duration must be >= 1")


@dataclass(frozen=True, eq=False)
class MethodTemplate:
    """Parameterized refinement method.

    ``params`` name the task arguments positionally; ``free`` lists extra
    parameters with their finite candidate values.
    """

    name: str
    task: str
    params: tuple
    body: tuple
    pre: Any = None
    free: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "body", tuple(self.body))
        free = self.free.items() if isinstance(self.free, Mapping) else self.free
        free = tuple((n, tuple(vals)) for n, vals in free)
        for n, vals in free:
            if not vals:
                raise DomainError(f"method {self.name}: free parameter {n} has no candidates")
        object.__setattr__(self, "free", free)

    @property
    def param_names(self) -> tuple:
        return self.params + tuple(n for n, _ in self.free)

    @cached_property
    def code(self):
        from .interp import compile_body

        return compile_body(self.body)

    def binding(self, args: tuple) -> dict:
        return dict(zip(self.param_names, args))


class MethodInstance(NamedTuple):
    """A template name plus values for all of its parameters."""

    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


class Frame(NamedTuple):
    task: Task
    method: MethodInstance | None = None
    step: Any = None


class RefinementStack(tuple):
    """LIFO of frames; the top is the last element."""

    __slots__ = ()

    def push(self, frame: Frame) -> "RefinementStack":
        return RefinementStack(self + (frame,))

    def pop(self) -> "RefinementStack":
        if not self:
            raise EmptyStackError("pop from an empty refinement stack")
        return RefinementStack(self[:-1])

    def top(self) -> Frame:
        if not self:
            raise EmptyStackError("top of an empty refinement stack")
        return self[-1]

    def canonical(self) -> list:
        return [_frame_canonical(f) for f in self]

    def __repr__(self):
        return f"RefinementStack({list(self)!r})"


def _frame_canonical(f: Frame) -> list:
    m = None if f.method is None else [f.method.name, list(f.method.args)]
    step = None if f.step is None else [f.step.pc, [[list(items), pos] for items, pos in f.step.iters],
                                        [[k, v] for k, v in f.step.locals]]
    return [f.task.name, list(f.task.args), m, step]


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Domain:
    """An acting domain: state space, tasks, actions, methods and a problem generator."""

    name: str
    space: StateSpace
    tasks: dict[str, TaskDecl]
    actions: dict[str, ActionSpec]
    templates: list[MethodTemplate]
    features: dict[str, bool] = field(default_factory=dict)
    generator: Callable | None = None
    constants: Any = None

    def __post_init__(self):
        self.template_index = {}
        self.by_task: dict[str, list[MethodTemplate]] = {t: [] for t in self.tasks}
        for t in self.templates:
            if t.name in self.template_index:
                raise DomainError(f"method {t.name} declared twice")
            if t.task not in self.tasks:
                raise DomainError(f"method {t.name} refines undeclared task {t.task}")
            if len(t.params) != len(self.tasks[t.task].params):
                raise DomainError(f"method {t.name}: arity differs from task {t.task}")
            self.template_index[t.name] = t
            self.by_task[t.task].append(t)
        self.method_names = [t.name for t in self.templates]
        self.task_names = list(self.tasks)
        from .interp import validate_domain

        validate_domain(self)

    def template(self, name: str) -> MethodTemplate:
        return self.template_index[name]

    def counts(self) -> dict[str, int]:
        return {"tasks": len(self.tasks), "methods": len(self.templates), "actions": len(self.actions),
                "state_vars": len(self.space), "max_range": self.space.max_range}

    def check_task(self, task: Task) -> None:
        decl = self.tasks.get(task.name)
        if decl is None:
            raise DomainError(f"undeclared task {task.name}")
        if len(task.args) != len(decl.params):
            raise DomainError(f"task {task}: expected {len(decl.params)} arguments")
        if decl.ranges is not None:
            for a, r, p in zip(task.args, decl.ranges, decl.params):
                if a not in r:
                    raise DomainError(f"task {task}: {p}={a!r} outside its declared range")

    def fingerprint(self) -> str:
        """Stable hash of the declarations that learned models depend on."""
        data = {
            "name": self.name,
            "vars": [[d.name, list(d.args), list(d.range)] for d in self.space.decls],
            "tasks": self.task_names,
            "methods": [[t.name, t.task] for t in self.templates],
            "actions": sorted(self.actions),
        }
        blob = json.dumps(data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def applicable(state: State, task: Task, domain: Domain) -> list[MethodInstance]:
    """Method instances for ``task`` whose precondition holds in ``state``.

    Ordered by template declaration, then by the product of the free
    parameters' candidate values in declaration order.
    """
    out = []
    for tmpl in domain.by_task.get(task.name, ()):
        base = dict(zip(tmpl.params, task.args))
        names = [n for n, _ in tmpl.free]
        for combo in itertools.product(*(vals for _, vals in tmpl.free)):
            env = dict(base)
            env.update(zip(names, combo))
            if tmpl.pre is None or tmpl.pre.ev(state, env):
                out.append(MethodInstance(tmpl.name, task.args + combo))
    return out


def digest(state: State, stack: Sequence[Frame]) -> tuple:
    """Hashable key for a (state, stack) pair; equality is structural."""
    return (state.values, tuple(stack))


def canonical(state: State, stack: Sequence[Frame] = ()) -> str:
    return json.dumps([state.canonical(), RefinementStack(stack).canonical()],
                      separators=(",", ":"), default=repr)


def stable_digest(state: State, stack: Sequence[Frame] = ()) -> str:
    """Hex digest of the canonical serialization; identical across processes."""
    return hashlib.sha256(canonical(state, stack).encode()).hexdigest()
