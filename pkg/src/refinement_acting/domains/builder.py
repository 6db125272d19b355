"""Programmatic construction of domains."""
from __future__ import annotations

from typing import Any, Callable, Iterable, Mapping, Sequence

from ..core import (
    ActionSpec,
    Domain,
    Effect,
    MethodTemplate,
    Outcome,
    StateSpace,
    StateVarDecl,
    TaskDecl,
)
from ..interp import SV, _wrap


def set_(target: SV, value) -> Effect:
    """Effect assigning ``value`` to the state variable ``target``."""
    return Effect(target, _wrap(value))


class DomainBuilder:
    def __init__(self, name: str):
        self.name = name
        self._vars: list[StateVarDecl] = []
        self._rigids: dict[str, Any] = {}
        self._actions: dict[str, ActionSpec] = {}
        self._tasks: dict[str, TaskDecl] = {}
        self._methods: list[MethodTemplate] = []

    def var(self, name: str, values: Sequence, over: Iterable = ((),)) -> "DomainBuilder":
        """Declare ``name(args)`` for every ``args`` in ``over`` (scalars become 1-tuples)."""
        for args in over:
            args = args if isinstance(args, tuple) else (args,)
            self._vars.append(StateVarDecl(name, args, tuple(values)))
        return self

    def rigid(self, name: str, table) -> "DomainBuilder":
        self._rigids[name] = table
        return self

    def action(self, name: str, params: Sequence[str] = (), outcomes: Sequence[Outcome] | None = None, *,
               effects: Sequence[Effect] = (), cost=1.0, pre=None, duration: int = 1,
               raises=None) -> "DomainBuilder":
        """Declare an action; without ``outcomes`` it is deterministic with ``effects`` and ``cost``.

        ``raises`` is a ``Subtask`` queued as an event task whenever the action succeeds.
        """
        if outcomes is None:
            outcomes = [Outcome(1.0, tuple(effects), _wrap(cost) if not isinstance(cost, (int, float)) else cost)]
        self._actions[name] = ActionSpec(name, tuple(params), tuple(outcomes),
                                         None if pre is None else _wrap(pre), duration, raises)
        return self

    def task(self, name: str, params: Sequence[str] = (), ranges: Sequence[Sequence] | None = None,
             event: bool = False) -> "DomainBuilder":
        self._tasks[name] = TaskDecl(name, tuple(params), ranges, event)
        return self

    def method(self, name: str, task: str, params: Sequence[str], body: Sequence, *, pre=None,
               free: Mapping[str, Sequence] | Sequence = ()) -> "DomainBuilder":
        self._methods.append(MethodTemplate(name, task, tuple(params), tuple(body),
                                            None if pre is None else _wrap(pre), free))
        return self

    def build(self, generator: Callable | None = None, features: Mapping[str, bool] | None = None,
              constants: Any = None) -> Domain:
        return Domain(self.name, StateSpace(self._vars, self._rigids), dict(self._tasks), dict(self._actions),
                      list(self._methods), dict(features or {}), generator, constants)


def outcome(prob: float, *effects: Effect, cost=1.0, failed: bool = False) -> Outcome:
    if not isinstance(cost, (int, float)):
        cost = _wrap(cost)
    return Outcome(prob, tuple(effects), cost, failed)


def failure(prob: float, cost=1.0) -> Outcome:
    return outcome(prob, cost=cost, failed=True)
