"""Exhaustive expected-efficiency oracle for small domains.

Enumerates every outcome of every action and propagates the distribution of
remaining cost through the refinement tree. At each choice point the method
with the highest expected remaining efficiency is taken, which is the value
rollout statistics converge to. Only uses the model (``applicable``, the
interpreter and outcome grounding), never the planner.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from .core import Domain, Frame, MethodInstance, RefinementStack, State, Task, applicable
from .interp import ACT, ASSIGN, FAIL, SUB, assign_step, current_op, ground_op, next_stack, start_frame
from .sim import ground_outcomes

# a distribution maps total remaining cost -> probability; failure mass is implicit


def _shift(dist: dict, cost: float, p: float, into: dict) -> None:
    for c, q in dist.items():
        into[c + cost] += p * q


def expected_efficiency(dist: dict) -> float:
    total = 0.0
    for c, p in dist.items():
        total += float("inf") if c == 0 and p > 0 else p / c
    return total


class Oracle:
    def __init__(self, domain: Domain, max_depth: int = 200):
        self.domain = domain
        self.max_depth = max_depth
        self._memo: dict = {}

    def method_values(self, state: State, task: Task, stack: Sequence[Frame] = ()) -> dict[MethodInstance, float]:
        """Exact expected efficiency of each applicable method for ``task``."""
        base = RefinementStack(stack)
        return {m: expected_efficiency(self._dist(state, start_frame(self.domain, base, task, m, state), 0))
                for m in applicable(state, task, self.domain)}

    def best(self, state: State, task: Task, stack: Sequence[Frame] = ()) -> tuple[MethodInstance, float]:
        vals = self.method_values(state, task, stack)
        m = max(vals, key=lambda k: vals[k])
        return m, vals[m]

    def _choice(self, state, base, task, depth):
        best, best_v = {}, -1.0
        for m in applicable(state, task, self.domain):
            d = self._dist(state, start_frame(self.domain, base, task, m, state), depth + 1)
            val = expected_efficiency(d)
            if val > best_v + 1e-15:
                best, best_v = d, val
        return best

    def _dist(self, state: State, stack: RefinementStack, depth: int) -> dict:
        key = (state.values, tuple(stack))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if depth > self.max_depth:
            raise RecursionError("outcome tree deeper than the oracle's bound")
        dom = self.domain
        if not stack:
            out = {0.0: 1.0}
        elif stack[-1].method is None:
            out = self._choice(state, stack[:-1], stack[-1].task, depth)
        else:
            op = current_op(dom, stack, state)
            if op is None:
                out = self._dist(state, next_stack(dom, stack[:-1], state) if len(stack) > 1
                                 else RefinementStack(), depth + 1)
            elif op.kind == SUB:
                out = self._choice(state, stack, ground_op(dom, stack, state, op), depth)
            elif op.kind == ASSIGN:
                out = self._dist(state, assign_step(dom, stack, state), depth + 1)
            elif op.kind == FAIL:
                out = {}
            elif op.kind == ACT:
                acc = defaultdict(float)
                for o in ground_outcomes(dom, state, ground_op(dom, stack, state, op)):
                    if o.state is None or o.prob == 0:
                        continue
                    rest = self._dist(o.state, next_stack(dom, stack, o.state), depth + 1)
                    _shift(rest, o.cost, o.prob, acc)
                out = dict(acc)
            else:  # pragma: no cover
                raise AssertionError(op)
        self._memo[key] = out
        return out
