"""UCT-style Monte-Carlo planner over refinement trees.

``Planner.select`` is the anytime method-selection driver; ``SearchTree.rollout``
performs one rollout down the refinement tree. Statistics (N, Q) are kept per
``(state, stack)`` node of a ``SearchTree`` that lives for one selection call.
Node expansions (applicable methods, grounded outcomes, successor stacks) are
cached on the nodes, so repeated rollouts only walk pointers.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .core import Domain, Frame, MethodInstance, RefinementStack, State, Task, applicable, digest
from .interp import ACT, ASSIGN, FAIL, SUB, assign_step, current_op, ground_op, next_stack, start_frame
from .sim import Rng, ground_outcomes
from .utility import FAILURE, INF, SUCCESS, compose

Heuristic = Callable[[Task, "MethodInstance | None", State], float]


class SelectionFailure(LookupError):
    """No applicable method instance for the task."""


def constant_heuristic(value: float = 1.0) -> Heuristic:
    """Heuristic that estimates the remaining utility as a fixed value (default: cost 1)."""

    def h(task, method, state):
        return value

    h.value = value
    return h


@dataclass
class PlannerConfig:
    """Control parameters.

    ``d_max`` may be ``math.inf``. With ``deepening`` off, ``n_ro`` rollouts are
    run at depth ``d_max`` only; with it on, depth grows 1, 2, ... up to ``d_max``.
    ``c`` is a float or ``"auto"``. ``skip_single`` returns a lone candidate
    without rollouts.
    """

    n_ro: int = 1000
    d_max: float = INF
    time_budget: float | None = None
    c: float | str = "auto"
    heuristic: Heuristic | None = None
    deepening: bool = False
    inf_cap: float = 1e6
    max_steps: int = 10_000
    trace: bool = False
    skip_single: bool = True

    def __post_init__(self):
        if self.n_ro < 1:
            raise ValueError("n_ro must be >= 1")
        if not (self.d_max == INF or (self.d_max >= 1 and float(self.d_max).is_integer())):
            raise ValueError("d_max must be a positive integer or inf")
        if self.c != "auto" and not float(self.c) >= 0:
            raise ValueError("exploration constant must be >= 0 or 'auto'")
        if self.deepening and self.d_max == INF and self.time_budget is None:
            raise ValueError("progressive deepening to d_max=inf needs a time budget")

    def h(self) -> Heuristic:
        return self.heuristic or _DEFAULT_H


_DEFAULT_H = constant_heuristic(1.0)

# node kinds
SUCCESS_NODE, TASK_NODE, ACTION_NODE, FREE_NODE, FAIL_NODE = range(5)
_SQRT2 = math.sqrt(2.0)


class _Node:
    __slots__ = ("id", "state", "stack", "kind", "task", "push", "methods", "n", "q", "n_total",
                 "children", "outcomes", "cum", "succ", "h")

    def __init__(self, nid, state, stack):
        self.id = nid
        self.state = state
        self.stack = stack
        self.h = None


class NodeStats(NamedTuple):
    """Read-only view of one decision node's statistics."""

    n_task: int
    methods: tuple
    n: tuple
    q: tuple

    def q_of(self, m: MethodInstance) -> float:
        return self.q[self.methods.index(m)]


class SearchTree:
    """N/Q tables keyed by ``digest(state, stack)`` plus cached node expansions."""

    def __init__(self, domain: Domain, cfg: PlannerConfig, rng: Rng):
        self.domain = domain
        self.cfg = cfg
        self.rng = rng
        self.nodes: dict[tuple, _Node] = {}
        self.rollouts = 0
        self.log: list[tuple] | None = [] if cfg.trace else None
        self._h = cfg.h()
        self._fixed_c = None if cfg.c == "auto" else float(cfg.c)

    # -- nodes ---------------------------------------------------------------
    def node(self, state: State, stack: Sequence[Frame]) -> _Node:
        key = digest(state, stack)
        nd = self.nodes.get(key)
        if nd is None:
            nd = _Node(len(self.nodes), state, RefinementStack(stack))
            self._expand(nd)
            self.nodes[key] = nd
        return nd

    def _expand(self, nd: _Node) -> None:
        dom, state, stack = self.domain, nd.state, nd.stack
        if not stack:
            nd.kind = SUCCESS_NODE
            return
        top = stack[-1]
        if top.method is None:
            self._make_task(nd, top.task, push=False)
            return
        op = current_op(dom, stack, state)
        if op is None:  # body ended without being popped (only for hand-built stacks)
            nd.kind = FREE_NODE
            nd.succ = (state, next_stack(dom, stack[:-1], state) if len(stack) > 1 else RefinementStack())
        elif op.kind == SUB:
            self._make_task(nd, ground_op(dom, stack, state, op), push=True)
        elif op.kind == ACT:
            nd.kind = ACTION_NODE
            outs = ground_outcomes(dom, state, ground_op(dom, stack, state, op))
            nd.outcomes = []
            nd.cum = []
            acc = 0.0
            for o in outs:
                acc += o.prob
                nd.cum.append(acc)
                if o.state is None:
                    nd.outcomes.append(None)
                else:
                    util = INF if o.cost == 0 else 1.0 / o.cost
                    nd.outcomes.append([util, o.state, next_stack(dom, stack, o.state), None])
            nd.cum[-1] = 1.0 + 1e-12  # absorb rounding so every draw selects an outcome
        elif op.kind == ASSIGN:
            nd.kind = FREE_NODE
            nd.succ = (state, assign_step(dom, stack, state))
        elif op.kind == FAIL:
            nd.kind = FAIL_NODE
        else:  # pragma: no cover - resolve() only stops on atomic ops
            raise AssertionError(op)

    def _make_task(self, nd: _Node, task: Task, push: bool) -> None:
        nd.kind = TASK_NODE
        nd.task = task
        nd.push = push
        nd.methods = applicable(nd.state, task, self.domain)
        k = len(nd.methods)
        nd.n = [0] * k
        nd.q = [0.0] * k
        nd.n_total = 0
        nd.children = [None] * k

    def _child(self, nd: _Node, i: int) -> _Node:
        ch = nd.children[i]
        if ch is None:
            base = nd.stack if nd.push else nd.stack[:-1]
            stack = start_frame(self.domain, base, nd.task, nd.methods[i], nd.state)
            ch = nd.children[i] = self.node(nd.state, stack)
        return ch

    def _outcome_child(self, out: list) -> _Node:
        ch = out[3]
        if ch is None:
            ch = out[3] = self.node(out[1], out[2])
        return ch

    def _succ(self, nd: _Node) -> _Node:
        s = nd.succ
        if not isinstance(s, _Node):
            s = nd.succ = self.node(*s)
        return s

    def heuristic(self, nd: _Node) -> float:
        if nd.h is None:
            top = nd.stack[-1]
            nd.h = float(self._h(top.task, top.method, nd.state))
        return nd.h

    def stats(self, state: State, stack: Sequence[Frame]) -> NodeStats | None:
        nd = self.nodes.get(digest(state, stack))
        if nd is None or nd.kind != TASK_NODE:
            return None
        return NodeStats(nd.n_total, tuple(nd.methods), tuple(nd.n), tuple(nd.q))

    def restrict(self, nd: _Node, exclude) -> None:
        """Drop excluded candidates from a fresh decision node."""
        keep = [i for i, m in enumerate(nd.methods) if m not in exclude]
        nd.methods = [nd.methods[i] for i in keep]
        nd.n = [nd.n[i] for i in keep]
        nd.q = [nd.q[i] for i in keep]
        nd.children = [nd.children[i] for i in keep]

    # -- rollout -------------------------------------------------------------
    def rollout(self, root: _Node, d: float) -> float:
        """One rollout from ``root`` with depth budget ``d``; returns its utility."""
        rng = self.rng
        path = []  # (node, method index) for decisions, plain floats for action utilities
        nd = root
        steps = 0
        while True:
            steps += 1
            if steps > self.cfg.max_steps:
                value = FAILURE
                break
            kind = nd.kind
            if kind == SUCCESS_NODE:
                value = SUCCESS
                break
            if d <= 0:
                value = self.heuristic(nd)
                break
            if kind == TASK_NODE:
                k = len(nd.methods)
                if k == 0:
                    value = FAILURE
                    break
                i = self._choose(nd, rng)
                path.append((nd, i))
                nd = self._child(nd, i)
                d -= 1
            elif kind == ACTION_NODE:
                r = rng.random()
                cum = nd.cum
                j = 0
                while r >= cum[j]:
                    j += 1
                out = nd.outcomes[j]
                if self.log is not None:
                    self.log.append(("sample", nd.id, j))
                if out is None:
                    value = FAILURE
                    break
                path.append(out[0])
                nd = self._outcome_child(out)
                d -= 1
            elif kind == FREE_NODE:
                nd = self._succ(nd)
            else:  # FAIL_NODE
                value = FAILURE
                break
        cap = self.cfg.inf_cap
        for depth in range(len(path) - 1, -1, -1):
            entry = path[depth]
            if entry.__class__ is float:
                value = compose(entry, value)
            else:
                node, i = entry
                lam = cap if value == INF else value
                q_update(node, i, lam)
                if self.log is not None:
                    self.log.append(("update", depth, node.id, i, lam))
        self.rollouts += 1
        return value

    def _choose(self, nd: _Node, rng: Rng) -> int:
        n = nd.n
        untried = [i for i, c in enumerate(n) if c == 0]
        if untried:
            return untried[rng.randrange(len(untried))] if len(untried) > 1 else untried[0]
        return ucb_index(nd.q, n, nd.n_total, self._fixed_c)


def ucb_index(q: Sequence[float], n: Sequence[int], n_task: int, c: float | None) -> int:
    """argmax of Q + C*sqrt(log N_task / N_m); first index wins ties. ``c=None`` means auto."""
    if c is None:
        c = _SQRT2 * max(1.0, max(q))
    log_n = math.log(n_task) if n_task > 0 else 0.0
    best, best_i = -INF, 0
    for i in range(len(q)):
        phi = q[i] + c * math.sqrt(log_n / n[i])
        if phi > best:
            best, best_i = phi, i
    return best_i


def ucb_choose(candidates: Sequence[MethodInstance], stats: NodeStats, c: float | str) -> MethodInstance:
    """Pick among already-tried candidates by the upper-confidence score."""
    if not candidates:
        raise ValueError("no candidates to choose from")
    idx = [stats.methods.index(m) for m in candidates]
    n = [stats.n[i] for i in idx]
    if min(n) < 1:
        raise ValueError("every candidate must have been tried once")
    q = [stats.q[i] for i in idx]
    return candidates[ucb_index(q, n, stats.n_task, None if c == "auto" else float(c))]


def q_update(node, i: int, lam: float) -> None:
    """Incremental mean: Q <- (N*Q + lam)/(N+1), N <- N+1."""
    n = node.n[i]
    node.q[i] = (n * node.q[i] + lam) / (n + 1)
    node.n[i] = n + 1
    node.n_total += 1


def upom(state: State, stack: Sequence[Frame], d: float, tree: SearchTree) -> float:
    """One rollout from ``(state, stack)`` to depth ``d`` using ``tree``'s statistics."""
    return tree.rollout(tree.node(state, stack), d)


@dataclass
class PlanResult:
    method: MethodInstance
    q: float | None
    rollouts: int
    elapsed: float
    stats: NodeStats | None
    tree: SearchTree | None = field(default=None, repr=False)


class Planner:
    """Anytime method selection by repeated rollouts."""

    def __init__(self, domain: Domain, cfg: PlannerConfig | None = None, rng: Rng | None = None):
        self.domain = domain
        self.cfg = cfg or PlannerConfig()
        self.rng = rng or Rng(0, "planner")
        self.keep_tree = False

    def select(self, state: State, task: Task, stack: Sequence[Frame] = (),
               exclude: Sequence[MethodInstance] = ()) -> PlanResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        deadline = None if cfg.time_budget is None else t0 + cfg.time_budget
        tree = SearchTree(self.domain, cfg, self.rng)
        root_stack = RefinementStack(stack).push(Frame(task, None, None))
        root = tree.node(state, root_stack)
        if exclude:
            tree.restrict(root, set(exclude))
        if not root.methods:
            raise SelectionFailure(f"no applicable method for {task}")
        h = cfg.h()
        scores = [h(task, m, state) for m in root.methods]
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        if len(root.methods) > 1 or not cfg.skip_single or cfg.trace:
            depths = range(1, int(cfg.d_max) + 1) if cfg.deepening and cfg.d_max != INF else None
            level = 0
            out_of_time = False
            while not out_of_time:
                level += 1
                d = level if depths is not None else cfg.d_max
                done = 0
                for _ in range(cfg.n_ro):
                    if deadline is not None and time.perf_counter() >= deadline:
                        out_of_time = True
                        break
                    tree.rollout(root, d)
                    done += 1
                if root.n_total:
                    best = _argmax(root.q)
                if depths is None or d >= cfg.d_max:
                    break
        stats = NodeStats(root.n_total, tuple(root.methods), tuple(root.n), tuple(root.q))
        q = root.q[best] if root.n[best] else None
        return PlanResult(root.methods[best], q, tree.rollouts, time.perf_counter() - t0, stats,
                          tree if (self.keep_tree or cfg.trace) else None)


def _argmax(values: Sequence[float]) -> int:
    best, bi = -INF, 0
    for i, x in enumerate(values):
        if x > best:
            best, bi = x, i
    return bi


def select_method(state: State, task: Task, stack: Sequence[Frame], cfg: PlannerConfig, domain: Domain,
                  rng: Rng | None = None) -> MethodInstance:
    """Convenience wrapper returning only the chosen method instance."""
    return Planner(domain, cfg, rng).select(state, task, stack).method
