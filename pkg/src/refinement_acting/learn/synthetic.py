"""A synthetic labelled domain whose labels are a fixed function of the state."""
from __future__ import annotations

import numpy as np

from ..core import Task
from ..domains.builder import DomainBuilder
from ..interp import Action
from .data import LhRecord, LmRecord


def separable_domain(n_vars: int = 4, n_values: int = 4):
    """Variables ``x0..`` over ``0..n_values-1``; one task with one method per value of ``x0``."""
    b = DomainBuilder(f"separable-{n_vars}x{n_values}")
    for i in range(n_vars):
        b.var(f"x{i}", tuple(range(n_values)))
    b.action("noop", cost=1.0)
    b.task("t")
    for j in range(n_values):
        b.method(f"m{j}", "t", (), [Action("noop")])
    return b.build()


def label_rule(values: tuple) -> int:
    return values[0]


def utility_rule(values: tuple, n_values: int) -> float:
    return (1 + values[0] + n_values * values[1]) / n_values ** 2


def separable_records(domain, n: int, kind: str = "lm", seed: int = 0) -> list:
    """``n`` random states labelled by :func:`label_rule` (``lm``) or :func:`utility_rule` (``lh``)."""
    rng = np.random.default_rng(seed)
    decls = domain.space.decls
    n_values = len(decls[0].range)
    task = Task("t")
    out = []
    for _ in range(n):
        vals = tuple(int(rng.integers(len(d.range))) for d in decls)
        state = domain.space.state({d.key: x for d, x in zip(decls, vals)})
        m = f"m{label_rule(vals)}"
        if kind == "lm":
            out.append(LmRecord(state, task, m, True))
        else:
            out.append(LhRecord(state, task, m, utility_rule(vals, n_values)))
    return out
