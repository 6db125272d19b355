"""Efficiency utility: reciprocal cost, with ``inf`` for success and 0 for failure."""
from __future__ import annotations

import math
from typing import Iterable

from .core import DomainError

INF = math.inf
SUCCESS = INF
FAILURE = 0.0


def compose(e1: float, e2: float) -> float:
    """Efficiency of doing two things in sequence.

    ``inf`` is the identity and 0 is absorbing; otherwise the costs add,
    i.e. ``e1*e2/(e1+e2)``.
    """
    if e1 == INF:
        return e2
    if e2 == INF:
        return e1
    if e1 == 0.0 or e2 == 0.0:
        return 0.0
    return e1 * e2 / (e1 + e2)


def compose_all(effs: Iterable[float]) -> float:
    """Fold ``compose`` over a sequence by summing reciprocal costs."""
    total = 0.0
    for e in effs:
        if e == 0.0:
            return 0.0
        if e != INF:
            total += 1.0 / e
    return INF if total == 0.0 else 1.0 / total


def action_utility(cost: float) -> float:
    if not cost > 0:
        raise DomainError(f"action cost must be positive, got {cost!r}")
    return 1.0 / cost


def efficiency(cost: float, success: bool) -> float:
    if not success:
        return FAILURE
    return INF if cost == 0 else 1.0 / cost
