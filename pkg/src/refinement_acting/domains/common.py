"""Helpers shared by the benchmark domains."""
from __future__ import annotations

import itertools


def grid_distances(coords: dict) -> dict:
    """Manhattan distances between named grid points, as a rigid table keyed by pairs."""
    return {(a, b): abs(pa[0] - pb[0]) + abs(pa[1] - pb[1])
            for (a, pa), (b, pb) in itertools.product(coords.items(), repeat=2)}


def pick_arrivals(rng, n: int, window: tuple) -> list[int]:
    """``n`` sorted arrival ticks; the first task always arrives at the window start."""
    lo, hi = window
    ticks = [lo] + [rng.randint(lo, hi) for _ in range(n - 1)]
    return sorted(ticks)

