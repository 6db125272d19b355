"""Equal-frequency binning of utility estimates into class labels."""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IntervalMap:
    """``K`` intervals over the observed utility range.

    ``edges`` has K+1 entries; interval ``j`` is ``[edges[j], edges[j+1])``
    and the last one is closed on the right. ``empty`` flags intervals that
    hold no training values, which happens when values tie.
    """

    edges: tuple
    empty: tuple

    @property
    def k(self) -> int:
        return len(self.edges) - 1

    @property
    def midpoints(self) -> np.ndarray:
        e = np.asarray(self.edges, dtype=float)
        return (e[:-1] + e[1:]) / 2

    def interval(self, u: float) -> int:
        return min(bisect_right(self.edges[1:-1], u), self.k - 1)

    def decode(self, j: int) -> float:
        return float(self.midpoints[j])

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "empty": list(self.empty)}

    @classmethod
    def from_dict(cls, d: dict) -> "IntervalMap":
        return cls(tuple(float(x) for x in d["edges"]), tuple(bool(x) for x in d["empty"]))


def fit_intervals(us, k: int = 10) -> IntervalMap:
    """Quantile edges so each interval holds about ``len(us) / k`` values."""
    xs = sorted(float(u) for u in us)
    n = len(xs)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"cannot split {n} values into {k} intervals")
    if not all(np.isfinite(xs)):
        raise ValueError("utility values must be finite")
    edges = [xs[0]] + [xs[j * n // k] for j in range(1, k)] + [xs[-1]]
    counts = [0] * k
    cut = edges[1:-1]
    for u in xs:
        counts[min(bisect_right(cut, u), k - 1)] += 1
    return IntervalMap(tuple(edges), tuple(c == 0 for c in counts))
