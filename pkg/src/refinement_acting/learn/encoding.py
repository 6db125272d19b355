"""One-hot features for (state, task) and (state, task, method) contexts."""
from __future__ import annotations

import numpy as np

from ..core import Domain, State, Task


class EncodingError(ValueError):
    """A value falls outside its declared range, or a name is unknown."""


class ContextEncoder:
    """Fixed one-hot layout derived from a domain's declarations.

    Each state variable gets a block of width N (the largest range size) with
    a single 1 at the value's position in its declared range. A task-name block
    follows, then a method-name block when ``with_method`` is set. The
    refinement stack is not encoded.
    """

    def __init__(self, domain: Domain, with_method: bool = False):
        self.domain = domain
        self.with_method = with_method
        space = domain.space
        self.n_vars = len(space)
        self.block = space.max_range
        self.value_index = [{val: i for i, val in enumerate(d.range)} for d in space.decls]
        self.task_names = list(domain.task_names)
        self.method_names = list(domain.method_names)
        self.task_index = {t: i for i, t in enumerate(self.task_names)}
        self.method_index = {m: i for i, m in enumerate(self.method_names)}
        self.state_width = self.n_vars * self.block
        self.width = self.state_width + len(self.task_names) + (len(self.method_names) if with_method else 0)

    def encode(self, state: State, task: Task | str, method: str | None = None) -> np.ndarray:
        x = np.zeros(self.width)
        self._fill(x, state, task, method)
        return x

    def encode_many(self, contexts) -> np.ndarray:
        """Stack encodings of ``(state, task)`` or ``(state, task, method)`` tuples."""
        contexts = list(contexts)
        X = np.zeros((len(contexts), self.width))
        for row, ctx in zip(X, contexts):
            self._fill(row, *ctx)
        return X

    def _fill(self, x, state, task, method=None):
        if len(state.values) != self.n_vars:
            raise EncodingError("state does not match the encoder's declarations")
        for j, (val, idx) in enumerate(zip(state.values, self.value_index)):
            try:
                x[j * self.block + idx[val]] = 1.0
            except (KeyError, TypeError):
                label = self.domain.space.decls[j].label
                raise EncodingError(f"{val!r} is outside the declared range of {label}") from None
        name = task if isinstance(task, str) else task.name
        try:
            x[self.state_width + self.task_index[name]] = 1.0
        except KeyError:
            raise EncodingError(f"unknown task {name!r}") from None
        if self.with_method:
            if method is None:
                raise EncodingError("method encoding requested but no method given")
            m = method if isinstance(method, str) else method.name
            try:
                x[self.state_width + len(self.task_names) + self.method_index[m]] = 1.0
            except KeyError:
                raise EncodingError(f"unknown method {m!r}") from None

    def decode(self, x: np.ndarray) -> tuple:
        """Inverse of :meth:`encode`: ``(values, task_name, method_name or None)``."""
        x = np.asarray(x)
        if x.shape != (self.width,):
            raise EncodingError(f"expected a vector of width {self.width}, got shape {x.shape}")
        values = []
        for j, decl in enumerate(self.domain.space.decls):
            blk = x[j * self.block:(j + 1) * self.block]
            hot = np.flatnonzero(blk)
            if len(hot) != 1 or hot[0] >= len(decl.range):
                raise EncodingError(f"block of {decl.label} is not a valid one-hot")
            values.append(decl.range[hot[0]])
        t = self._hot(x[self.state_width:self.state_width + len(self.task_names)], "task")
        m = None
        if self.with_method:
            m = self.method_names[self._hot(x[self.state_width + len(self.task_names):], "method")]
        return tuple(values), self.task_names[t], m

    @staticmethod
    def _hot(blk, what):
        hot = np.flatnonzero(blk)
        if len(hot) != 1:
            raise EncodingError(f"{what} block is not a valid one-hot")
        return int(hot[0])

    def layout(self) -> dict:
        """Index tables stored with trained models."""
        return {"state_vars": [d.label for d in self.domain.space.decls], "block": self.block,
                "tasks": self.task_names, "methods": self.method_names, "with_method": self.with_method,
                "width": self.width}
