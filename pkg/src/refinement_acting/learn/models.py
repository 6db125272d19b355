"""Learned method policy and utility heuristic, their training and model files."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import Domain, DomainError, MethodInstance, State, Task, applicable
from ..utility import FAILURE
from .data import LhRecord, LmRecord
from .encoding import ContextEncoder
from .intervals import IntervalMap, fit_intervals
from .mlp import Mlp, MLPClassifier, forward

MODEL_FORMAT = "refinement-acting/model"
MODEL_VERSION = 1


@dataclass
class Hyper:
    lr: float = 0.05
    epochs: int = 200
    hidden: int = 64
    batch: int = 32
    seed: int = 0
    val_fraction: float = 0.2
    k: int = 10

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def split_indices(n: int, seed: int, val_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Seeded disjoint train/validation index sets; tiny sets train on everything."""
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction)) if n >= 2 else 0
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(X: np.ndarray, y: np.ndarray, n_outputs: int, hyper: Hyper | None = None) -> tuple[MLPClassifier, dict]:
    """Fit on a seeded 80/20 split; metrics are computed on the held-out part only."""
    hyper = hyper or Hyper()
    if len(X) == 0:
        raise ValueError("no training records")
    tr, va = split_indices(len(X), hyper.seed, hyper.val_fraction)
    clf = MLPClassifier(hidden=hyper.hidden, lr=hyper.lr, epochs=hyper.epochs, batch_size=hyper.batch,
                        n_outputs=n_outputs, random_state=hyper.seed)
    clf.fit(X[tr], y[tr], X[va], y[va])
    h = clf.history_
    metrics = {"n_train": int(len(tr)), "n_val": int(len(va)),
               "train_loss": h["train_loss"][-1], "train_acc": h["train_acc"][-1],
               "val_loss": h["val_loss"][-1] if h["val_loss"] else None,
               "val_acc": h["val_acc"][-1] if h["val_acc"] else None}
    return clf, metrics


class _Model:
    kind = ""

    def __init__(self, domain: Domain, net: Mlp, encoder: ContextEncoder, hyper: Hyper | None = None,
                 history: dict | None = None, metrics: dict | None = None):
        self.domain = domain
        self.net = net
        self.encoder = encoder
        self.hyper = hyper or Hyper()
        self.history = history or {}
        self.metrics = metrics or {}

    def logits(self, state: State, task: Task, method: str | None = None) -> np.ndarray:
        return forward(self.net, self.encoder.encode(state, task, method))[0]

    def to_dict(self) -> dict:
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": self.kind,
                "domain": self.domain.name, "fingerprint": self.domain.fingerprint(),
                "layout": self.encoder.layout(), "hyper": self.hyper.to_dict(),
                "params": self.net.to_dict(), "metrics": self.metrics, "history": self.history}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


class MethodPolicy(_Model):
    """Maps a ``(state, task)`` context to a method template name."""

    kind = "policy"

    def predict_method(self, state: State, task: Task) -> str:
        return self.encoder.method_names[int(np.argmax(self.logits(state, task)))]

    @classmethod
    def fit(cls, domain: Domain, records, hyper: Hyper | None = None) -> "MethodPolicy":
        hyper = hyper or Hyper()
        enc = ContextEncoder(domain)
        records = [r for r in records if isinstance(r, LmRecord)]
        X = enc.encode_many((r.state, r.task) for r in records)
        y = np.array([enc.method_index[r.method] for r in records], dtype=int)
        clf, metrics = train(X, y, len(enc.method_names), hyper)
        return cls(domain, clf.net_, enc, hyper, clf.history_, metrics)


class LearnedHeuristic(_Model):
    """Estimates a method's utility as the midpoint of the predicted interval.

    Called as ``h(task, method, state)``; with no method it returns the best
    estimate over the task's applicable templates.
    """

    kind = "heuristic"

    def __init__(self, domain, net, encoder, intervals: IntervalMap, hyper=None, history=None, metrics=None):
        super().__init__(domain, net, encoder, hyper, history, metrics)
        self.intervals = intervals
        self._mid = intervals.midpoints
        self._cache: dict = {}

    def predict_interval(self, state: State, task: Task, method: str) -> int:
        return int(np.argmax(self.logits(state, task, method)))

    def predict_utility(self, state: State, task: Task, method: str) -> float:
        key = (state.values, task.name, method)
        u = self._cache.get(key)
        if u is None:
            u = self._cache[key] = float(self._mid[self.predict_interval(state, task, method)])
        return u

    def __call__(self, task: Task, method: MethodInstance | str | None, state: State) -> float:
        if method is not None:
            return self.predict_utility(state, task, method if isinstance(method, str) else method.name)
        names = dict.fromkeys(m.name for m in applicable(state, task, self.domain))
        if not names:
            return FAILURE
        return max(self.predict_utility(state, task, n) for n in names)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["intervals"] = self.intervals.to_dict()
        return d

    @classmethod
    def fit(cls, domain: Domain, records, hyper: Hyper | None = None) -> "LearnedHeuristic":
        hyper = hyper or Hyper()
        enc = ContextEncoder(domain, with_method=True)
        records = [r for r in records if isinstance(r, LhRecord)]
        if not records:
            raise ValueError("no training records")
        imap = fit_intervals([r.u for r in records], min(hyper.k, len(records)))
        X = enc.encode_many((r.state, r.task, r.method) for r in records)
        y = np.array([imap.interval(r.u) for r in records], dtype=int)
        clf, metrics = train(X, y, imap.k, hyper)
        return cls(domain, clf.net_, enc, imap, hyper, clf.history_, metrics)


def load_model(path, domain: Domain) -> MethodPolicy | LearnedHeuristic:
    """Read a model file and check it was trained on ``domain``'s declarations."""
    d = json.loads(Path(path).read_text())
    if d.get("format") != MODEL_FORMAT:
        raise DomainError(f"{path} is not a model file")
    if d.get("version") != MODEL_VERSION:
        raise DomainError(f"unsupported model file version {d.get('version')}")
    if d["fingerprint"] != domain.fingerprint():
        raise DomainError(f"model was trained on different declarations than domain {domain.name}")
    hyper = Hyper(**d["hyper"])
    net = Mlp.from_dict(d["params"])
    if d["kind"] == "policy":
        return MethodPolicy(domain, net, ContextEncoder(domain), hyper, d["history"], d["metrics"])
    if d["kind"] == "heuristic":
        return LearnedHeuristic(domain, net, ContextEncoder(domain, with_method=True),
                                IntervalMap.from_dict(d["intervals"]), hyper, d["history"], d["metrics"])
    raise DomainError(f"unknown model kind {d['kind']!r}")
