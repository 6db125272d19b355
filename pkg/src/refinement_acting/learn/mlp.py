"""Two-layer perceptron (linear, ReLU, linear) trained by minibatch SGD on cross-entropy."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

LR_RANGE = (1e-3, 1e-1)
DIVERGENCE_FACTOR = 100.0


class TrainingDiverged(FloatingPointError):
    """Loss became NaN or infinite."""


@dataclass
class Mlp:
    """Parameters of ``logits = relu(x @ w1 + b1) @ w2 + b2``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> "Mlp":
        # uniform in +-1/sqrt(fan_in)
        a1, a2 = 1 / math.sqrt(n_in), 1 / math.sqrt(n_hidden)
        return cls(rng.uniform(-a1, a1, (n_in, n_hidden)), rng.uniform(-a1, a1, n_hidden),
                   rng.uniform(-a2, a2, (n_hidden, n_out)), rng.uniform(-a2, a2, n_out))

    @classmethod
    def zeros(cls, n_in: int, n_hidden: int, n_out: int) -> "Mlp":
        return cls(np.zeros((n_in, n_hidden)), np.zeros(n_hidden), np.zeros((n_hidden, n_out)), np.zeros(n_out))

    @property
    def shape(self) -> tuple:
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1]

    def params(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("w1", "b1", "w2", "b2")}

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("w1", "b1", "w2", "b2")))


def forward(net: Mlp, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    if X.shape[1] != net.w1.shape[0]:
        raise ValueError(f"input width {X.shape[1]} does not match the network's {net.w1.shape[0]}")
    h = np.maximum(X @ net.w1 + net.b1, 0.0)
    return h @ net.w2 + net.b2


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(net: Mlp, X: np.ndarray, y: np.ndarray) -> tuple[float, list]:
    """Mean cross-entropy of ``softmax(forward(X))`` against integer labels, and its gradients."""
    X = np.atleast_2d(X)
    y = np.asarray(y, dtype=int)
    n = len(X)
    z1 = X @ net.w1 + net.b1
    h = np.maximum(z1, 0.0)
    logits = h @ net.w2 + net.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    dz2 = np.exp(logp)
    dz2[np.arange(n), y] -= 1.0
    dz2 /= n
    gw2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ net.w2.T) * (z1 > 0)
    gw1 = X.T @ dz1
    gb1 = dz1.sum(axis=0)
    return float(loss), [gw1, gb1, gw2, gb2]


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """Minibatch-SGD classifier over dense feature vectors.

    Labels are integers in ``[0, n_outputs)``; with ``n_outputs=None`` the width
    is ``max(y) + 1``. Fixing the width keeps the output layer aligned with an
    external index table even when some labels never occur.

    Parameters
    ----------
    hidden : int
        Width of the hidden layer.
    lr : float
        SGD step size. Values outside ``[1e-3, 1e-1]`` trigger a warning.
    epochs : int
    batch_size : int
    n_outputs : int or None
    random_state : int
        Seeds initialisation and shuffling.
    """

    def __init__(self, hidden=64, lr=0.05, epochs=200, batch_size=32, n_outputs=None, random_state=0):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.n_outputs = n_outputs
        self.random_state = random_state

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=float)
        y = y.astype(int)
        if not LR_RANGE[0] <= self.lr <= LR_RANGE[1]:
            warnings.warn(f"learning rate {self.lr} is outside the usual range {LR_RANGE}", stacklevel=2)
        n_out = self.n_outputs or int(y.max()) + 1
        if y.min() < 0 or y.max() >= n_out:
            raise ValueError(f"labels must lie in [0, {n_out})")
        rng = np.random.default_rng(self.random_state)
        self.net_ = Mlp.init(X.shape[1], self.hidden, n_out, rng)
        self.classes_ = np.arange(n_out)
        self.n_features_in_ = X.shape[1]
        self.history_ = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
        has_val = X_val is not None and len(X_val) > 0
        if has_val:
            X_val, y_val = check_X_y(X_val, y_val, dtype=float)
            y_val = y_val.astype(int)
        for epoch in range(self.epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), self.batch_size):
                idx = order[start:start + self.batch_size]
                loss, grads = loss_and_grad(self.net_, X[idx], y[idx])
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"loss is {loss} at epoch {epoch}, batch {start // self.batch_size}; "
                                           f"lr={self.lr}, max |w| before step "
                                           f"{max(float(np.abs(p).max()) for p in self.net_.params()):.3g}")
                for p, g in zip(self.net_.params(), grads):
                    p -= self.lr * g
                if not all(np.isfinite(p).all() for p in self.net_.params()):
                    raise TrainingDiverged(f"non-finite weights after epoch {epoch}, batch "
                                           f"{start // self.batch_size}; lr={self.lr}")
            self._record(X, y, "train")
            # a stable log-softmax keeps the loss finite, so also catch blow-up
            if self.history_["train_loss"][-1] > DIVERGENCE_FACTOR * max(1.0, math.log(n_out)):
                raise TrainingDiverged(f"train loss {self.history_['train_loss'][-1]:.4g} at epoch {epoch} exceeds "
                                       f"{DIVERGENCE_FACTOR}x the uniform-guess loss; lr={self.lr}")
            if has_val:
                self._record(X_val, y_val, "val")
        return self

    def _record(self, X, y, split):
        loss, _ = loss_and_grad(self.net_, X, y)
        self.history_[f"{split}_loss"].append(loss)
        self.history_[f"{split}_acc"].append(float(np.mean(self.predict(X) == y)))

    def decision_function(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=float)
        return forward(self.net_, X)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        # argmax takes the lowest index on ties
        return np.argmax(self.decision_function(X), axis=1)

    def loss(self, X, y) -> float:
        check_is_fitted(self, "net_")
        return loss_and_grad(self.net_, check_array(X, dtype=float), y)[0]
