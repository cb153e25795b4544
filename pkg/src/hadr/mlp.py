"""Fully connected binary classifier trained by mini-batch backpropagation.

Default shape is ``[l, 10, 10, 1]`` with ReLU hidden units and a sigmoid
output, trained on binary cross-entropy with SGD + momentum and early stopping
on a stratified validation split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import DivergenceError

EPS = 1e-7


@dataclass(frozen=True)
class MlpTrainConfig:
    epochs: int = 1000
    batch_size: int = 10
    validation_fraction: float = 0.2
    learning_rate: float = 0.01
    momentum: float = 0.9
    patience: int | None = 50
    hidden: tuple = (10, 10)
    hidden_activation: str = "relu"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.hidden_activation not in _ACT:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(float)


def _sig_grad(z, a):
    return a * (1.0 - a)


_ACT = {"relu": (_relu, _relu_grad), "sigmoid": (sigmoid, _sig_grad)}


def _layout(dims):
    shapes = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        shapes += [(fan_out, fan_in), (fan_out,)]
    return shapes


class MlpModel:
    """Weights live in one flat vector; ``weights``/``biases`` are views."""

    def __init__(self, dims, hidden_activation="relu", theta=None):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) < 2 or self.dims[-1] != 1:
            raise ValueError(f"bad layer dims {self.dims}")
        self.hidden_activation = hidden_activation
        self._shapes = _layout(self.dims)
        size = sum(int(np.prod(s)) for s in self._shapes)
        self.theta = np.zeros(size) if theta is None else np.array(theta, dtype=float)
        if self.theta.shape != (size,):
            raise ValueError(f"parameter vector has {self.theta.size} entries, need {size}")
        self.history = {"train_loss": [], "val_loss": []}
        self.best_epoch = None
        self.validated = False
        self._bind()

    def _bind(self):
        self.weights, self.biases = [], []
        self._grads = np.zeros_like(self.theta)
        self.grad_weights, self.grad_biases = [], []
        pos = 0
        for k, shape in enumerate(self._shapes):
            size = int(np.prod(shape))
            view = self.theta[pos:pos + size].reshape(shape)
            gview = self._grads[pos:pos + size].reshape(shape)
            (self.weights if k % 2 == 0 else self.biases).append(view)
            (self.grad_weights if k % 2 == 0 else self.grad_biases).append(gview)
            pos += size

    @classmethod
    def init(cls, dims, rng, hidden_activation="relu"):
        model = cls(dims, hidden_activation)
        for W in model.weights:
            W[...] = rng.standard_normal(W.shape) * np.sqrt(2.0 / W.shape[1])
        return model

    def copy(self):
        other = MlpModel(self.dims, self.hidden_activation, self.theta.copy())
        other.history = {k: list(v) for k, v in self.history.items()}
        other.best_epoch = self.best_epoch
        other.validated = self.validated
        return other

    @property
    def n_in(self):
        return self.dims[0]

    def _forward(self, X):
        act = _ACT[self.hidden_activation][0]
        zs, acts = [], [X]
        a = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b
            a = sigmoid(z) if k == last else act(z)
            zs.append(z)
            acts.append(a)
        return zs, acts

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_in:
            raise ValueError(f"expected {self.n_in} inputs, got {X.shape[1]}")
        return self._forward(X)[1][-1][:, 0]

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_in,):
            raise ValueError(f"expected an input vector of length {self.n_in}")
        return float(self.predict_proba(x[None, :])[0])

    def predict_label(self, X, threshold=0.5):
        return (self.predict_proba(X) >= threshold).astype(np.int64)

    def loss(self, X, y):
        return bce_loss(self.predict_proba(X), y)

    def loss_and_grad(self, X, y):
        """Mean BCE over the rows and its gradient (as a flat vector)."""
        d_act = _ACT[self.hidden_activation][1]
        zs, acts = self._forward(X)
        p = acts[-1][:, 0]
        y = np.asarray(y, dtype=float)
        loss = bce_loss(p, y)
        inside = (p > EPS) & (p < 1.0 - EPS)
        delta = ((p - y) * inside / y.size)[:, None]
        for k in range(len(self.weights) - 1, -1, -1):
            self.grad_weights[k][...] = delta.T @ acts[k]
            self.grad_biases[k][...] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k]) * d_act(zs[k - 1], acts[k])
        return loss, self._grads.copy()

    def to_json(self):
        return {"dims": list(self.dims), "hidden_activation": self.hidden_activation,
                "weights": [W.tolist() for W in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "history": self.history, "best_epoch": self.best_epoch,
                "validated": self.validated}

    @classmethod
    def from_json(cls, obj):
        parts = []
        for W, b in zip(obj["weights"], obj["biases"]):
            parts += [np.asarray(W, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()]
        model = cls(obj["dims"], obj["hidden_activation"], np.concatenate(parts))
        model.history = {k: list(v) for k, v in obj["history"].items()}
        model.best_epoch = obj.get("best_epoch")
        model.validated = obj.get("validated", False)
        return model


def bce_loss(p, y):
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=float), EPS, 1.0 - EPS)
    y = np.asarray(y, dtype=float)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def inner_split(y, fraction, rng):
    """Stratified train/validation indices, or ``None`` if it cannot be done.

    Validation is skipped when ``fraction`` is 0 or when either part would hold
    fewer than two minority samples.
    """
    if fraction <= 0:
        return None
    tr, va = [], []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        k = int(np.floor(fraction * idx.size + 0.5))
        va.append(idx[:k])
        tr.append(idx[k:])
    n_min = min((y == 0).sum(), (y == 1).sum())
    minority = 1 if (y == 1).sum() == n_min else 0
    if va[minority].size < 2 or tr[minority].size < 2 or min(a.size for a in va) < 1:
        return None
    return np.sort(np.concatenate(tr)), np.sort(np.concatenate(va))


def train_mlp(X, y, cfg=MlpTrainConfig(), rng=None, log=None):
    """Train a fresh network and return the best-validation checkpoint.

    Without a usable validation split the last epoch's weights are returned.
    ``log``, if given, is called with a short message when validation is
    skipped.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).reshape(-1).astype(float)
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
    if np.unique(y).size < 2:
        raise ValueError("MLP training data needs both classes")
    dims = (X.shape[1],) + tuple(cfg.hidden) + (1,)
    model = MlpModel.init(dims, rng, cfg.hidden_activation)
    if cfg.epochs == 0:
        return model

    split = inner_split(y, cfg.validation_fraction, rng)
    if split is None:
        Xt, yt, Xv, yv = X, y, None, None
        if log is not None and cfg.validation_fraction > 0:
            log("validation skipped: too few minority samples for an inner split")
    else:
        Xt, yt, Xv, yv = X[split[0]], y[split[0]], X[split[1]], y[split[1]]
    model.validated = Xv is not None

    velocity = np.zeros_like(model.theta)
    best_theta, best_val, since_best = None, np.inf, 0
    n = yt.size
    bs = cfg.batch_size
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            _, g = model.loss_and_grad(Xt[idx], yt[idx])
            velocity *= cfg.momentum
            velocity -= cfg.learning_rate * g
            model.theta += velocity
        train_loss = model.loss(Xt, yt)
        if not np.isfinite(train_loss) or not np.all(np.isfinite(model.theta)):
            raise DivergenceError(f"MLP training diverged at epoch {epoch}", epoch)
        model.history["train_loss"].append(train_loss)
        if Xv is None:
            continue
        val_loss = model.loss(Xv, yv)
        model.history["val_loss"].append(val_loss)
        if val_loss < best_val:
            best_val, best_theta, since_best = val_loss, model.theta.copy(), 0
            model.best_epoch = epoch
        else:
            since_best += 1
            if cfg.patience is not None and since_best >= cfg.patience:
                break
    if best_theta is not None:
        model.theta[...] = best_theta
    else:
        model.best_epoch = len(model.history["train_loss"]) - 1
    return model
