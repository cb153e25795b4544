"""Metric learning for kernel regression (MLKR).

A linear map ``A`` (``l x m``) is learned so that leave-one-out Gaussian
kernel regression of the labels, with distances ``||A (x_i - x_j)||^2``, has
small squared error.  ``A`` then doubles as a supervised dimensionality
reduction ``x -> A x``.

The loss is::

    L(A) = sum_i (y_i - yhat_i)^2
    yhat_i = sum_{j != i} w_ij y_j,   w_ij = k_ij / sum_{j != i} k_ij
    k_ij = exp(-d_ij / sigma^2) / (sigma sqrt(2 pi))

Writing ``C_ij = (2 / sigma^2) (y_i - yhat_i) w_ij (y_j - yhat_i)`` gives::

    dL/dA = 2 A X^T (diag(rowsum C) + diag(colsum C) - C - C^T) X

The kernel normaliser cancels in ``w_ij``, and subtracting the smallest
distance of each row before exponentiating keeps ``w_ij`` exact where the raw
kernel sums would underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .numerics import DivergenceError, gradient_descent, make_rng, sym_eig


def default_out_dim(m):
    return min(m, max(2, math.ceil(m / 2)))


@dataclass(frozen=True)
class MlkrConfig:
    out_dim: int | None = None  # None -> default_out_dim(m)
    sigma: float = 1.0
    max_iters: int = 200
    tol: float = 1e-7
    init: str = "identity"  # 'identity' | 'pca'
    init_noise: float = 1e-3
    seed: int = 0

    def resolve_dim(self, m):
        l = default_out_dim(m) if self.out_dim is None else int(self.out_dim)
        if not 1 <= l <= m:
            raise ValueError(f"out_dim must lie in [1, {m}], got {l}")
        return l


def _as_A(A):
    A = np.asarray(A, dtype=float)
    return A.reshape(1, -1) if A.ndim == 1 else A


def mahalanobis_distance(A, xi, xj):
    """``||A (xi - xj)||^2``."""
    A = _as_A(A)
    diff = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    if diff.shape != (A.shape[1],):
        raise ValueError(f"vectors of length {diff.shape} do not match A with "
                         f"{A.shape[1]} columns")
    z = A @ diff
    return float(z @ z)


def kernel(d, sigma=1.0):
    """Gaussian kernel of a squared distance."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = np.exp(-d / sigma ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def _loo_weights(A, X, sigma):
    """Row-normalised leave-one-out kernel weights ``w_ij`` (zero diagonal)."""
    Z = X @ _as_A(A).T
    D = cdist(Z, Z, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    D -= D.min(axis=1, keepdims=True)
    K = np.exp(-D / sigma ** 2)
    return K / K.sum(axis=1, keepdims=True)


def _check_block(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if X.shape[0] < 2:
        raise ValueError("leave-one-out estimates need at least two samples")
    return X, y


def loo_estimates(A, X, y, sigma=1.0):
    """Leave-one-out Nadaraya-Watson estimates of ``y``."""
    X, y = _check_block(X, y)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _loo_weights(A, X, sigma) @ y


def mlkr_loss(A, X, y, sigma=1.0):
    X, y = _check_block(X, y)
    r = y - _loo_weights(A, X, sigma) @ y
    loss = float(r @ r)
    if not np.isfinite(loss):
        raise DivergenceError("MLKR loss is not finite; check sigma against the data scale")
    return loss


def _loss_and_grad(A, X, y, sigma):
    A = _as_A(A)
    W = _loo_weights(A, X, sigma)
    yhat = W @ y
    r = y - yhat
    C = (2.0 / sigma ** 2) * r[:, None] * W * (y[None, :] - yhat[:, None])
    S = C + C.T
    L = np.diag(S.sum(axis=1)) - S
    return float(r @ r), 2.0 * A @ (X.T @ L @ X)


def mlkr_gradient(A, X, y, sigma=1.0):
    X, y = _check_block(X, y)
    return _loss_and_grad(A, X, y, sigma)[1]


@dataclass
class MlkrTransform:
    A: np.ndarray
    sigma: float = 1.0
    trace: list = field(default_factory=list)

    @property
    def l(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def M(self):
        M = self.A.T @ self.A
        return 0.5 * (M + M.T)

    def embed(self, X):
        return embed(self, X)

    def to_json(self):
        return {"l": self.l, "m": self.m, "A": self.A.ravel().tolist(),
                "sigma": self.sigma, "trace": list(self.trace)}

    @classmethod
    def from_json(cls, obj):
        A = np.asarray(obj["A"], dtype=float).reshape(obj["l"], obj["m"])
        return cls(A, float(obj["sigma"]), list(obj["trace"]))


def initial_A(X, l, cfg):
    m = X.shape[1]
    rng = make_rng(cfg.seed, "mlkr-init")
    if cfg.init == "identity":
        A0 = np.eye(l, m)
    elif cfg.init == "pca":
        eig = sym_eig(X.T @ X)
        A0 = eig.eigenvectors[:, :l].T.copy()
    else:
        raise ValueError(f"unknown init scheme {cfg.init!r}")
    return A0 + cfg.init_noise * rng.standard_normal((l, m))


def train_mlkr(X, y=None, cfg=MlkrConfig()):
    """Fit ``A`` by backtracking gradient descent on the leave-one-out loss.

    ``X`` may be a :class:`~hadr.dbc.DataBlock` or a ``Dataset``, in which case
    ``y`` is taken from it.
    """
    if y is None:
        X, y = X.features, X.labels
    X, y = _check_block(X, y)
    if np.unique(y).size < 2:
        raise ValueError("MLKR block needs both classes")
    l = cfg.resolve_dim(X.shape[1])
    A0 = initial_A(X, l, cfg)
    cache = {}

    def fun(a):
        key = a.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = _loss_and_grad(a, X, y, cfg.sigma)
        return cache[key][0]

    def grad(a):
        fun(a)
        return cache[a.tobytes()][1]

    try:
        res = gradient_descent(fun, grad, A0, step=1.0 / max(1, X.shape[0]),
                               max_iters=cfg.max_iters, tol=cfg.tol)
    except DivergenceError as e:
        raise DivergenceError(f"MLKR diverged at iteration {e.iteration}: {e}", e.iteration) from e
    return MlkrTransform(res.x, cfg.sigma, res.trace)


def embed(t, X):
    """Map rows ``x -> A x``."""
    A = t.A if isinstance(t, MlkrTransform) else _as_A(t)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != A.shape[1]:
        raise ValueError(f"expected {A.shape[1]} features, got {X.shape[1]}")
    return X @ A.T


def m_eigen(t):
    """Eigendecomposition of ``M = A^T A`` (descending)."""
    A = t.A if isinstance(t, MlkrTransform) else _as_A(t)
    M = A.T @ A
    return sym_eig(0.5 * (M + M.T))


def project_by_m_eigvecs(t, X, l):
    """Project rows onto the top-``l`` eigenvectors of ``M = A^T A``.

    This is PCA with ``M`` in place of the input covariance.  Scaling axis
    ``j`` by ``sqrt(gamma_j)`` recovers the metric exactly when ``l = m``.
    """
    A = t.A if isinstance(t, MlkrTransform) else _as_A(t)
    m = A.shape[1]
    if A.shape[0] != m:
        raise ValueError("the eigenvector projection needs a square A")
    if not 1 <= l <= m:
        raise ValueError(f"need 1 <= l <= {m}, got {l}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X @ m_eigen(A).eigenvectors[:, :l]


def square_config(cfg, m):
    """Copy of ``cfg`` forcing a square ``A`` (``l = m``)."""
    return replace(cfg, out_dim=m)
