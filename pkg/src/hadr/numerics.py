"""Small dense linear-algebra and optimisation toolkit.

Everything here works on plain ``numpy.ndarray`` objects.  The symmetric
eigensolver is a cyclic Jacobi method, which is slow compared to LAPACK but
simple, exact enough for the matrix sizes the pipeline sees (m <= ~40) and easy
to property-test.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np


class DivergenceError(FloatingPointError):
    """Raised when an objective or gradient stops being finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


# ---------------------------------------------------------------------------
# randomness

def derive_seed(master, tag, *indices):
    """Child ``SeedSequence`` for one purpose of one run.

    The derivation only depends on ``(master, tag, indices)`` so results do not
    depend on how work is scheduled.  ``tag`` is hashed with CRC-32, which is
    stable across interpreters (unlike ``hash``).
    """
    if master < 0:
        raise ValueError("master seed must be non-negative")
    key = (zlib.crc32(tag.encode("utf-8")),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(int(master), spawn_key=key)


def make_rng(master, tag="", *indices):
    """PCG64 generator seeded from :func:`derive_seed`."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, tag, *indices)))


# ---------------------------------------------------------------------------
# matrices

def matrix_to_json(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "data": a.ravel().tolist()}


def matrix_from_json(obj):
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != rows * cols:
        raise ValueError(f"matrix payload has {data.size} values, "
                         f"expected {rows}x{cols}")
    return data.reshape(rows, cols)


def covariance(X, centered=False, normalized=False):
    """Scatter matrix ``sum_i x_i x_i^T`` of the rows of ``X``.

    Parameters
    ----------
    X : ndarray, shape (n, m)
    centered : bool
        Subtract column means first.
    normalized : bool
        Divide by ``n``.  Eigenvectors are unaffected, eigenvalues scale.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("covariance of an empty matrix")
    if centered:
        X = X - X.mean(axis=0)
    C = X.T @ X
    # symmetric by construction, not just up to rounding
    C = np.triu(C) + np.triu(C, 1).T
    if normalized:
        C = C / X.shape[0]
    return C


@dataclass
class EigenDecomposition:
    """Eigenvalues in descending order; eigenvectors are the columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = field(default=0, compare=False)

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def sym_eig(S, tol=1e-15, max_sweeps=100, sym_tol=1e-10):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted in descending order with orthonormal
    eigenvectors.  Each eigenvector is sign-normalised so that its entry of
    largest magnitude is positive, which makes the output deterministic.
    """
    A = np.array(S, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > sym_tol * scale:
        raise ValueError(f"matrix is not symmetric (max |S - S^T| = {asym:.3g})")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)

    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        if not np.any(np.triu(A, 1)):
            break
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                # negligible next to both diagonal entries: drop it
                if abs(apq) <= tol * math.sqrt(abs(A[p, p] * A[q, q])) or abs(apq) < 1e-300:
                    A[p, q] = A[q, p] = 0.0
                    continue
                rotated = True
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q]
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :]
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    if n:
        pivots = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[pivots, np.arange(n)])
        signs[signs == 0] = 1.0
        V = V * signs
    return EigenDecomposition(w, V, sweep)


def pca_basis(X, l, centered=False):
    """Top-``l`` eigenpairs of the scatter matrix of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[1]
    if not 1 <= l <= m:
        raise ValueError(f"need 1 <= l <= m, got l={l}, m={m}")
    eig = sym_eig(covariance(X, centered=centered))
    return eig.eigenvalues[:l], eig.eigenvectors[:, :l]


def pca_project(X, l, centered=False):
    """Rows ``[v_1.x_i, ..., v_l.x_i]`` for the leading eigenvectors ``v_j``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, V = pca_basis(X, l, centered=centered)
    return X @ V


# ---------------------------------------------------------------------------
# optimisation

@dataclass
class DescentResult:
    x: np.ndarray
    trace: list
    n_iter: int
    converged: bool
    step: float


def gradient_descent(fun, grad, x0, step=1.0, max_iters=200, tol=1e-7,
                     armijo=1e-4, shrink=0.5, grow=2.0, max_backtracks=60):
    """Steepest descent with a backtracking (Armijo) line search.

    ``fun`` and ``grad`` take an array shaped like ``x0``.  ``trace`` holds the
    objective at ``x0`` followed by one value per accepted step, so it is
    non-increasing.  Iteration stops after ``max_iters`` steps, when the
    decrease drops below ``tol``, or when no step length gives sufficient
    decrease.  Each new line search starts from ``grow`` times the previous
    accepted step.
    """
    x = np.array(x0, dtype=float, copy=True)
    f = float(fun(x))
    if not np.isfinite(f):
        raise DivergenceError("objective is not finite at the starting point", 0)
    trace = [f]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = np.asarray(grad(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"gradient is not finite at iteration {it}", it)
        gg = float(np.sum(g * g))
        if gg == 0.0:
            converged = True
            it -= 1
            break
        t = step
        for _ in range(max_backtracks):
            x_new = x - t * g
            f_new = float(fun(x_new))
            if np.isfinite(f_new) and f_new <= f - armijo * t * gg:
                break
            t *= shrink
        else:
            # no acceptable step: we are at a minimum to machine precision
            converged = True
            it -= 1
            break
        decrease = f - f_new
        x, f = x_new, f_new
        trace.append(f)
        step = t * grow
        if decrease < tol:
            converged = True
            break
    return DescentResult(x, trace, it, converged, step)


def check_gradient(fun, grad, x, h=1e-5, floor=1e-6):
    """Largest relative error between ``grad`` and central differences.

    The error of a coordinate is ``|g - g_fd| / max(|g_fd|, floor)``; the
    floor keeps finite-difference noise on (near-)zero partials from
    dominating.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=float, copy=True)
    g = np.asarray(grad(x), dtype=float).reshape(x.shape)
    worst = 0.0
    flat = x.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = float(fun(x))
        flat[k] = orig - h
        fm = float(fun(x))
        flat[k] = orig
        fd = (fp - fm) / (2.0 * h)
        ga = g.reshape(-1)[k]
        worst = max(worst, abs(ga - fd) / max(abs(fd), floor))
    return worst
