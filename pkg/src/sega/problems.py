"""Objectives, sketch oracles, synthetic generators and LibSVM input."""
from __future__ import annotations

import io
import os
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.special import expit

from sega.core import SmoothnessData
from sega.sketch import SketchSample, make_rng

__all__ = [
    "Problem",
    "QuadraticForm",
    "QuadraticProblem",
    "LeastSquaresProblem",
    "LogisticProblem",
    "CountingOracle",
    "make_synthetic",
    "make_least_squares_subspace",
    "make_logistic",
    "minimize_quadratic_on_ball",
    "parse_libsvm",
    "dump_libsvm",
    "load_libsvm",
    "zeroth_order_sketch",
    "Reference",
    "reference_solution",
]


class Problem:
    """Smooth part f of a composite objective.

    Subclasses implement :meth:`value` and :meth:`full_gradient`. Solvers
    only call :meth:`sketched_gradient`; full gradients serve verification
    and the projected-gradient baseline.
    """

    n: int
    constants: SmoothnessData
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    x0: Optional[np.ndarray] = None

    def value(self, x) -> float:
        raise NotImplementedError

    def full_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def partial(self, i: int, x) -> float:
        """i-th partial derivative."""
        return float(self.full_gradient(x)[i])

    def sketched_gradient(self, S, x) -> np.ndarray:
        """``S^T grad f(x)``; ``S`` is a :class:`SketchSample` or an ``n x b`` matrix."""
        if isinstance(S, SketchSample):
            if S.indices is not None and S.indices.size == 1:
                return np.array([self.partial(int(S.indices[0]), x)])
            return S.apply_T(self.full_gradient(x))
        S = np.asarray(S, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        return S.T @ self.full_gradient(x)

    def quadratic_form(self):
        """``(M, c, const)`` with ``f(x) = x^T M x / 2 - c^T x + const``, or None."""
        return None


class QuadraticForm(Problem):
    """``f(x) = x^T M x / 2 - c^T x + const`` with symmetric PSD ``M``."""

    def __init__(self, M, c, const: float = 0.0, x0=None, mu: Optional[float] = None):
        M = np.asarray(M, dtype=float)
        self.M = 0.5 * (M + M.T)
        self.c = np.asarray(c, dtype=float)
        self.const = float(const)
        self.n = self.c.shape[0]
        eig = np.linalg.eigvalsh(self.M)
        self.eigenvalues = eig
        L = float(eig[-1])
        if mu is None:
            pos = eig[eig > 1e-10 * L]
            mu = float(pos[0])
        Q = np.linalg.inv(self.M) if eig[0] > 1e-12 * L else None
        self.constants = SmoothnessData(mu=mu, M=self.M, Q=Q, L=L)
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)
        self.x_star = np.linalg.lstsq(self.M, self.c, rcond=None)[0]
        self.f_star = self.value(self.x_star)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.M @ x) - self.c @ x + self.const)

    def full_gradient(self, x) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=float) - self.c

    def partial(self, i: int, x) -> float:
        return float(self.M[i] @ np.asarray(x, dtype=float) - self.c[i])

    def quadratic_form(self):
        return self.M, self.c, self.const


class QuadraticProblem(QuadraticForm):
    """``f(x) = x^T M x / 2 - b^T x`` with ``M = U diag(sigma) U^T``."""

    def __init__(self, M, b, x0=None, U=None, spectrum=None):
        super().__init__(M, b, 0.0, x0=x0)
        self.b = self.c
        self.U = U
        self.spectrum = None if spectrum is None else np.asarray(spectrum, dtype=float)
        if self.spectrum is not None:
            self.constants = SmoothnessData(
                mu=float(self.spectrum.min()), M=self.M, Q=self.constants.Q,
                L=float(self.spectrum.max()))


class LeastSquaresProblem(QuadraticForm):
    """``f(x) = ||A x - b||^2``; the gradient lies in ``Range(A^T)``."""

    def __init__(self, A, b, x0=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        super().__init__(2.0 * self.A.T @ self.A, 2.0 * self.A.T @ self.b,
                         float(self.b @ self.b), x0=x0)

    def value(self, x) -> float:
        r = self.A @ np.asarray(x, dtype=float) - self.b
        return float(r @ r)

    def full_gradient(self, x) -> np.ndarray:
        return 2.0 * self.A.T @ (self.A @ np.asarray(x, dtype=float) - self.b)


class LogisticProblem(Problem):
    """L2-regularized logistic loss ``mean(log(1 + exp(-y a^T x))) + mu ||x||^2 / 2``."""

    def __init__(self, A, labels, mu: float, x0=None):
        self.A = np.asarray(A, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not mu >= 0:
            raise ValueError("mu must be nonnegative")
        self.mu = float(mu)
        self.m, self.n = self.A.shape
        M = self.A.T @ self.A / (4.0 * self.m) + self.mu * np.eye(self.n)
        eig = np.linalg.eigvalsh(M)
        strong = self.mu if self.mu > 0 else max(float(eig[0]), 1e-300)
        self.constants = SmoothnessData(mu=strong, M=M, L=float(eig[-1]))
        self.x0 = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=float)
        self.x_star = None
        self.f_star = None

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        margins = self.labels * (self.A @ x)
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.mu * x @ x)

    def full_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        margins = self.labels * (self.A @ x)
        w = -self.labels * expit(-margins)
        return self.A.T @ w / self.m + self.mu * x

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = expit(self.labels * (self.A @ x))
        w = s * (1.0 - s) / self.m
        return (self.A.T * w) @ self.A + self.mu * np.eye(self.n)

    def solve(self, tol: float = 1e-13, maxiter: int = 100) -> np.ndarray:
        """Minimize by damped Newton; stores ``x_star`` and ``f_star``."""
        x = np.zeros(self.n)
        fx = self.value(x)
        for _ in range(maxiter):
            g = self.full_gradient(x)
            if np.linalg.norm(g) <= tol:
                break
            d = np.linalg.solve(self.hessian(x), g)
            t = 1.0
            while t > 1e-12:
                xn = x - t * d
                fn = self.value(xn)
                if fn <= fx - 0.25 * t * (g @ d):
                    break
                t *= 0.5
            if fn >= fx and t <= 1e-12:
                break
            x, fx = xn, fn
        self.x_star = x
        self.f_star = self.value(x)
        return x


def make_synthetic(spectrum_type: int, n: int, seed=0, top: Optional[float] = None) -> QuadraticProblem:
    """Random quadratic with a prescribed spectrum.

    Types: 1 has ``n/2`` eigenvalues 1 and the rest ``n``; 2 has ``n-1``
    ones and a single ``n``; 3 has eigenvalue ``i`` for ``i = 1..n``; 4 is
    uniform on [0, 1] floored at 1e-6. ``top`` replaces the large eigenvalue
    ``n`` of types 1 and 2, which sets the condition number directly.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = make_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    b = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    big = float(n if top is None else top)
    if spectrum_type == 1:
        sig = np.where(np.arange(n) < n // 2, 1.0, big)
    elif spectrum_type == 2:
        sig = np.ones(n)
        sig[-1] = big
    elif spectrum_type == 3:
        sig = np.arange(1, n + 1, dtype=float)
    elif spectrum_type == 4:
        sig = np.maximum(rng.random(n), 1e-6)
    else:
        raise ValueError(f"unknown spectrum type {spectrum_type}")
    M = (U * sig) @ U.T
    return QuadraticProblem(0.5 * (M + M.T), b, x0=x0, U=U, spectrum=sig)


def make_least_squares_subspace(n: int, d: int, seed=0) -> LeastSquaresProblem:
    """``||A x - b||^2`` with A of shape (d, n) having orthonormal rows."""
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    rng = make_rng(seed)
    Qm, _ = np.linalg.qr(rng.standard_normal((n, d)))
    A = Qm.T.copy()
    b = rng.standard_normal(d)
    x0 = rng.standard_normal(n)
    return LeastSquaresProblem(A, b, x0=x0)


def make_logistic(A_data, labels, mu: float) -> LogisticProblem:
    return LogisticProblem(A_data, labels, mu)


def minimize_quadratic_on_ball(M, c, radius: float, center=None):
    """Minimize ``x^T M x / 2 - c^T x`` over ``||x - center|| <= radius``.

    Uses the eigendecomposition of ``M`` and a scalar root find for the
    multiplier ``t`` in ``(M + t I) x = c``.
    """
    M = np.asarray(M, dtype=float)
    c = np.asarray(c, dtype=float)
    x_c = np.zeros_like(c) if center is None else np.asarray(center, dtype=float)
    # shift so the ball is centered at the origin: y = x - x_c
    c_y = c - M @ x_c
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    beta = V.T @ c_y
    pos = w > 1e-12 * max(w[-1], 1e-300)
    y_free = V[:, pos] @ (beta[pos] / w[pos])
    if np.linalg.norm(y_free) <= radius and np.all(np.abs(beta[~pos]) <= 1e-12 * max(1.0, np.abs(beta).max())):
        return x_c + y_free

    w = np.maximum(w, 0.0)
    beta = np.where(~pos & (np.abs(beta) <= 1e-12 * max(1.0, np.abs(beta).max())), 0.0, beta)
    live = beta != 0

    def phi(t):
        return np.linalg.norm(beta[live] / (w[live] + t)) - radius

    hi = max(1.0, np.linalg.norm(beta) / radius)
    while phi(hi) > 0:
        hi *= 2.0
    # t = 0 is admissible only when no live component sits on a zero eigenvalue
    lo = 0.0 if np.all(w[live] > 0) else 1e-30 * hi
    if phi(lo) <= 0:
        t = lo
    else:
        t = brentq(phi, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    y = np.zeros_like(beta)
    y[live] = beta[live] / (w[live] + t)
    return x_c + V @ y


class CountingOracle:
    """Value oracle wrapper counting calls."""

    def __init__(self, f: Callable):
        self.f = f
        self.calls = 0

    def __call__(self, x) -> float:
        self.calls += 1
        return self.f(x)


def zeroth_order_sketch(f: Callable, x, S, eps: Optional[float] = None, fx: Optional[float] = None) -> np.ndarray:
    """Forward-difference estimate of ``S^T grad f(x)``.

    Column j is ``(f(x + eps s_j) - f(x)) / eps``. The oracle is called
    ``b + 1`` times unless ``fx`` (the value at x) is supplied.
    """
    x = np.asarray(x, dtype=float)
    if eps is None:
        eps = 1e-6 * (1.0 + np.linalg.norm(x))
    if not eps > 0:
        raise ValueError("eps must be positive")
    Sm = S.dense() if isinstance(S, SketchSample) else np.asarray(S, dtype=float)
    if Sm.ndim == 1:
        Sm = Sm[:, None]
    f0 = f(x) if fx is None else fx
    return np.array([(f(x + eps * Sm[:, j]) - f0) / eps for j in range(Sm.shape[1])])


# -- LibSVM -----------------------------------------------------------------

def _lines(source) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_libsvm(source, n_features: Optional[int] = None, map_binary: bool = True):
    """Parse LibSVM text (``label idx:val ...``, 1-based increasing indices).

    Parameters
    ----------
    source : str or iterable of lines
    n_features : int, optional
        Column count; inferred from the largest index otherwise.
    map_binary : bool
        Map exactly two distinct labels to -1 (smaller) and +1 (larger).

    Returns
    -------
    A : (m, n) ndarray
    labels : (m,) ndarray
    """
    labels, rows, cols, vals = [], [], [], []
    top = 0
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ValueError(f"line {lineno}: bad label {parts[0]!r}") from None
        r = len(labels)
        labels.append(label)
        prev = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ValueError(f"line {lineno}: malformed feature {tok!r}") from None
            if idx < 1:
                raise ValueError(f"line {lineno}: feature index must be >= 1")
            if idx <= prev:
                raise ValueError(f"line {lineno}: feature indices not increasing")
            prev = idx
            rows.append(r)
            cols.append(idx - 1)
            vals.append(val)
        top = max(top, prev)
    n = top if n_features is None else int(n_features)
    if top > n:
        raise ValueError(f"feature index {top} exceeds n_features={n}")
    A = np.zeros((len(labels), n))
    if vals:
        A[np.array(rows), np.array(cols)] = vals
    y = np.array(labels, dtype=float)
    uniq = np.unique(y)
    if map_binary and uniq.size == 2:
        y = np.where(y == uniq[1], 1.0, -1.0)
    return A, y


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2 ** 53 else repr(v)


def dump_libsvm(A, labels) -> str:
    """Serialize a dense matrix in LibSVM format (nonzeros only)."""
    A = np.asarray(A, dtype=float)
    out = []
    for row, lab in zip(A, labels):
        nz = np.flatnonzero(row)
        feats = " ".join(f"{j + 1}:{_fmt(row[j])}" for j in nz)
        out.append(f"{_fmt(lab)} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


def load_libsvm(path, max_rows: Optional[int] = None, seed=0, n_features=None):
    """Read a LibSVM file, keeping a seeded random subset of ``max_rows`` rows."""
    with open(os.fspath(path)) as fh:
        A, y = parse_libsvm(fh, n_features=n_features)
    if max_rows is not None and A.shape[0] > max_rows:
        keep = np.sort(make_rng(seed).choice(A.shape[0], size=max_rows, replace=False))
        A, y = A[keep], y[keep]
    return A, y


class Reference(tuple):
    """``(x_star, f_star, grad_star)`` of the composite problem ``f + R``."""

    __slots__ = ()

    def __new__(cls, x_star, f_star, grad_star):
        return tuple.__new__(cls, (x_star, f_star, grad_star))

    x_star = property(lambda self: self[0])
    f_star = property(lambda self: self[1])
    grad_star = property(lambda self: self[2])


def _fista(problem, R, x, tol=1e-14, maxiter=200_000):
    from sega.prox import prox

    L = problem.constants.L
    y = x.copy()
    t = 1.0
    for _ in range(maxiter):
        x_new = prox(R, None, 1.0 / L, y - problem.full_gradient(y) / L)
        if np.linalg.norm(x_new - x) <= tol * (1.0 + np.linalg.norm(x)):
            return x_new
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if (y - x_new) @ (x_new - x) > 0:  # restart on non-monotone progress
            t_new = 1.0
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return x


def reference_solution(problem: Problem, R=None) -> Reference:
    """Minimizer, optimal value and optimal gradient of ``f + R``."""
    from sega.prox import Regularizer

    R = Regularizer.zero() if R is None else R
    if R.kind == "zero":
        if problem.x_star is None and isinstance(problem, LogisticProblem):
            problem.solve()
        x = np.asarray(problem.x_star, dtype=float)
    elif R.kind == "ball" and problem.quadratic_form() is not None:
        M, c, _ = problem.quadratic_form()
        x = minimize_quadratic_on_ball(M, c, R.radius, R.center)
    else:
        x0 = np.zeros(problem.n) if problem.x0 is None else problem.x0
        x = _fista(problem, R, np.asarray(x0, dtype=float))
    fr = 0.0 if R.is_indicator else R.value(x)
    return Reference(x, problem.value(x) + fr, problem.full_gradient(x))
