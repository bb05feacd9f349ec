"""Numeric foundations: metrics, weighted norms, PSD checks, pseudo-inverses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

SYM_TOL = 1e-10
PD_TOL = 1e-12
PINV_TOL = 1e-12

__all__ = [
    "SYM_TOL",
    "PD_TOL",
    "PINV_TOL",
    "Metric",
    "SmoothnessData",
    "SpdCheck",
    "as_matrix",
    "check_spd",
    "check_symmetric",
    "m_smooth_gap",
    "pseudo_inverse",
    "q_smooth_gap",
    "weighted_norm_sq",
]


class SpdCheck(NamedTuple):
    """Result of a definiteness test. ``ok`` is False when ``min_eig`` fails the bound."""

    ok: bool
    min_eig: float

    def __bool__(self):
        return self.ok


def check_symmetric(A, tol=SYM_TOL):
    """Raise ``ValueError`` when the relative Frobenius asymmetry of ``A`` exceeds ``tol``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if scale > 0 and np.linalg.norm(A - A.T) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return A


@dataclass(frozen=True, eq=False)
class Metric:
    """Positive definite weight matrix ``B`` stored by structure.

    Use the constructors :meth:`identity`, :meth:`diagonal` and
    :meth:`dense` rather than calling the class directly.
    """

    n: int
    kind: str = "identity"
    values: Optional[np.ndarray] = None

    @classmethod
    def identity(cls, n: int) -> "Metric":
        if n < 1:
            raise ValueError("dimension must be positive")
        return cls(int(n), "identity", None)

    @classmethod
    def diagonal(cls, d) -> "Metric":
        d = np.array(d, dtype=float).ravel()
        if d.size == 0 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("diagonal metric entries must be finite and strictly positive")
        d.setflags(write=False)
        return cls(d.size, "diagonal", d)

    @classmethod
    def dense(cls, B) -> "Metric":
        B = check_symmetric(np.array(B, dtype=float))
        B = 0.5 * (B + B.T)
        res = check_spd(B)
        if not res.ok:
            raise ValueError(f"metric is not positive definite (min eigenvalue {res.min_eig:.3e})")
        B.setflags(write=False)
        return cls(B.shape[0], "dense", B)

    @classmethod
    def coerce(cls, B, n: Optional[int] = None) -> "Metric":
        """Accept a Metric, ``None`` (identity), a 1-D diagonal or a dense matrix."""
        if isinstance(B, Metric):
            out = B
        elif B is None:
            if n is None:
                raise ValueError("dimension required for a default identity metric")
            out = cls.identity(n)
        else:
            arr = np.asarray(B, dtype=float)
            out = cls.diagonal(arr) if arr.ndim == 1 else cls.dense(arr)
        if n is not None and out.n != n:
            raise ValueError(f"metric has dimension {out.n}, expected {n}")
        return out

    @property
    def is_diagonal(self) -> bool:
        return self.kind != "dense"

    def diag(self) -> np.ndarray:
        """Diagonal of B (for every kind)."""
        if self.kind == "identity":
            return np.ones(self.n)
        if self.kind == "diagonal":
            return np.array(self.values)
        return np.diag(self.values).copy()

    def scale(self) -> Optional[float]:
        """Return c when B = c·I, otherwise None."""
        if self.kind == "identity":
            return 1.0
        if self.kind == "diagonal" and np.all(self.values == self.values[0]):
            return float(self.values[0])
        return None

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "diagonal":
            return np.diag(self.values)
        return np.array(self.values)

    def inverse_matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "diagonal":
            return np.diag(1.0 / self.values)
        return np.linalg.inv(self.values)

    def apply(self, x):
        """B @ x for a vector or a matrix with n rows."""
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "diagonal":
            return self.values * x if x.ndim == 1 else self.values[:, None] * x
        return self.values @ x

    def solve(self, x):
        """B^{-1} @ x."""
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "diagonal":
            return x / self.values if x.ndim == 1 else x / self.values[:, None]
        return np.linalg.solve(self.values, x)

    def norm_sq(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return float(x @ x)
        if self.kind == "diagonal":
            return float(x @ (self.values * x))
        return float(x @ (self.values @ x))


def as_matrix(W, n: Optional[int] = None) -> np.ndarray:
    """Dense matrix for a Metric or array-like (1-D input is read as a diagonal)."""
    if isinstance(W, Metric):
        return W.matrix()
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        return np.diag(W)
    return W


def weighted_norm_sq(x, W) -> float:
    """Return ``x^T W x``.

    ``W`` may be a :class:`Metric`, a square matrix, or a 1-D array read as
    a diagonal.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(W, Metric):
        if W.n != x.shape[0]:
            raise ValueError(f"dimension mismatch: x has {x.shape[0]} entries, metric is {W.n}")
        return W.norm_sq(x)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        if W.shape[0] != x.shape[0]:
            raise ValueError("dimension mismatch")
        return float(x @ (W * x))
    if W.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"dimension mismatch: x has {x.shape[0]} entries, W is {W.shape}")
    return float(x @ (W @ x))


def pseudo_inverse(A, tol: float = PINV_TOL, atol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric matrix by eigendecomposition.

    Eigenvalues with magnitude at most ``max(tol * max|lambda|, atol)`` are
    treated as zero.
    """
    A = check_symmetric(np.atleast_2d(np.asarray(A, dtype=float)))
    if A.shape == (1, 1):
        a = A[0, 0]
        return np.array([[1.0 / a if abs(a) > atol and a != 0 else 0.0]])
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    top = np.max(np.abs(w)) if w.size else 0.0
    cut = max(tol * top, atol)
    keep = np.abs(w) > cut
    if not np.any(keep):
        return np.zeros_like(A)
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.T


def check_spd(W, tol: Optional[float] = None) -> SpdCheck:
    """Test ``lambda_min(W) > tol``.

    With ``tol=None`` the threshold is ``PD_TOL * lambda_max(W)``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    w = np.linalg.eigvalsh(0.5 * (W + W.T))
    lo = float(w[0])
    if tol is None:
        tol = PD_TOL * max(float(w[-1]), 0.0)
    return SpdCheck(lo > tol, lo)


@dataclass(frozen=True, eq=False)
class SmoothnessData:
    """Smoothness and convexity constants of an objective.

    Attributes
    ----------
    M : matrix, optional
        Smoothness matrix, ``f(x) <= f(y) + <grad f(y), x-y> + 0.5 ||x-y||_M^2``.
    Q : matrix, optional
        Co-coercivity matrix with respect to the metric B.
    L : float, optional
        Scalar smoothness constant.
    mu : float
        Strong convexity (or PL) constant.
    G : vector, optional
        Diagonal preconditioning metric.
    """

    mu: float
    M: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    L: Optional[float] = None
    G: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.G is not None and np.any(np.asarray(self.G) <= 0):
            raise ValueError("G must be a positive vector")

    def check_inverse_pair(self, tol: float = 1e-8) -> bool:
        """With B = I, the two smoothness forms agree when Q = M^{-1}."""
        if self.M is None or self.Q is None:
            return True
        M = np.asarray(self.M)
        prod = M @ np.asarray(self.Q)
        return bool(np.linalg.norm(prod - np.eye(M.shape[0])) <= tol * max(1.0, np.linalg.cond(M)))


def q_smooth_gap(f: Callable, grad: Callable, Q, x, y, B=None) -> float:
    """Slack of the Q-smoothness inequality at (x, y); nonnegative when it holds."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Bm = Metric.coerce(B, x.shape[0])
    gy = grad(y)
    inner = float(gy @ Bm.apply(x - y))
    return f(x) - f(y) - inner - 0.5 * weighted_norm_sq(grad(x) - gy, Q)


def m_smooth_gap(f: Callable, grad: Callable, M, x, y) -> float:
    """Slack of the M-smoothness upper bound at (x, y); nonnegative when it holds."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return f(y) + float(grad(y) @ (x - y)) + 0.5 * weighted_norm_sq(x - y, M) - f(x)
