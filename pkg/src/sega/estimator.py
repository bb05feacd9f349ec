"""Gradient learning by sketch-and-project, and its range-constrained variant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from sega.core import Metric, pseudo_inverse
from sega.sketch import SketchDistribution, SketchSample, _projected_gram

__all__ = [
    "RangeProjector",
    "range_projector",
    "sketch_and_project",
    "unbiased_estimate",
    "subspace_sketch_and_project",
    "subspace_unbiased_estimate",
    "optimal_subspace_setup",
]


def _dense_sketch(S, n):
    if isinstance(S, SketchSample):
        return S.dense()
    Sm = np.asarray(S, dtype=float)
    if Sm.ndim == 1:
        Sm = Sm[:, None]
    if Sm.shape[0] != n:
        raise ValueError(f"sketch has {Sm.shape[0]} rows, expected {n}")
    return Sm


def _as_lam(lam, b):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (b,):
        raise ValueError(f"sketched gradient has shape {lam.shape}, expected ({b},)")
    return lam


def sketch_and_project(h, S, lam, B=None) -> np.ndarray:
    """Closest point to ``h`` in the B-norm satisfying ``S^T h_new = lam``.

    Parameters
    ----------
    h : (n,) array
        Current gradient estimate.
    S : SketchSample or (n, b) array
        The sketch. Index-set samples with a diagonal metric use an O(b) path.
    lam : (b,) array
        Sketched gradient ``S^T grad f(x)``.
    B : Metric, optional
        Identity when omitted.
    """
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    Bm = Metric.coerce(B, n)
    if isinstance(S, SketchSample) and S.indices is not None and Bm.is_diagonal:
        lam = _as_lam(lam, S.indices.size)
        out = h.copy()
        out[S.indices] = lam
        return out
    Sm = _dense_sketch(S, n)
    lam = _as_lam(lam, Sm.shape[1])
    BinvS = Bm.solve(Sm)
    G = Sm.T @ BinvS
    return h - BinvS @ (pseudo_inverse(0.5 * (G + G.T)) @ (Sm.T @ h - lam))


def unbiased_estimate(h, h_plus, theta: float) -> np.ndarray:
    """``g = (1 - theta) h + theta h_plus``."""
    h = np.asarray(h, dtype=float)
    return (1.0 - theta) * h + theta * np.asarray(h_plus, dtype=float)


@dataclass(frozen=True, eq=False)
class RangeProjector:
    """B-orthogonal projector ``H`` onto ``Range(A^T)``."""

    H: np.ndarray
    A: np.ndarray
    B: Metric

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def project(self, v) -> np.ndarray:
        return self.H @ np.asarray(v, dtype=float)

    def residual(self, v) -> float:
        """Distance of ``v`` to the range, ``||v - H v||``."""
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.H @ v))


def range_projector(A, B=None) -> RangeProjector:
    """``H = A^T (A B A^T)^+ A B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        raise ValueError("A must be nonzero")
    Bm = Metric.coerce(B, A.shape[1])
    AB = Bm.apply(A.T).T
    G = AB @ A.T
    H = A.T @ pseudo_inverse(0.5 * (G + G.T)) @ AB
    H.setflags(write=False)
    return RangeProjector(H, A, Bm)


def _subspace_direction(S, P: RangeProjector):
    """Return ``(Sm, U, Gp)`` with ``U = H B^{-1} S`` and ``Gp = (S^T U)^+``."""
    Sm = _dense_sketch(S, P.n)
    U = P.H @ P.B.solve(Sm)
    G = _projected_gram(Sm, P.B, P.H)
    scale = np.linalg.norm(Sm) ** 2 * max(1.0, np.linalg.norm(P.H)) / np.min(P.B.diag())
    return Sm, U, pseudo_inverse(G, atol=1e-12 * scale)


def subspace_sketch_and_project(h, S, lam, P: RangeProjector) -> np.ndarray:
    """Range-preserving update ``h - H B^{-1} S (S^T H B^{-1} S)^+ (S^T h - lam)``.

    A sketch orthogonal to the range yields a zero Gram matrix, so the update
    is skipped and ``h`` is returned unchanged.
    """
    h = np.asarray(h, dtype=float)
    Sm, U, Gp = _subspace_direction(S, P)
    lam = _as_lam(lam, Sm.shape[1])
    return h - U @ (Gp @ (Sm.T @ h - lam))


def subspace_unbiased_estimate(h, S, lam, theta: float, P: RangeProjector) -> np.ndarray:
    """``g = h + theta H B^{-1} Z (grad - h)`` computed from the sketch alone."""
    h = np.asarray(h, dtype=float)
    h_plus = subspace_sketch_and_project(h, S, lam, P)
    return unbiased_estimate(h, h_plus, theta)


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of rows of A."""
    _, R, piv = scipy.linalg.qr(A.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.array([], dtype=int)
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def optimal_subspace_setup(A):
    """Metric and sketch distribution that keep h in ``Range(A^T)`` implicitly.

    Independent rows of A are normalized into ``W`` (n x d). Completing
    ``W`` with an orthonormal basis ``N`` of its orthogonal complement gives
    ``T = [W, N]`` and the metric ``B = T^{-T} T^{-1}``, in which the columns
    of ``W`` are B-orthonormal. The sketches are ``xi_i = B w_i``, drawn
    uniformly, with ``theta = d``.

    Returns
    -------
    B : Metric
    dist : SketchDistribution
        Fixed-vector distribution over the ``d`` vectors ``xi_i``.
    d : int
        Rank of A.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        raise ValueError("A must be nonzero")
    n = A.shape[1]
    rows = _independent_rows(A)
    W = A[rows].T / np.linalg.norm(A[rows], axis=1)
    d = W.shape[1]
    N = scipy.linalg.null_space(W.T)
    T = np.hstack([W, N])
    Tinv = np.linalg.inv(T)
    Bmat = Tinv.T @ Tinv
    Bmat = 0.5 * (Bmat + Bmat.T)
    if np.allclose(Bmat, np.eye(n), atol=1e-12, rtol=0):
        B = Metric.identity(n)
        xi = W.copy()
    else:
        B = Metric.dense(Bmat)
        xi = Bmat @ W
    dist = SketchDistribution.fixed_vectors(xi)
    return B, dist, d
