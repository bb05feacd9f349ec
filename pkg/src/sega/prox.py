"""Proximal operators in the B-weighted geometry.

``prox(R, B, alpha, x) = argmin_y R(y) + ||y - x||_B^2 / (2 alpha)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from sega.core import Metric

__all__ = ["Regularizer", "prox", "UnsupportedProx"]

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


class UnsupportedProx(ValueError):
    """No exact prox is implemented for this (regularizer, metric) pair."""


@dataclass(frozen=True, eq=False)
class Regularizer:
    """Closed convex regularizer R.

    Build with :meth:`zero`, :meth:`ball`, :meth:`l1` or :meth:`box`.
    """

    kind: str = "zero"
    radius: float = 1.0
    center: Optional[np.ndarray] = None
    lam: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls("zero")

    @classmethod
    def ball(cls, radius: float = 1.0, center=None) -> "Regularizer":
        if not radius > 0:
            raise ValueError("radius must be positive")
        c = None if center is None else np.asarray(center, dtype=float)
        return cls("ball", radius=float(radius), center=c)

    @classmethod
    def l1(cls, lam: float) -> "Regularizer":
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        return cls("l1", lam=float(lam))

    @classmethod
    def box(cls, lo, hi) -> "Regularizer":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        return cls("box", lo=lo, hi=hi)

    @property
    def separable(self) -> bool:
        return self.kind in ("zero", "l1", "box")

    @property
    def is_indicator(self) -> bool:
        return self.kind in ("ball", "box")

    def value(self, x, tol: float = 1e-9) -> float:
        """R(x); indicators return 0 inside (with relative slack ``tol``) and inf outside."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return self.lam * float(np.abs(x).sum())
        if self.kind == "ball":
            c = 0.0 if self.center is None else self.center
            return 0.0 if np.linalg.norm(x - c) <= self.radius * (1 + tol) else np.inf
        inside = np.all(x >= self.lo - tol * (1 + np.abs(self.lo))) and np.all(
            x <= self.hi + tol * (1 + np.abs(self.hi)))
        return 0.0 if inside else np.inf


def _ball_diagonal(v, d, r):
    """Project ``v`` (relative to the center) onto the r-ball in the metric diag(d).

    The minimizer is ``d_i v_i / (d_i + t)`` with the multiplier ``t >= 0``
    chosen so that the result has norm r.
    """
    if np.linalg.norm(v) <= r:
        return v.copy()

    def norm_at(t):
        return np.linalg.norm(d * v / (d + t))

    lo, hi = 0.0, float(np.max(d)) * (np.linalg.norm(v) / r)
    while norm_at(hi) > r:
        hi *= 2.0
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) > r:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(1.0, hi):
            break
    return d * v / (d + hi)


def prox(R: Regularizer, B, alpha: float, x) -> np.ndarray:
    """Exact proximal step of ``alpha * R`` in the norm ``||.||_B``."""
    x = np.asarray(x, dtype=float)
    if R.kind == "zero":
        return x.copy()
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    Bm = Metric.coerce(B, x.shape[0])
    if R.kind == "ball":
        c = np.zeros_like(x) if R.center is None else R.center
        v = x - c
        if Bm.scale() is not None:
            nrm = np.linalg.norm(v)
            return x.copy() if nrm <= R.radius else c + v * (R.radius / nrm)
        if Bm.is_diagonal:
            return c + _ball_diagonal(v, Bm.diag(), R.radius)
        raise UnsupportedProx("ball indicator with a dense metric has no closed-form prox")
    if not Bm.is_diagonal:
        raise UnsupportedProx(f"{R.kind} prox requires a diagonal metric")
    if R.kind == "l1":
        t = alpha * R.lam / Bm.diag()
        return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    if R.kind == "box":
        return np.clip(x, R.lo, R.hi)
    raise UnsupportedProx(f"unknown regularizer {R.kind!r}")
