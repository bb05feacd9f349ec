"""Stepsize and parameter rules derived from the convergence theory."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from sega.core import Metric, as_matrix
from sega.sketch import (SketchDistribution, eso_serial, expected_C, expected_Z,
                         probability_matrix, validate_eso)

__all__ = [
    "InfeasibleStepsize",
    "AsegaParams",
    "Stepsize",
    "StepsizePolicy",
    "stepsize_general",
    "best_sigma_general",
    "stepsize_simple_uniform",
    "simple_uniform_bound",
    "stepsize_coordinate_nonacc",
    "importance_trace",
    "stepsize_metric_G",
    "stepsize_subspace",
    "asega_params",
    "td_constant",
]

MATRIX_TOL = 1e-10
COR3_ALPHA = 0.232
COR3_SIGMA = 0.061
COR3_RATE = 0.117


class InfeasibleStepsize(ValueError):
    """The requested parameters violate the conditions of the convergence theorem."""


def _restrict(X, basis):
    X = as_matrix(X)
    return X if basis is None else basis.T @ X @ basis


def _eigs(X):
    return np.linalg.eigvalsh(0.5 * (X + X.T))


def stepsize_general(Q, B, C, EZ, mu: float, sigma: float, basis=None) -> float:
    """Largest alpha allowed by the general sufficient condition.

    ``alpha = min(lmin(EZ) / lmax(2 (C - B) / sigma + mu B),
    lmin(Q - sigma EZ) / (2 lmax(C)))``. When ``basis`` (orthonormal
    columns) is given, every matrix is first restricted to its span.

    Raises
    ------
    InfeasibleStepsize
        If ``sigma >= lmin(Q) / lmax(EZ)``.
    """
    if not sigma > 0:
        raise InfeasibleStepsize("sigma must be positive")
    Q, B, C, EZ = (_restrict(X, basis) for X in (Q, as_matrix(B), C, EZ))
    lq = _eigs(Q)[0]
    ez = _eigs(EZ)
    if sigma >= lq / ez[-1]:
        raise InfeasibleStepsize(
            f"sigma={sigma:.6g} must be below lmin(Q)/lmax(E[Z]) = {lq / ez[-1]:.6g}")
    first = ez[0] / _eigs(2.0 / sigma * (C - B) + mu * B)[-1]
    second = _eigs(Q - sigma * EZ)[0] / (2.0 * _eigs(C)[-1])
    alpha = float(min(first, second))
    if not alpha > 0:
        raise InfeasibleStepsize(f"no positive stepsize (alpha={alpha:.3e})")
    return alpha


def best_sigma_general(Q, B, C, EZ, mu: float, basis=None):
    """Return ``(alpha, sigma)`` maximizing :func:`stepsize_general` over sigma."""
    Qr, EZr = _restrict(Q, basis), _restrict(EZ, basis)
    smax = _eigs(Qr)[0] / _eigs(EZr)[-1]

    def neg(t):
        try:
            return -stepsize_general(Q, B, C, EZ, mu, t * smax, basis)
        except InfeasibleStepsize:
            return 0.0

    res = minimize_scalar(neg, bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-12})
    sigma = float(res.x * smax)
    return stepsize_general(Q, B, C, EZ, mu, sigma, basis), sigma


def simple_uniform_bound(n: int, L: float, mu: float, sigma: float) -> float:
    """Right-hand side of the uniform-coordinate stepsize condition."""
    return min((1 - L * sigma / n) / (2 * L * n), 1.0 / (n * (mu + 2 * (n - 1) / sigma)))


def stepsize_simple_uniform(n: int, L: float, mu: float):
    """``(alpha, sigma) = (1 / ((4L + mu) n), n / (2L))`` for uniform coordinate sketches."""
    if not (L > 0 and mu > 0):
        raise ValueError("L and mu must be positive")
    sigma = n / (2.0 * L)
    alpha = 1.0 / ((4.0 * L + mu) * n)
    assert alpha <= simple_uniform_bound(n, L, mu, sigma) * (1 + 1e-12)
    return alpha, sigma


def stepsize_coordinate_nonacc(M, p, v, mu: float, alpha: float, sigma: float,
                               P=None, tol: float = MATRIX_TOL) -> float:
    """Validate ``sigma I - alpha^2 (V P^-1 - M) >= gamma mu sigma P^-1`` and return gamma.

    ``gamma = alpha - alpha^2 max(v / p) - sigma``. ``P`` (the probability
    matrix) defaults to ``diag(p)``, i.e. a serial sampling, and is used to
    check the ESO assumption.
    """
    M = as_matrix(M)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    eso = validate_eso(np.diag(p) if P is None else P, M, p, v, tol)
    if not eso.ok:
        raise InfeasibleStepsize(f"ESO fails for v (min eigenvalue {eso.min_eig:.3e})")
    gamma = alpha - alpha ** 2 * np.max(v / p) - sigma
    if not gamma > 0:
        raise InfeasibleStepsize(f"gamma = {gamma:.3e} is not positive")
    n = p.size
    lhs = sigma * np.eye(n) - alpha ** 2 * (np.diag(v / p) - M) - gamma * mu * sigma * np.diag(1.0 / p)
    lo = _eigs(lhs)[0]
    scale = max(sigma, gamma * mu * sigma / p.min(), alpha ** 2 * np.abs(M).max())
    if lo < -tol * scale:
        raise InfeasibleStepsize(f"matrix condition fails (min eigenvalue {lo:.3e})")
    return float(gamma)


def importance_trace(M):
    """Importance sampling ``p ~ diag(M)`` with ``alpha = 0.232/tr M``, ``sigma = 0.061/tr M``.

    Returns ``(p, alpha, sigma)``.
    """
    d = np.diag(as_matrix(M)).astype(float)
    tr = d.sum()
    return d / tr, COR3_ALPHA / tr, COR3_SIGMA / tr


def g_metric_constants(M, G):
    """Extreme eigenvalues of ``G^{-1/2} M G^{-1/2}`` (L, mu)."""
    gi = 1.0 / np.sqrt(np.asarray(G, dtype=float))
    w = _eigs(gi[:, None] * as_matrix(M) * gi[None, :])
    return float(w[-1]), float(w[0])


def stepsize_metric_G(p, L: float, mu: float, sigma: float) -> float:
    """``min_i min(p_i (1/(mu+L) - sigma/2), p_i / (2 (1 - p_i)/sigma + 2 L mu/(mu+L)))``."""
    p = np.asarray(p, dtype=float)
    first = p * (1.0 / (mu + L) - sigma / 2.0)
    second = p / (2.0 * (1.0 - p) / sigma + 2.0 * L * mu / (mu + L))
    alpha = float(min(first.min(), second.min()))
    if not alpha > 0:
        raise InfeasibleStepsize("sigma too large: need sigma < 2/(mu+L)")
    return alpha


def stepsize_subspace(d: int, L: float, xi_norm_max: float, mu: Optional[float] = None) -> float:
    """``min(2/(mu d^2), 1/(4 L d max ||xi||^2))``; ``mu=None`` drops the first term."""
    second = 1.0 / (4.0 * L * d * xi_norm_max)
    if mu is None or mu <= 0:
        return second
    return min(2.0 / (mu * d * d), second)


def td_constant(v, p) -> float:
    """``max_i sqrt(v_i) / p_i``."""
    return float(np.max(np.sqrt(np.asarray(v, dtype=float)) / np.asarray(p, dtype=float)))


@dataclass(frozen=True)
class AsegaParams:
    alpha: float
    beta: float
    tau: float
    mu: float
    sigma: float
    c1: float
    td: float = field(default=0.0)

    def __post_init__(self):
        for name in ("alpha", "beta", "tau", "mu", "sigma", "c1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.tau < 1:
            raise ValueError("tau must be below 1")

    @property
    def rate(self) -> float:
        """Per-iteration contraction ``1 - tau / c1``."""
        return 1.0 - self.tau / self.c1


def asega_params(v, p, mu: float) -> AsegaParams:
    """Accelerated parameters for ESO vector ``v`` and inclusion probabilities ``p``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    p = np.asarray(p, dtype=float)
    td = td_constant(v, p)
    a = (2.0 / 75.0) * mu / td ** 2
    tau = (np.sqrt(4.0 / (9.0 * 5 ** 4) * mu ** 2 / td ** 4 + (8.0 / 75.0) * mu / td ** 2) - a) / 2.0
    alpha = 1.0 / (5.0 * td ** 2)
    beta = 2.0 / (75.0 * tau * td ** 2)
    sigma = 5.0 * beta ** 2
    c1 = max(1.0, np.sqrt(mu) / (td * p.min()))
    return AsegaParams(alpha, beta, float(tau), float(mu), sigma, float(c1), td)


class Stepsize(NamedTuple):
    """Resolved parameters. ``lyapunov`` names the monitored potential."""

    alpha: float
    sigma: float
    lyapunov: str
    rate: Optional[float] = None
    gamma: Optional[float] = None
    G: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StepsizePolicy:
    """How to pick alpha (and the Lyapunov weight sigma) for a run.

    Kinds: ``general`` (optional ``sigma``, optimized when omitted),
    ``simple_uniform``, ``coordinate_nonacc`` (``alpha``, ``sigma``, optional
    ``v``), ``importance_trace``, ``metric_G`` (``G``, optional ``sigma``),
    ``subspace`` and ``manual`` (``alpha``, optional ``sigma``).
    """

    kind: str
    alpha: Optional[float] = None
    sigma: Optional[float] = None
    G: Optional[tuple] = None
    v: Optional[tuple] = None
    use_mu: bool = True

    KINDS = ("general", "simple_uniform", "coordinate_nonacc", "importance_trace",
             "metric_G", "subspace", "manual")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stepsize policy {self.kind!r}")
        if self.kind == "manual" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("manual policy needs alpha > 0")
        if self.kind == "coordinate_nonacc" and (self.alpha is None or self.sigma is None):
            raise ValueError("coordinate_nonacc needs alpha and sigma")
        if self.kind == "metric_G" and self.G is None:
            raise ValueError("metric_G needs G")

    def resolve(self, problem, dist: SketchDistribution, B=None, H=None, basis=None) -> Stepsize:
        """Compute the parameters for ``problem`` and ``dist``, checking every condition."""
        const = problem.constants
        n = problem.n
        Bm = Metric.coerce(B, n)
        mu = const.mu
        kind = self.kind
        if kind == "manual":
            return Stepsize(float(self.alpha), float(self.sigma or 0.0), "general")
        if kind == "simple_uniform":
            if dist.kind != "coordinate" or not np.allclose(dist.p, 1.0 / n, rtol=1e-12, atol=0):
                raise InfeasibleStepsize("simple_uniform needs uniform coordinate sketches")
            if Bm.kind != "identity":
                raise InfeasibleStepsize("simple_uniform needs B = I")
            alpha, sigma = stepsize_simple_uniform(n, const.L, mu)
            return Stepsize(alpha, sigma, "general", 1 - alpha * mu)
        if kind == "general":
            Q = const.Q
            if Q is None:
                raise InfeasibleStepsize("general policy needs the Q matrix")
            EZ = expected_Z(dist, Bm, H)
            C = expected_C(dist, Bm, H)
            if self.sigma is None:
                alpha, sigma = best_sigma_general(Q, Bm, C, EZ, mu, basis)
            else:
                sigma = float(self.sigma)
                alpha = stepsize_general(Q, Bm, C, EZ, mu, sigma, basis)
            return Stepsize(alpha, sigma, "general", 1 - alpha * mu)
        if kind in ("coordinate_nonacc", "importance_trace"):
            if dist.kind not in ("coordinate", "tau_nice", "block") or Bm.kind != "identity":
                raise InfeasibleStepsize(f"{kind} needs index-set sketches with B = I")
            M = const.M
            p = dist.inclusion_probabilities()
            if kind == "importance_trace":
                p_imp, alpha, sigma = importance_trace(M)
                if dist.kind != "coordinate" or not np.allclose(p, p_imp, rtol=1e-9, atol=0):
                    raise InfeasibleStepsize("importance_trace needs p proportional to diag(M)")
            else:
                alpha, sigma = float(self.alpha), float(self.sigma)
            if self.v is not None:
                v = np.asarray(self.v, dtype=float)
            elif dist.kind == "coordinate":
                v = eso_serial(M)
            else:
                raise InfeasibleStepsize("minibatch samplings need an explicit ESO vector v")
            P = None if dist.kind == "coordinate" else probability_matrix(dist)
            gamma = stepsize_coordinate_nonacc(M, p, v, mu, alpha, sigma, P)
            return Stepsize(alpha, sigma, "coordinate", 1 - gamma * mu, gamma)
        if kind == "metric_G":
            if dist.kind != "coordinate" or Bm.kind != "identity":
                raise InfeasibleStepsize("metric_G needs coordinate sketches with B = I")
            G = np.asarray(self.G, dtype=float)
            L, mu_g = g_metric_constants(const.M, G)
            sigma = 1.0 / (2.0 * L) if self.sigma is None else float(self.sigma)
            alpha = stepsize_metric_G(dist.p, L, mu_g, sigma)
            return Stepsize(alpha, sigma, "metric_G", 1 - alpha * mu_g * 2 * L / (mu_g + L), G=G)
        # subspace: fixed vectors in the optimal metric, uniform over d atoms
        if dist.kind == "fixed_vectors":
            d = dist.p.size
            xi = float(np.max(np.sum(dist.vectors ** 2, axis=0)))
        elif dist.kind == "coordinate":
            d, xi = n, 1.0
        else:
            raise InfeasibleStepsize("subspace policy needs fixed-vector or coordinate sketches")
        alpha = stepsize_subspace(d, const.L, xi, mu if self.use_mu else None)
        sigma = min(2.0 / mu, d / (2.0 * const.L * xi)) if self.use_mu else d / (2.0 * const.L * xi)
        return Stepsize(alpha, sigma, "general")
