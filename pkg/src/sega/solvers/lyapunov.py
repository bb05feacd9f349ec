"""Lyapunov potentials monitored by the solvers."""
from __future__ import annotations

import numpy as np

from sega.core import Metric

__all__ = ["lyapunov_general", "lyapunov_coordinate", "lyapunov_asega", "lyapunov_metric_G"]


def lyapunov_general(x, h, x_star, grad_star, B, sigma: float, alpha: float) -> float:
    """``||x - x*||_B^2 + sigma alpha ||h - grad f(x*)||_B^2``."""
    x = np.asarray(x, dtype=float)
    Bm = Metric.coerce(B, x.shape[0])
    out = Bm.norm_sq(x - x_star)
    if sigma:
        out += sigma * alpha * Bm.norm_sq(np.asarray(h) - grad_star)
    return out


def lyapunov_coordinate(fx: float, fstar: float, h, p, sigma: float) -> float:
    """``f(x) - f* + sigma ||h||^2_{diag(p)^-1}``."""
    h = np.asarray(h, dtype=float)
    return float(fx - fstar + sigma * np.sum(h * h / np.asarray(p, dtype=float)))


def lyapunov_asega(fy: float, fstar: float, z, x_star, h, p, params) -> float:
    """Potential of the accelerated method.

    ``(2/75) TD^-2 / tau^2 (f(y) - f*) + (1 + beta mu)/2 ||z - x*||^2
    + sigma ||h||^2_{diag(p)^-2}``.
    """
    z = np.asarray(z, dtype=float)
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    w = (2.0 / 75.0) / (params.td ** 2 * params.tau ** 2)
    d = z - x_star
    return float(w * (fy - fstar) + 0.5 * (1.0 + params.beta * params.mu) * (d @ d)
                 + params.sigma * np.sum(h * h / (p * p)))


def lyapunov_metric_G(x, h, x_star, G, p, sigma: float, alpha: float) -> float:
    """``||x - x*||_G^2 + sigma alpha ||h||^2_{diag(1/(G_i p_i))}``."""
    x = np.asarray(x, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    d = x - x_star
    return float(d @ (G * d) + sigma * alpha * np.sum(h * h / (G * np.asarray(p))))
