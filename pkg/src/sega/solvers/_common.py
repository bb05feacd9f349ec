"""Shared run plumbing: initial points, metric recording, kernel arguments."""
from __future__ import annotations

import time

import numpy as np

from sega import _kernels
from sega._jit import NUMBA_ENABLED
from sega.core import Metric
from sega.problems import reference_solution
from sega.prox import Regularizer, prox
from sega.solvers.lyapunov import lyapunov_coordinate, lyapunov_general, lyapunov_metric_G
from sega.trace import Trace

CHUNK = 4096


def kernel_path_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def initial_point(problem, R, B, x0=None) -> np.ndarray:
    """Starting point, projected onto the domain of an indicator regularizer."""
    if x0 is None:
        x0 = problem.x0 if problem.x0 is not None else np.zeros(problem.n)
    x = np.array(x0, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.n},)")
    if R.is_indicator:
        x = prox(R, B, 1.0, x)
    return x


def prox_kernel_args(R: Regularizer, Bm: Metric, alpha: float, n: int):
    """Arguments for :func:`sega._kernels.prox_inplace`, or None when unsupported."""
    zeros = np.zeros(n)
    if R.kind == "zero":
        return (0, zeros, 1.0, zeros, zeros, zeros)
    if not Bm.is_diagonal:
        return None
    if R.kind == "ball":
        if Bm.scale() is None:
            return None
        c = zeros if R.center is None else np.asarray(R.center, dtype=float)
        return (1, c, float(R.radius), zeros, zeros, zeros)
    if R.kind == "l1":
        return (2, zeros, 1.0, alpha * R.lam / Bm.diag(), zeros, zeros)
    if R.kind == "box":
        lo = np.broadcast_to(R.lo, (n,)).astype(float)
        hi = np.broadcast_to(R.hi, (n,)).astype(float)
        return (3, zeros, 1.0, zeros, lo, hi)
    return None


class Recorder:
    """Computes trace rows from the current iterate."""

    def __init__(self, problem, R, Bm, reference, lyapunov=None, timing=False,
                 metadata=None, extra_columns=()):
        self.problem = problem
        self.R = R
        self.Bm = Bm
        self.ref = reference_solution(problem, R) if reference is None else reference
        self.lyapunov = lyapunov
        self.trace = Trace(metadata, timing=timing, extra_columns=extra_columns)
        self.timing = timing
        self.t0 = time.perf_counter_ns()

    def gap(self, x) -> float:
        fr = 0.0 if self.R.is_indicator else self.R.value(x)
        return self.problem.value(x) + fr - self.ref.f_star

    def record(self, k, calls, cost, x, h=None, **extra):
        gap = self.gap(x)
        row = dict(k=k, oracle_calls=calls, cost_units=cost, f_gap=gap,
                   dist_sq_B=self.Bm.norm_sq(x - self.ref.x_star), **extra)
        if self.lyapunov is not None:
            row["lyapunov"] = self.lyapunov(x, h, gap)
        if self.timing:
            row["wall_ns"] = time.perf_counter_ns() - self.t0
        self.trace.append(**row)
        return gap


def make_lyapunov(step, Bm, ref, p=None):
    """Callable ``(x, h, gap) -> value`` for the potential named by ``step.lyapunov``."""
    kind = step.lyapunov
    if kind == "general":
        return lambda x, h, gap: lyapunov_general(x, h, ref.x_star, ref.grad_star, Bm,
                                                  step.sigma, step.alpha)
    if kind == "coordinate":
        return lambda x, h, gap: lyapunov_coordinate(gap, 0.0, np.asarray(h) - ref.grad_star,
                                                     p, step.sigma)
    if kind == "metric_G":
        return lambda x, h, gap: lyapunov_metric_G(x, np.asarray(h) - ref.grad_star, ref.x_star,
                                                   step.G, p, step.sigma, step.alpha)
    return None


def chunks(K: int, record_every: int):
    """Yield block lengths so that records fall on multiples of ``record_every`` and at K."""
    k = 0
    while k < K:
        m = min(record_every - (k % record_every), K - k)
        yield m
        k += m


__all__ = ["initial_point", "prox_kernel_args", "Recorder", "make_lyapunov", "chunks",
           "kernel_path_name", "CHUNK", "_kernels"]
