"""Comparison methods: projected gradient, coordinate descent, random direct search."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from sega import _kernels
from sega.core import Metric
from sega.problems import Problem
from sega.prox import Regularizer, prox
from sega.sketch import SketchDistribution, batch_item, make_rng, sample_batch
from sega.solvers._common import (CHUNK, Recorder, chunks, initial_point, kernel_path_name,
                                  prox_kernel_args)
from sega.trace import Trace

__all__ = ["pgd_step", "cd_step", "rds_step", "run_pgd", "run_cd", "run_rds"]


def pgd_step(x, grad, alpha: float, R: Optional[Regularizer] = None, B=None) -> np.ndarray:
    """``prox_{alpha R}(x - alpha grad)``."""
    x = np.asarray(x, dtype=float)
    R = Regularizer.zero() if R is None else R
    return prox(R, Metric.coerce(B, x.shape[0]), alpha, x - alpha * np.asarray(grad, dtype=float))


def cd_step(x, i: int, partial: float, alpha: float, p, R: Optional[Regularizer] = None) -> np.ndarray:
    """``x - (alpha / p_i) partial e_i`` followed by the prox of a separable R."""
    R = Regularizer.zero() if R is None else R
    if not R.separable:
        raise ValueError("coordinate descent needs a separable regularizer")
    x = np.array(x, dtype=float)
    p = np.asarray(p, dtype=float)
    # same operation order as the unbiased step with h = 0
    x[i] = x[i] - alpha * ((1.0 / p[i]) * partial)
    if R.kind != "zero":
        x = prox(R, Metric.identity(x.shape[0]), alpha, x)
    return x


def _rds_move(f: Callable, x, s, alpha: float, fx: float):
    xp = x + alpha * s
    xm = x - alpha * s
    fp = f(xp)
    fm = f(xm)
    if fp < fx and fp <= fm:
        return xp, fp
    if fm < fx:
        return xm, fm
    return x, fx


def rds_step(f: Callable, x, s, alpha: float, fx: Optional[float] = None) -> np.ndarray:
    """Best of ``x + alpha s``, ``x - alpha s`` and ``x``; ties keep ``x``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    fx = f(x) if fx is None else fx
    return _rds_move(f, x, s, alpha, fx)[0]


def run_pgd(problem: Problem, R: Optional[Regularizer] = None, B=None, K: int = 100,
            alpha: Optional[float] = None, X: float = 0.0, *, x0=None, record_every: int = 1,
            target_gap: Optional[float] = None, reference=None, timing: bool = False,
            metadata: Optional[dict] = None) -> Trace:
    """Projected gradient descent, default stepsize ``1 / lmax(M)``.

    Each iteration costs n oracle calls, plus ``X * n`` cost units for the
    linear solve that assembles the full gradient.
    """
    n = problem.n
    Bm = Metric.coerce(B, n)
    R = Regularizer.zero() if R is None else R
    if alpha is None:
        alpha = 1.0 / problem.constants.L
    x = initial_point(problem, R, Bm, x0)
    meta = {"solver": "pgd", "n": n, "K": K, "alpha": repr(alpha), "X": repr(float(X))}
    meta.update(metadata or {})
    rec = Recorder(problem, R, Bm, reference, None, timing, meta)
    calls, cost = 0, 0.0
    gap = rec.record(0, 0, 0.0, x)
    k = 0
    for m in chunks(K, record_every):
        if target_gap is not None and gap <= target_gap:
            break
        for _ in range(m):
            x = pgd_step(x, problem.full_gradient(x), alpha, R, Bm)
            calls += n
            cost += n + X * n
        k += m
        gap = rec.record(k, calls, cost, x)
    return rec.trace


def run_cd(problem: Problem, dist: SketchDistribution, alpha: float, K: int = 1000, seed=0, *,
           R: Optional[Regularizer] = None, x0=None, record_every: int = 1,
           target_gap: Optional[float] = None, reference=None,
           use_kernels: Optional[bool] = None, timing: bool = False,
           metadata: Optional[dict] = None) -> Trace:
    """Randomized coordinate descent ``x - (alpha / p_i) d_i f(x) e_i``."""
    if dist.kind != "coordinate":
        raise ValueError("coordinate descent needs coordinate sketches")
    n = problem.n
    R = Regularizer.zero() if R is None else R
    if not R.separable:
        raise ValueError("coordinate descent needs a separable regularizer")
    Bm = Metric.identity(n)
    x = initial_point(problem, R, Bm, x0)
    qf = problem.quadratic_form()
    pargs = prox_kernel_args(R, Bm, alpha, n)
    use = qf is not None and pargs is not None and use_kernels is not False
    if use_kernels and not use:
        raise ValueError("no compiled kernel for this configuration")
    meta = {"solver": "cd", "sketch": dist.kind, "n": n, "K": K, "seed": seed,
            "alpha": repr(alpha), "path": kernel_path_name() if use else "python"}
    meta.update(metadata or {})
    rec = Recorder(problem, R, Bm, reference, None, timing, meta)
    rng = make_rng(seed)
    p = dist.p
    theta = np.ascontiguousarray(dist.atom_theta, dtype=float)
    h = np.zeros(n)
    calls = 0
    k = 0
    gap = rec.record(0, 0, 0.0, x)
    for m in chunks(K, record_every):
        if target_gap is not None and gap <= target_gap:
            break
        done = 0
        while done < m:
            mm = min(m - done, CHUNK)
            batch = sample_batch(dist, rng, mm)
            if use:
                _kernels.sega_coordinate(x, h, qf[0], qf[1], float(qf[2]), batch.atoms, theta,
                                         alpha, _kernels.MODE_CD, False, 0.0, *pargs)
            else:
                for t in range(mm):
                    i = int(batch.atoms[t])
                    x = cd_step(x, i, problem.partial(i, x), alpha, p, R)
            calls += mm
            done += mm
        k += m
        gap = rec.record(k, calls, float(calls), x)
    return rec.trace


def run_rds(problem: Problem, dist: SketchDistribution, alpha: Optional[float] = None,
            K: int = 1000, seed=0, *, x0=None, record_every: int = 1,
            target_gap: Optional[float] = None, reference=None,
            use_kernels: Optional[bool] = None, timing: bool = False,
            metadata: Optional[dict] = None) -> Trace:
    """Random direct search along coordinate or Gaussian directions.

    Default stepsize ``1 / (L n)`` (an assumption: no formula is known for
    the theory-supported choice). Each iteration costs two value calls.
    """
    if dist.kind not in ("coordinate", "gaussian") or (dist.kind == "gaussian" and dist.b != 1):
        raise ValueError("direct search needs coordinate or single Gaussian directions")
    n = problem.n
    if alpha is None:
        alpha = 1.0 / (problem.constants.L * n)
    Bm = Metric.identity(n)
    x = initial_point(problem, Regularizer.zero(), Bm, x0)
    qf = problem.quadratic_form()
    use = qf is not None and use_kernels is not False
    if use_kernels and not use:
        raise ValueError("no compiled kernel for this configuration")
    meta = {"solver": "rds", "sketch": dist.kind, "n": n, "K": K, "seed": seed,
            "alpha": repr(alpha), "alpha_rule": "assumed 1/(L n)",
            "path": kernel_path_name() if use else "python"}
    meta.update(metadata or {})
    rec = Recorder(problem, Regularizer.zero(), Bm, reference, None, timing, meta)
    rng = make_rng(seed)
    fx = problem.value(x)
    calls = 0
    k = 0
    gap = rec.record(0, 0, 0.0, x)
    for m in chunks(K, record_every):
        if target_gap is not None and gap <= target_gap:
            break
        done = 0
        while done < m:
            mm = min(m - done, CHUNK)
            batch = sample_batch(dist, rng, mm)
            if use:
                M, c, const = qf[0], qf[1], float(qf[2])
                if dist.kind == "coordinate":
                    fx = _kernels.rds_coordinate(x, fx, M, c, const, batch.atoms, alpha)
                else:
                    fx = _kernels.rds_directions(x, fx, M, c, const,
                                                 np.ascontiguousarray(batch.normals[:, :, 0]), alpha)
            else:
                for t in range(mm):
                    s = batch_item(dist, batch, t, Bm).dense()[:, 0]
                    x_new, f_new = _rds_move(problem.value, x, s, alpha, fx)
                    assert f_new <= fx
                    x, fx = x_new, f_new
            calls += 2 * mm
            done += mm
        k += m
        gap = rec.record(k, calls, float(calls), x)
    return rec.trace
