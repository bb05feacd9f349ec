"""Accelerated SEGA for smooth, strongly convex objectives with index-set sketches."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from sega import _kernels
from sega.core import Metric
from sega.problems import Problem
from sega.prox import Regularizer
from sega.sketch import SketchDistribution, SketchSample, batch_item, eso_serial, make_rng, sample_batch
from sega.solvers._common import CHUNK, Recorder, chunks, initial_point, kernel_path_name
from sega.solvers.lyapunov import lyapunov_asega
from sega.solvers.stepsize import AsegaParams, asega_params
from sega.trace import Trace

__all__ = ["AsegaState", "asega_query_point", "asega_step", "run_asega"]


@dataclass(frozen=True, eq=False)
class AsegaState:
    y: np.ndarray
    z: np.ndarray
    h: np.ndarray
    k: int = 0


def asega_query_point(state: AsegaState, params: AsegaParams) -> np.ndarray:
    """Point where the sketched gradient is queried: ``(1 - tau) y + tau z``."""
    return (1.0 - params.tau) * state.y + params.tau * state.z


def asega_step(state: AsegaState, sample: SketchSample, lam, params: AsegaParams, B=None, *,
               p, R: Optional[Regularizer] = None) -> AsegaState:
    """One accelerated iteration; ``lam`` is the sketched gradient at the query point.

    ``p`` holds the inclusion probabilities of the sampling. Only R = 0 is
    supported.
    """
    if R is not None and R.kind != "zero":
        raise ValueError("the accelerated method supports R = 0 only")
    n = state.y.shape[0]
    if Metric.coerce(B, n).kind != "identity":
        raise ValueError("the accelerated method supports B = I only")
    if sample.indices is None:
        raise ValueError("the accelerated method needs index-set sketches")
    p = np.asarray(p, dtype=float)
    x = asega_query_point(state, params)
    idx = np.asarray(sample.indices)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    h = np.array(state.h, dtype=float)
    g = h.copy()
    g[idx] += (lam - h[idx]) / p[idx]
    h[idx] = lam
    y = x - params.alpha * (g / p)
    bm = params.beta * params.mu
    z = (state.z + bm * x - params.beta * g) / (1.0 + bm)
    return AsegaState(y, z, h, state.k + 1)


def run_asega(problem: Problem, dist: SketchDistribution, params: Optional[AsegaParams] = None,
              K: int = 1000, seed=0, *, x0=None, h0=None, v=None, record_every: int = 1,
              target_gap: Optional[float] = None, reference=None,
              use_kernels: Optional[bool] = None, timing: bool = False,
              metadata: Optional[dict] = None) -> Trace:
    """Run the accelerated method; records ``f(y) - f*`` and its potential.

    When ``params`` is omitted they are derived from the ESO vector ``v``
    (``diag(M)`` for serial sampling) and the inclusion probabilities.
    """
    if dist.kind not in ("coordinate", "tau_nice", "block"):
        raise ValueError("the accelerated method needs index-set sketches")
    n = problem.n
    p = dist.inclusion_probabilities()
    if params is None:
        if v is None:
            if dist.kind != "coordinate":
                raise ValueError("minibatch samplings need an explicit ESO vector v")
            v = eso_serial(problem.constants.M)
        params = asega_params(v, p, problem.constants.mu)
    Bm = Metric.identity(n)
    y = initial_point(problem, Regularizer.zero(), Bm, x0)
    z = y.copy()
    h = np.zeros(n) if h0 is None else np.array(h0, dtype=float)

    qf = problem.quadratic_form()
    use = qf is not None and dist.kind == "coordinate" and use_kernels is not False
    if use_kernels and not use:
        raise ValueError("no compiled kernel for this configuration")
    meta = {"solver": "asega", "sketch": dist.kind, "n": n, "K": K, "seed": seed,
            "alpha": repr(params.alpha), "beta": repr(params.beta), "tau": repr(params.tau),
            "sigma": repr(params.sigma), "lyapunov": "asega",
            "path": kernel_path_name() if use else "python"}
    meta.update(metadata or {})
    rec = Recorder(problem, Regularizer.zero(), Bm, reference, None, timing, meta)
    ref = rec.ref
    rec.lyapunov = lambda yy, st, gap: lyapunov_asega(gap, 0.0, st[0], ref.x_star,
                                                     st[1] - ref.grad_star, p, params)
    rng = make_rng(seed)
    calls = 0
    k = 0
    gap = rec.record(0, 0, 0.0, y, (z, h))
    if target_gap is not None and gap <= target_gap:
        return rec.trace
    if use:
        M, c = np.ascontiguousarray(qf[0]), np.ascontiguousarray(qf[1])
        xbuf = np.empty(n)
    for m in chunks(K, record_every):
        done = 0
        while done < m:
            mm = min(m - done, CHUNK)
            batch = sample_batch(dist, rng, mm)
            if use:
                _kernels.asega_coordinate(xbuf, y, z, h, M, c, batch.atoms, p, params.alpha,
                                          params.beta, params.tau, params.mu)
                calls += mm
            else:
                state = AsegaState(y, z, h, k)
                for t in range(mm):
                    smp = batch_item(dist, batch, t, Bm)
                    lam = problem.sketched_gradient(smp, asega_query_point(state, params))
                    calls += smp.b
                    state = asega_step(state, smp, lam, params, p=p)
                y, z, h = state.y, state.z, state.h
            done += mm
        k += m
        gap = rec.record(k, calls, float(calls), y, (z, h))
        if target_gap is not None and gap <= target_gap:
            break
    return rec.trace
