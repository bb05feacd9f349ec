"""The sketched gradient method and its variants (biased, CD reduction, subspace)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from sega import _kernels
from sega.core import Metric
from sega.estimator import (RangeProjector, sketch_and_project, subspace_sketch_and_project,
                            unbiased_estimate)
from sega.problems import Problem, zeroth_order_sketch
from sega.prox import Regularizer, prox
from sega.sketch import (SketchDistribution, SketchSample, batch_item, make_rng,
                         sample_batch, theta_for)
from sega.solvers._common import (CHUNK, Recorder, chunks, initial_point, kernel_path_name,
                                  make_lyapunov, prox_kernel_args)
from sega.solvers.stepsize import Stepsize, StepsizePolicy
from sega.trace import Trace

__all__ = ["SegaState", "sega_step", "run_sega", "MODES"]

MODES = ("sega", "bias", "cd")
_MODE_CODE = {"sega": _kernels.MODE_SEGA, "bias": _kernels.MODE_BIAS, "cd": _kernels.MODE_CD}


@dataclass(frozen=True, eq=False)
class SegaState:
    x: np.ndarray
    h: np.ndarray
    k: int = 0


def sega_step(state: SegaState, sample: SketchSample, lam, alpha: float,
              R: Optional[Regularizer] = None, B=None, precond_G=None, *,
              mode: str = "sega", projector: Optional[RangeProjector] = None,
              theta: Optional[float] = None) -> SegaState:
    """One iteration: learn ``h``, form ``g`` and take a proximal step.

    Parameters
    ----------
    state : SegaState
    sample : SketchSample
        Sketch drawn at this iteration; ``sample.theta`` is used unless
        ``theta`` is given.
    lam : array
        Sketched gradient ``S^T grad f(x)`` at ``state.x``.
    alpha : float
    R : Regularizer, optional
    B : Metric, optional
    precond_G : array, optional
        Diagonal G; the step becomes ``x - alpha G^{-1} g`` (R must be zero).
    mode : {"sega", "bias", "cd"}
        ``bias`` steps along ``h+`` instead of ``g``; ``cd`` keeps ``h = 0``.
    projector : RangeProjector, optional
        Keeps ``h`` in ``Range(A^T)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    R = Regularizer.zero() if R is None else R
    x = np.asarray(state.x, dtype=float)
    Bm = Metric.coerce(B, x.shape[0])
    h = np.zeros_like(x) if mode == "cd" else np.asarray(state.h, dtype=float)
    th = sample.theta if theta is None else theta
    if projector is None:
        h_plus = sketch_and_project(h, sample, lam, Bm)
    else:
        h_plus = subspace_sketch_and_project(h, sample, lam, projector)
    g = h_plus if mode == "bias" else unbiased_estimate(h, h_plus, th)
    if precond_G is not None:
        if R.kind != "zero":
            raise ValueError("the G-preconditioned step supports R = 0 only")
        x_new = x - alpha * (g / np.asarray(precond_G, dtype=float))
    else:
        x_new = prox(R, Bm, alpha, x - alpha * g)
    h_new = h if mode == "cd" else h_plus
    return SegaState(x_new, h_new, state.k + 1)


def _rank_one_setup(dist, Bm, projector, n):
    """Sketch vectors V (m, n), update directions U and thetas for rank-one kernels."""
    if dist.kind == "coordinate":
        V = np.eye(n)
    else:
        V = np.ascontiguousarray(dist.vectors.T)
    W = Bm.solve(V.T)
    if projector is not None:
        W = projector.H @ W
    w = np.einsum("ij,ji->i", V, W)
    scale = np.max(np.abs(w)) if w.size else 1.0
    ok = np.abs(w) > 1e-12 * max(scale, 1e-300)
    U = np.zeros_like(V)
    U[ok] = (W[:, ok] / w[ok]).T
    if dist.kind == "coordinate":
        theta = np.where(ok, np.diag(projector.H) / dist.p, 0.0) if projector is not None else 1.0 / dist.p
    else:
        theta = np.array(dist.atom_theta, dtype=float)
    return V, np.ascontiguousarray(U), theta


def _kernel_plan(problem, dist, Bm, R, alpha, projector, precond_G):
    """Decide whether a compiled kernel applies; returns a callable or None."""
    qf = problem.quadratic_form()
    if qf is None or precond_G is not None:
        return None
    n = problem.n
    pargs = prox_kernel_args(R, Bm, alpha, n)
    if pargs is None:
        return None
    M, c, const = (np.ascontiguousarray(qf[0]), np.ascontiguousarray(qf[1]), float(qf[2]))
    if dist.kind == "coordinate" and projector is None and Bm.is_diagonal:
        theta = np.ascontiguousarray(dist.atom_theta, dtype=float)

        def run(x, h, batch, mode, zeroth, eps_rel):
            _kernels.sega_coordinate(x, h, M, c, const, batch.atoms, theta, alpha, mode,
                                     zeroth, eps_rel, *pargs)
        return run
    if dist.kind == "gaussian" and dist.b == 1 and projector is None and Bm.scale() is not None:
        theta = float(dist.n)

        def run(x, h, batch, mode, zeroth, eps_rel):
            _kernels.sega_gaussian(x, h, M, c, const, batch.normals[:, :, 0], theta, alpha,
                                   mode, zeroth, eps_rel, *pargs)
        return run
    if dist.kind in ("fixed_vectors", "coordinate") and (dist.kind == "fixed_vectors" or projector is not None):
        if dist.kind == "coordinate" and not Bm.is_diagonal:
            return None
        V, U, theta = _rank_one_setup(dist, Bm, projector, n)
        VM = np.ascontiguousarray(V @ M)
        Vc = V @ c

        def run(x, h, batch, mode, zeroth, eps_rel):
            _kernels.sega_rank_one(x, h, M, c, const, V, VM, Vc, U, batch.atoms, theta, alpha,
                                   mode, zeroth, eps_rel, *pargs)
        return run
    return None


def run_sega(problem: Problem, dist: SketchDistribution,
             policy: Union[StepsizePolicy, Stepsize, float],
             R: Optional[Regularizer] = None, B=None, K: int = 1000, seed=0, *,
             x0=None, h0=None, mode: str = "sega", projector: Optional[RangeProjector] = None,
             oracle: str = "first", eps_rel: float = 1e-6, record_every: int = 1,
             target_gap: Optional[float] = None, reference=None,
             use_kernels: Optional[bool] = None, timing: bool = False,
             metadata: Optional[dict] = None) -> Trace:
    """Run K iterations and return the trace (rows at k = 0, record_every, ..., K).

    ``policy`` may be a :class:`StepsizePolicy`, an already resolved
    :class:`Stepsize`, or a bare stepsize. ``oracle="zeroth"`` replaces
    the sketched gradient by forward differences of function values.
    ``use_kernels=None`` picks the compiled path whenever it applies.
    The run stops early at a record point once ``f_gap <= target_gap``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if oracle not in ("first", "zeroth"):
        raise ValueError("oracle must be 'first' or 'zeroth'")
    n = problem.n
    Bm = Metric.coerce(B, n)
    R = Regularizer.zero() if R is None else R
    H = None if projector is None else projector.H
    if isinstance(policy, (int, float)):
        step = Stepsize(float(policy), 0.0, "general")
    elif isinstance(policy, Stepsize):
        step = policy
    else:
        basis = None if projector is None else scipy.linalg.orth(projector.A.T)
        step = policy.resolve(problem, dist, Bm, H, basis)
    alpha = step.alpha
    precond_G = step.G
    x = initial_point(problem, R, Bm, x0)
    h = np.zeros(n) if h0 is None else np.array(h0, dtype=float)
    if projector is not None:
        h = projector.project(h)
    if mode == "cd":
        h = np.zeros(n)

    plan = None
    if use_kernels is not False:
        plan = _kernel_plan(problem, dist, Bm, R, alpha, projector, precond_G)
        if plan is None and use_kernels:
            raise ValueError("no compiled kernel for this configuration")
    meta = {"solver": f"sega-{mode}", "sketch": dist.kind, "n": n, "K": K, "seed": seed,
            "alpha": repr(alpha), "sigma": repr(step.sigma), "lyapunov": step.lyapunov,
            "oracle": oracle, "path": kernel_path_name() if plan else "python"}
    meta.update(metadata or {})
    p = dist.inclusion_probabilities() if step.lyapunov in ("coordinate", "metric_G") else None
    rec = Recorder(problem, R, Bm, reference, None, timing, meta)
    rec.lyapunov = make_lyapunov(step, Bm, rec.ref, p)

    rng = make_rng(seed)
    calls = 0
    k = 0
    gap = rec.record(0, 0, 0.0, x, h)
    if target_gap is not None and gap <= target_gap:
        return rec.trace
    code = _MODE_CODE[mode]
    zeroth = oracle == "zeroth"
    for m in chunks(K, record_every):
        done = 0
        while done < m:
            mm = min(m - done, CHUNK)
            batch = sample_batch(dist, rng, mm)
            if plan is not None:
                plan(x, h, batch, code, zeroth, eps_rel)
                calls += mm * (2 if zeroth else 1)
            else:
                state = SegaState(x, h, k)
                for t in range(mm):
                    smp = batch_item(dist, batch, t, Bm)
                    th = theta_for(dist, smp, Bm, H) if (H is not None and dist.kind == "coordinate") else smp.theta
                    if zeroth:
                        eps = eps_rel * (1.0 + np.linalg.norm(state.x))
                        lam = zeroth_order_sketch(problem.value, state.x, smp, eps)
                        calls += smp.b + 1
                    else:
                        lam = problem.sketched_gradient(smp, state.x)
                        calls += smp.b
                    state = sega_step(state, smp, lam, alpha, R, Bm, precond_G, mode=mode,
                                      projector=projector, theta=th)
                x, h = state.x, state.h
            done += mm
        k += m
        gap = rec.record(k, calls, float(calls), x, h)
        if target_gap is not None and gap <= target_gap:
            break
    return rec.trace
