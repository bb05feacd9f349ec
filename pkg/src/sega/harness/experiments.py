"""Build problems and methods from a validated config and run them."""
from __future__ import annotations

import functools
import io
import os
import subprocess
from typing import Any, Dict, List, NamedTuple, Optional

import numpy as np

from sega.baselines import run_cd, run_pgd, run_rds
from sega.core import Metric
from sega.estimator import optimal_subspace_setup, range_projector
from sega.harness.config import ConfigError, config_hash
from sega.problems import (LeastSquaresProblem, LogisticProblem, QuadraticProblem,
                           load_libsvm, make_least_squares_subspace, make_synthetic,
                           reference_solution)
from sega.prox import Regularizer
from sega.sketch import SketchDistribution, batch_item, make_rng, sample_batch
from sega.solvers import SegaState, Stepsize, StepsizePolicy, run_asega, run_sega, sega_step
from sega.solvers._common import initial_point
from sega.trace import Trace

__all__ = ["RunResult", "build_problem", "build_regularizer", "build_method", "run_experiment",
           "iterate_path", "trajectory_2d", "git_describe"]


class RunResult(NamedTuple):
    method: str
    seed: int
    trace: Trace
    path: Optional[str]


@functools.lru_cache(maxsize=1)
def git_describe() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def build_problem(pc: Dict[str, Any], seed: int):
    """Problem instance; ``problem.seed`` pins the instance, otherwise the run seed is used."""
    pseed = seed if pc["seed"] is None else pc["seed"]
    kind = pc["type"]
    if kind == "synthetic":
        return make_synthetic(pc["spectrum"], pc["n"], seed=pseed, top=pc["top"])
    if kind == "least_squares_subspace":
        if not 1 <= pc["d"] <= pc["n"]:
            raise ConfigError("problem.d", "need 1 <= d <= n")
        return make_least_squares_subspace(pc["n"], pc["d"], seed=pseed)
    if kind in ("logistic", "libsvm"):
        try:
            A, y = load_libsvm(pc["path"], max_rows=pc["max_rows"], seed=pseed)
        except OSError as exc:
            raise ConfigError("problem.path", f"cannot read {pc['path']}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError("problem.path", str(exc)) from None
        return LogisticProblem(A, y, float(pc["mu"]))
    M = np.asarray(pc["M"], dtype=float)
    b = np.asarray(pc["b"], dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or b.shape != (M.shape[0],):
        raise ConfigError("problem.M", "M must be square and match b")
    x0 = None if pc["x0"] is None else np.asarray(pc["x0"], dtype=float)
    try:
        return QuadraticProblem(M, b, x0=x0)
    except ValueError as exc:
        raise ConfigError("problem.M", str(exc)) from None


def build_regularizer(rc: Dict[str, Any], n: int) -> Regularizer:
    kind = rc["kind"]
    if kind == "zero":
        return Regularizer.zero()
    if kind == "ball":
        center = None if rc["center"] is None else np.asarray(rc["center"], dtype=float)
        if center is not None and center.shape != (n,):
            raise ConfigError("regularizer.center", f"expected {n} entries")
        return Regularizer.ball(float(rc["radius"]), center)
    if kind == "l1":
        return Regularizer.l1(float(rc["lam"]))
    lo = -np.inf if rc["lo"] is None else rc["lo"]
    hi = np.inf if rc["hi"] is None else rc["hi"]
    return Regularizer.box(np.broadcast_to(np.asarray(lo, float), (n,)).copy(),
                           np.broadcast_to(np.asarray(hi, float), (n,)).copy())


def _distribution(path: str, sc: Dict[str, Any], problem) -> SketchDistribution:
    n = problem.n
    kind = sc["kind"]
    if kind == "gaussian":
        return SketchDistribution.gaussian(n, sc["b"])
    if kind == "tau_nice":
        if sc["tau"] is None or not 1 <= sc["tau"] <= n:
            raise ConfigError(f"{path}.sketch.tau", "need 1 <= tau <= n")
        return SketchDistribution.tau_nice(n, sc["tau"])
    p = sc["p"]
    if p == "uniform":
        return SketchDistribution.uniform(n)
    if p in ("importance", "sqrt"):
        return SketchDistribution.importance(problem.constants.M, 1.0 if p == "importance" else 0.5)
    try:
        return SketchDistribution.coordinate(np.asarray(p, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"{path}.sketch.p", str(exc)) from None


class Method(NamedTuple):
    dist: Optional[SketchDistribution]
    policy: Any
    B: Metric
    projector: Any


def build_method(path: str, mc: Dict[str, Any], problem) -> Method:
    """Sketch distribution, stepsize policy, metric and projector for one method."""
    n = problem.n
    B = Metric.identity(n)
    if isinstance(mc["metric"], list):
        d = np.asarray(mc["metric"], dtype=float)
        if d.shape != (n,) or np.any(d <= 0):
            raise ConfigError(f"{path}.metric", f"expected {n} positive entries")
        B = Metric.diagonal(d)
    projector = None
    if mc["sketch"]["kind"] == "optimal_subspace":
        if not isinstance(problem, LeastSquaresProblem):
            raise ConfigError(f"{path}.sketch.kind", "optimal_subspace needs a least-squares problem")
        B, dist, _ = optimal_subspace_setup(problem.A)
        projector = range_projector(problem.A, B)
    elif mc["solver"] == "pgd":
        dist = None
    else:
        dist = _distribution(path, mc["sketch"], problem)
    if mc["subspace"] and projector is None:
        if not isinstance(problem, LeastSquaresProblem):
            raise ConfigError(f"{path}.subspace", "subspace projection needs a least-squares problem")
        projector = range_projector(problem.A, B)
    st = mc["stepsize"]
    kind = st["kind"]
    L = problem.constants.L
    if kind is None:
        policy = None
    elif kind == "inverse_L":
        policy = Stepsize((1.0 if st["alpha"] is None else st["alpha"]) / L, 0.0, "general")
    elif kind == "inverse_nL":
        policy = Stepsize((1.0 if st["alpha"] is None else st["alpha"]) / (n * L), 0.0, "general")
    elif kind == "inverse_trace":
        tr = float(np.trace(problem.constants.M))
        policy = Stepsize((1.0 if st["alpha"] is None else st["alpha"]) / tr, 0.0, "general")
    else:
        G = None if st["G"] is None else tuple(float(v) for v in st["G"])
        v = None if st["v"] is None else tuple(float(x) for x in st["v"])
        try:
            policy = StepsizePolicy(kind, st["alpha"], st["sigma"], G, v, st["use_mu"])
        except ValueError as exc:
            raise ConfigError(f"{path}.stepsize", str(exc)) from None
    return Method(dist, policy, B, projector)


def _alpha_of(path, policy, default=None):
    if policy is None:
        return default
    if isinstance(policy, Stepsize):
        return policy.alpha
    if policy.kind == "manual":
        return policy.alpha
    raise ConfigError(f"{path}.stepsize.kind", f"baselines take inverse_L, inverse_nL, inverse_trace or manual, not {policy.kind}")


def _run_one(cfg, j, mc, seed, problem, R, ref):
    path = f"method[{j}]"
    meth = build_method(path, mc, problem)
    run = cfg["run"]
    K = run["K"] if mc["K"] is None else mc["K"]
    common = dict(K=K, seed=seed, record_every=run["record_every"],
                  target_gap=run["target_gap"], reference=ref)
    meta = {"method": mc["name"], "problem": cfg["problem"]["type"], "config_hash": config_hash(cfg),
            "git": git_describe(), "L": repr(problem.constants.L), "mu": repr(problem.constants.mu)}
    solver = mc["solver"]
    if solver == "sega":
        if meth.policy is None:
            raise ConfigError(f"{path}.stepsize.kind", "required for sega")
        return run_sega(problem, meth.dist, meth.policy, R, meth.B, mode=mc["mode"],
                        projector=meth.projector, oracle=mc["oracle"], eps_rel=mc["eps_rel"],
                        metadata=meta, **common)
    if R.kind != "zero" and solver in ("asega", "rds"):
        raise ConfigError("regularizer.kind", f"{solver} supports R = zero only")
    if solver == "asega":
        return run_asega(problem, meth.dist, None, metadata=meta, **common)
    if solver == "cd":
        if not R.separable:
            raise ConfigError("regularizer.kind", "cd needs a separable regularizer; "
                              "use solver = 'sega' with mode = 'cd' for projected CD")
        alpha = _alpha_of(path, meth.policy, 1.0 / (problem.n * problem.constants.L))
        return run_cd(problem, meth.dist, alpha, R=R, metadata=meta, **common)
    if solver == "rds":
        return run_rds(problem, meth.dist, _alpha_of(path, meth.policy), metadata=meta, **common)
    common.pop("seed")
    meta["seed"] = seed
    return run_pgd(problem, R, meth.B, alpha=_alpha_of(path, meth.policy), X=cfg["cost"]["X"],
                   metadata=meta, **common)


def run_experiment(cfg: Dict[str, Any], write: bool = True) -> List[RunResult]:
    """Run every method for every seed; CSVs go to ``output.dir/<name>_<method>_seed<k>.csv``."""
    out: List[RunResult] = []
    outdir = cfg["output"]["dir"]
    if write:
        os.makedirs(outdir, exist_ok=True)
    for seed in cfg["run"]["seeds"]:
        problem = build_problem(cfg["problem"], seed)
        R = build_regularizer(cfg["regularizer"], problem.n)
        ref = reference_solution(problem, R)
        for j, mc in enumerate(cfg["method"]):
            trace = _run_one(cfg, j, mc, seed, problem, R, ref)
            path = None
            if write:
                path = os.path.join(outdir, f"{cfg['run']['name']}_{mc['name']}_seed{seed}.csv")
                trace.to_csv(path)
            out.append(RunResult(mc["name"], seed, trace, path))
        if write and cfg["output"]["trajectory"]:
            trajectory_2d(cfg, seed, os.path.join(outdir, f"{cfg['run']['name']}_path_seed{seed}.csv"))
    return out


def iterate_path(problem, dist, alpha: float, R=None, B=None, K: int = 100, seed=0, *,
                 mode: str = "sega", x0=None, h0=None) -> np.ndarray:
    """Iterates ``x^0 .. x^K`` (shape (K+1, n)); ``mode='cd'`` gives (projected) coordinate descent."""
    R = Regularizer.zero() if R is None else R
    Bm = Metric.coerce(B, problem.n)
    x = initial_point(problem, R, Bm, x0)
    h = np.zeros(problem.n) if h0 is None else np.array(h0, dtype=float)
    rng = make_rng(seed)
    batch = sample_batch(dist, rng, K)
    path = [x.copy()]
    state = SegaState(x, h)
    for t in range(K):
        smp = batch_item(dist, batch, t, Bm)
        lam = problem.sketched_gradient(smp, state.x)
        state = sega_step(state, smp, lam, alpha, R, Bm, mode=mode)
        path.append(state.x.copy())
    return np.array(path)


def trajectory_2d(cfg: Dict[str, Any], seed: int = 0, out_path: Optional[str] = None) -> str:
    """CSV of ``method,k,x1,x2`` rows for every method of a two-dimensional config."""
    problem = build_problem(cfg["problem"], seed)
    if problem.n != 2:
        raise ConfigError("problem.n", f"trajectories need n = 2, got {problem.n}")
    R = build_regularizer(cfg["regularizer"], 2)
    buf = io.StringIO()
    buf.write(f"# sega-path v1\n# seed: {seed}\n# config_hash: {config_hash(cfg)}\nmethod,k,x1,x2\n")
    for j, mc in enumerate(cfg["method"]):
        path = f"method[{j}]"
        if mc["solver"] not in ("sega", "cd"):
            continue
        meth = build_method(path, mc, problem)
        if isinstance(meth.policy, Stepsize):
            alpha = meth.policy.alpha
        elif meth.policy is None:
            raise ConfigError(f"{path}.stepsize.kind", "required")
        else:
            alpha = meth.policy.resolve(problem, meth.dist, meth.B).alpha
        mode = "cd" if mc["solver"] == "cd" else mc["mode"]
        xs = iterate_path(problem, meth.dist, alpha, R, meth.B, cfg["run"]["K"], seed, mode=mode)
        for k, x in enumerate(xs):
            buf.write(f"{mc['name']},{k},{x[0]:.17g},{x[1]:.17g}\n")
    text = buf.getvalue()
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
