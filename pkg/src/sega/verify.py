"""Invariant suites run by ``sega verify``.

Each check is small enough to finish in a few seconds and returns a
:class:`CheckResult`; the CLI exits with status 3 if any of them fails.
"""
from __future__ import annotations

from typing import Callable, List, NamedTuple

import numpy as np

from sega.baselines import run_cd, run_rds
from sega.core import Metric
from sega.estimator import sketch_and_project
from sega.problems import make_synthetic, reference_solution
from sega.prox import Regularizer
from sega.sketch import (SketchDistribution, batch_item, expected_theta_Z, make_rng,
                         projector_Z, sample_batch)
from sega.solvers import (SegaState, StepsizePolicy, expected_one_step_contraction,
                          lyapunov_general, run_sega, sega_step)
from sega.trace import Trace

__all__ = ["CheckResult", "CHECKS", "run_checks", "random_spd", "random_dists"]


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * np.geomspace(1.0, cond, n)) @ Q.T


def random_dists(rng, n):
    """A coordinate, a block and a fixed-vector distribution on R^n, plus the metric each is unbiased for."""
    p = rng.random(n) + 0.1
    coord = SketchDistribution.coordinate(p / p.sum())
    sets = [[i] for i in range(n)] + [[i, (i + 1) % n] for i in range(n)]
    q = rng.random(len(sets)) + 0.1
    block = SketchDistribution.block(sets, q / q.sum(), n)
    B = random_spd(rng, n)
    w, V = np.linalg.eigh(B)
    W = V / np.sqrt(w)  # B-orthonormal columns
    r = rng.random(n) + 0.1
    fixed = SketchDistribution.fixed_vectors(B @ W, r / r.sum())
    return [(coord, Metric.diagonal(rng.random(n) + 0.5)), (block, Metric.diagonal(rng.random(n) + 0.5)),
            (fixed, Metric.dense(B))]


def check_unbiased(rng) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 7))
        for dist, B in random_dists(rng, n):
            E = expected_theta_Z(dist, B)
            Bm = B.matrix()
            worst = max(worst, np.linalg.norm(E - Bm) / np.linalg.norm(Bm))
    return CheckResult("unbiased E[theta Z] = B", worst <= 1e-10, f"max rel err {worst:.2e}")


def check_projector(rng) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 7))
        B = Metric.dense(random_spd(rng, n))
        S = rng.standard_normal((n, int(rng.integers(1, 3))))
        Z = projector_Z(S, B)
        worst = max(worst, np.abs(Z @ B.solve(Z) - Z).max() / np.abs(Z).max())
    return CheckResult("Z B^-1 Z = Z", worst <= 1e-9, f"max rel err {worst:.2e}")


def check_sketch_and_project(rng) -> CheckResult:
    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(2, 7))
        b = int(rng.integers(1, 3))
        Bmat = random_spd(rng, n)
        S = rng.standard_normal((n, b))
        h = rng.standard_normal(n)
        lam = rng.standard_normal(b)
        K = np.block([[Bmat, S], [S.T, np.zeros((b, b))]])
        sol = np.linalg.solve(K, np.concatenate([Bmat @ h, lam]))
        worst = max(worst, np.abs(sketch_and_project(h, S, lam, Metric.dense(Bmat)) - sol[:n]).max())
    return CheckResult("sketch-and-project matches KKT", worst <= 1e-8, f"max err {worst:.2e}")


def check_contraction(rng) -> CheckResult:
    pb = make_synthetic(3, 5, seed=int(rng.integers(1 << 30)))
    dist = SketchDistribution.uniform(5)
    step = StepsizePolicy("general").resolve(pb, dist)
    ref = reference_solution(pb)
    worst = -np.inf
    for _ in range(30):
        c = expected_one_step_contraction(pb, dist, step, rng.standard_normal(5),
                                          rng.standard_normal(5), reference=ref)
        worst = max(worst, c.expected_after - (1 - step.alpha * pb.constants.mu) * c.before)
    return CheckResult("one-step contraction", worst <= 1e-9, f"max excess {worst:.2e}")


def check_cd_reduction(rng) -> CheckResult:
    pb = make_synthetic(3, 8, seed=int(rng.integers(1 << 30)))
    dist = SketchDistribution.uniform(8)
    a = run_sega(pb, dist, 0.01, K=300, seed=7, mode="cd", use_kernels=False)
    b = run_cd(pb, dist, 0.01, K=300, seed=7, use_kernels=False)
    same = all(np.array_equal(a[c], b[c]) for c in ("k", "oracle_calls", "f_gap", "dist_sq_B"))
    return CheckResult("SEGA with h = 0 equals CD", same, "bitwise" if same else "traces differ")


def check_determinism(rng) -> CheckResult:
    pb = make_synthetic(1, 10, seed=3)
    dist = SketchDistribution.gaussian(10)
    runs = [run_sega(pb, dist, StepsizePolicy("general"), Regularizer.ball(1.0), K=500, seed=11,
                     record_every=50) for _ in range(2)]
    same = Trace.body(runs[0].to_csv()) == Trace.body(runs[1].to_csv())
    return CheckResult("same seed, same CSV body", same, "identical" if same else "bodies differ")


def check_rds_monotone(rng) -> CheckResult:
    pb = make_synthetic(3, 10, seed=5)
    tr = run_rds(pb, SketchDistribution.gaussian(10), K=2000, seed=1, use_kernels=False)
    inc = float(np.max(np.diff(tr["f_gap"])))
    return CheckResult("direct search never increases f", inc <= 0.0, f"max increase {inc:.2e}")


def check_lyapunov_column(rng) -> CheckResult:
    """Recompute the logged potential from independently stepped states every 100 iterations."""
    pb = make_synthetic(2, 6, seed=2)
    dist = SketchDistribution.uniform(6)
    step = StepsizePolicy("simple_uniform").resolve(pb, dist)
    tr = run_sega(pb, dist, step, K=300, seed=4, record_every=100)
    ref = reference_solution(pb)
    B = Metric.identity(6)
    batch = sample_batch(dist, make_rng(4), 300)
    state = SegaState(pb.x0.copy(), np.zeros(6))
    offline = [lyapunov_general(state.x, state.h, ref.x_star, ref.grad_star, B, step.sigma, step.alpha)]
    for t in range(300):
        smp = batch_item(dist, batch, t, B)
        state = sega_step(state, smp, pb.sketched_gradient(smp, state.x), step.alpha)
        if (t + 1) % 100 == 0:
            offline.append(lyapunov_general(state.x, state.h, ref.x_star, ref.grad_star, B,
                                            step.sigma, step.alpha))
    err = float(np.max(np.abs(np.array(offline) - tr["lyapunov"]) / np.array(offline)))
    return CheckResult("logged potential matches offline recomputation", err <= 1e-9,
                       f"max rel err {err:.2e}")


CHECKS: List[Callable] = [check_unbiased, check_projector, check_sketch_and_project,
                          check_contraction, check_cd_reduction, check_determinism,
                          check_rds_monotone, check_lyapunov_column]


def run_checks(seed: int = 0) -> List[CheckResult]:
    rng = make_rng(seed)
    out = []
    for fn in CHECKS:
        try:
            out.append(fn(rng))
        except Exception as exc:  # a crash is a failed invariant
            out.append(CheckResult(fn.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out
