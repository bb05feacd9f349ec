"""Exact one-step expectations of the Lyapunov potentials.

For finite sketch distributions the expectation over the next iterate is
a finite sum, so the contraction factors claimed by the theory can be
checked at any state without Monte Carlo noise.
"""
from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from sega.core import Metric
from sega.problems import reference_solution
from sega.prox import Regularizer
from sega.sketch import support, theta_for
from sega.solvers._common import make_lyapunov
from sega.solvers.sega import SegaState, sega_step
from sega.solvers.stepsize import Stepsize

__all__ = ["Contraction", "expected_one_step_contraction"]


class Contraction(NamedTuple):
    before: float
    expected_after: float

    @property
    def ratio(self) -> float:
        return self.expected_after / self.before if self.before > 0 else 0.0


def expected_one_step_contraction(problem, dist, step: Stepsize, x, h, R: Optional[Regularizer] = None,
                                  B=None, projector=None, reference=None, mode: str = "sega") -> Contraction:
    """``Phi(x, h)`` and ``E[Phi(x+, h+)]`` for the potential named by ``step.lyapunov``."""
    n = problem.n
    Bm = Metric.coerce(B, n)
    R = Regularizer.zero() if R is None else R
    ref = reference_solution(problem, R) if reference is None else reference
    p = dist.inclusion_probabilities() if step.lyapunov in ("coordinate", "metric_G") else None
    phi = make_lyapunov(step, Bm, ref, p)
    if phi is None:
        raise ValueError(f"no potential for {step.lyapunov!r}")
    H = None if projector is None else projector.H

    def gap(z):
        fr = 0.0 if R.is_indicator else R.value(z)
        return problem.value(z) + fr - ref.f_star

    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    state = SegaState(x, h)
    total = 0.0
    for q, smp in support(dist):
        th = theta_for(dist, smp, Bm, H) if H is not None else smp.theta
        lam = problem.sketched_gradient(smp, x)
        nxt = sega_step(state, smp, lam, step.alpha, R, Bm, step.G, mode=mode,
                        projector=projector, theta=th)
        total += q * phi(nxt.x, nxt.h, gap(nxt.x))
    return Contraction(phi(x, h, gap(x)), total)
