"""Sketch distributions, sampling, projectors Z and their moments.

A sketch is an ``n x b`` matrix ``S``; the oracle returns ``S^T grad f(x)``.
Coordinate and block sketches are carried as index sets and never
materialized unless a dense matrix is requested.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from sega.core import Metric, SpdCheck, as_matrix, pseudo_inverse

__all__ = [
    "SketchDistribution",
    "SketchSample",
    "SketchBatch",
    "MomentEstimate",
    "make_rng",
    "sample",
    "sample_batch",
    "theta_for",
    "projector_Z",
    "expected_Z",
    "expected_C",
    "expected_theta_Z",
    "batch_item",
    "eso_serial",
    "monte_carlo_moment",
    "probability_matrix",
    "validate_eso",
    "support",
]

PROB_TOL = 1e-12
MAX_ENUMERATION = 200_000


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) seeded through a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def _check_probabilities(p, name="p"):
    p = np.array(p, dtype=float).ravel()
    if p.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError(f"{name} must be strictly positive (proper sampling)")
    if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
        raise ValueError(f"{name} must sum to 1 (sum is {p.sum()!r})")
    p.setflags(write=False)
    return p


def _cdf(p):
    c = np.cumsum(p)
    c[-1] = 1.0
    return c


def _solve_block_theta(n, sets, probs):
    """Per-atom scalars theta_S with sum_S p_S theta_S 1[i in S] = 1 for every i."""
    A = np.zeros((n, len(sets)))
    for j, s in enumerate(sets):
        A[s, j] = probs[j]
    ones = np.ones(n)
    theta, *_ = np.linalg.lstsq(A, ones, rcond=None)
    if np.linalg.norm(A @ theta - ones) <= 1e-10 * np.sqrt(n) and np.all(theta > 0):
        return theta
    # Fall back to a strictly positive solution: maximize t s.t. A theta = 1, theta >= t.
    m = len(sets)
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((n, 1))])
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=ones,
                  bounds=[(None, None)] * m + [(None, 1e6)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise ValueError("no positive scalar bias correction exists for this block sampling")
    theta = res.x[:m]
    if np.linalg.norm(A @ theta - ones) > 1e-9 * np.sqrt(n):
        raise ValueError("no positive scalar bias correction exists for this block sampling")
    return theta


@dataclass(frozen=True, eq=False)
class SketchDistribution:
    """Distribution D over sketch matrices.

    Kinds
    -----
    coordinate
        ``S = e_i`` with probability ``p[i]``.
    block
        ``S`` has columns ``e_j, j in support[k]``, drawn with probability ``p[k]``.
    tau_nice
        Uniformly random subset of size ``tau``.
    gaussian
        ``n x b`` matrix of i.i.d. standard normals.
    fixed_vectors
        ``S = vectors[:, k]`` with probability ``p[k]``.
    """

    kind: str
    n: int
    p: Optional[np.ndarray] = None
    sets: Optional[tuple] = None
    b: int = 1
    vectors: Optional[np.ndarray] = None
    atom_theta: Optional[np.ndarray] = field(default=None, repr=False)

    # -- constructors -------------------------------------------------
    @classmethod
    def coordinate(cls, p) -> "SketchDistribution":
        p = _check_probabilities(p)
        return cls("coordinate", p.size, p, atom_theta=1.0 / p)

    @classmethod
    def uniform(cls, n: int) -> "SketchDistribution":
        return cls.coordinate(np.full(n, 1.0 / n))

    @classmethod
    def importance(cls, M, power: float = 1.0) -> "SketchDistribution":
        """Serial sampling with ``p_i`` proportional to ``M_ii ** power``."""
        d = np.diag(np.asarray(M, dtype=float)) ** power
        return cls.coordinate(d / d.sum())

    @classmethod
    def block(cls, sets: Sequence[Sequence[int]], p, n: Optional[int] = None,
              theta=None) -> "SketchDistribution":
        p = _check_probabilities(p)
        if len(sets) != p.size:
            raise ValueError("support and probability lengths differ")
        clean = []
        for s in sets:
            s = np.unique(np.asarray(s, dtype=np.int64))
            if s.size == 0:
                raise ValueError("empty index set in block support")
            s.setflags(write=False)
            clean.append(s)
        top = max(int(s[-1]) for s in clean) + 1
        n = top if n is None else int(n)
        if top > n or min(int(s[0]) for s in clean) < 0:
            raise ValueError("block index out of range")
        incl = np.zeros(n)
        for s, q in zip(clean, p):
            incl[s] += q
        if np.any(incl <= 0):
            raise ValueError("sampling is not proper: some coordinate is never drawn")
        if theta is None:
            theta = _solve_block_theta(n, clean, p)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != p.shape or np.any(theta <= 0):
            raise ValueError("theta must be positive, one per atom")
        return cls("block", n, p, tuple(clean), atom_theta=theta)

    @classmethod
    def tau_nice(cls, n: int, tau: int) -> "SketchDistribution":
        if not 1 <= tau <= n:
            raise ValueError("tau must lie in [1, n]")
        return cls("tau_nice", int(n), b=int(tau))

    @classmethod
    def gaussian(cls, n: int, b: int = 1) -> "SketchDistribution":
        if not 1 <= b <= n:
            raise ValueError("b must lie in [1, n]")
        return cls("gaussian", int(n), b=int(b))

    @classmethod
    def fixed_vectors(cls, vectors, p=None, theta=None) -> "SketchDistribution":
        """Columns of ``vectors`` (n x m) are the atoms; theta defaults to ``1/p``."""
        V = np.array(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if np.any(np.linalg.norm(V, axis=0) == 0):
            raise ValueError("fixed vectors must be nonzero")
        m = V.shape[1]
        p = _check_probabilities(np.full(m, 1.0 / m) if p is None else p)
        if p.size != m:
            raise ValueError("one probability per vector required")
        theta = 1.0 / p if theta is None else np.asarray(theta, dtype=float)
        V.setflags(write=False)
        return cls("fixed_vectors", V.shape[0], p, vectors=V, atom_theta=theta)

    # -- derived quantities -------------------------------------------
    @property
    def finite(self) -> bool:
        return self.kind != "gaussian"

    @property
    def tau(self) -> int:
        return self.b if self.kind == "tau_nice" else 1

    @property
    def columns(self) -> int:
        """Number of sketch columns b (maximum over atoms for blocks)."""
        if self.kind in ("coordinate", "fixed_vectors"):
            return 1
        if self.kind == "block":
            return max(s.size for s in self.sets)
        return self.b

    def inclusion_probabilities(self) -> np.ndarray:
        """Vector p with ``p_i = Prob(i in S)`` for index-set samplings."""
        if self.kind == "coordinate":
            return np.array(self.p)
        if self.kind == "tau_nice":
            return np.full(self.n, self.b / self.n)
        if self.kind == "block":
            out = np.zeros(self.n)
            for s, q in zip(self.sets, self.p):
                out[s] += q
            return out
        raise ValueError(f"inclusion probabilities undefined for {self.kind} sketches")

    def support_size(self) -> int:
        if self.kind in ("coordinate", "block", "fixed_vectors"):
            return self.p.size
        if self.kind == "tau_nice":
            return comb(self.n, self.b)
        raise ValueError("gaussian sketches have infinite support")


class SketchSample(NamedTuple):
    """A drawn sketch.

    ``indices`` is set for coordinate, block and tau-nice kinds; ``matrix``
    for gaussian and fixed-vector kinds. ``atom`` is the support index when
    the distribution has an indexed support, else -1.
    """

    kind: str
    n: int
    theta: float
    indices: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    atom: int = -1

    @property
    def b(self) -> int:
        return self.indices.size if self.indices is not None else self.matrix.shape[1]

    def dense(self) -> np.ndarray:
        """Materialize S as an ``n x b`` matrix."""
        if self.matrix is not None:
            return np.array(self.matrix)
        S = np.zeros((self.n, self.indices.size))
        S[self.indices, np.arange(self.indices.size)] = 1.0
        return S

    def apply_T(self, v) -> np.ndarray:
        """``S^T v``."""
        v = np.asarray(v, dtype=float)
        if self.indices is not None:
            return v[self.indices]
        return self.matrix.T @ v


class SketchBatch(NamedTuple):
    """Many draws at once: ``atoms`` (m,) for indexed supports, ``subsets`` (m, tau)
    for tau-nice, ``normals`` (m, n, b) for gaussian."""

    kind: str
    atoms: Optional[np.ndarray] = None
    subsets: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None

    def __len__(self):
        for a in (self.atoms, self.subsets, self.normals):
            if a is not None:
                return a.shape[0]
        return 0


def _atom_sample(dist: SketchDistribution, k: int, theta: float) -> SketchSample:
    if dist.kind == "coordinate":
        return SketchSample("coordinate", dist.n, theta, indices=np.array([k]), atom=k)
    if dist.kind == "block":
        return SketchSample("block", dist.n, theta, indices=dist.sets[k], atom=k)
    return SketchSample("fixed_vectors", dist.n, theta, matrix=dist.vectors[:, k:k + 1], atom=k)


def sample_batch(dist: SketchDistribution, rng: np.random.Generator, m: int) -> SketchBatch:
    """Draw ``m`` sketches. Consumes the generator exactly as ``m`` calls to :func:`sample`."""
    if dist.kind in ("coordinate", "block", "fixed_vectors"):
        u = rng.random(m)
        atoms = np.minimum(np.searchsorted(_cdf(dist.p), u, side="right"), dist.p.size - 1)
        return SketchBatch(dist.kind, atoms=atoms.astype(np.int64))
    if dist.kind == "tau_nice":
        u = rng.random((m, dist.n))
        subsets = np.sort(np.argsort(u, axis=1, kind="stable")[:, :dist.b], axis=1)
        return SketchBatch(dist.kind, subsets=subsets.astype(np.int64))
    return SketchBatch(dist.kind, normals=rng.standard_normal((m, dist.n, dist.b)))


def batch_item(dist: SketchDistribution, batch: SketchBatch, t: int, B=None) -> SketchSample:
    """The t-th sample of a batch as a :class:`SketchSample`."""
    if batch.atoms is not None:
        k = int(batch.atoms[t])
        return _atom_sample(dist, k, float(dist.atom_theta[k]))
    if batch.subsets is not None:
        return SketchSample("tau_nice", dist.n, dist.n / dist.b, indices=batch.subsets[t])
    S = batch.normals[t]
    smp = SketchSample("gaussian", dist.n, 0.0, matrix=S)
    return smp._replace(theta=theta_for(dist, smp, B))


def sample(dist: SketchDistribution, rng: np.random.Generator, B=None) -> SketchSample:
    """Draw one sketch with its bias-correcting theta."""
    return batch_item(dist, sample_batch(dist, rng, 1), 0, B)


def support(dist: SketchDistribution) -> Iterator[tuple]:
    """Yield ``(probability, SketchSample)`` over the whole support."""
    if dist.kind in ("coordinate", "block", "fixed_vectors"):
        for k, q in enumerate(dist.p):
            yield float(q), _atom_sample(dist, k, float(dist.atom_theta[k]))
        return
    if dist.kind == "tau_nice":
        total = comb(dist.n, dist.b)
        if total > MAX_ENUMERATION:
            raise ValueError(f"tau-nice support too large to enumerate ({total} subsets)")
        q = 1.0 / total
        for s in itertools.combinations(range(dist.n), dist.b):
            yield q, SketchSample("tau_nice", dist.n, dist.n / dist.b, indices=np.array(s))
        return
    raise ValueError("gaussian sketches have infinite support; use monte_carlo_moment")


def theta_for(dist: SketchDistribution, S: SketchSample, B=None, H=None) -> float:
    """Bias-correcting scalar with ``E[theta Z] = B`` (or ``= B H`` for fixed vectors).

    With a range projector ``H`` and coordinate sketches the value is
    ``H_ii / p_i`` so that ``E[theta Z] = B`` for the projected ``Z``.
    """
    Bm = Metric.coerce(B, dist.n)
    kind = dist.kind
    if kind == "fixed_vectors":
        return float(dist.atom_theta[S.atom])
    if kind == "gaussian":
        if H is not None or Bm.scale() is None:
            raise ValueError("gaussian sketches need B = c*I: no bias correction is known otherwise")
        return dist.n / dist.b
    if not Bm.is_diagonal:
        raise ValueError(f"{kind} sketches require a diagonal metric")
    if H is not None:
        if kind != "coordinate":
            raise ValueError("range-projected theta is implemented for coordinate sketches only")
        i = int(S.indices[0])
        return float(np.asarray(H)[i, i] / dist.p[i])
    if kind == "tau_nice":
        return dist.n / dist.b
    return float(dist.atom_theta[S.atom])


def _projected_gram(Sm, Bm: Metric, H=None):
    BinvS = Bm.solve(Sm)
    if H is not None:
        BinvS = np.asarray(H) @ BinvS
    G = Sm.T @ BinvS
    return 0.5 * (G + G.T)


def projector_Z(S, B=None, H=None) -> np.ndarray:
    """``Z = S (S^T H B^{-1} S)^+ S^T`` with ``H = I`` by default."""
    if isinstance(S, SketchSample):
        n = S.n
        Bm = Metric.coerce(B, n)
        if S.indices is not None and H is None and Bm.is_diagonal:
            Z = np.zeros((n, n))
            idx = S.indices
            Z[idx, idx] = Bm.diag()[idx]
            return Z
        Sm = S.dense()
    else:
        Sm = np.asarray(S, dtype=float)
        if Sm.ndim == 1:
            Sm = Sm[:, None]
        Bm = Metric.coerce(B, Sm.shape[0])
    G = _projected_gram(Sm, Bm, H)
    scale = np.linalg.norm(Sm) ** 2 * (1.0 if H is None else max(1.0, np.linalg.norm(H)))
    Z = Sm @ pseudo_inverse(G, atol=1e-13 * scale / max(np.min(Bm.diag()), 1e-300)) @ Sm.T
    return 0.5 * (Z + Z.T)


class MomentEstimate(NamedTuple):
    mean: np.ndarray
    stderr: np.ndarray


def monte_carlo_moment(dist, B=None, draws=100_000, rng=None, power=0, H=None, chunk=10_000):
    """Monte Carlo estimate of ``E[theta**power * Z]`` with entrywise standard errors."""
    rng = make_rng(0 if rng is None else rng)
    Bm = Metric.coerce(B, dist.n)
    n = dist.n
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        batch = sample_batch(dist, rng, m)
        for t in range(m):
            smp = batch_item(dist, batch, t, Bm)
            th = smp.theta if H is None else theta_for(dist, smp, Bm, H)
            Z = (th ** power) * projector_Z(smp, Bm, H)
            s1 += Z
            s2 += Z * Z
        done += m
    mean = s1 / draws
    var = np.maximum(s2 / draws - mean ** 2, 0.0)
    return MomentEstimate(mean, np.sqrt(var / draws))


def _moment(dist, B, power, H=None):
    Bm = Metric.coerce(B, dist.n)
    if dist.kind == "gaussian":
        c = Bm.scale()
        if c is None or H is not None:
            raise ValueError("closed form only for B = c*I; use monte_carlo_moment")
        return c * (dist.n / dist.b) ** power * (dist.b / dist.n) * np.eye(dist.n)
    if H is None and Bm.is_diagonal and dist.kind in ("coordinate", "tau_nice"):
        # Z = diag(B) restricted to S, so the moment is diagonal.
        d = Bm.diag()
        if dist.kind == "coordinate":
            return np.diag(d * dist.p * dist.atom_theta ** power)
        th = dist.n / dist.b
        return np.diag(d * (dist.b / dist.n) * th ** power)
    out = np.zeros((dist.n, dist.n))
    for q, smp in support(dist):
        th = smp.theta if H is None else theta_for(dist, smp, Bm, H)
        out += q * th ** power * projector_Z(smp, Bm, H)
    return out


def expected_Z(dist: SketchDistribution, B=None, H=None) -> np.ndarray:
    """Exact ``E[Z]`` by enumeration (closed form for gaussian with ``B = c*I``)."""
    return _moment(dist, B, 0, H)


def expected_C(dist: SketchDistribution, B=None, H=None) -> np.ndarray:
    """Exact ``C = E[theta^2 Z]``."""
    return _moment(dist, B, 2, H)


def expected_theta_Z(dist: SketchDistribution, B=None, H=None) -> np.ndarray:
    """Exact ``E[theta Z]``; equals B for a correctly bias-corrected distribution."""
    return _moment(dist, B, 1, H)


def probability_matrix(dist: SketchDistribution) -> np.ndarray:
    """``P_ij = Prob({i, j} subset of S)`` for index-set samplings."""
    n = dist.n
    if dist.kind == "coordinate":
        return np.diag(dist.p)
    if dist.kind == "tau_nice":
        t = dist.b
        off = t * (t - 1) / (n * (n - 1)) if n > 1 else 0.0
        P = np.full((n, n), off)
        np.fill_diagonal(P, t / n)
        return P
    if dist.kind == "block":
        P = np.zeros((n, n))
        for s, q in zip(dist.sets, dist.p):
            P[np.ix_(s, s)] += q
        np.fill_diagonal(P, dist.inclusion_probabilities())
        return P
    raise ValueError(f"probability matrix undefined for {dist.kind} sketches")


def validate_eso(P, M, p, v, tol: float = 1e-10) -> SpdCheck:
    """Check ``P o M <= diag(p) diag(v)`` through the smallest eigenvalue of the difference."""
    P = as_matrix(P)
    M = as_matrix(M)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if P.shape != M.shape or P.shape[0] != p.size or p.size != v.size:
        raise ValueError("dimension mismatch")
    D = np.diag(p * v) - P * M
    lo = float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
    return SpdCheck(lo >= -tol, lo)


def eso_serial(M) -> np.ndarray:
    """ESO vector for serial samplings: the diagonal of M."""
    return np.diag(np.asarray(M, dtype=float)).copy()
