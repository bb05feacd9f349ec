"""Inner loops for quadratic objectives ``f(x) = x^T M x / 2 - c^T x + const``.

Every kernel advances the solver state in place over a block of
pre-drawn random numbers, so the compiled and the plain-numpy versions
consume identical streams. Vector operations are written with numpy
calls that numba also understands.

Prox codes: 0 none, 1 ball (center, radius), 2 l1 (thresholds), 3 box.
Estimator modes: 0 unbiased, 1 biased (use h+), 2 coordinate descent (h = 0).
"""
import numpy as np

from sega._jit import njit

PROX_NONE, PROX_BALL, PROX_L1, PROX_BOX = 0, 1, 2, 3
MODE_SEGA, MODE_BIAS, MODE_CD = 0, 1, 2


@njit
def prox_inplace(x, kind, center, radius, thr, lo, hi):
    if kind == 1:
        v = x - center
        nrm = np.sqrt(np.dot(v, v))
        if nrm > radius:
            x[:] = center + v * (radius / nrm)
    elif kind == 2:
        for j in range(x.shape[0]):
            a = abs(x[j]) - thr[j]
            if a > 0.0:
                x[j] = a if x[j] > 0 else -a
            else:
                x[j] = 0.0
    elif kind == 3:
        for j in range(x.shape[0]):
            if x[j] < lo[j]:
                x[j] = lo[j]
            elif x[j] > hi[j]:
                x[j] = hi[j]


@njit
def quad_value(M, c, const, x):
    return 0.5 * np.dot(x, np.dot(M, x)) - np.dot(c, x) + const


@njit
def sega_coordinate(x, h, M, c, const, atoms, theta, alpha, mode, zeroth, eps_rel,
                    pk, center, radius, thr, lo, hi):
    """Coordinate sketches ``S = e_i``; ``theta[i]`` is the bias correction of atom i."""
    n = x.shape[0]
    for t in range(atoms.shape[0]):
        i = atoms[t]
        if zeroth:
            eps = eps_rel * (1.0 + np.sqrt(np.dot(x, x)))
            f0 = quad_value(M, c, const, x)
            xi = x[i]
            x[i] = xi + eps
            f1 = quad_value(M, c, const, x)
            x[i] = xi
            lam = (f1 - f0) / eps
        else:
            lam = np.dot(M[i], x) - c[i]
        th = theta[i]
        if mode == 2:
            x[i] = x[i] - alpha * (th * lam)
        elif mode == 1:
            h[i] = lam
            x -= alpha * h
        else:
            hi_old = h[i]
            gi = (1.0 - th) * hi_old + th * lam
            h[i] = gi
            x -= alpha * h
            h[i] = lam
        if pk != 0:
            prox_inplace(x, pk, center, radius, thr, lo, hi)
    return n


@njit
def sega_rank_one(x, h, M, c, const, V, VM, Vc, U, atoms, theta, alpha, mode, zeroth,
                  eps_rel, pk, center, radius, thr, lo, hi):
    """Fixed rank-one sketches ``s_j = V[j]`` with update directions ``U[j]``.

    ``h+ = h - U[j] (s_j^T h - lam)``; ``VM = V @ M`` and ``Vc = V @ c``.
    """
    for t in range(atoms.shape[0]):
        j = atoms[t]
        s = V[j]
        if zeroth:
            eps = eps_rel * (1.0 + np.sqrt(np.dot(x, x)))
            f0 = quad_value(M, c, const, x)
            f1 = quad_value(M, c, const, x + eps * s)
            lam = (f1 - f0) / eps
        else:
            lam = np.dot(VM[j], x) - Vc[j]
        delta = lam - np.dot(s, h)
        th = theta[j]
        if mode == 2:
            x -= alpha * (th * delta) * U[j]
        elif mode == 1:
            h += delta * U[j]
            x -= alpha * h
        else:
            x -= alpha * (h + (th * delta) * U[j])
            h += delta * U[j]
        if pk != 0:
            prox_inplace(x, pk, center, radius, thr, lo, hi)
    return 0


@njit
def sega_gaussian(x, h, M, c, const, normals, theta, alpha, mode, zeroth, eps_rel,
                  pk, center, radius, thr, lo, hi):
    """Single-column Gaussian sketches with ``B = I``; ``normals`` has shape (m, n)."""
    for t in range(normals.shape[0]):
        s = normals[t]
        if zeroth:
            eps = eps_rel * (1.0 + np.sqrt(np.dot(x, x)))
            f0 = quad_value(M, c, const, x)
            f1 = quad_value(M, c, const, x + eps * s)
            lam = (f1 - f0) / eps
        else:
            lam = np.dot(s, np.dot(M, x) - c)
        ss = np.dot(s, s)
        delta = (lam - np.dot(s, h)) / ss
        if mode == 2:
            x -= alpha * (theta * delta) * s
        elif mode == 1:
            h += delta * s
            x -= alpha * h
        else:
            x -= alpha * (h + (theta * delta) * s)
            h += delta * s
        if pk != 0:
            prox_inplace(x, pk, center, radius, thr, lo, hi)
    return 0


@njit
def asega_coordinate(x, y, z, h, M, c, atoms, p, alpha, beta, tau, mu):
    """Accelerated method with serial sampling; x holds the last interpolated point."""
    bm = beta * mu
    for t in range(atoms.shape[0]):
        x[:] = (1.0 - tau) * y + tau * z
        i = atoms[t]
        lam = np.dot(M[i], x) - c[i]
        g = h.copy()
        g[i] = h[i] + (lam - h[i]) / p[i]
        h[i] = lam
        y[:] = x - alpha * (g / p)
        z[:] = (z + bm * x - beta * g) / (1.0 + bm)
    return 0


@njit
def rds_directions(x, fx, M, c, const, D, alpha):
    """Random direct search along the rows of ``D``; returns the final value."""
    for t in range(D.shape[0]):
        s = D[t]
        xp = x + alpha * s
        xm = x - alpha * s
        fp = quad_value(M, c, const, xp)
        fm = quad_value(M, c, const, xm)
        if fp < fx and fp <= fm:
            x[:] = xp
            fx = fp
        elif fm < fx:
            x[:] = xm
            fx = fm
    return fx


@njit
def rds_coordinate(x, fx, M, c, const, atoms, alpha):
    """Random direct search along ``e_i``."""
    for t in range(atoms.shape[0]):
        i = atoms[t]
        xi = x[i]
        x[i] = xi + alpha
        fp = quad_value(M, c, const, x)
        x[i] = xi - alpha
        fm = quad_value(M, c, const, x)
        x[i] = xi
        if fp < fx and fp <= fm:
            x[i] = xi + alpha
            fx = fp
        elif fm < fx:
            x[i] = xi - alpha
            fx = fm
    return fx
