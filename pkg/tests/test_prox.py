import numpy as np
import pytest

from sega.core import Metric
from sega.prox import Regularizer, UnsupportedProx, prox


def test_prox_examples():
    x = np.array([3.0, 4.0])
    np.testing.assert_array_equal(prox(Regularizer.zero(), None, 1.0, x), x)
    np.testing.assert_allclose(prox(Regularizer.ball(1.0), None, 1.0, x), [0.6, 0.8])
    np.testing.assert_allclose(prox(Regularizer.l1(1.0), None, 1.0, [2.0, -0.5]), [1.0, 0.0])
    np.testing.assert_allclose(prox(Regularizer.box(-1, 1), None, 1.0, [2.0, 0.5]), [1.0, 0.5])


def test_ball_with_center_and_inside_point():
    R = Regularizer.ball(1.0, center=[1.0, 1.0])
    np.testing.assert_allclose(prox(R, None, 1.0, [1.2, 1.0]), [1.2, 1.0])
    np.testing.assert_allclose(prox(R, None, 1.0, [4.0, 5.0]), [1.6, 1.8])


def test_unsupported_pairs():
    dense = Metric.dense([[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(UnsupportedProx):
        prox(Regularizer.ball(), dense, 1.0, [3.0, 4.0])
    with pytest.raises(UnsupportedProx):
        prox(Regularizer.l1(1.0), dense, 1.0, [3.0, 4.0])
    with pytest.raises(ValueError):
        prox(Regularizer.l1(1.0), None, 0.0, [3.0, 4.0])


def _metrics(rng, n):
    return [Metric.identity(n), Metric.diagonal(rng.random(n) + 0.2), Metric.diagonal(np.full(n, 3.0))]


def test_nonexpansive(rng):
    regs = [Regularizer.ball(1.0), Regularizer.l1(0.3), Regularizer.box(-0.5, 0.7)]
    for _ in range(30):
        n = int(rng.integers(2, 8))
        for B in _metrics(rng, n):
            for R in regs:
                x, y = 3 * rng.standard_normal(n), 3 * rng.standard_normal(n)
                a = rng.random() + 0.1
                assert B.norm_sq(prox(R, B, a, x) - prox(R, B, a, y)) <= B.norm_sq(x - y) + 1e-10


def test_ball_optimality_diagonal_metric(rng):
    # B(x - y) = t (y - c) with t >= 0 at a boundary solution
    for _ in range(30):
        n = int(rng.integers(2, 6))
        d = rng.random(n) + 0.2
        x = 4 * rng.standard_normal(n)
        x *= max(1.0, 1.5 / np.linalg.norm(x))
        y = prox(Regularizer.ball(1.0), Metric.diagonal(d), 1.0, x)
        assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-9)
        r = d * (x - y)
        t = r @ y / (y @ y)
        assert t >= 0
        np.testing.assert_allclose(r, t * y, atol=1e-8 * (1 + np.abs(r).max()))


def test_l1_optimality(rng):
    for _ in range(30):
        n = 5
        d = rng.random(n) + 0.2
        lam, a = 0.4, 0.7
        x = rng.standard_normal(n)
        y = prox(Regularizer.l1(lam), Metric.diagonal(d), a, x)
        r = d * (x - y) / a
        on = y != 0
        np.testing.assert_allclose(r[on], lam * np.sign(y[on]), atol=1e-8)
        assert np.all(np.abs(r[~on]) <= lam + 1e-8)


def test_projection_idempotent(rng):
    for R in (Regularizer.ball(0.5), Regularizer.box(-0.1, 0.2)):
        for B in _metrics(rng, 4):
            y = prox(R, B, 1.0, 5 * rng.standard_normal(4))
            np.testing.assert_allclose(prox(R, B, 1.0, y), y, atol=1e-12)


def test_regularizer_values():
    assert Regularizer.ball(1.0).value([3.0, 4.0]) == np.inf
    assert Regularizer.ball(1.0).value([0.6, 0.8]) == 0.0
    assert Regularizer.l1(2.0).value([1.0, -0.5]) == pytest.approx(3.0)
    assert Regularizer.ball(1.0).is_indicator and not Regularizer.ball(1.0).separable
    assert Regularizer.l1(1.0).separable
