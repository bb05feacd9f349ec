import numpy as np
import pytest

from sega.core import Metric
from sega.estimator import (optimal_subspace_setup, range_projector, sketch_and_project,
                            subspace_sketch_and_project, subspace_unbiased_estimate,
                            unbiased_estimate)
from sega.sketch import (SketchDistribution, expected_C, expected_theta_Z, expected_Z,
                         projector_Z, support, theta_for)
from sega.verify import random_spd


def test_sketch_and_project_examples():
    np.testing.assert_allclose(sketch_and_project([1, 2], np.array([[1.0], [0.0]]), [3.0]), [3, 2])
    np.testing.assert_allclose(sketch_and_project([0, 0], np.ones((2, 1)), [2.0]), [1, 1])
    g = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(sketch_and_project([5, 5, 5], np.eye(3), g), g)


def test_sketch_and_project_dimension_errors():
    with pytest.raises(ValueError):
        sketch_and_project([0, 0], np.ones((3, 1)), [1.0])
    with pytest.raises(ValueError):
        sketch_and_project([0, 0], np.ones((2, 1)), [1.0, 2.0])


def test_unbiased_estimate_examples():
    np.testing.assert_allclose(unbiased_estimate([1, 2], [3, 2], 2.0), [5, 2])
    np.testing.assert_allclose(unbiased_estimate([1, 2], [3, 2], 1.0), [3, 2])


def test_fixed_point_at_true_gradient(rng):
    grad = rng.standard_normal(4)
    S = rng.standard_normal((4, 2))
    B = Metric.dense(random_spd(rng, 4))
    hp = sketch_and_project(grad, S, S.T @ grad, B)
    np.testing.assert_allclose(hp, grad, atol=1e-12)
    np.testing.assert_allclose(unbiased_estimate(grad, hp, 7.3), grad, atol=1e-11)


def test_constraint_satisfaction(rng):
    for _ in range(50):
        n = int(rng.integers(2, 8))
        b = int(rng.integers(1, min(n, 3) + 1))
        S = rng.standard_normal((n, b))
        lam = rng.standard_normal(b)
        B = Metric.dense(random_spd(rng, n))
        hp = sketch_and_project(rng.standard_normal(n), S, lam, B)
        assert np.linalg.norm(S.T @ hp - lam) <= 1e-10 * (1 + np.linalg.norm(lam))


def test_minimality_against_kkt(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        b = int(rng.integers(1, 3))
        Bm = random_spd(rng, n)
        S = rng.standard_normal((n, b))
        h, lam = rng.standard_normal(n), rng.standard_normal(b)
        K = np.block([[Bm, S], [S.T, np.zeros((b, b))]])
        want = np.linalg.solve(K, np.concatenate([Bm @ h, lam]))[:n]
        np.testing.assert_allclose(sketch_and_project(h, S, lam, Metric.dense(Bm)), want, atol=1e-8)


def _coordinate_case(rng, n):
    p = rng.random(n) + 0.1
    return SketchDistribution.coordinate(p / p.sum()), Metric.diagonal(rng.random(n) + 0.5)


def test_exact_unbiasedness_of_g(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        dist, B = _coordinate_case(rng, n)
        grad, h = rng.standard_normal(n), rng.standard_normal(n)
        Eg = np.zeros(n)
        for q, s in support(dist):
            hp = sketch_and_project(h, s, s.apply_T(grad), B)
            Eg += q * unbiased_estimate(h, hp, theta_for(dist, s, B))
        np.testing.assert_allclose(Eg, grad, atol=1e-10)


def test_expected_distance_identity(rng):
    # E||h+ - v||_B^2 = ||h - v||_{B - E Z}^2 + ||grad - v||_{E Z}^2
    for _ in range(50):
        n = int(rng.integers(2, 7))
        dist, B = _coordinate_case(rng, n)
        grad, h, v = (rng.standard_normal(n) for _ in range(3))
        EZ, Bm = expected_Z(dist, B), B.matrix()
        lhs = sum(q * B.norm_sq(sketch_and_project(h, s, s.apply_T(grad), B) - v)
                  for q, s in support(dist))
        rhs = (h - v) @ (Bm - EZ) @ (h - v) + (grad - v) @ EZ @ (grad - v)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_second_moment_bound(rng):
    # E||g - v||_B^2 <= 2||grad - v||_C^2 + 2||h - v||_{C - B}^2
    for _ in range(50):
        n = int(rng.integers(2, 7))
        dist, B = _coordinate_case(rng, n)
        grad, h, v = (rng.standard_normal(n) for _ in range(3))
        C, Bm = expected_C(dist, B), B.matrix()
        lhs = sum(q * B.norm_sq(unbiased_estimate(h, sketch_and_project(h, s, s.apply_T(grad), B),
                                                  theta_for(dist, s, B)) - v)
                  for q, s in support(dist))
        rhs = 2 * (grad - v) @ C @ (grad - v) + 2 * (h - v) @ (C - Bm) @ (h - v)
        assert lhs <= rhs + 1e-9


def test_range_projector_examples():
    np.testing.assert_allclose(range_projector([[1.0, 0.0]]).H, [[1, 0], [0, 0]])
    np.testing.assert_allclose(range_projector([[1.0, 1.0]]).H, 0.5 * np.ones((2, 2)))
    np.testing.assert_allclose(range_projector(np.eye(3)).H, np.eye(3), atol=1e-14)
    with pytest.raises(ValueError):
        range_projector(np.zeros((1, 2)))


def test_projector_properties(rng):
    for _ in range(20):
        n = int(rng.integers(3, 8))
        A = rng.standard_normal((int(rng.integers(1, n)), n))
        B = Metric.dense(random_spd(rng, n))
        P = range_projector(A, B)
        H, Binv = P.H, B.inverse_matrix()
        np.testing.assert_allclose(H @ H, H, atol=1e-10)
        np.testing.assert_allclose(H @ Binv, Binv @ H.T, atol=1e-10)
        x = A.T @ rng.standard_normal(A.shape[0])
        np.testing.assert_allclose(P.project(x), x, atol=1e-10)
        S = rng.standard_normal((n, 1))
        Z = projector_Z(S, B, H)
        np.testing.assert_allclose(Z @ H @ Binv @ Z, Z, atol=1e-9 * max(1, np.abs(Z).max()))


def test_subspace_sketch_and_project_examples():
    P = range_projector([[1.0, 0.0]])
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    np.testing.assert_allclose(subspace_sketch_and_project([0, 0], e1, [2.0], P), [2, 0])
    # coordinate orthogonal to the range: the update is skipped
    np.testing.assert_allclose(subspace_sketch_and_project([1.5, 0], e2, [7.0], P), [1.5, 0])


def test_subspace_full_range_reduces(rng):
    P = range_projector(np.eye(4))
    for _ in range(10):
        S, h, lam = rng.standard_normal((4, 2)), rng.standard_normal(4), rng.standard_normal(2)
        np.testing.assert_allclose(subspace_sketch_and_project(h, S, lam, P),
                                   sketch_and_project(h, S, lam), atol=1e-10)


def test_subspace_coordinate_formula(rng):
    A = rng.standard_normal((2, 4))
    P = range_projector(A)
    h = P.project(rng.standard_normal(4))
    for i in range(4):
        e = np.eye(4)[:, [i]]
        w = P.H[i, i]
        want = h - (h[i] - 0.7) / w * P.H[:, i]
        np.testing.assert_allclose(subspace_sketch_and_project(h, e, [0.7], P), want, atol=1e-10)


def test_subspace_iterates_stay_in_range(rng):
    A = rng.standard_normal((3, 6))
    P = range_projector(A)
    grad = A.T @ rng.standard_normal(3)
    h = np.zeros(6)
    dist = SketchDistribution.uniform(6)
    for q, s in support(dist):
        g = subspace_unbiased_estimate(h, s, s.apply_T(grad), theta_for(dist, s, None, P.H), P)
        assert P.residual(g) <= 1e-8
        h = subspace_sketch_and_project(h, s, s.apply_T(grad), P)
        assert P.residual(h) <= 1e-8


def test_optimal_setup_examples():
    B, dist, d = optimal_subspace_setup([[1.0, 0, 0], [0, 1.0, 0]])
    assert d == 2 and B.scale() == 1.0
    np.testing.assert_allclose(dist.vectors, np.eye(3)[:, :2])
    assert theta_for(dist, next(iter(support(dist)))[1], B) == pytest.approx(2.0)
    B, dist, d = optimal_subspace_setup([[2.0, 0.0]])
    assert d == 1
    np.testing.assert_allclose(dist.vectors, [[1.0], [0.0]])


def test_optimal_setup_is_unbiased_in_range(rng):
    A = rng.standard_normal((3, 7))
    B, dist, d = optimal_subspace_setup(A)
    P = range_projector(A, B)
    assert d == 3
    np.testing.assert_allclose(expected_theta_Z(dist, B, P.H), B.matrix() @ P.H, atol=1e-9)
