import numpy as np
import pytest

from sega.core import (Metric, SmoothnessData, check_spd, m_smooth_gap, pseudo_inverse,
                       q_smooth_gap, weighted_norm_sq)
from sega.verify import random_spd


def test_weighted_norm_examples():
    assert weighted_norm_sq([1, 0], np.eye(2)) == 1
    assert weighted_norm_sq([1, 1], np.diag([2.0, 3.0])) == 5
    # 1*2*1 + 2*(1*1*2) + 2*2*2
    assert weighted_norm_sq([1, 2], [[2, 1], [1, 2]]) == 14


def test_weighted_norm_dimension_mismatch():
    with pytest.raises(ValueError):
        weighted_norm_sq([1, 2, 3], np.eye(2))


def test_identity_metric_is_plain_norm(rng):
    x = rng.standard_normal(7)
    assert weighted_norm_sq(x, np.eye(7)) == weighted_norm_sq(x, Metric.identity(7).matrix())


def test_pseudo_inverse_examples():
    np.testing.assert_allclose(pseudo_inverse(np.array([[2.0]])), [[0.5]])
    np.testing.assert_allclose(pseudo_inverse(np.diag([1.0, 0.0])), np.diag([1.0, 0.0]))
    np.testing.assert_allclose(pseudo_inverse(0.5 * np.ones((2, 2))), 0.5 * np.ones((2, 2)), atol=1e-15)


def test_pseudo_inverse_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        pseudo_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("n", [1, 3, 8, 20])
def test_pseudo_inverse_penrose_conditions(rng, n):
    for rank in {1, max(1, n // 2), n}:
        F = rng.standard_normal((n, rank))
        A = F @ F.T
        Ap = pseudo_inverse(A)
        scale = np.linalg.norm(A)
        assert np.linalg.norm(A @ Ap @ A - A) <= 1e-10 * scale
        assert np.linalg.norm(Ap @ A @ Ap - Ap) <= 1e-10 * np.linalg.norm(Ap)


def test_check_spd_examples():
    assert check_spd(np.eye(3))
    res = check_spd(np.diag([1.0, -1.0]))
    assert not res and res.min_eig == pytest.approx(-1.0)
    res = check_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not res and res.min_eig == pytest.approx(-1.0)


def test_metric_kinds(rng):
    d = rng.random(4) + 0.5
    Bd = Metric.diagonal(d)
    Bm = Metric.dense(np.diag(d))
    x = rng.standard_normal(4)
    assert Bd.norm_sq(x) == pytest.approx(Bm.norm_sq(x))
    np.testing.assert_allclose(Bd.solve(x), x / d)
    np.testing.assert_allclose(Bm.solve(x), x / d)
    assert Metric.identity(3).scale() == 1.0
    assert Metric.diagonal([2.0, 2.0]).scale() == 2.0
    assert Bd.scale() is None


def test_metric_validation():
    with pytest.raises(ValueError):
        Metric.diagonal([1.0, 0.0])
    with pytest.raises(ValueError):
        Metric.dense([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        Metric.dense([[1.0, 2.0], [2.0, 1.0]])


def test_smoothness_data_requires_positive_mu():
    with pytest.raises(ValueError):
        SmoothnessData(mu=0.0)


def test_q_and_m_smoothness_agree_on_quadratics(rng):
    # with B = I, Q-smoothness with Q = M^-1 and M-smoothness hold together
    M = random_spd(rng, 5)
    f = lambda x: 0.5 * x @ M @ x
    g = lambda x: M @ x
    data = SmoothnessData(mu=float(np.linalg.eigvalsh(M)[0]), M=M, Q=np.linalg.inv(M))
    assert data.check_inverse_pair()
    for _ in range(100):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        assert q_smooth_gap(f, g, data.Q, x, y) >= -1e-9
        assert m_smooth_gap(f, g, M, x, y) >= -1e-9
    # a too-small M breaks M-smoothness and its inverse breaks Q-smoothness
    bad = 0.5 * M
    fails_m = min(m_smooth_gap(f, g, bad, *rng.standard_normal((2, 5))) for _ in range(50))
    fails_q = min(q_smooth_gap(f, g, np.linalg.inv(bad), *rng.standard_normal((2, 5))) for _ in range(50))
    assert fails_m < 0 and fails_q < 0
