import numpy as np
import pytest

from sega.baselines import cd_step, pgd_step, rds_step, run_cd, run_pgd, run_rds
from sega.problems import make_synthetic
from sega.prox import Regularizer
from sega.sketch import SketchDistribution
from sega.solvers import SegaState, sega_step
from sega.sketch import SketchSample


def test_pgd_examples():
    np.testing.assert_allclose(pgd_step([3.0, -1.0], [3.0, -1.0], 1.0), [0.0, 0.0])
    y = pgd_step([2.0, 0.0], [-2.0, 0.0], 0.5, Regularizer.ball(1.0))
    np.testing.assert_allclose(y, [1.0, 0.0])


def test_pgd_hand_step_type3():
    pb = make_synthetic(3, 4, seed=0)
    assert pb.constants.L == 4.0
    x = pb.x0
    want = x - 0.25 * (pb.M @ x - pb.b)
    np.testing.assert_allclose(pgd_step(x, pb.full_gradient(x), 0.25), want)


def test_pgd_monotone_and_costs():
    pb = make_synthetic(1, 10, seed=2)
    tr = run_pgd(pb, K=200, X=3.0)
    assert np.all(np.diff(tr["f_gap"]) <= 1e-12 * tr["f_gap"][0])
    assert tr["oracle_calls"][1] == 10 and tr["cost_units"][1] == 10 + 30


def test_cd_examples():
    np.testing.assert_allclose(cd_step([0.0, 0.0], 0, 3.0, 0.1, [0.5, 0.5]), [-0.6, 0.0])
    np.testing.assert_allclose(cd_step([1.0, 2.0], 1, 0.0, 0.1, [0.5, 0.5]), [1.0, 2.0])
    with pytest.raises(ValueError):
        cd_step([0.0, 0.0], 0, 3.0, 0.1, [0.5, 0.5], Regularizer.ball())


def test_cd_equals_sega_with_zero_h(rng):
    for _ in range(20):
        x = rng.standard_normal(3)
        i = int(rng.integers(3))
        g = float(rng.standard_normal())
        p = np.array([0.2, 0.3, 0.5])
        smp = SketchSample("coordinate", 3, 1.0 / p[i], indices=np.array([i]), atom=i)
        a = sega_step(SegaState(x, rng.standard_normal(3)), smp, [g], 0.1, mode="cd").x
        np.testing.assert_array_equal(a, cd_step(x, i, g, 0.1, p))


def test_cd_with_l1():
    x = cd_step([1.0, 0.05], 0, 1.0, 0.1, [0.5, 0.5], Regularizer.l1(1.0))
    np.testing.assert_allclose(x, [0.7, 0.0])


def test_rds_examples():
    f = lambda x: float(x @ x)  # noqa: E731
    np.testing.assert_allclose(rds_step(f, np.array([1.0]), np.array([1.0]), 0.6), [0.4])
    np.testing.assert_allclose(rds_step(f, np.array([1.0]), np.array([1.0]), 0.0), [1.0])
    np.testing.assert_allclose(rds_step(f, np.zeros(2), np.array([0.3, 1.0]), 1e-3), [0.0, 0.0])


def test_rds_run_monotone_and_accounting():
    pb = make_synthetic(3, 6, seed=1)
    for dist in (SketchDistribution.uniform(6), SketchDistribution.gaussian(6)):
        tr = run_rds(pb, dist, K=500, seed=0, use_kernels=False)
        assert np.all(np.diff(tr["f_gap"]) <= 0)
        assert tr["oracle_calls"][-1] == 1000
        assert tr.metadata["alpha_rule"] == "assumed 1/(L n)"


def test_run_cd_rejects_ball():
    pb = make_synthetic(3, 4, seed=0)
    with pytest.raises(ValueError):
        run_cd(pb, SketchDistribution.uniform(4), 0.1, K=5, R=Regularizer.ball())
