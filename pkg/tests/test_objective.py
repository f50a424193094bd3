import math

import numpy as np
import pytest

from pacmap_core import PairSet, PhaseWeights, ScheduleConfig, gradient, total_loss, weight_schedule
from pacmap_core.objective import PairKind, dtilde, loss_and_gradient, pair_force, pair_loss


def pairs(nb=(), mn=(), fp=()):
    arr = lambda p: np.asarray(p, dtype=np.int64).reshape(-1, 2)
    return PairSet(nb=arr(nb), mn=arr(mn), fp=arr(fp), n_nb=0, n_mn=0, n_fp=0)


class TestPairTerms:
    def test_dtilde(self):
        assert dtilde(np.zeros(2), np.zeros(2)) == 1.0
        assert dtilde(np.array([3.0, 0.0]), np.zeros(2)) == 10.0

    @pytest.mark.parametrize(
        "kind,dt,expect",
        [
            (PairKind.NB, 1.0, 1 / 11),
            (PairKind.NB, 10.0, 0.5),
            (PairKind.FP, 1.0, 0.5),
            (PairKind.MN, 10000.0, 0.5),
        ],
    )
    def test_loss_values(self, kind, dt, expect):
        assert pair_loss(kind, dt) == pytest.approx(expect, rel=1e-15)

    def test_loss_domain(self):
        with pytest.raises(ValueError):
            pair_loss(PairKind.NB, 0.5)

    def test_force_values(self):
        for kind in PairKind:
            assert pair_force(kind, 0.0) == 0.0
        assert pair_force(PairKind.NB, 1.0) == pytest.approx(20 / 144, rel=1e-15)
        assert pair_force(PairKind.FP, 1.0) == pytest.approx(-2 / 9, rel=1e-15)

    @pytest.mark.parametrize("kind", list(PairKind))
    def test_force_is_derivative(self, kind):
        h = 1e-6
        for d in (0.3, 1.0, 2.5, 40.0):
            fd = (pair_loss(kind, (d + h) ** 2 + 1) - pair_loss(kind, (d - h) ** 2 + 1)) / (2 * h)
            assert pair_force(kind, d) == pytest.approx(fd, rel=1e-6, abs=1e-12)


class TestTotalLoss:
    def test_hand_sum(self):
        y = np.zeros((3, 2))
        assert total_loss(y, pairs(nb=[(0, 1)], fp=[(0, 2)]), PhaseWeights(1, 0, 1)) == pytest.approx(
            1 / 11 + 1 / 2, rel=1e-15
        )

    def test_empty_and_zero_weights(self, rng):
        y = rng.normal(size=(4, 2))
        assert total_loss(y, PairSet.empty(), PhaseWeights(1, 1, 1)) == 0.0
        assert total_loss(y, pairs(nb=[(0, 1)], mn=[(1, 2)], fp=[(2, 3)]), PhaseWeights(0, 0, 0)) == 0.0

    def test_zero_distance_zero_gradient(self):
        y = np.ones((4, 2))
        g = gradient(y, pairs(nb=[(0, 1)], mn=[(1, 2)], fp=[(2, 3), (3, 0)]), PhaseWeights(2, 500, 1))
        assert np.all(g == 0.0)

    def test_rigid_invariance(self, rng):
        y = rng.normal(size=(10, 2))
        p = pairs(nb=rng.integers(0, 10, (15, 2)), mn=rng.integers(0, 10, (5, 2)), fp=rng.integers(0, 10, (20, 2)))
        w = PhaseWeights(2, 400, 1)
        th = 0.7
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert total_loss(y @ rot.T + [3.0, -1.0], p, w) == pytest.approx(total_loss(y, p, w), rel=1e-12)

    def test_gradient_matches_loss(self, rng):
        y = rng.normal(size=(6, 3))
        p = pairs(nb=[(0, 1), (1, 2), (2, 0)], mn=[(3, 4)], fp=[(0, 5), (5, 4), (3, 1)])
        w = PhaseWeights(3, 3, 1)
        loss, g = loss_and_gradient(y, p, w)
        assert loss == total_loss(y, p, w)
        h = 1e-6
        fd = np.zeros_like(y)
        for i in range(6):
            for c in range(3):
                e = np.zeros_like(y)
                e[i, c] = h
                fd[i, c] = (total_loss(y + e, p, w) - total_loss(y - e, p, w)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)


class TestSchedule:
    def test_values(self):
        assert weight_schedule(1).as_tuple() == (2.0, 1000.0, 1.0)
        assert weight_schedule(100).as_tuple() == pytest.approx((2.0, 12.97, 1.0), rel=1e-12)
        assert weight_schedule(150).as_tuple() == (3.0, 3.0, 1.0)
        assert weight_schedule(300).as_tuple() == (1.0, 0.0, 1.0)

    def test_range(self):
        with pytest.raises(ValueError):
            weight_schedule(0)
        with pytest.raises(ValueError):
            weight_schedule(451)

    def test_custom_taus(self):
        cfg = ScheduleConfig(1, 11, 21, 30)
        assert weight_schedule(11, cfg).as_tuple() == (3.0, 3.0, 1.0)
        assert weight_schedule(21, cfg).as_tuple() == (1.0, 0.0, 1.0)
        assert weight_schedule(6, cfg).w_mn == pytest.approx(1000 * 0.5 + 3 * 0.5)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            ScheduleConfig(1, 300, 201, 450)
        with pytest.raises(ValueError):
            ScheduleConfig(1, 101, 201, 100)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            PhaseWeights(-1, 0, 1)
