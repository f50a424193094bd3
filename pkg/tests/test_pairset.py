import numpy as np
import pytest
from scipy.spatial.distance import cdist

from pacmap_core import PacmapWarning, build_pair_set, compute_sigmas
from pacmap_core.pairset import (
    MID_NEAR_SAMPLE,
    _anchor_rng,
    _draw_distinct,
    pair_counts,
    sample_further,
    sample_mid_near,
    scaled_distance,
    select_neighbors,
)


def sigma_oracle(x):
    d = cdist(x, x)
    np.fill_diagonal(d, np.inf)
    d = np.sort(d, axis=1)
    return d[:, 3:6].mean(axis=1)


def neighbor_oracle(x, sigma, n_nb):
    """Score every other point by scaled distance; ties by index."""
    n = len(x)
    out = []
    for i in range(n):
        scored = sorted(
            (float(np.sum((x[i] - x[j]) ** 2)) / (sigma[i] * sigma[j]), j) for j in range(n) if j != i
        )
        out.append([j for _, j in scored[:n_nb]])
    return np.asarray(out)


class TestSigmas:
    def test_collinear(self):
        x = np.arange(8, dtype=float)[:, None]
        assert compute_sigmas(x)[0] == 5.0

    def test_matches_full_sort(self, rng):
        x = rng.uniform(size=(20, 2))
        np.testing.assert_array_equal(compute_sigmas(x), sigma_oracle(x))

    def test_matches_full_sort_larger(self, rng):
        x = rng.normal(size=(500, 4))
        np.testing.assert_allclose(compute_sigmas(x), sigma_oracle(x), rtol=1e-13)

    def test_identical_points(self):
        with pytest.warns(PacmapWarning, match="zero sigma"):
            s = compute_sigmas(np.ones((10, 3)))
        assert np.all(s > 0)

    def test_small_n_fallback(self):
        x = np.array([[0.0], [1.0], [3.0], [6.0], [10.0]])
        with pytest.warns(PacmapWarning):
            s = compute_sigmas(x)
        # point 0: neighbor distances 1, 3, 6, 10 -> last three
        assert s[0] == pytest.approx((3 + 6 + 10) / 3)


class TestScaledDistance:
    def test_hand_value(self):
        x = np.array([[0.0, 0.0], [4.0, 0.0]])
        assert scaled_distance(x, np.array([2.0, 2.0]), 0, 1) == 4.0

    def test_equal_coordinates(self):
        x = np.array([[1.0, 2.0], [1.0, 2.0]])
        assert scaled_distance(x, np.array([1.0, 3.0]), 0, 1) == 0.0

    def test_same_index_rejected(self):
        with pytest.raises(ValueError):
            scaled_distance(np.zeros((2, 1)), np.ones(2), 1, 1)


class TestSelectNeighbors:
    def test_uniform_sigma_is_euclidean_knn(self, rng):
        x = rng.normal(size=(80, 3))
        nb = select_neighbors(x, np.full(80, 0.7), 10)
        d = cdist(x, x)
        np.fill_diagonal(d, np.inf)
        expect = np.argsort(d, axis=1, kind="stable")[:, :10]
        for i in range(80):
            assert set(nb[nb[:, 0] == i, 1]) == set(expect[i])

    def test_scaled_ranking_differs_from_euclidean(self):
        # dense cluster on [0, 0.9] plus sparse points 10, 30, 70
        x = np.concatenate([np.arange(10) / 10, [10.0, 30.0, 70.0]])[:, None]
        sigma = compute_sigmas(x)
        nb = select_neighbors(x, sigma, 3)
        np.testing.assert_array_equal(nb[:, 1].reshape(-1, 3), neighbor_oracle(x, sigma, 3))
        from_10 = nb[nb[:, 0] == 10, 1]
        assert from_10[0] == 11  # the point at 30 wins on scaled distance
        assert np.argmin(np.abs(x[:10, 0] - 10.0)) != 11

    @pytest.mark.parametrize("n", [30, 120, 200])
    def test_exhaustive_oracle(self, rng, n):
        x = rng.normal(size=(n, 5)) * rng.uniform(0.2, 3.0, size=(n, 1))
        sigma = compute_sigmas(x)
        nb = select_neighbors(x, sigma, 10)
        got = nb[:, 1].reshape(n, 10)
        if n - 1 <= 60:
            np.testing.assert_array_equal(got, neighbor_oracle(x, sigma, 10))
        else:
            # prefilter keeps the 60 Euclidean nearest; oracle scores exactly those
            d = cdist(x, x)
            np.fill_diagonal(d, np.inf)
            cand = np.argsort(d, axis=1, kind="stable")[:, :60]
            for i in range(n):
                scored = sorted((float(np.sum((x[i] - x[j]) ** 2)) / (sigma[i] * sigma[j]), j) for j in cand[i])
                assert got[i].tolist() == [j for _, j in scored[:10]]

    def test_ties_by_index(self):
        x = np.array([[0.0], [1.0], [-1.0], [2.0], [-2.0], [3.0], [-3.0], [4.0]])
        nb = select_neighbors(x, np.ones(8), 2)
        assert nb[nb[:, 0] == 0, 1].tolist() == [1, 2]

    def test_clamp(self, rng):
        x = rng.normal(size=(5, 2))
        with pytest.warns(PacmapWarning, match="clamping"):
            nb = select_neighbors(x, np.ones(5), 10)
        for i in range(5):
            assert sorted(nb[nb[:, 0] == i, 1]) == [j for j in range(5) if j != i]


class TestMidNear:
    def test_second_order_statistic(self):
        dists = [3, 1, 4, 1.5, 9, 2.6]
        x = np.array([[0.0]] + [[d] for d in dists])
        mn = sample_mid_near(x, 3, seed=7)
        # anchor 0 sees all six others on every draw
        assert set(x[mn[mn[:, 0] == 0, 1], 0]) == {1.5}

    def test_deterministic(self, rng):
        x = rng.normal(size=(50, 3))
        np.testing.assert_array_equal(sample_mid_near(x, 5, 3), sample_mid_near(x, 5, 3))
        assert not np.array_equal(sample_mid_near(x, 5, 3), sample_mid_near(x, 5, 4))

    def test_order_statistic_monte_carlo(self):
        x = np.random.default_rng(0).uniform(size=(100, 2))
        mn = sample_mid_near(x, 100, seed=1)
        d = cdist(x, x)
        np.fill_diagonal(d, -1.0)
        ranks = np.argsort(np.argsort(d, axis=1), axis=1) - 1  # 0-based among the 99 others
        r = ranks[mn[:, 0], mn[:, 1]] + 1  # 1-based
        assert r.size == 10_000
        assert np.mean(r) < 49
        # Monte-Carlo oracle: 2nd smallest of 6 distinct ranks drawn from 1..99
        sim = np.random.default_rng(99)
        draws = np.sort(np.array([sim.choice(99, size=6, replace=False) for _ in range(20_000)]), axis=1)
        oracle = draws[:, 1].mean() + 1
        assert abs(np.mean(r) - oracle) / oracle < 0.02

    def test_small_n(self, rng):
        x = rng.normal(size=(5, 2))
        with pytest.warns(PacmapWarning, match="mid-near"):
            mn = sample_mid_near(x, 2, 0)
        assert mn.shape == (10, 2)
        assert np.all(mn[:, 0] != mn[:, 1])


class TestFurther:
    def test_forced_set(self, rng):
        x = rng.normal(size=(5, 2))
        nb = select_neighbors(x, compute_sigmas_quiet(x), 2)
        fp = sample_further(x, nb, 2, 0)
        for i in range(5):
            others = set(range(5)) - {i} - set(nb[nb[:, 0] == i, 1])
            assert set(fp[fp[:, 0] == i, 1]) == others

    def test_never_hits_neighbors(self):
        for seed in range(100):
            x = np.random.default_rng(seed).normal(size=(30, 3))
            ps = build_pair_set(x, n_nb=10, fp_ratio=1.5, seed=seed)
            nb = set(map(tuple, ps.nb.tolist()))
            assert not nb & set(map(tuple, ps.fp.tolist()))
            assert np.all(ps.fp[:, 0] != ps.fp[:, 1])

    def test_uniform_over_eligible(self):
        from scipy.stats import chisquare, norm

        n, n_fp = 200, 20
        exclude = {0} | set(range(1, 11))
        counts = np.zeros(n, dtype=np.int64)
        for s in range(2500):
            counts[_draw_distinct(_anchor_rng(s, 2, 0), n, exclude, n_fp)] += 1
        assert counts.sum() == 50_000
        assert counts[list(exclude)].sum() == 0
        elig = np.array(sorted(set(range(n)) - exclude))
        p = n_fp / len(elig)
        mean, sd = 2500 * p, np.sqrt(2500 * p * (1 - p))
        z = np.abs(counts[elig] - mean) / sd
        # 189 cells: a handful past 3 sigma is expected, none past the
        # Bonferroni-corrected bound
        assert np.sum(z > 3) <= 3
        assert z.max() < norm.isf(0.0027 / 2 / len(elig))
        assert chisquare(counts[elig]).pvalue > 1e-3

    def test_too_few_eligible(self, rng):
        x = rng.normal(size=(6, 2))
        nb = np.array([[i, (i + 1) % 6] for i in range(6)])
        with pytest.warns(PacmapWarning, match="fewer than"):
            fp = sample_further(x, nb, 10, 0)
        assert len(fp) == 6 * 4


def compute_sigmas_quiet(x):
    with pytest.warns(PacmapWarning):
        return compute_sigmas(x)


class TestBuild:
    def test_default_counts(self, rng):
        x = rng.normal(size=(100, 4))
        ps = build_pair_set(x, seed=0)
        assert (ps.n_nb, ps.n_mn, ps.n_fp) == (10, 5, 20)
        assert ps.nb.shape == (1000, 2) and ps.mn.shape == (500, 2) and ps.fp.shape == (2000, 2)

    def test_floor_counts(self):
        assert pair_counts(4, 0.6, 1.3) == (4, 2, 5)
        assert pair_counts(10, 0.5, 2.0) == (10, 5, 20)
        assert pair_counts(100, 0.29, 0.07) == (100, 29, 7)

    def test_no_mid_near(self, rng):
        ps = build_pair_set(rng.normal(size=(40, 3)), mn_ratio=0.0, seed=1)
        assert ps.mn.shape == (0, 2)

    def test_pure_function(self, rng):
        x = rng.normal(size=(120, 6))
        a = build_pair_set(x, seed=5)
        b = build_pair_set(x, seed=5, n_threads=3)
        assert a == b
        for k in ("nb", "mn", "fp"):
            assert getattr(a, k).tobytes() == getattr(b, k).tobytes()
        assert a != build_pair_set(x, seed=6)

    def test_grouped_by_anchor(self, rng):
        ps = build_pair_set(rng.normal(size=(60, 2)), seed=0)
        for arr, k in ((ps.nb, 10), (ps.mn, 5), (ps.fp, 20)):
            np.testing.assert_array_equal(arr[:, 0], np.repeat(np.arange(60), k))

    def test_bad_input(self):
        with pytest.raises(ValueError):
            build_pair_set(np.array([[0.0, np.nan], [1.0, 2.0]]))
        with pytest.raises(ValueError):
            build_pair_set(np.zeros((5, 2)), n_nb=0)

    def test_mid_near_sample_size(self):
        assert MID_NEAR_SAMPLE == 6
