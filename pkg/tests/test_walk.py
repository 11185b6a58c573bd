from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency, chisquare

from idla import (
    Cluster,
    InvalidWidth,
    RngFamily,
    RngStream,
    Site,
    StartVacant,
    coupled_settle_pair,
    exact_exit_distribution,
    precompute_return_distribution,
    sample_vertical_hitting_time,
    settle_samples,
    srw_step,
    walk_until_settle,
)
from idla.lattice import Grid
from idla.oracle import level_kernel, lift_to_level
from idla.rng import LANE_MISC
from idla.statistics import g_test
from idla.walk import hitting_kernel, sample_directions, sample_horizontal_gaps, sample_tau1_batch


def _hist(arr, n):
    return np.bincount(arr[:, 0], minlength=n)


class TestReturnDistribution:
    def test_n3_matches_linear_solve(self):
        rd = precompute_return_distribution(3)
        oracle = np.asarray(level_kernel(3, -1, 200))[0]
        assert np.allclose(rd.probs, oracle, atol=1e-6)
        assert rd[0] == pytest.approx(0.47247, abs=5e-6)
        assert rd[1] == pytest.approx(0.26376, abs=5e-6)

    @given(st.integers(3, 200))
    @settings(max_examples=40)
    def test_normalised_symmetric_nonnegative(self, n):
        p = precompute_return_distribution(n).probs
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p >= 0)
        assert np.allclose(p[1:], p[1:][::-1], atol=1e-15)

    @pytest.mark.parametrize("n", [3, 4, 7, 12])
    def test_against_oracle_for_several_widths(self, n):
        oracle = np.asarray(level_kernel(n, -1, 300))[0]
        assert np.abs(precompute_return_distribution(n).probs - oracle).max() < 1e-9

    @pytest.mark.parametrize("n,d", [(3, 2), (5, 3), (8, 1)])
    def test_hitting_kernel_against_oracle(self, n, d):
        oracle = lift_to_level(n, 0, -d, 0, 300)
        assert np.abs(hitting_kernel(n, d) - oracle).max() < 1e-9

    def test_invalid_width(self):
        with pytest.raises(InvalidWidth):
            precompute_return_distribution(2)

    def test_corrupted_copy_is_different(self):
        rd = precompute_return_distribution(5)
        bad = rd.corrupted(0.1)
        assert abs(bad.probs.sum() - 1) < 1e-12
        assert bad.probs[0] > rd.probs[0]


class TestStep:
    def test_neighbours(self):
        r = RngStream(0)
        seen = {srw_step(Site(0, 0), r, 4) for _ in range(200)}
        assert seen == {(1, 0), (3, 0), (0, 1), (0, -1)}

    def test_wraparound(self):
        r = RngStream(1)
        for _ in range(200):
            s = srw_step(Site(3, 0), r, 4)
            assert 0 <= s.x < 4
        assert (0, 0) in {srw_step(Site(3, 0), r, 4) for _ in range(200)}

    def test_direction_frequencies(self):
        d = sample_directions(10**6, RngStream(2))
        freq = np.bincount(d, minlength=4) / d.size
        assert np.all(np.abs(freq - 0.25) < 0.004)


class TestSettle:
    def test_vacant_start(self):
        with pytest.raises(StartVacant):
            walk_until_settle(Cluster.flat(4), (0, 1), RngStream(0))

    def test_uniform_start_settles_uniformly(self):
        out = settle_samples(Cluster.flat(4), None, 10**5, RngFamily(1, 0, LANE_MISC).key)
        assert np.all(out[:, 1] == 1)
        _, p = chisquare(_hist(out, 4))
        assert p > 0.01

    def test_flat_n3_matches_oracle(self):
        a = Cluster.flat(3)
        exact = exact_exit_distribution(a, (0, 0))
        assert exact[(0, 1)] == pytest.approx(precompute_return_distribution(3)[0], abs=1e-9)
        out = settle_samples(a, (0, 0), 10**5, RngFamily(2, 0, LANE_MISC).key)
        obs = {(0, 1): 0, (1, 1): 0, (2, 1): 0}
        for x in out[:, 0]:
            obs[(int(x), 1)] += 1
        _, p, _ = g_test(obs, exact)
        assert p > 1e-3

    def test_contraction_on_off_agree(self):
        a = Cluster.from_sites(3, [(0, 1), (1, 1)])
        on = settle_samples(a, (0, 1), 10**5, RngFamily(3, 0, LANE_MISC).key, contract=True)
        off = settle_samples(a, (0, 1), 10**5, RngFamily(3, 1, LANE_MISC).key, contract=False, floor=-200)
        keys = sorted({tuple(s) for s in on.tolist()} | {tuple(s) for s in off.tolist()})
        table = np.array([[sum(1 for s in arr.tolist() if tuple(s) == k) for k in keys] for arr in (on, off)])
        _, p, _, _ = chi2_contingency(table)
        assert p > 1e-3

    def test_floor_must_lie_below_start(self):
        with pytest.raises(ValueError):
            settle_samples(Cluster.flat(3), (0, -5), 10, RngFamily(0).key, contract=False, floor=-2)

    def test_single_walk_matches_batch_stream(self):
        a = Cluster.from_sites(5, [(0, 1), (1, 1), (1, 2)])
        fam = RngFamily(4, 0, LANE_MISC)
        batch = settle_samples(a, (1, 2), 20, fam.key)
        singles = [walk_until_settle(a, (1, 2), fam.stream(i)) for i in range(20)]
        assert [tuple(s) for s in batch.tolist()] == [tuple(s) for s in singles]

    @given(st.integers(0, 10**6))
    @settings(max_examples=30)
    def test_settle_site_is_vacant_boundary(self, seed):
        a = Cluster.from_sites(4, [(0, 1), (1, 1), (1, 2), (3, 1)])
        s = walk_until_settle(a, (1, 2), RngStream(seed))
        assert s in a.vacant_boundary()


class TestHittingTimes:
    def test_mgf(self):
        tau = sample_tau1_batch(10**6, RngStream(7))
        assert abs(np.mean(0.8 ** tau.astype(float)) - 0.5) < 0.005
        assert np.all(tau % 2 == 1)

    def test_gap_law(self):
        g = sample_horizontal_gaps(10**6, RngStream(8))
        assert abs(np.mean(np.exp2(-g.astype(float))) - 1 / 3) < 0.003
        assert g.min() >= 1

    @given(st.integers(1, 6), st.integers(0, 10**6))
    @settings(max_examples=50)
    def test_hitting_time_shape(self, levels, seed):
        total, vertical = sample_vertical_hitting_time(levels, RngStream(seed))
        assert vertical >= levels
        assert (vertical - levels) % 2 == 0
        assert total >= vertical

    def test_bad_level_count(self):
        with pytest.raises(ValueError):
            sample_vertical_hitting_time(0, RngStream(0))


class TestCoupledPair:
    def test_same_start_meets(self):
        a = Cluster.from_sites(5, [(0, 1), (1, 1)])
        for i in range(50):
            s1, s2, met = coupled_settle_pair(a, a, (1, 1), (1, 1), RngStream(i))
            assert met and s1 == s2

    def test_vacant_start(self):
        with pytest.raises(StartVacant):
            coupled_settle_pair(Cluster.flat(3), Cluster.flat(3), (0, 0), (0, 1), RngStream(0))

    def test_marginal_matches_oracle(self):
        a = Cluster.flat(3)
        g = Grid.from_cluster(a, headroom=8)
        exact = exact_exit_distribution(a, (0, 0))
        obs = {}
        for i in range(10**5):
            s1, _, _ = coupled_settle_pair(g, g, (0, 0), (2, -1), RngStream(12, (0, i)))
            obs[s1] = obs.get(s1, 0) + 1
        _, p, _ = g_test(obs, exact)
        assert p > 1e-3

    def test_second_marginal_matches_oracle(self):
        a = Cluster.from_sites(3, [(0, 1)])
        g = Grid.from_cluster(a, headroom=8)
        exact = exact_exit_distribution(a, (1, -1))
        obs = {}
        for i in range(5 * 10**4):
            _, s2, _ = coupled_settle_pair(g, g, (0, 1), (1, -1), RngStream(13, (0, i)))
            obs[s2] = obs.get(s2, 0) + 1
        _, p, _ = g_test(obs, exact)
        assert p > 1e-3

    def test_deep_identical_clusters_meet(self):
        g = Grid.from_cluster(Cluster.flat(4, 40), headroom=8)
        met = sum(coupled_settle_pair(g, g, (0, 0), (2, 0), RngStream(14, (0, i)))[2] for i in range(2000))
        assert met / 2000 >= 0.99

    def test_met_pair_settles_together_in_identical_clusters(self):
        g = Grid.from_cluster(Cluster.flat(6, 10), headroom=8)
        for i in range(200):
            s1, s2, met = coupled_settle_pair(g, g, (0, 0), (3, 4), RngStream(15, (0, i)))
            if met:
                assert s1 == s2
