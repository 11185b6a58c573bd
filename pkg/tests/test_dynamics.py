from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare, ks_2samp

from idla import (
    CardinalityMismatch,
    ChainState,
    Cluster,
    RngFamily,
    add_particle,
    exact_cluster_distribution,
    exact_smash_distribution,
    imbalance,
    run_chain,
    run_idla,
    sample_final_clusters,
    shifted_step,
    smash_sum,
    water_level_coupling,
)
from idla.rng import LANE_SMASH
from idla.statistics import g_test

from conftest import clusters


class TestChain:
    def test_zero_steps(self):
        a = Cluster.from_sites(5, [(0, 1), (2, 1)])
        assert run_idla(a, 0, 3) == a

    @given(clusters(base=0, max_rows=3), st.integers(0, 200), st.integers(0, 1000))
    @settings(max_examples=30)
    def test_cardinality_grows_by_t(self, a0, t, seed):
        a = run_idla(a0, t, seed)
        assert a.cardinality_above(0) == a0.cardinality_above(0) + t

    def test_monotone_via_observer(self):
        seen = []

        def obs(step, site, grid):
            c = grid.to_cluster()
            assert c.is_occupied(site)
            if seen:
                assert seen[-1].issubset(c)
            seen.append(c)

        run_idla(Cluster.flat(6), 60, 5, observer=obs)
        assert len(seen) == 60

    def test_observer_and_bulk_paths_agree(self):
        a = run_idla(Cluster.flat(7), 150, 9)
        b = run_idla(Cluster.flat(7), 150, 9, observer=lambda *_: None)
        assert a == b

    def test_chunking_does_not_change_trajectory(self):
        s1 = ChainState(Cluster.flat(8), 21)
        s1.advance(500)
        s2 = ChainState(Cluster.flat(8), 21)
        for k in (1, 7, 92, 400):
            s2.advance(k)
        assert s1.cluster == s2.cluster

    def test_first_particle_uniform(self):
        counts = np.zeros(4, int)
        for i in range(20000):
            s = add_particle(ChainState(Cluster.flat(4), RngFamily(2, i)))
            assert s.y == 1
            counts[s.x] += 1
        assert chisquare(counts)[1] > 0.01

    def test_two_particles_match_oracle(self):
        exact = exact_cluster_distribution(Cluster.flat(3), 2)
        obs = sample_final_clusters(Cluster.flat(3), 2, 10**5, seed=4)
        assert g_test(obs, exact)[1] > 1e-3

    def test_grid_grows_on_demand(self):
        st_ = ChainState(Cluster.flat(3), 1)
        st_.advance(3000)
        assert st_.cluster.cardinality_above(0) == 3000

    def test_run_chain_checkpoints(self):
        hits = []
        run_chain(ChainState(Cluster.flat(5), 3), [0, 10, 25], lambda t, s: hits.append((t, s.t)))
        assert hits == [(0, 0), (10, 10), (25, 25)]
        with pytest.raises(ValueError):
            run_chain(ChainState(Cluster.flat(5), 3), [10, 5], lambda t, s: None)


class TestShifted:
    def test_base_zero_after_every_step(self):
        state = ChainState(Cluster.flat(3), 8, shifted=True)
        total_shift = 0
        for _ in range(300):
            shifted_step(state)
            assert state.cluster.max_filled_level() == 0
        total_shift = state.cumulative_shift
        # cardinality bookkeeping: the unshifted cluster has the same shape above k
        plain = run_idla(Cluster.flat(3), 0, 8)
        assert plain == Cluster.flat(3)
        assert state.cluster.cardinality_above(0) + 3 * total_shift == 300

    def test_matches_oracle(self):
        for t in (3, 4):
            exact = exact_cluster_distribution(Cluster.flat(3), t, shifted=True)
            obs = sample_final_clusters(Cluster.flat(3), t, 10**5, seed=31 + t, shifted=True)
            assert g_test(obs, exact)[1] > 1e-3

    def test_requires_shifted_state(self):
        with pytest.raises(ValueError):
            shifted_step(ChainState(Cluster.flat(3), 0))


class TestSmash:
    def test_empty(self):
        a = Cluster.from_sites(4, [(1, 1)])
        assert smash_sum(a, [], 0) == a

    def test_vacant_point_joins(self):
        a = Cluster.flat(4)
        assert smash_sum(a, [(2, 1)], 0) == a.occupy((2, 1))

    def test_gapped_point_joins(self):
        a = Cluster.flat(4)
        b = smash_sum(a, [(2, 3)], 0)
        assert b.is_occupied((2, 3)) and b.cardinality_above(0) == 1

    def test_order_invariance(self):
        a = Cluster.flat(3)
        pts = [(0, 0), (1, 1)]
        exact = exact_smash_distribution(a, pts)
        exact_rev = exact_smash_distribution(a, pts[::-1])
        assert exact.keys() == exact_rev.keys()
        assert all(abs(exact[k] - exact_rev[k]) < 1e-12 for k in exact)
        for order, base in ((pts, 0), (pts[::-1], 10**6)):
            obs = {}
            for r in range(10**5):
                c = smash_sum(a, order, RngFamily(6, base + r, LANE_SMASH))
                obs[c] = obs.get(c, 0) + 1
            assert g_test(obs, exact)[1] > 1e-3


class TestWaterLevel:
    def test_identical_starts_couple(self):
        a0 = run_idla(Cluster.flat(8), 20, 1)
        out = water_level_coupling(a0, a0, 200, 2)
        assert out.coupled and out.cluster1 == out.cluster2
        assert out.pairs_met == out.pairs_total == 20

    def test_empty_starts_return_water(self):
        out = water_level_coupling(Cluster.flat(8), Cluster.flat(8), 100, 3)
        assert out.cluster1 == out.cluster2 == run_idla(Cluster.flat(8), 100, RngFamily(3).sub(3))
        assert out.pairs_total == 0

    def test_cardinality_mismatch(self):
        with pytest.raises(CardinalityMismatch):
            water_level_coupling(Cluster.from_sites(4, [(0, 1)]), Cluster.flat(4), 10, 0)

    def test_sizes(self):
        a0 = Cluster.from_sites(6, [(0, 1), (1, 1), (1, 2)])
        b0 = Cluster.from_sites(6, [(3, 1), (4, 1), (5, 1)])
        out = water_level_coupling(a0, b0, 50, 4)
        assert out.cluster1.cardinality_above(0) == out.cluster2.cardinality_above(0) == 53
        assert out.pairs_total == 3

    def test_marginal_law(self):
        # output 1 must have the law of plain IDLA from A0 run for t_water steps
        n, t_water = 16, 4 * 16 * 16
        a0 = Cluster.from_sites(n, [(x, 1) for x in range(8)] + [(x, 2) for x in range(4)] + [(0, 3)])
        b0 = Cluster.from_sites(n, [(x, 1) for x in range(5, 15)] + [(9, 2), (10, 2), (11, 2)])
        assert len(a0) == len(b0)
        reps = 2000
        coupled_h, coupled_u, plain_h, plain_u = [], [], [], []
        for r in range(reps):
            out = water_level_coupling(a0, b0, t_water, RngFamily(50, r))
            coupled_h.append(float(out.cluster1.excess_height()))
            coupled_u.append(imbalance(out.cluster1))
            p = run_idla(a0, t_water, RngFamily(51, r))
            plain_h.append(float(p.excess_height()))
            plain_u.append(imbalance(p))
        assert ks_2samp(coupled_h, plain_h).pvalue > 1e-3
        assert ks_2samp(coupled_u, plain_u).pvalue > 1e-3
