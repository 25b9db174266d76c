"""Spatial pooler: potential pools, permanences, overlap, inhibition, learning, boosting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from memhtm.backend import IdealBackend
from memhtm.core import HtmConfig, RngStream, Topology
from memhtm.spatial_pooler import (ActivityStats, PermanenceMatrix, PotentialMap, SpatialPooler, inhibit,
                                   init_permanence, init_potential, learn, neighborhood, neighborhood_deviation, neighborhood_mean,
                                   overlap, update_activity, update_boost, winner_quota)


def brute_percentile(o, topo, s, theta_s):
    """Rank rule written out per column: fewer than ceil(s*m) pool members
    beat column i (higher overlap, or equal overlap and lower index)."""
    n = len(o)
    out = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        pool = [i] + list(topo.neighborhood(i))
        k = math.ceil(round(s * len(pool), 9))
        beaten = sum(1 for j in pool if o[j] > o[i] or (o[j] == o[i] and j < i))
        out[i] = int(beaten < k and o[i] >= theta_s)
    return out


def global_topo(n):
    return Topology.line(n, inhibition_radius=float(n + 1), n_inputs=n + 1)


class TestPotential:
    def test_full_fraction_takes_whole_box(self):
        topo = Topology(6, 6, 3, 3, hypercube_edge=3, potential_fraction=1.0)
        pm = init_potential(topo, RngStream(0))
        for i in range(topo.column_count):
            assert pm.pool(i).tolist() == topo.hypercube(i).tolist()

    def test_unit_box_is_centre(self):
        topo = Topology(4, 4, 4, 4, hypercube_edge=1)
        pm = init_potential(topo, RngStream(0))
        assert all(pm.pool(i).tolist() == [i] for i in range(16))

    def test_pool_inside_box(self):
        topo = Topology(8, 8, 4, 4, hypercube_edge=3, potential_fraction=0.6)
        pm = init_potential(topo, RngStream(3))
        for i in range(topo.column_count):
            assert set(pm.pool(i)) <= set(topo.hypercube(i))

    def test_half_fraction_mean_pool_size(self):
        topo = Topology(3, 3, 1, 1, hypercube_edge=3, potential_fraction=0.5)
        assert topo.hypercube(0).size == 9
        sizes = [init_potential(topo, RngStream(seed)).pool(0).size for seed in range(10_000)]
        assert 4.3 <= np.mean(sizes) <= 4.7


class TestPermanence:
    def test_zero_off_pool_and_uniform_on_pool(self):
        topo = Topology(8, 8, 4, 4, hypercube_edge=3, potential_fraction=0.5)
        pot = init_potential(topo, RngStream(1))
        pm = init_permanence(pot, RngStream(1), 0.5)
        assert np.all(pm.permanence[~pot.mask] == 0)
        assert np.all(pm.connected[~pot.mask] == 0)
        vals = pm.permanence[pot.mask]
        assert np.all((vals >= 0) & (vals < 1))

    def test_connected_fraction_follows_threshold_direction(self):
        topo = Topology(20, 20, 20, 20, hypercube_edge=5)
        pot = init_potential(topo, RngStream(2))
        pm = init_permanence(pot, RngStream(2), 0.4)
        frac = pm.connected[pot.mask].mean()
        assert abs(frac - 0.6) < 0.02

    def test_zero_threshold_connects_all_potential(self):
        topo = Topology(6, 6, 6, 6, hypercube_edge=3, potential_fraction=0.7)
        pot = init_potential(topo, RngStream(4))
        pm = init_permanence(pot, RngStream(4), 0.0)
        np.testing.assert_array_equal(pm.connected.astype(bool), pot.mask)

    def test_connected_mask_definition(self):
        perm = np.array([[0.2, 0.5, 0.7, 0.0]])
        pot = np.array([[True, True, True, False]])
        pm = PermanenceMatrix(perm, pot, 0.5)
        assert pm.connected.tolist() == [[0, 1, 1, 0]]


class TestOverlap:
    def _pm(self, row):
        row = np.array([row], dtype=float)
        return PermanenceMatrix(row, np.ones_like(row, dtype=bool), 0.5)

    def test_hand_dot_product(self):
        pm = self._pm([1, 0, 1, 1])
        assert overlap(pm, np.array([1, 1, 0, 1]), np.ones(1)).tolist() == [2.0]

    def test_boost_scales(self):
        pm = self._pm([1, 0, 1, 1])
        assert overlap(pm, np.array([1, 1, 0, 1]), np.array([1.5])).tolist() == [3.0]

    def test_zero_input(self):
        pm = self._pm([1, 0, 1, 1])
        assert overlap(pm, np.zeros(4, dtype=int), np.ones(1)).tolist() == [0.0]

    def test_accepts_activity_stats(self):
        pm = self._pm([1, 1, 1, 1])
        stats = ActivityStats(np.zeros(1), np.array([0.5]), 10, 1.0)
        assert overlap(pm, np.ones(4, dtype=int), stats).tolist() == [2.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            overlap(self._pm([1, 0, 1, 1]), np.ones(3), np.ones(1))

    def test_backend_product_matches(self):
        rng = np.random.default_rng(0)
        perm = rng.random((6, 10))
        pm = PermanenceMatrix(perm, np.ones_like(perm, dtype=bool), 0.5)
        z = rng.integers(0, 2, 10)
        np.testing.assert_allclose(overlap(pm, z, np.ones(6), backend=IdealBackend()),
                                   pm.connected @ z, rtol=0, atol=0)


class TestInhibit:
    def test_top_one_of_four(self):
        active = inhibit(np.array([5, 3, 9, 1.0]), global_topo(4), 0.25, 2)
        assert active.tolist() == [0, 0, 1, 0]

    def test_stimulus_threshold_dominates(self):
        assert inhibit(np.array([5, 3, 9, 1.0]), global_topo(4), 0.25, 10).sum() == 0

    def test_ties_go_to_lowest_index(self):
        active = inhibit(np.full(4, 3.0), global_topo(4), 0.25, 1)
        assert active.tolist() == [1, 0, 0, 0]

    @pytest.mark.parametrize("n", [4, 16, 100])
    @pytest.mark.parametrize("s", [0.02, 0.25])
    def test_exact_count_global(self, n, s):
        rng = np.random.default_rng(n)
        o = rng.permutation(n).astype(float)
        assert inhibit(o, global_topo(n), s, 0).sum() == math.ceil(s * n)

    def test_quota_guards_float_noise(self):
        assert winner_quota(0.1, 30) == 3
        assert winner_quota(0.02, 100) == 2
        assert winner_quota(0.25, 5) == 2

    def test_matches_brute_force_percentile(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            topo = global_topo(n)
            s = float(rng.choice([0.1, 0.2, 0.25, 0.5]))
            o = rng.integers(0, 6, n).astype(float)
            theta = float(rng.integers(0, 3))
            np.testing.assert_array_equal(inhibit(o, topo, s, theta), brute_percentile(o, topo, s, theta))

    def test_local_agrees_with_rank_rule_when_caps_hold(self):
        rng = np.random.default_rng(9)
        checked = 0
        for _ in range(300):
            topo = Topology(1, 1, 4, 2, inhibition_radius=float(rng.choice([1.0, 1.5, 2.0])))
            o = rng.integers(0, 5, 8).astype(float)
            brute = brute_percentile(o, topo, 0.25, 0)
            pool = topo.neighbor_mask | np.eye(8, dtype=bool)
            caps = winner_quota(0.25, pool.sum(1))
            if np.all((pool & brute.astype(bool)[None, :]).sum(1) <= caps):
                np.testing.assert_array_equal(inhibit(o, topo, 0.25, 0), brute)
                checked += 1
        assert checked > 100

    def test_local_cap_never_exceeded(self):
        rng = np.random.default_rng(77)
        for _ in range(1000):
            w, h = int(rng.integers(2, 7)), int(rng.integers(1, 5))
            topo = Topology(1, 1, w, h, inhibition_radius=float(rng.uniform(0.5, 3.0)))
            s = float(rng.uniform(0.05, 0.6))
            o = rng.integers(0, 4, w * h).astype(float)
            active = inhibit(o, topo, s, 0).astype(bool)
            pool = topo.neighbor_mask | np.eye(w * h, dtype=bool)
            assert np.all((pool & active[None, :]).sum(1) <= winner_quota(s, pool.sum(1)))

    def test_winners_beat_losers_in_own_pool(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            topo = Topology(1, 1, 5, 5, inhibition_radius=2.0)
            o = rng.random(25)
            active = inhibit(o, topo, 0.2, 0).astype(bool)
            for i in np.flatnonzero(active):
                # every winner ranks inside the top quota of its own pool
                pool = np.append(topo.neighborhood(i), i)
                assert o[i] >= np.sort(o[pool])[::-1][winner_quota(0.2, pool.size) - 1] - 1e-12

    @settings(max_examples=80, deadline=None)
    @given(o=arrays(np.float64, st.integers(2, 12), elements=st.floats(0, 10)), c=st.floats(0.1, 10))
    def test_common_scale_leaves_active_set(self, o, c):
        topo = global_topo(o.size)
        np.testing.assert_array_equal(inhibit(o, topo, 0.25, 0), inhibit(o * c, topo, 0.25, 0))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            inhibit(np.ones(3), global_topo(4), 0.25, 0)
        with pytest.raises(ValueError):
            inhibit(np.array([1.0, np.nan, 0, 0]), global_topo(4), 0.25, 0)

    def test_neighborhood_alias(self):
        topo = Topology(1, 1, 3, 3, inhibition_radius=1.5)
        assert neighborhood(4, topo).tolist() == topo.neighborhood(4).tolist()


class TestLearn:
    def _pm(self, perm, pot=None):
        perm = np.atleast_2d(np.array(perm, dtype=float))
        pot = np.ones_like(perm, dtype=bool) if pot is None else np.atleast_2d(pot)
        return PermanenceMatrix(perm, pot, 0.5)

    def test_no_active_columns_is_noop(self):
        pm = self._pm([[0.3, 0.6]])
        out = learn(pm, [1, 0], [0], 0.1, 0.1)
        np.testing.assert_array_equal(out.permanence, pm.permanence)

    def test_clamp_at_one(self):
        out = learn(self._pm([[0.99]]), [1], [1], 0.05, 0.1)
        assert out.permanence[0, 0] == 1.0

    def test_decrement(self):
        out = learn(self._pm([[0.50]]), [0], [1], 0.05, 0.1)
        assert out.permanence[0, 0] == pytest.approx(0.40, abs=1e-15)

    def test_only_active_columns_and_potential_synapses(self):
        pm = self._pm([[0.5, 0.5, 0.0], [0.5, 0.5, 0.5]], [[True, True, False], [True, True, True]])
        out = learn(pm, [1, 0, 1], [1, 0], 0.1, 0.2)
        np.testing.assert_allclose(out.permanence, [[0.6, 0.3, 0.0], [0.5, 0.5, 0.5]])

    def test_connected_mask_tracks_permanence(self):
        pm = self._pm([[0.45, 0.55]])
        out = learn(pm, [1, 0], [1], 0.1, 0.1)
        assert out.connected.tolist() == [[1, 0]]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            learn(self._pm([[0.5, 0.5]]), [1], [1], 0.1, 0.1)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), rp=st.floats(0.01, 0.99), rm=st.floats(0.01, 0.99))
    def test_bounds_hold_over_many_steps(self, seed, rp, rm):
        rng = np.random.default_rng(seed)
        pot = rng.random((5, 7)) < 0.7
        pm = PermanenceMatrix(np.where(pot, rng.random((5, 7)), 0.0), pot, 0.5)
        for _ in range(30):
            pm = learn(pm, rng.integers(0, 2, 7), rng.integers(0, 2, 5), rp, rm)
        assert pm.permanence.min() >= 0 and pm.permanence.max() <= 1
        assert np.all(pm.permanence[~pot] == 0)


class TestActivityAndBoost:
    def test_unit_window(self):
        st0 = ActivityStats(np.array([0.3, 0.9]), np.ones(2), 1, 1.0)
        np.testing.assert_array_equal(update_activity(st0, [1, 0]).mean_activity, [1.0, 0.0])

    def test_two_step_window(self):
        st0 = ActivityStats(np.array([0.5]), np.ones(1), 2, 1.0)
        assert update_activity(st0, [1]).mean_activity[0] == 0.75

    def test_thousand_step_closed_form(self):
        stats = ActivityStats.initial(1, 1000, 1.0)
        for _ in range(1000):
            stats = update_activity(stats, [1])
        expected = 1 - (999 / 1000) ** 1000
        assert stats.mean_activity[0] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.6323, abs=1e-4)

    def test_monotone_convergence(self):
        stats = ActivityStats(np.array([0.9]), np.ones(1), 7, 1.0)
        gaps = []
        for _ in range(50):
            stats = update_activity(stats, [0])
            gaps.append(abs(stats.mean_activity[0]))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_boost_equal_means_is_one(self):
        topo = Topology(1, 1, 3, 1, inhibition_radius=5.0)
        stats = update_boost(ActivityStats(np.full(3, 0.2), np.ones(3), 10, 3.0), topo)
        np.testing.assert_array_equal(stats.boost, np.ones(3))

    def test_eta_zero(self):
        topo = Topology(1, 1, 3, 1, inhibition_radius=5.0)
        stats = update_boost(ActivityStats(np.array([0.1, 0.5, 0.9]), np.ones(3), 10, 0.0), topo)
        np.testing.assert_array_equal(stats.boost, np.ones(3))

    def test_inverse_e(self):
        # column 0 sits 0.1 above the mean of its neighbors; eta = 10
        topo = Topology(1, 1, 3, 1, inhibition_radius=5.0)
        act = np.array([0.3, 0.2, 0.2])
        stats = update_boost(ActivityStats(act, np.ones(3), 10, 10.0), topo)
        assert abs(stats.boost[0] - math.exp(-1)) <= 1e-12

    def test_empty_neighborhood_boost_is_one(self):
        topo = Topology(1, 1, 3, 1, inhibition_radius=0.5)
        stats = update_boost(ActivityStats(np.array([0.1, 0.5, 0.9]), np.ones(3), 10, 5.0), topo)
        np.testing.assert_array_equal(stats.boost, np.ones(3))

    def test_neighborhood_mean_excludes_self(self):
        topo = Topology(1, 1, 3, 1, inhibition_radius=1.5)
        np.testing.assert_allclose(neighborhood_mean([1.0, 2.0, 4.0], topo), [2.0, 2.5, 2.0])

    def test_deviation_matches_mean_and_is_exact_for_equal_values(self):
        topo = Topology(1, 1, 6, 4, inhibition_radius=2.0)
        v = np.random.default_rng(0).random(24)
        np.testing.assert_allclose(neighborhood_deviation(v, topo), v - neighborhood_mean(v, topo), atol=1e-15)
        for value in np.random.default_rng(1).random(50):
            assert np.all(neighborhood_deviation(np.full(24, value), topo) == 0.0)


class TestSpatialPooler:
    def test_deterministic(self):
        topo = Topology(8, 8, 8, 8, hypercube_edge=3)
        cfg = HtmConfig(s=0.1, theta_s=1)
        rng = np.random.default_rng(0)
        inputs = rng.integers(0, 2, (20, 64))
        a = SpatialPooler(topo, cfg, seed=5)
        b = SpatialPooler(topo, cfg, seed=5)
        for z in inputs:
            np.testing.assert_array_equal(a.compute(z), b.compute(z))
        np.testing.assert_array_equal(a.permanences.permanence, b.permanences.permanence)

    def test_sparsity_and_bounds_during_training(self):
        topo = Topology(10, 10, 10, 10, hypercube_edge=5)
        cfg = HtmConfig(s=0.05, theta_s=1, T=20, eta=2.0)
        sp = SpatialPooler(topo, cfg, seed=1)
        rng = np.random.default_rng(2)
        pool = topo.neighbor_mask | np.eye(100, dtype=bool)
        caps = winner_quota(cfg.s, pool.sum(1))
        for _ in range(40):
            active = sp.compute(rng.integers(0, 2, 100)).astype(bool)
            assert np.all((pool & active[None, :]).sum(1) <= caps)
        p = sp.permanences.permanence
        assert p.min() >= 0 and p.max() <= 1
        assert np.all(sp.stats.boost > 0)

    def test_no_learning_leaves_state(self):
        topo = Topology(6, 6, 6, 6, hypercube_edge=3)
        sp = SpatialPooler(topo, HtmConfig(s=0.1, theta_s=0), seed=3)
        before = sp.permanences.permanence.copy()
        sp.compute(np.ones(36, dtype=int), learn_enabled=False)
        np.testing.assert_array_equal(sp.permanences.permanence, before)

    def test_potential_map_type(self):
        sp = SpatialPooler(Topology(4, 4, 4, 4, hypercube_edge=3), HtmConfig(), seed=0)
        assert isinstance(sp.potential, PotentialMap)
