import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexca.ca import CaSpec, Grid, SpaceTime, eca_rule, eca_spec, random_grid, simulate, single_cell
from complexca.complexity import (
    LOSS_FLOOR,
    average_precision,
    compressed_length,
    fit_lookup,
    joint_score,
    kmeans_1d,
    lookup_loss,
    nn_losses,
    nn_mu_tau,
)


def g1(cells, k=2):
    cells = np.asarray(cells, dtype=np.uint8)
    return Grid(CaSpec(cells.ndim, k, 1, cells.shape), cells)


class TestCompression:
    def test_zeros_compress_small(self):
        assert compressed_length(np.zeros(1024, dtype=np.uint8)) < 30

    def test_is_raw_deflate_level9(self, rng):
        cells = rng.integers(0, 2, 500).astype(np.uint8)
        ref = zlib.compressobj(9, zlib.DEFLATED, -15)
        assert compressed_length(cells) == len(ref.compress(cells.tobytes()) + ref.flush())

    def test_random_beats_constant(self, rng):
        assert compressed_length(rng.integers(0, 2, 2**16)) > compressed_length(np.ones(2**16))

    def test_rule_30_vs_rule_0(self):
        g0 = single_cell(eca_spec(512))
        c30 = compressed_length(simulate(g0, eca_rule(30), 512).final)
        c0 = compressed_length(simulate(g0, eca_rule(0), 512).final)
        assert c30 > c0

    def test_2d_row_major(self, rng):
        cells = rng.integers(0, 2, (16, 16))
        assert compressed_length(g1(cells)) == compressed_length(cells.reshape(-1))


class TestJoint:
    def test_identical_structured(self):
        g = g1(np.tile([0, 1, 1, 0, 1, 0, 0, 0], 128))
        assert joint_score(g, g) > 1

    def test_independent_random(self, rng):
        # 0/1 bytes still compress 8x; full-byte noise keeps both halves incompressible
        spec = CaSpec(1, 256, 1, (2**15,))
        a = Grid(spec, rng.integers(0, 256, 2**15))
        b = Grid(spec, rng.integers(0, 256, 2**15))
        assert joint_score(a, b) == pytest.approx(1.0, abs=0.05)

    def test_zeros(self):
        z = g1(np.zeros(4096))
        assert joint_score(z, z) >= 1

    def test_spec_mismatch(self):
        with pytest.raises(ValueError):
            joint_score(g1(np.zeros(8)), g1(np.zeros(9)))

    def test_nearly_symmetric(self, rng):
        st_ = simulate(random_grid(eca_spec(1024), rng), eca_rule(110), 60)
        a, b = st_[40], st_[60]
        assert abs(joint_score(a, b) - joint_score(b, a)) / joint_score(a, b) < 0.05


class TestKmeans:
    def test_two_groups(self):
        labels, centers = kmeans_1d([0, 0, 10, 10], 2)
        assert centers.tolist() == [0.0, 10.0] and labels.tolist() == [0, 0, 1, 1]

    def test_single_cluster_mean(self):
        _, centers = kmeans_1d([1.0, 2.0, 6.0], 1)
        assert centers[0] == pytest.approx(3.0)

    def test_too_many_clusters(self):
        with pytest.raises(ValueError):
            kmeans_1d([1, 1, 2], 3)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=4, max_size=40), st.integers(1, 4))
    def test_labels_ordered_by_center(self, values, k):
        if len(set(values)) < k:
            return
        labels, centers = kmeans_1d(values, k)
        assert np.all(np.diff(centers) > 0)
        # each value sits with its nearest center
        v = np.asarray(values, dtype=float)
        assert np.array_equal(np.abs(v[:, None] - centers).argmin(axis=1), labels)


class TestLookup:
    def test_constant_frame(self):
        m = fit_lookup(g1(np.zeros(32)), 1)
        assert len(m.table) == 1
        (counts,) = m.table.values()
        assert counts.tolist() == [32, 0]

    def test_alternating(self):
        m = fit_lookup(g1(np.tile([0, 1], 16)), 1)
        assert len(m.table) == 2
        assert all(sorted(c.tolist()) == [0, 16] for c in m.table.values())

    def test_count_conservation_2d(self, rng):
        g = g1(rng.integers(0, 2, (20, 30)))
        m = fit_lookup(g, 1)
        assert sum(int(c.sum()) for c in m.table.values()) == 600

    def test_deterministic_frame_zero_loss(self):
        g = g1(np.tile([0, 0, 1], 30))
        assert lookup_loss(fit_lookup(g, 1), g) == 0.0

    def test_uniform_entropy_limit(self):
        rng = np.random.Generator(np.random.Philox(0))
        g = g1(rng.integers(0, 2, 10**5))
        assert lookup_loss(fit_lookup(g, 1), g) == pytest.approx(math.log(2), abs=0.01)

    def test_unseen_neighborhoods(self):
        m = fit_lookup(g1(np.zeros(16)), 1)
        assert lookup_loss(m, g1(np.ones(16))) == pytest.approx(math.log(2), abs=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(0, 2), min_size=5, max_size=60))
    def test_nonnegative(self, cells):
        g = g1(cells, k=3)
        assert lookup_loss(fit_lookup(g, 2), g) >= 0.0

    def test_radius_validated(self):
        with pytest.raises(ValueError):
            fit_lookup(g1(np.zeros(8)), 0)


class TestNeural:
    def test_static_rule_is_one(self, rng):
        st_ = simulate(random_grid(eca_spec(128), rng), eca_rule(204), 20)
        assert nn_mu_tau(st_, 10, 5) == 1.0

    def test_rule_0_floored(self, rng):
        st_ = simulate(random_grid(eca_spec(128), rng), eca_rule(0), 20)
        assert nn_mu_tau(st_, 10, 5) == pytest.approx(1.0, abs=0.05)

    def test_bounds_checked(self, rng):
        st_ = simulate(random_grid(eca_spec(32), rng), eca_rule(30), 5)
        with pytest.raises(ValueError):
            nn_mu_tau(st_, 4, 2)

    def test_seed_deterministic(self, rng):
        st_ = simulate(random_grid(eca_spec(128), rng), eca_rule(110), 30)
        assert nn_losses(st_, 20, 10) == nn_losses(st_, 20, 10)

    def test_infinite_sentinel(self):
        # frame T is noise, frame T+tau is constant: the second loss can vanish only if predicted perfectly
        data = np.zeros((3, 64), dtype=np.uint8)
        data[0] = np.random.Generator(np.random.Philox(1)).integers(0, 2, 64)
        st_ = SpaceTime(eca_spec(64), data)
        l_t, l_tt = nn_losses(st_, 0, 2)
        mu = nn_mu_tau(st_, 0, 2)
        if l_tt < LOSS_FLOOR:
            assert mu == math.inf
        else:
            assert mu == pytest.approx(max(l_t, LOSS_FLOOR) / l_tt)


class TestAveragePrecision:
    def test_hand_example(self):
        # ranking: 1, 0, 1, 0 -> (1/1 + 2/3) / 2
        assert average_precision([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == pytest.approx(5 / 6)

    def test_perfect_ranking(self):
        assert average_precision([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0

    def test_no_positives(self):
        with pytest.raises(ValueError):
            average_precision([1, 2], [0, 0])
