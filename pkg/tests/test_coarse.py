import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexca.ca import CaSpec, Grid, SpaceTime, eca_rule, eca_spec, random_grid, simulate
from complexca.coarse import (
    block_histogram,
    block_view,
    coarse_grain_autoencoder,
    coarse_grain_histogram,
    coarse_grain_kmeans,
    dither,
    filter_eca,
    hamming_kmeans,
    local_average,
    partition_histogram,
    pyramid,
)
from complexca.tinynet import TrainConfig


def grid(cells, k=2):
    cells = np.asarray(cells, dtype=np.uint8)
    return Grid(CaSpec(cells.ndim, k, 1, cells.shape), cells)


def key(*cells):
    return bytes(cells)


class TestHistogram:
    def test_constant(self):
        h = block_histogram(grid(np.zeros((8, 8))), 2)
        assert h.configs == (bytes(4),) and h.probabilities.tolist() == [1.0]

    def test_checkerboard(self):
        cells = np.indices((8, 8)).sum(axis=0) % 2
        h = block_histogram(grid(cells), 2)
        assert len(h.configs) == 1 and h.total == 16

    def test_total_with_cropping(self, rng):
        h = block_histogram(grid(rng.integers(0, 2, (11, 13))), 3)
        assert h.total == 3 * 4

    def test_block_too_large(self):
        with pytest.raises(ValueError):
            block_histogram(grid(np.zeros((4, 4))), 5)

    def test_block_view_order(self):
        cells = np.arange(16).reshape(4, 4) % 2
        rows, shape = block_view(cells, 2)
        assert shape == (2, 2)
        assert rows[1].tolist() == [cells[0, 2], cells[0, 3], cells[1, 2], cells[1, 3]]


class TestPartition:
    def test_frequent_and_rare(self):
        cells = np.array([0, 0] * 9 + [1, 1])
        f = partition_histogram(block_histogram(grid(cells), 2), 2).f
        assert f[key(0, 0)] == 0 and f[key(1, 1)] == 1

    def test_uniform_16_blocks_split_evenly(self):
        blocks = [[(i >> s) & 1 for s in (3, 2, 1, 0)] for i in range(16)]
        f = partition_histogram(block_histogram(grid(np.concatenate(blocks)), 4), 2).f
        assert sorted(f.values()) == [0] * 8 + [1] * 8

    def test_single_block(self):
        f = partition_histogram(block_histogram(grid(np.zeros(12)), 3), 3).f
        assert set(f.values()) == {0}

    def test_k_out_validated(self):
        with pytest.raises(ValueError):
            partition_histogram(block_histogram(grid(np.zeros(8)), 2), 1)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=16, max_size=200), st.integers(2, 5))
    def test_monotone_in_rarity(self, cells, k_out):
        h = block_histogram(grid(cells), 2)
        f = partition_histogram(h, k_out).f
        p = dict(zip(h.configs, h.counts))
        top = max(h.configs, key=lambda c: (p[c], -int.from_bytes(c, "big")))
        assert f[top] == 0
        for a in h.configs:
            for b in h.configs:
                if p[a] < p[b]:
                    assert f[a] >= f[b]

    def test_surplus_states_unused(self):
        cells = np.array([0, 0] * 7 + [1, 1])
        f = partition_histogram(block_histogram(grid(cells), 2), 5).f
        assert len(set(f.values())) <= 2


class TestCoarseGrainHistogram:
    @pytest.mark.parametrize("dith", [False, True])
    def test_constant(self, dith):
        g = coarse_grain_histogram(grid(np.ones((12, 12))), 3, 3, dith)
        assert g.spec.shape == (4, 4) and not g.cells.any()

    @pytest.mark.parametrize("b,k_out", [(2, 2), (3, 4)])
    def test_anomaly_gets_max_state(self, b, k_out):
        cells = np.zeros((6 * b, 6 * b), dtype=np.uint8)
        cells[b:2 * b, b:2 * b] = 1
        g = coarse_grain_histogram(grid(cells), b, k_out)
        assert g.cells[1, 1] == k_out - 1
        assert int(np.count_nonzero(g.cells)) == 1

    def test_extents_floor(self, rng):
        g = coarse_grain_histogram(grid(rng.integers(0, 2, (17, 10))), 4, 2)
        assert g.spec.shape == (4, 2)

    def test_pyramid_halves(self, rng):
        levels = pyramid(grid(rng.integers(0, 2, (64, 64))), 2, 2, 3)
        assert [lv.spec.shape for lv in levels] == [(32, 32), (16, 16), (8, 8)]

    def test_pyramid_stops_below_block(self, rng):
        assert len(pyramid(grid(rng.integers(0, 2, (8, 8))), 2, 2, 10)) == 3

    def test_two_stage_deterministic(self, rng):
        g = grid(rng.integers(0, 2, (32, 32)))
        once = coarse_grain_histogram(coarse_grain_histogram(g, 2, 2), 2, 2)
        assert pyramid(g, 2, 2, 2)[-1] == once


class TestDither:
    def test_uniform_mean(self):
        out = dither(np.full((40, 40), 0.3), 2)
        assert abs(out.mean() - 0.3) < 0.5 / 40

    def test_levels_in_range(self, rng):
        out = dither(rng.random((20, 20)), 4)
        assert out.min() >= 0 and out.max() <= 3

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.integers(2, 5))
    def test_row_mass_conserved_1d(self, values, k_out):
        v = np.array(values)
        out = dither(v, k_out)
        assert abs(out.sum() - (v * (k_out - 1)).sum()) <= k_out / 2

    def test_exact_levels_untouched(self):
        assert dither(np.array([0.0, 1.0, 0.5]), 3).tolist() == [0, 2, 1]


class TestKmeans:
    def test_two_types(self, rng):
        cells = np.concatenate([[0, 0, 0, 0] * 5, [1, 1, 1, 1] * 3])
        g = coarse_grain_kmeans(grid(cells), 4, 2)
        assert g.cells.tolist() == [0] * 5 + [1] * 3

    def test_identical_blocks(self):
        g = coarse_grain_kmeans(grid(np.ones(12)), 3, 1)
        assert not g.cells.any()

    def test_near_block_joins_majority(self):
        rows = np.array([[0, 0, 0, 0]] * 9 + [[1, 1, 1, 1]] * 9 + [[0, 0, 0, 1]])
        for seed in range(5):
            labels, _ = hamming_kmeans(rows, 2, np.random.Generator(np.random.Philox(seed)))
            assert labels[-1] == labels[0] != labels[9]

    def test_fewer_distinct_than_k(self):
        g = coarse_grain_kmeans(grid(np.tile([0, 1], 8)), 2, 4)
        assert set(g.cells.tolist()) == {0}

    def test_seed_deterministic(self, rng):
        g = grid(rng.integers(0, 2, (24, 24)))
        assert coarse_grain_kmeans(g, 3, 3, seed=2) == coarse_grain_kmeans(g, 3, 3, seed=2)


class TestAutoencoder:
    cfg = TrainConfig(learning_rate=0.5, epochs=150, batch_size=8, seed=0, tol=1e-5)

    def test_single_block(self):
        g = coarse_grain_autoencoder(grid(np.zeros((12, 12))), 3, 2, self.cfg)
        assert len(set(g.cells.ravel().tolist())) == 1

    def test_two_block_types_separate(self):
        a, b = np.zeros((3, 3)), np.ones((3, 3))
        cells = np.block([[a, b, a, b], [b, a, b, a], [a, a, b, b]])
        g = coarse_grain_autoencoder(grid(cells), 3, 2, self.cfg)
        codes = g.cells
        kinds = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 0, 1, 1]])
        assert len(set(codes[kinds == 0].tolist())) == 1
        assert len(set(codes[kinds == 1].tolist())) == 1
        assert codes[kinds == 0][0] != codes[kinds == 1][0]

    def test_continuous_sums_to_one(self, rng):
        z = coarse_grain_autoencoder(grid(rng.integers(0, 2, (12, 12))), 3, 3, self.cfg, mode="continuous")
        assert z.shape == (4, 4, 3)
        assert np.allclose(z.sum(axis=-1), 1.0, atol=1e-6)

    def test_deterministic(self, rng):
        g = grid(rng.integers(0, 2, (12, 12)))
        assert coarse_grain_autoencoder(g, 3, 2, self.cfg) == coarse_grain_autoencoder(g, 3, 2, self.cfg)


def test_local_average_rounds_half_up():
    g = local_average(grid(np.array([0, 1, 1, 1, 0, 0])), 2)
    assert g.cells.tolist() == [1, 1, 0]


class TestFilter:
    def test_all_zero(self):
        st_ = SpaceTime(eca_spec(20), np.zeros((5, 20)))
        out = filter_eca(st_, 18)
        assert out.spec.shape == (10,) and not out.data.any()

    def test_odd_width_cropped(self, rng):
        st_ = simulate(random_grid(eca_spec(21), rng), eca_rule(18), 10)
        assert filter_eca(st_, 18).spec.shape == (10,)

    def test_rejects_non_binary(self):
        st_ = SpaceTime(CaSpec(1, 3, 1, (8,)), np.zeros((2, 8)))
        with pytest.raises(ValueError):
            filter_eca(st_)

    def test_rule_18_sparser_than_raw(self):
        st_ = simulate(random_grid(eca_spec(600), np.random.Generator(np.random.Philox(0))), eca_rule(18), 600)
        assert filter_eca(st_, 18).data.mean() < st_.data.mean()

    def test_rule_54_particles_persist(self):
        st_ = simulate(random_grid(eca_spec(1000), np.random.Generator(np.random.Philox(0))), eca_rule(54), 1000)
        f = filter_eca(st_, 54).data.astype(bool)
        prev = f[:-1] | np.roll(f[:-1], 1, 1) | np.roll(f[:-1], -1, 1)
        assert (f[1:] & prev).sum() / f[1:].sum() >= 0.9

    @pytest.mark.xfail(strict=True, reason="2-cell histogram filter keeps most of rule 110's ether; see README")
    def test_rule_110_particles_persist(self):
        st_ = simulate(random_grid(eca_spec(3000), np.random.Generator(np.random.Philox(0))), eca_rule(110), 3000)
        f = filter_eca(st_, 110).data.astype(bool)[500:]
        prev = f[:-1] | np.roll(f[:-1], 1, 1) | np.roll(f[:-1], -1, 1)
        assert (f[1:] & prev).sum() / f[1:].sum() >= 0.9
