import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from complexca.ca import CaSpec, RuleTable, eca_rule, eca_spec, life_rule
from complexca.sampling import (
    DirichletParams,
    lambda_sweep,
    langton_lambda,
    largest_remainder,
    make_rng,
    multinomial_logpmf,
    sample_dirichlet,
    sample_uniform,
    transition_counts,
)


class TestLambda:
    def test_rule_0(self):
        assert langton_lambda(eca_rule(0)).lam == 0

    def test_life(self):
        rep = langton_lambda(life_rule())
        assert rep.n_quiescent == 372
        assert rep.lam == Fraction(140, 512)

    def test_no_quiescent_transitions(self):
        assert langton_lambda(eca_rule(255)).lam == 1

    def test_bad_quiescent(self):
        with pytest.raises(ValueError):
            langton_lambda(eca_rule(3), quiescent=2)

    def test_other_quiescent_state(self):
        # rule 1 outputs 1 only for 000: one quiescent transition out of 8
        assert langton_lambda(eca_rule(1), quiescent=1).lam == Fraction(7, 8)

    def test_invariant_under_relabelling_non_quiescent(self, rng):
        spec = CaSpec(1, 3, 1, (8,))
        rt = sample_uniform(spec, rng)
        swapped = RuleTable(spec, np.choose(rt.outputs, [0, 2, 1]))
        assert langton_lambda(rt).lam == langton_lambda(swapped).lam


class TestSweep:
    def test_single_flip(self, rng):
        rules = lambda_sweep(eca_spec(), 0, 1, rng)
        assert len(rules) == 2
        assert not rules[0].outputs.any()
        assert int(np.count_nonzero(rules[1].outputs)) == 1

    def test_full_sweep_ends_at_seven_eighths(self, rng):
        rules = lambda_sweep(eca_spec(), 0, 100, rng)
        assert len(rules) == 8
        assert langton_lambda(rules[-1]).lam == Fraction(7, 8)

    def test_increments(self, rng):
        spec = CaSpec(1, 3, 1, (8,))
        lams = [langton_lambda(r).lam for r in lambda_sweep(spec, 0, 20, rng)]
        assert all(b - a == Fraction(1, 27) for a, b in zip(lams, lams[1:]))

    def test_rejects_zero_steps(self, rng):
        with pytest.raises(ValueError):
            lambda_sweep(eca_spec(), 0, 0, rng)


class TestUniform:
    def test_binary_mean(self, rng):
        spec = CaSpec(2, 2, 1, (8, 8))
        ones = sum(int(sample_uniform(spec, rng).outputs.sum()) for _ in range(200))
        n = 200 * 512
        assert abs(ones / n - 0.5) < 3 * math.sqrt(0.25 / n)

    def test_deterministic(self):
        spec = CaSpec(2, 2, 1, (8, 8))
        assert sample_uniform(spec, make_rng(9)) == sample_uniform(spec, make_rng(9))

    def test_three_state_chi_square(self, rng):
        spec = CaSpec(1, 3, 2, (8,))  # 243 entries
        counts = sum(transition_counts(sample_uniform(spec, rng)) for _ in range(412))
        assert stats.chisquare(counts).pvalue > 0.001


class TestDirichlet:
    def test_equal_limit(self, rng):
        spec = CaSpec(1, 3, 1, (8,))
        c = transition_counts(sample_dirichlet(spec, DirichletParams(math.inf, 3), rng))
        assert c.max() - c.min() <= 1 and c.sum() == 27

    @settings(max_examples=30, deadline=None)
    @given(alpha=st.floats(0.05, 20.0), seed=st.integers(0, 2**32 - 1))
    def test_counts_sum(self, alpha, seed):
        spec = CaSpec(2, 3, 1, (4, 4))
        rt = sample_dirichlet(spec, DirichletParams(alpha, 3), make_rng(seed))
        assert transition_counts(rt).sum() == 3**9

    def test_small_alpha_spikes(self, rng):
        spec = eca_spec()
        n = 10_000
        dir_means = np.array([sample_dirichlet(spec, DirichletParams(0.1, 2), rng).outputs.mean() for _ in range(n)])
        uni_means = np.array([sample_uniform(spec, rng).outputs.mean() for _ in range(n)])
        extreme = lambda m: np.mean((m == 0) | (m == 1))
        # uniform puts 2/256 of the mass on the extremes
        assert extreme(dir_means) > 0.5
        assert extreme(uni_means) < 0.02

    def test_reproducible(self):
        spec = CaSpec(2, 2, 1, (8, 8))
        p = DirichletParams(0.5, 2)
        assert sample_dirichlet(spec, p, make_rng(3)) == sample_dirichlet(spec, p, make_rng(3))

    def test_k_mismatch(self, rng):
        with pytest.raises(ValueError):
            sample_dirichlet(eca_spec(), DirichletParams(1.0, 3), rng)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            DirichletParams(0.0, 2)

    def test_largest_remainder(self):
        assert largest_remainder([0.5, 0.3, 0.2], 7).tolist() == [4, 2, 1]
        assert largest_remainder([1, 1, 1], 8).tolist() == [3, 3, 2]


class TestMultinomial:
    def test_life_probability(self):
        exact = math.comb(512, 140) / 2**512
        got = math.exp(multinomial_logpmf((372, 140), (0.5, 0.5)))
        assert got == pytest.approx(exact, rel=1e-9)
        assert got == pytest.approx(8.24e-26, rel=0.01)

    def test_certain(self):
        assert multinomial_logpmf((7, 0), (1.0, 0.0)) == 0.0

    def test_two_coins(self):
        assert multinomial_logpmf((1, 1), (0.5, 0.5)) == pytest.approx(math.log(0.5))

    @pytest.mark.parametrize("bad", [((-1, 2), (0.5, 0.5)), ((1, 1), (1.5, -0.5)), ((1,), (0.5, 0.5))])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            multinomial_logpmf(*bad)

    @pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 7) for k in (2, 3)])
    def test_normalized(self, n, k):
        probs = np.linspace(1, 2, k)
        probs = probs / probs.sum()
        total = sum(
            math.exp(multinomial_logpmf(c, probs))
            for c in itertools.product(range(n + 1), repeat=k)
            if sum(c) == n
        )
        assert total == pytest.approx(1.0, abs=1e-12)
