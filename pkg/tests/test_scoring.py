import math
from fractions import Fraction

import numpy as np
import pytest

from qdot.floatbits import exponent_preprocess
from qdot.kernel import select_parameters
from qdot.scoring import (PrecisionLevel, SplitMode, ToleranceConfig,
                          bin_score, ceil_log2, early_termination, floor_log2,
                          precision_of, relative_bound_term)

P = PrecisionLevel


class TestLogHelpers:
    def test_floor_log2_matches_rational_oracle(self):
        rng = np.random.default_rng(0)
        vals = np.ldexp(rng.uniform(0.5, 2.0, 500), rng.integers(-200, 60, 500))
        for v in vals.tolist():
            k = floor_log2(v)
            assert Fraction(2) ** k <= Fraction(v) < Fraction(2) ** (k + 1)

    def test_floor_log2_power_of_two_exact(self):
        assert floor_log2(2.0**-34) == -34
        assert floor_log2(0.5) == -1
        assert floor_log2(1.0) == 0

    def test_ceil_log2(self):
        assert [ceil_log2(m) for m in (1, 2, 3, 4, 5, 1024, 1025)] == \
            [0, 1, 2, 2, 3, 10, 11]


class TestBinScore:
    def test_worked_example_scores(self):
        eps = 2.0**-34
        assert bin_score(1, 50, 50, eps) == 35
        assert bin_score(1, 17, 50, eps) == 2
        assert bin_score(1, 4, 50, eps) == -11
        assert bin_score(1, -6, 50, eps) == -21

    def test_direct_formula(self):
        assert bin_score(4, 0, 0, 1.0) == 3

    def test_brute_force_cross_check(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            m = int(rng.integers(1, 10_000))
            e_max = int(rng.integers(-100, 100))
            u = e_max - int(rng.integers(0, 200))
            eps = float(np.ldexp(rng.uniform(0.5, 1.0), rng.integers(-60, 4)))
            want = math.ceil(math.log2(m)) + u - e_max - floor_log2(eps) + 1
            assert bin_score(m, u, e_max, eps) == want

    def test_preconditions(self):
        with pytest.raises(ValueError):
            bin_score(0, 0, 0, 1.0)
        # ranged intervals may overhang e_max; the score only grows
        assert bin_score(1, 5, 0, 1.0) == 6


class TestPrecisionOf:
    @pytest.mark.parametrize("score,want", [
        (35, P.DOUBLE), (2, P.HALF), (-11, P.PERFORATE), (-21, P.PERFORATE),
        (15, P.SINGLE), (100, P.DOUBLE), (0, P.HALF), (9, P.HALF),
        (10, P.SINGLE), (22, P.SINGLE), (23, P.DOUBLE), (51, P.DOUBLE),
        (52, P.DOUBLE), (-1, P.PERFORATE),
    ])
    def test_double_inputs(self, score, want):
        assert precision_of(score, 52) is want

    def test_no_upcasting_past_input(self):
        assert precision_of(30, 23) is P.SINGLE
        assert precision_of(15, 23) is P.SINGLE
        assert precision_of(5, 23) is P.HALF
        assert precision_of(12, 10) is P.HALF
        assert precision_of(3, 10) is P.HALF
        assert precision_of(-2, 10) is P.PERFORATE

    def test_invalid_mu(self):
        with pytest.raises(ValueError):
            precision_of(3, 17)


def toy_params(split=SplitMode.NONE, epsilon=2.0**-34):
    x = np.array([2.0**27, 2.0**8, 2.0**-3, 2.0**20])
    y = np.array([2.0**23, 2.0**-14, 2.0**7, 2.0**-3])
    return select_parameters(x, y, ToleranceConfig(epsilon=epsilon, split=split))


class TestAssignPrecisions:
    def test_worked_example_assignment(self):
        ps = toy_params()
        assert [b.score for b in ps.bins] == [-21, -11, 2, 35]
        assert [b.precision for b in ps.bins] == \
            [P.PERFORATE, P.PERFORATE, P.HALF, P.DOUBLE]

    def test_tiny_epsilon_all_double(self):
        # range 56: scores >= 23 everywhere once -floor(log2 eps) >= 78
        ps = toy_params(epsilon=2.0**-80)
        assert all(b.precision is P.DOUBLE for b in ps.bins)

    def test_uniform_vector_single_bin_score(self):
        x = np.ones(1024)
        ps = select_parameters(x, x, ToleranceConfig(epsilon=2.0**-34))
        # range 0 early-terminates; the merged bin still scores 10+0-0+34+1
        assert ps.early_terminated
        assert len(ps.bins) == 1
        assert ps.bins[0].score == 45
        assert ps.bins[0].precision is P.DOUBLE

    def test_per_bin_split_divides_epsilon(self):
        ps = toy_params(split=SplitMode.PER_BIN)
        assert ps.n_bins == 4
        assert ps.eps_eff == 2.0**-34 / 4
        # floor(log2 eps/4) = -36: every score rises by 2
        assert [b.score for b in ps.bins] == [-19, -9, 4, 37]

    def test_zero_products_ride_along(self):
        x = np.array([3.0, 0.0])
        y = np.array([5.0, 7.0])
        ps = select_parameters(x, y, ToleranceConfig(epsilon=1e-8))
        assert ps.zero_idx.tolist() == [1]
        assert ps.n == 2

    def test_per_bin_guard(self):
        # every non-clamped bin's relative term stays within 2^floor(log2 eps_eff)
        rng = np.random.default_rng(7)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 2000))
            x = np.ldexp(rng.uniform(0.5, 1, n), rng.integers(-40, 40, n))
            y = np.ldexp(rng.uniform(0.5, 1, n), rng.integers(-40, 40, n))
            eps = float(np.ldexp(1.0, -int(rng.integers(5, 40))))
            split = SplitMode.PER_BIN if seed % 2 else SplitMode.NONE
            ps = select_parameters(x, y, ToleranceConfig(epsilon=eps, split=split))
            cap = math.ldexp(1.0, floor_log2(ps.eps_eff))
            for b in ps.bins:
                if b.score < 52:
                    assert relative_bound_term(b, ps.e_max) <= cap

    def test_monotone_in_epsilon(self):
        rank = {P.PERFORATE: 0, P.HALF: 1, P.SINGLE: 2, P.DOUBLE: 3}
        rng = np.random.default_rng(9)
        x = np.ldexp(rng.uniform(0.5, 1, 300), rng.integers(-30, 30, 300))
        y = np.ldexp(rng.uniform(0.5, 1, 300), rng.integers(-30, 30, 300))
        prev = None
        for k in range(-52, 1, 4):
            ps = select_parameters(x, y, ToleranceConfig(epsilon=2.0**k))
            level_of = {}
            for b in ps.bins:
                for i in b.indices.tolist():
                    level_of[i] = rank[b.precision]
            if prev is not None:
                assert all(level_of[i] <= prev[i] for i in level_of)
            prev = level_of

    def test_scale_invariance(self):
        rng = np.random.default_rng(10)
        x = np.ldexp(rng.uniform(0.5, 1, 100), rng.integers(-20, 20, 100))
        y = np.ldexp(rng.uniform(0.5, 1, 100), rng.integers(-20, 20, 100))
        cfg = ToleranceConfig(epsilon=1e-10)
        a = select_parameters(x, y, cfg)
        b = select_parameters(np.ldexp(x, 12), y, cfg)
        assert b.e_min == a.e_min + 12 and b.e_max == a.e_max + 12
        assert [bb.score for bb in b.bins] == [aa.score for aa in a.bins]
        assert [bb.precision for bb in b.bins] == [aa.precision for aa in a.bins]


class TestEarlyTermination:
    def test_threshold_true(self):
        assert early_termination(0, 11, 52, 2.0**-34) is True

    def test_toy_range_false(self):
        assert early_termination(-6, 50, 52, 2.0**-34) is False

    def test_large_epsilon_false(self):
        assert early_termination(0, 0, 52, 0.5) is False

    def test_implies_all_input_precision(self):
        rng = np.random.default_rng(12)
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            k = int(rng.integers(24, 50))
            eps = math.ldexp(1.0, -k)
            spread = k - 23  # exactly the allowed range
            base = int(rng.integers(-40, 40))
            n = int(rng.integers(2, 200))
            e = base + rng.integers(0, spread + 1, n)
            x = np.ldexp(1.0 + rng.random(n), e)
            s = exponent_preprocess(x, np.ones(n))
            if early_termination(s.e_min, s.e_max, 52, eps):
                hits += 1
                ps = select_parameters(x, np.ones(n), ToleranceConfig(epsilon=eps))
                assert ps.early_terminated
                assert all(b.precision is P.DOUBLE for b in ps.bins)
        assert hits > 150  # construction keeps the hypothesis satisfiable


class TestToleranceConfig:
    def test_epsilon_domain(self):
        with pytest.raises(ValueError):
            ToleranceConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            ToleranceConfig(epsilon=-1e-3)
        with pytest.raises(ValueError):
            ToleranceConfig(epsilon=2.0**61)
        with pytest.raises(ValueError):
            ToleranceConfig(epsilon=math.inf)
        ToleranceConfig(epsilon=2.0**60)

    def test_input_mu_domain(self):
        with pytest.raises(ValueError):
            ToleranceConfig(epsilon=1.0, input_mu=11)

    def test_level_attributes(self):
        assert P.PERFORATE.eps == 1.0 and P.PERFORATE.mantissa_bits == 0
        assert P.HALF.eps == 2.0**-10 and P.HALF.mantissa_bits == 10
        assert P.SINGLE.eps == 2.0**-23 and P.SINGLE.mantissa_bits == 23
        assert P.DOUBLE.eps == 2.0**-52 and P.DOUBLE.mantissa_bits == 52
