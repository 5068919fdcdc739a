import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdot.floatbits import exponent_preprocess, flexp

from conftest import bit_flexp


def floor_log2_oracle(v: float) -> int:
    # independent: scan for k with 2^k <= |v| < 2^(k+1), exact rationals
    a = Fraction(abs(float(v)))
    k = math.floor(math.log2(abs(v)))
    for cand in (k - 1, k, k + 1):
        if Fraction(2) ** cand <= a < Fraction(2) ** (cand + 1):
            return cand
    raise AssertionError("no bracketing exponent")


class TestFlexp:
    def test_power_of_two(self):
        assert flexp(2.0**27) == 27

    def test_one(self):
        assert flexp(1.0) == 0

    def test_below_one(self):
        # 0.6 in (2^-1, 2^0): the unbiased exponent is -1
        assert floor_log2_oracle(0.6) == -1
        assert flexp(0.6) == -1

    @pytest.mark.parametrize("bad", [0.0, -0.0, math.nan, math.inf, -math.inf])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            flexp(bad)

    def test_matches_bit_extraction_and_log_oracle(self):
        rng = np.random.default_rng(11)
        vals = np.ldexp(rng.uniform(-2, 2, 2000), rng.integers(-320, 320, 2000))
        vals = vals[vals != 0]
        for v in vals.tolist():
            assert flexp(v) == bit_flexp(v) == floor_log2_oracle(v)

    def test_subnormals(self):
        assert flexp(5e-324) == -1074
        assert flexp(3 * 5e-324) == -1073
        v = 2.0**-1060 + 2.0**-1070
        assert flexp(v) == bit_flexp(v) == -1060

    @given(st.floats(allow_nan=False, allow_infinity=False,
                     allow_subnormal=True).filter(lambda v: v != 0.0))
    @settings(max_examples=300, deadline=None)
    def test_bracketing_invariant(self, v):
        e = flexp(v)
        a = Fraction(abs(v))
        assert Fraction(2) ** e <= a < Fraction(2) ** (e + 1)


class TestExponentPreprocess:
    def test_worked_example(self):
        x = np.array([2.0**27, 2.0**8, 2.0**-3, 2.0**20])
        y = np.array([2.0**23, 2.0**-14, 2.0**7, 2.0**-3])
        s = exponent_preprocess(x, y)
        assert s.e.tolist() == [50, -6, 4, 17]
        assert (s.e_min, s.e_max) == (-6, 50)
        assert s.zero_idx.size == 0
        assert s.e.dtype == np.int16

    def test_all_ones(self):
        s = exponent_preprocess(np.ones(2), np.ones(2))
        assert s.e.tolist() == [0, 0] and s.e_min == s.e_max == 0

    def test_zero_factor_routed_aside(self):
        s = exponent_preprocess(np.array([3.0, 0.0]), np.array([5.0, 7.0]))
        assert s.e.tolist() == [flexp(3.0) + flexp(5.0)] == [3]
        assert s.zero_idx.tolist() == [1]
        assert s.idx.tolist() == [0]
        assert s.e.size + s.zero_idx.size == s.n == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            exponent_preprocess(np.ones(3), np.ones(4))

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_nonfinite_rejected(self, bad):
        with pytest.raises(ValueError):
            exponent_preprocess(np.array([1.0, bad]), np.ones(2))

    def test_all_zero_products_degenerate(self):
        s = exponent_preprocess(np.zeros(3), np.ones(3))
        assert s.degenerate and s.zero_idx.size == 3

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        x = np.ldexp(rng.uniform(0.5, 1, 64), rng.integers(-20, 20, 64))
        y = np.ldexp(rng.uniform(0.5, 1, 64), rng.integers(-20, 20, 64))
        perm = rng.permutation(64)
        s = exponent_preprocess(x, y)
        sp = exponent_preprocess(x[perm], y[perm])
        assert (s.e_min, s.e_max) == (sp.e_min, sp.e_max)
        assert sp.e.tolist() == s.e[perm].tolist()

    def test_product_exponent_bracketing(self):
        # e_i is flexp(x*y) or one less: 2^e <= |xy| < 2^(e+2)
        rng = np.random.default_rng(6)
        x = np.ldexp(rng.uniform(-2, 2, 500), rng.integers(-30, 30, 500))
        y = np.ldexp(rng.uniform(-2, 2, 500), rng.integers(-30, 30, 500))
        mask = (x != 0) & (y != 0)
        x, y = x[mask], y[mask]
        s = exponent_preprocess(x, y)
        for pos, i in enumerate(s.idx.tolist()):
            e = int(s.e[pos])
            prod = Fraction(float(x[i])) * Fraction(float(y[i]))
            assert Fraction(2) ** e <= abs(prod) < Fraction(2) ** (e + 2)
            assert e in (bit_flexp(float(x[i] * y[i])),
                         bit_flexp(float(x[i] * y[i])) - 1)
