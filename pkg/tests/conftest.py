"""Shared oracles, all independent of the package's computation paths.

- exact_dot: big-rational dot product (the ground truth).
- round_f16/round_f32: round-to-nearest-even re-derived from integer
  arithmetic on Fractions, not from numpy casts.
- simulate_qdot: per-component brute-force walk of the computation contracts,
  used for bit-for-bit oracle equivalence.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction

import numpy as np

from qdot.scoring import PrecisionLevel


def exact_dot(x, y) -> Fraction:
    total = Fraction(0)
    for a, b in zip(x, y):
        total += Fraction(float(a)) * Fraction(float(b))
    return total


def ulp_of(v: float) -> float:
    return math.ulp(v)


def bit_flexp(v: float) -> int:
    """Unbiased exponent by raw bit extraction (independent of frexp)."""
    (bits,) = struct.unpack("<Q", struct.pack("<d", abs(v)))
    exp_field = (bits >> 52) & 0x7FF
    mantissa = bits & ((1 << 52) - 1)
    if exp_field == 0:  # subnormal: leading mantissa bit sets the exponent
        return mantissa.bit_length() - 1 - 1074
    return exp_field - 1023


def _round_to_format(v: float, mantissa_bits: int, min_exp: int, max_exp: int) -> float:
    """Round-to-nearest-even into a binary format, by exact integer rounding."""
    if v == 0.0:
        return 0.0
    a = Fraction(abs(float(v)))
    e = bit_flexp(v)
    quantum = Fraction(2) ** (max(e, min_exp) - mantissa_bits)
    q = a / quantum
    k = int(q)
    frac = q - k
    if frac > Fraction(1, 2) or (frac == Fraction(1, 2) and k % 2 == 1):
        k += 1
    r = Fraction(k) * quantum
    max_finite = (Fraction(2) - Fraction(2) ** (-mantissa_bits)) * Fraction(2) ** max_exp
    if r > max_finite:
        out = math.inf
    else:
        out = float(r)
    return -out if v < 0 else out


def round_f16(v: float) -> float:
    return _round_to_format(v, 10, -14, 15)


def round_f32(v: float) -> float:
    return _round_to_format(v, 23, -126, 127)


def f32_add(a: float, b: float) -> float:
    """Single-precision addition of two f32-representable doubles via struct."""
    (r,) = struct.unpack("<f", struct.pack("<f", a + b))
    return r


class Neumaier:
    """Independent compensated accumulator (same contract, separate code)."""

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, v: float) -> None:
        t = self.s + v
        if abs(self.s) >= abs(v):
            self.c += (self.s - t) + v
        else:
            self.c += (v - t) + self.s
        self.s = t

    def total(self) -> float:
        if not math.isfinite(self.s):
            return self.s
        return self.s + self.c


def simulate_qdot(x, y, params) -> float:
    """Brute-force per-component replay of the computation contracts.

    Perforate -> 0; Double -> double products, compensated accumulation;
    Half/Single -> scale both factors by exponent shifts so the product
    carries 2^(e_i - u), round factors and product into the bin format
    (Fraction-based oracle rounding), accumulate half products in f32
    (struct-based) and single products compensated in double, rescale by 2^u.
    Bins fold in ascending-upper order through another compensated sum.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    outer = Neumaier()
    for b in sorted(params.bins, key=lambda bb: bb.upper):
        if b.precision is PrecisionLevel.PERFORATE:
            outer.add(0.0)
            continue
        if b.precision is PrecisionLevel.DOUBLE:
            inner = Neumaier()
            for i in sorted(int(i) for i in b.indices):
                inner.add(float(x[i]) * float(y[i]))
            outer.add(inner.total())
            continue
        rnd = round_f16 if b.precision is PrecisionLevel.HALF else round_f32
        acc_f32 = 0.0
        inner = Neumaier()
        for i in sorted(int(i) for i in b.indices):
            ex = bit_flexp(float(x[i]))
            mx = math.ldexp(float(x[i]), -ex)
            my = math.ldexp(float(y[i]), ex - b.upper)
            p = rnd(rnd(mx) * rnd(my))
            if b.precision is PrecisionLevel.HALF:
                acc_f32 = f32_add(acc_f32, p)
            else:
                inner.add(p)
        widened = acc_f32 if b.precision is PrecisionLevel.HALF else inner.total()
        outer.add(math.ldexp(widened, b.upper))
    return outer.total()
