"""binary16/binary32 rounding emulation and the scaled per-bin dot product."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .binning import Bin
from .floatbits import flexp_array
from .scoring import PrecisionLevel

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


@dataclass(frozen=True)
class RoundedValue:
    value: float
    format: PrecisionLevel


def round_to(x: float, fmt: PrecisionLevel) -> RoundedValue:
    """Round-to-nearest-even into the target format, result held in a double.

    Overflow goes to infinity, underflow is gradual, exactly as the hardware
    formats behave.  Double is the identity; perforation has no values.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("round_to needs a finite value")
    if fmt is PrecisionLevel.PERFORATE:
        raise ValueError("perforated bins hold no values")
    if fmt is PrecisionLevel.DOUBLE:
        return RoundedValue(x, fmt)
    with np.errstate(over="ignore"):
        if fmt is PrecisionLevel.HALF:
            return RoundedValue(float(np.float16(x)), fmt)
        return RoundedValue(float(np.float32(x)), fmt)


def _round_array(a: np.ndarray, fmt: PrecisionLevel) -> np.ndarray:
    """Vectorized round_to, returned widened back to float64."""
    if fmt is PrecisionLevel.DOUBLE:
        return a
    dtype = np.float16 if fmt is PrecisionLevel.HALF else np.float32
    with np.errstate(over="ignore"):
        return a.astype(dtype).astype(np.float64)


def neumaier_sum(values: Iterable[float]) -> float:
    """Left-to-right compensated summation (Neumaier's Kahan variant).

    The running error term recovers what plain addition drops, so the result
    matches exact accumulation of the addends to within one final rounding.
    """
    s = 0.0
    c = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    if not math.isfinite(s):
        return s  # overflow diagnostic: compensation is meaningless here
    return s + c


if njit is not None:

    @njit(cache=True)
    def _neumaier_kernel(a):  # pragma: no cover - jitted
        s = 0.0
        c = 0.0
        for i in range(a.shape[0]):
            v = a[i]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        return s, c

    @njit(cache=True)
    def _seq_sum_f32(a):  # pragma: no cover - jitted
        s = np.float32(0.0)
        for i in range(a.shape[0]):
            s = np.float32(s + a[i])
        return s

    def _neumaier_array(a: np.ndarray) -> float:
        s, c = _neumaier_kernel(a)
        if not math.isfinite(s):
            return s
        return s + c

else:  # pragma: no cover

    def _neumaier_array(a):
        return neumaier_sum(a.tolist())

    def _seq_sum_f32(a):
        s = np.float32(0.0)
        for v in a:
            s = np.float32(s + v)
        return s


def bin_dot(x: np.ndarray, y: np.ndarray, b: Bin) -> float:
    """Dot product of one bin's sub-vectors at its assigned precision.

    Perforated bins contribute 0.  Double bins multiply in double and
    accumulate with compensation (the error model allows one rounding per
    product, nothing for accumulation).  Half/Single bins are scaled by pure
    exponent shifts so every product lands near [1, 4) * 2^-u, rounded into
    the bin format, multiplied in that format, accumulated one format wider
    (half sums in single, single sums in double), then rescaled by 2^u.
    """
    if b.precision is None:
        raise ValueError("bin has no precision assigned")
    if b.precision is PrecisionLevel.PERFORATE or b.cardinality == 0:
        return 0.0

    idx = b.indices
    if b.precision is PrecisionLevel.DOUBLE:
        return _neumaier_array(x[idx] * y[idx])

    xs = x[idx]
    ys = y[idx]
    ex = flexp_array(xs)
    # x scaled to its mantissa, y shifted so the pair's product carries
    # 2^(e_i - u): members of exact bins land exactly on mantissa*mantissa.
    sx = np.ldexp(xs, -ex)
    sy = np.ldexp(ys, ex - b.upper)
    rx = _round_array(sx, b.precision)
    ry = _round_array(sy, b.precision)
    # Double product of two narrow-format values is exact, so one rounding
    # back into the bin format is the bin-format multiply.
    prods = _round_array(rx * ry, b.precision)
    if not np.isfinite(prods).all():
        raise OverflowError("rounded bin product overflowed its format")

    if b.precision is PrecisionLevel.HALF:
        acc = float(_seq_sum_f32(prods.astype(np.float32)))
    else:
        acc = _neumaier_array(prods)
    return math.ldexp(acc, b.upper)


def qdot_accumulate(bin_values: Sequence[float]) -> float:
    """Fold per-bin values in the given (ascending upper bound) order.

    Deterministic left-to-right double-precision accumulation with
    compensation; a non-finite result is returned as-is for diagnostics.
    """
    return neumaier_sum(bin_values)
