"""Bit-level float inspection: unbiased exponents and exponent-sum preprocessing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Exponent sums of two doubles fit in int16: a finite double has unbiased
# exponent in [-1074, 1023] (subnormals included), so sums lie in
# [-2148, 2046]; 2048 is the advertised cap.
_E_SUM_MIN = -2148
_E_SUM_MAX = 2048


def flexp(x: float) -> int:
    """Unbiased exponent of a nonzero finite float, i.e. floor(log2|x|).

    Uses frexp (exponent-field extraction), which is exact for normals and
    subnormals alike: frexp returns |x| = m * 2**e with m in [0.5, 1), so the
    unbiased exponent is e - 1.
    """
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        raise ValueError(f"flexp undefined for {x!r}")
    return math.frexp(abs(x))[1] - 1


def flexp_array(x: np.ndarray) -> np.ndarray:
    """Vectorized flexp. Caller guarantees entries are finite and nonzero."""
    return np.frexp(np.abs(x))[1].astype(np.int64) - 1


@dataclass
class ExponentSummary:
    """Componentwise exponent sums of a vector pair, zeros routed aside.

    ``e[k]`` is flexp(x[idx[k]]) + flexp(y[idx[k]]); indices whose product is
    exactly zero sit in ``zero_idx`` and carry no exponent.  ``e.size +
    zero_idx.size == n`` always holds.
    """

    e: np.ndarray            # int16 exponent sums, one per nonzero product
    idx: np.ndarray          # original indices for e, ascending
    zero_idx: np.ndarray     # original indices with x_i*y_i == 0, ascending
    n: int
    e_min: int = field(default=0)
    e_max: int = field(default=0)

    @property
    def degenerate(self) -> bool:
        """True when every product is zero (no exponents to bin)."""
        return self.e.size == 0


def exponent_preprocess(x: np.ndarray, y: np.ndarray) -> ExponentSummary:
    """Sum the unbiased exponents of x and y componentwise.

    Integer work only: exponents come from the float representation, nothing
    is multiplied.  Zero factors have no exponent; their indices are split
    off so the pipeline can treat them as exact zero contributions.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("inputs must be 1-D arrays")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")

    n = x.shape[0]
    zero_mask = (x == 0.0) | (y == 0.0)
    zero_idx = np.flatnonzero(zero_mask)
    idx = np.flatnonzero(~zero_mask)
    if idx.size == 0:
        return ExponentSummary(
            e=np.empty(0, dtype=np.int16), idx=idx, zero_idx=zero_idx, n=n
        )

    e = flexp_array(x[idx]) + flexp_array(y[idx])
    if e.min() < _E_SUM_MIN or e.max() > _E_SUM_MAX:
        raise ValueError("exponent sum out of int16 budget")  # unreachable for doubles
    e = e.astype(np.int16)
    return ExponentSummary(
        e=e,
        idx=idx,
        zero_idx=zero_idx,
        n=n,
        e_min=int(e.min()),
        e_max=int(e.max()),
    )
