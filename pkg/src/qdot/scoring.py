"""Bin scoring, precision assignment, tolerance splitting, early termination."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .binning import Bin, BinPartition, Strategy


class PrecisionLevel(enum.Enum):
    """Computation formats a bin may be assigned, plus full perforation.

    Perforation is a 0-bit quantization: the bin is skipped and its machine
    epsilon in the error bounds is 1.
    """

    PERFORATE = ("perforate", 0)
    HALF = ("half", 10)
    SINGLE = ("single", 23)
    DOUBLE = ("double", 52)

    def __init__(self, label: str, mantissa_bits: int):
        self.label = label
        self.mantissa_bits = mantissa_bits

    @property
    def eps(self) -> float:
        """Machine epsilon 2**-mu; 1 for perforation."""
        return math.ldexp(1.0, -self.mantissa_bits)

    @classmethod
    def from_mu(cls, mu: int) -> "PrecisionLevel":
        for level in cls:
            if level.mantissa_bits == mu:
                return level
        raise ValueError(f"no precision level with {mu} mantissa bits")


# Ordered coarse -> fine, used for monotonicity checks and clamping.
LEVELS_ASC = (PrecisionLevel.PERFORATE, PrecisionLevel.HALF,
              PrecisionLevel.SINGLE, PrecisionLevel.DOUBLE)

# Mantissa bits of the level directly below a given input precision.
_MU_BELOW = {52: 23, 23: 10, 10: 0}

_EPS_MAX = math.ldexp(1.0, 60)


class SplitMode(enum.Enum):
    NONE = "none"
    PER_BIN = "per-bin"


@dataclass
class ToleranceConfig:
    """Relative error tolerance plus how it is shared across bins.

    With ``split=PER_BIN`` the scores are computed against epsilon/N_bins
    (N_bins = nonempty exponent bins), which makes the summed per-bin bounds
    total at most epsilon instead of N_bins * epsilon.
    """

    epsilon: float
    split: SplitMode = SplitMode.NONE
    input_mu: int = 52

    def __post_init__(self):
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite")
        self.epsilon = float(self.epsilon)
        if not (0.0 < self.epsilon <= _EPS_MAX):
            raise ValueError("epsilon must lie in (0, 2^60]")
        if self.input_mu not in _MU_BELOW:
            raise ValueError("input_mu must be one of 10, 23, 52")


def floor_log2(x: float) -> int:
    """floor(log2 x) for x > 0, exact via exponent extraction."""
    if not (x > 0.0 and math.isfinite(x)):
        raise ValueError("floor_log2 needs a positive finite value")
    return math.frexp(x)[1] - 1


def ceil_log2(m: int) -> int:
    """ceil(log2 m) for integer m >= 1, exact via bit length."""
    if m < 1:
        raise ValueError("ceil_log2 needs m >= 1")
    return (m - 1).bit_length()


def bin_score(cardinality: int, upper: int, e_max: int, eps_eff: float) -> int:
    """ceil(log2 M) + u - e_max - floor(log2 eps) + 1, all exact integers.

    The score is the number of mantissa bits the bin needs so that its term
    M * 2^(u - e_max + 1) * 2^-mu stays below the effective tolerance.
    """
    if cardinality < 1:
        raise ValueError("score of an empty bin is -inf and never materialized")
    # upper may exceed e_max for ranged intervals; the score just grows.
    return ceil_log2(cardinality) + upper - e_max - floor_log2(eps_eff) + 1


def precision_of(score: int, input_mu: int) -> PrecisionLevel:
    """Coarsest level whose mantissa width covers the score.

    Negative scores perforate; scores at or above the input precision clamp
    to it (no up-casting past the input format).
    """
    if input_mu not in _MU_BELOW:
        raise ValueError("input_mu must be one of 10, 23, 52")
    if score < 0:
        return PrecisionLevel.PERFORATE
    for level in LEVELS_ASC[1:]:
        if level.mantissa_bits > input_mu:
            break
        if score < level.mantissa_bits:
            return level
    return PrecisionLevel.from_mu(input_mu)


def early_termination(e_min: int, e_max: int, input_mu: int, epsilon: float) -> bool:
    """True when the exponent range alone forces every bin to input precision.

    Condition: e_max - e_min <= -floor(log2 eps) - mu_hat, with mu_hat the
    mantissa width of the precision directly below the input format.  When it
    holds, parameter selection can skip straight to a full-precision dot.
    """
    if input_mu not in _MU_BELOW:
        raise ValueError("input_mu must be one of 10, 23, 52")
    mu_hat = _MU_BELOW[input_mu]
    return (e_max - e_min) <= (-floor_log2(epsilon) - mu_hat)


@dataclass
class ParameterSet:
    """Scored, precision-assigned bins: everything the computation phase needs."""

    bins: List[Bin]              # ascending upper bound, score+precision set
    zero_idx: np.ndarray         # exact-zero products, treated as perforated
    e_min: int
    e_max: int
    strategy: Strategy
    tolerance: ToleranceConfig
    early_terminated: bool
    n: int
    eps_eff: float
    n_bins: int
    rel_bound: float = field(default=0.0)

    @property
    def nonzero_count(self) -> int:
        return self.n - int(self.zero_idx.size)

    @property
    def rel_guarantee(self) -> float:
        """Tolerance-level relative bound: N_bins * eps_eff.

        Equals epsilon under per-bin splitting and N_bins * epsilon without.
        Provable even though exponent sums undershoot product exponents by up
        to one: the precision function always leaves a spare mantissa bit
        (mu_k >= sigma_k + 1 below the input-precision clamp).
        """
        return self.n_bins * self.eps_eff


def relative_bound_term(b: Bin, e_max: int) -> float:
    """M * 2^(u - e_max + 1) * eps(precision) for one scored bin."""
    return b.cardinality * math.ldexp(b.precision.eps, b.upper - e_max + 1)


def absolute_bound_term(b: Bin) -> float:
    """M * 2^(u + 1) * eps(precision) for one scored bin."""
    return b.cardinality * math.ldexp(b.precision.eps, b.upper + 1)


def assign_precisions(
    partition: BinPartition,
    e_max: int,
    cfg: ToleranceConfig,
    zero_idx: Optional[np.ndarray] = None,
    n: Optional[int] = None,
) -> ParameterSet:
    """Score every bin and pick its precision; zero products ride along as an
    exact perforated pseudo-bin."""
    if zero_idx is None:
        zero_idx = np.empty(0, dtype=np.int64)
    n_bins = len(partition.bins)
    eps_eff = cfg.epsilon / n_bins if (cfg.split is SplitMode.PER_BIN and n_bins) else cfg.epsilon

    rel_bound = 0.0
    for b in partition.bins:
        b.score = bin_score(b.cardinality, b.upper, e_max, eps_eff)
        b.precision = precision_of(b.score, cfg.input_mu)
        rel_bound += relative_bound_term(b, e_max)

    total = n if n is not None else (
        sum(b.cardinality for b in partition.bins) + int(zero_idx.size)
    )
    return ParameterSet(
        bins=partition.bins,
        zero_idx=zero_idx,
        e_min=partition.e_min,
        e_max=partition.e_max,
        strategy=partition.strategy,
        tolerance=cfg,
        early_terminated=False,
        n=total,
        eps_eff=eps_eff,
        n_bins=n_bins,
        rel_bound=rel_bound,
    )
