"""The qdot kernel: parameter selection, mixed-precision computation, bounds.

qdot approximates x . y by binning componentwise products on their exponent
sums, assigning each bin the coarsest precision its score allows (down to
full perforation), computing per-bin dots at those precisions, and
accumulating.  The report carries the closed-form absolute and relative
error bounds alongside the value.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from .binning import (Bin, BinPartition, ExactBinning, Strategy,
                      build_partition, sorted_bin_init, strategy_label)
from .emulate import bin_dot, qdot_accumulate
from .floatbits import exponent_preprocess, flexp
from .scoring import (ParameterSet, PrecisionLevel, SplitMode, ToleranceConfig,
                      absolute_bound_term, assign_precisions, early_termination,
                      relative_bound_term)

__all__ = [
    "QdotReport", "ReferenceResult", "select_parameters", "qdot",
    "reference_dot",
]


def select_parameters(
    x: np.ndarray,
    y: np.ndarray,
    cfg: ToleranceConfig,
    strategy: Strategy = None,
) -> ParameterSet:
    """Run the selection pipeline: exponent sums, early-termination check,
    sorted bin initialization, strategy binning, scoring.

    An early termination (exponent range too small for any bin to drop below
    input precision) yields a single input-precision bin over all nonzero
    indices, skipping the sort entirely.
    """
    if strategy is None:
        strategy = ExactBinning()
    summary = exponent_preprocess(x, y)

    if summary.degenerate:
        ps = ParameterSet(
            bins=[], zero_idx=summary.zero_idx, e_min=0, e_max=0,
            strategy=strategy, tolerance=cfg, early_terminated=False,
            n=summary.n, eps_eff=cfg.epsilon, n_bins=0, rel_bound=0.0,
        )
        return ps

    if early_termination(summary.e_min, summary.e_max, cfg.input_mu, cfg.epsilon):
        whole = Bin(lower=summary.e_min - 1, upper=summary.e_max,
                    indices=summary.idx)
        partition = BinPartition(bins=[whole], strategy=strategy,
                                 e_min=summary.e_min, e_max=summary.e_max)
        ps = assign_precisions(partition, summary.e_max, cfg,
                               zero_idx=summary.zero_idx, n=summary.n)
        ps.early_terminated = True
        return ps

    init = sorted_bin_init(summary)
    partition = build_partition(summary, init, strategy)
    return assign_precisions(partition, summary.e_max, cfg,
                             zero_idx=summary.zero_idx, n=summary.n)


@dataclass
class ReferenceResult:
    """Verification-grade dot product: value is correctly rounded (<1 ulp)."""

    value: float
    flexp_e: Optional[int]       # flexp(x . y), None when the dot is 0
    plain: float                 # left-to-right double dot, the baseline kernel


def _two_prod(x: np.ndarray, y: np.ndarray):
    """Error-free transformation: h + e == x*y exactly (Dekker splitting)."""
    h = x * y
    c = 134217729.0  # 2^27 + 1
    px = c * x
    xh = px - (px - x)
    xl = x - xh
    py = c * y
    yh = py - (py - y)
    yl = y - yh
    e = ((xh * yh - h) + xh * yl + xl * yh) + xl * yl
    return h, e


def reference_dot(x: np.ndarray, y: np.ndarray) -> ReferenceResult:
    """Correctly rounded dot product via exact product pairs + exact summation.

    Dekker two-products split every x_i*y_i into an exact double pair, and
    fsum folds all 2n halves with Shewchuk partials, so the result is the
    true sum rounded once.  Magnitudes beyond the splitting range fall back
    to exact rational arithmetic.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("reference_dot needs equal-length 1-D arrays")
    if x.size == 0:
        return ReferenceResult(value=0.0, flexp_e=None, plain=0.0)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")

    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        h, e = _two_prod(x, y)
        # splitting is exact only without overflow, and the product error term
        # only stays representable well clear of the subnormal range
        near_underflow = bool(np.any((np.abs(h) < 2.0**-900) & (h != 0.0)))
        if np.isfinite(h).all() and np.isfinite(e).all() and not near_underflow:
            value = math.fsum(np.concatenate((h, e)))
            plain = float(np.add.accumulate(h)[-1])
        else:
            exact = sum(Fraction(float(a)) * Fraction(float(b))
                        for a, b in zip(x, y))
            value = float(exact)  # correctly rounded; raises on overflow
            plain = 0.0
            for a, b in zip(x.tolist(), y.tolist()):
                plain = plain + a * b
    if math.isinf(value):
        raise OverflowError("true dot product overflows double")
    flexp_e = flexp(value) if value != 0.0 else None
    return ReferenceResult(value=value, flexp_e=flexp_e, plain=plain)


@dataclass
class QdotReport:
    """Approximate value plus everything needed to audit it.

    abs_bound and rel_bound are the nominal per-bin sums
    Σ M_k 2^(u_k+1) eps(k) and Σ M_k 2^(u_k-e_max+1) eps(k).  Because bins
    key on exponent *sums* (which undershoot the product exponent by up to
    one), the provable caps are twice those: abs_cap doubles abs_bound, and
    rel_guarantee = N_bins * eps_eff is the tolerance-level relative bound
    the parameter selection actually enforces.
    """

    value: float
    counts: Dict[PrecisionLevel, int]        # component counts, sum == n
    abs_bound: float
    rel_bound: float
    abs_cap: float                           # provable absolute cap (2x nominal)
    rel_guarantee: float                     # N_bins * eps_eff (= eps with splitting)
    rel_hypothesis: str                      # "holds" | "assumed" | "violated"
    rel_bound_e: Optional[float]             # diagnostic bound from flexp(x.y)
    early_terminated: bool
    n: int
    epsilon: float
    split: SplitMode
    strategy: str
    phase_ns: Dict[str, int] = field(default_factory=dict)
    params: Optional[ParameterSet] = None

    def count(self, level: PrecisionLevel) -> int:
        return self.counts.get(level, 0)

    def fraction(self, level: PrecisionLevel) -> float:
        return self.count(level) / self.n if self.n else 0.0


def _component_counts(params: ParameterSet) -> Dict[PrecisionLevel, int]:
    counts = {level: 0 for level in PrecisionLevel}
    for b in params.bins:
        counts[b.precision] += b.cardinality
    counts[PrecisionLevel.PERFORATE] += int(params.zero_idx.size)
    return counts


def qdot(
    x: np.ndarray,
    y: np.ndarray,
    cfg: ToleranceConfig,
    strategy: Strategy = None,
    reference: Optional[ReferenceResult] = None,
) -> QdotReport:
    """Approximate dot product with audit report.

    The relative bound is always computed; its hypothesis (e_max of the
    products not exceeding flexp of the true dot) is marked "holds" when x
    and y are the same array (a norm) or a reference confirms it, "assumed"
    otherwise.  Passing a reference also fills the flexp-based diagnostic
    bound used when the hypothesis fails.
    """
    is_norm = x is y
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = x if is_norm else np.ascontiguousarray(y, dtype=np.float64)

    t0 = time.perf_counter_ns()
    params = select_parameters(x, y, cfg, strategy)
    t1 = time.perf_counter_ns()
    values = [bin_dot(x, y, b) for b in params.bins]
    value = qdot_accumulate(values)
    t2 = time.perf_counter_ns()

    abs_bound = math.fsum(absolute_bound_term(b) for b in params.bins)
    rel_bound = math.fsum(relative_bound_term(b, params.e_max) for b in params.bins)

    rel_hypothesis = "assumed"
    rel_bound_e = None
    if is_norm:
        rel_hypothesis = "holds"
    if reference is not None:
        if reference.flexp_e is None:
            rel_hypothesis = "violated" if not is_norm else rel_hypothesis
        else:
            holds = params.e_max <= reference.flexp_e or not params.bins
            rel_hypothesis = "holds" if (holds or is_norm) else "violated"
            rel_bound_e = math.fsum(
                b.cardinality * math.ldexp(b.precision.eps,
                                           b.upper - reference.flexp_e + 1)
                for b in params.bins
            )

    return QdotReport(
        value=value,
        counts=_component_counts(params),
        abs_bound=abs_bound,
        rel_bound=rel_bound,
        abs_cap=2.0 * abs_bound,
        rel_guarantee=params.rel_guarantee,
        rel_hypothesis=rel_hypothesis,
        rel_bound_e=rel_bound_e,
        early_terminated=params.early_terminated,
        n=params.n,
        epsilon=cfg.epsilon,
        split=cfg.split,
        strategy=strategy_label(params.strategy),
        phase_ns={"select": t1 - t0, "compute": t2 - t1, "reference": 0},
        params=params,
    )
