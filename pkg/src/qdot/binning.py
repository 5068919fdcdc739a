"""Sorted bin initialization and the three partitioning strategies.

Bins are half-open exponent intervals (lower, upper]; a partition covers
[e_min, e_max] with pairwise-disjoint intervals and assigns every nonzero
component to exactly one bin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .floatbits import ExponentSummary

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


class SortKind(enum.Enum):
    COUNTING = "counting"
    COMPARISON = "comparison"


def choose_sort(n: int, e_min: int, e_max: int) -> SortKind:
    """Pick the sorting backend by the range-vs-n*log2(n/2) crossover.

    Counting sort wins when the exponent range is small relative to n; for
    double inputs (range <= 2048) that is every n >= 287.
    """
    if n < 1:
        raise ValueError("n must be positive")
    span = e_max - e_min + 1
    if n < 2:
        return SortKind.COMPARISON
    return SortKind.COUNTING if span <= n * math.log2(n / 2) else SortKind.COMPARISON


if njit is not None:

    @njit(cache=True)
    def _counting_scatter(keys, offsets):  # pragma: no cover - jitted
        n = keys.shape[0]
        perm = np.empty(n, dtype=np.int64)
        write = offsets[:-1].copy()
        for i in range(n):
            k = keys[i]
            perm[write[k]] = i
            write[k] += 1
        return perm

else:  # pragma: no cover

    def _counting_scatter(keys, offsets):
        n = keys.shape[0]
        perm = np.empty(n, dtype=np.int64)
        write = offsets[:-1].copy()
        for i in range(n):
            k = keys[i]
            perm[write[k]] = i
            write[k] += 1
        return perm


@dataclass
class SortedInit:
    """Stable exponent ordering plus the per-value histogram.

    ``order`` holds original component indices sorted by (exponent sum,
    original index).  ``counts[k]`` is the number of components with exponent
    e_min + k; ``offsets`` are the cumulative starts, so the components with
    exponent e_min + k occupy order[offsets[k]:offsets[k+1]].
    """

    order: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    e_min: int
    e_max: int
    kind: SortKind


def sorted_bin_init(summary: ExponentSummary, kind: Optional[SortKind] = None) -> SortedInit:
    """Order components by non-decreasing exponent sum, ties by index.

    Both backends produce identical output; the counting path also yields the
    histogram as a byproduct, the comparison path computes it in a post-pass.
    """
    if summary.degenerate:
        raise ValueError("degenerate summary: no nonzero products to bin")
    e = summary.e
    e_min, e_max = summary.e_min, summary.e_max
    span = e_max - e_min + 1
    if kind is None:
        kind = choose_sort(e.shape[0], e_min, e_max)

    keys = (e.astype(np.int64) - e_min)
    counts = np.bincount(keys, minlength=span)
    offsets = np.empty(span + 1, dtype=np.int64)
    offsets[0] = 0
    np.cumsum(counts, out=offsets[1:])

    if kind is SortKind.COUNTING:
        perm = _counting_scatter(keys, offsets)
    else:
        # Timsort on the raw keys; stability gives the ascending-index tiebreak.
        perm = np.asarray(sorted(range(keys.shape[0]), key=keys.__getitem__), dtype=np.int64)

    order = summary.idx[perm]
    return SortedInit(order=order, counts=counts, offsets=offsets,
                      e_min=e_min, e_max=e_max, kind=kind)


@dataclass
class ExactBinning:
    name: str = field(default="exact", init=False)


@dataclass
class RangedBinning:
    width: int
    name: str = field(default="ranged", init=False)

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("ranged binning needs width >= 1")


@dataclass
class BinSplitting:
    levels: int
    name: str = field(default="split", init=False)

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("split levels must be >= 0")


Strategy = Union[ExactBinning, RangedBinning, BinSplitting]


def parse_strategy(text: str) -> Strategy:
    """Parse 'exact', 'ranged:W' or 'split:S'."""
    head, _, arg = text.partition(":")
    head = head.strip().lower()
    if head == "exact":
        return ExactBinning()
    if head == "ranged":
        return RangedBinning(width=int(arg))
    if head == "split":
        return BinSplitting(levels=int(arg))
    raise ValueError(f"unknown binning strategy {text!r}")


def strategy_label(strategy: Strategy) -> str:
    if isinstance(strategy, ExactBinning):
        return "exact"
    if isinstance(strategy, RangedBinning):
        return f"ranged:{strategy.width}"
    return f"split:{strategy.levels}"


@dataclass
class Bin:
    """One (lower, upper] exponent bin; score/precision filled by scoring."""

    lower: int
    upper: int
    indices: np.ndarray          # member component indices, ascending
    score: Optional[int] = None
    precision: Optional[object] = None  # PrecisionLevel, assigned later

    @property
    def cardinality(self) -> int:
        return int(self.indices.shape[0])


@dataclass
class BinPartition:
    bins: List[Bin]              # ascending upper bound
    strategy: Strategy
    e_min: int
    e_max: int


def exact_bins(summary: ExponentSummary, init: SortedInit) -> BinPartition:
    """One singleton-width bin (u-1, u] per distinct exponent value present."""
    bins: List[Bin] = []
    present = np.flatnonzero(init.counts)
    for k in present:
        u = init.e_min + int(k)
        members = init.order[init.offsets[k]:init.offsets[k + 1]]
        bins.append(Bin(lower=u - 1, upper=u, indices=members))
    return BinPartition(bins=bins, strategy=ExactBinning(),
                        e_min=init.e_min, e_max=init.e_max)


def ranged_bins(summary: ExponentSummary, init: SortedInit, width: int) -> BinPartition:
    """Fixed-width intervals (u_k - w, u_k], u_k = e_min + k*w - 1, anchored
    at e_min; empty intervals are dropped."""
    if width < 1:
        raise ValueError("ranged binning needs width >= 1")
    span = init.e_max - init.e_min + 1
    n_intervals = -(-span // width)
    bins: List[Bin] = []
    for k in range(1, n_intervals + 1):
        u = init.e_min + k * width - 1
        lo_key = (k - 1) * width
        hi_key = min(k * width, span)
        members = init.order[init.offsets[lo_key]:init.offsets[hi_key]]
        if members.size == 0:
            continue
        bins.append(Bin(lower=u - width, upper=u, indices=np.sort(members)))
    return BinPartition(bins=bins, strategy=RangedBinning(width),
                        e_min=init.e_min, e_max=init.e_max)


def split_bins(summary: ExponentSummary, init: SortedInit, levels: int) -> BinPartition:
    """Recursive halving of the single sorted bin, ``levels`` times.

    A split sends the first floor(m/2) sorted elements left and the rest
    right; bins of size <= 1 stop early.  Cut points landing inside a run of
    equal exponents are pushed past the run (equal exponents coalesce into
    the earlier bin), so the (lower, upper] intervals stay disjoint and every
    member satisfies lower < e_i <= upper.
    """
    if levels < 0:
        raise ValueError("split levels must be >= 0")
    n_nonzero = init.order.shape[0]
    levels = min(levels, max(0, n_nonzero - 1).bit_length())  # 2^levels <= ~n

    # Work on (start, stop) slices of the sorted order array.
    slices = [(0, n_nonzero)]
    for _ in range(levels):
        nxt = []
        for start, stop in slices:
            m = stop - start
            if m <= 1:
                nxt.append((start, stop))
                continue
            mid = start + m // 2
            nxt.append((start, mid))
            nxt.append((mid, stop))
        slices = nxt

    # Exponent of the sorted stream, for leaf maxima: values repeated by count.
    values = np.arange(init.e_min, init.e_max + 1, dtype=np.int64)
    e_sorted = np.repeat(values, init.counts)

    # A cut inside a tie run would give the right leaf members equal to the
    # left leaf's maximum, breaking lower < e_i; push every cut to the end of
    # its run so equal exponents coalesce into the earlier bin.
    cuts = []
    for start, stop in slices[:-1]:
        c = stop
        if e_sorted[c - 1] == e_sorted[c]:
            c = int(np.searchsorted(e_sorted, e_sorted[c], side="right"))
        if c < n_nonzero and (not cuts or c > cuts[-1]):
            cuts.append(c)

    bins: List[Bin] = []
    prev_u = init.e_min - 1
    for start, stop in zip([0] + cuts, cuts + [n_nonzero]):
        u = int(e_sorted[stop - 1])
        members = np.sort(init.order[start:stop])
        bins.append(Bin(lower=prev_u, upper=u, indices=members))
        prev_u = u
    return BinPartition(bins=bins, strategy=BinSplitting(levels),
                        e_min=init.e_min, e_max=init.e_max)


def build_partition(summary: ExponentSummary, init: SortedInit, strategy: Strategy) -> BinPartition:
    if isinstance(strategy, ExactBinning):
        return exact_bins(summary, init)
    if isinstance(strategy, RangedBinning):
        return ranged_bins(summary, init, strategy.width)
    if isinstance(strategy, BinSplitting):
        return split_bins(summary, init, strategy.levels)
    raise TypeError(f"unknown strategy {strategy!r}")
