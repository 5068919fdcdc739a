"""Iterative-solver applications: approximate CG and approximate power method.

Both solvers replace exactly their two per-iteration dot products with qdot;
matrix-vector products stay in plain double.  A trace records the precision
mix of every qdot call so the approximation level is visible per iteration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .binning import ExactBinning, Strategy
from .kernel import QdotReport, qdot
from .scoring import PrecisionLevel, SplitMode, ToleranceConfig

TRACE_HEADER = "iter,call_site,pct_perforate,pct_half,pct_single,pct_double,resid_or_lambda"


class BreakdownError(RuntimeError):
    """CG direction lost positive curvature (p.Ap <= 0 or non-finite)."""


class ZeroIterateError(RuntimeError):
    """Power-method iterate collapsed to the zero vector."""


@dataclass
class SparseMatrix:
    """CSR storage plus the symmetry promise the solvers rely on."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n: int
    symmetric: bool = True
    _csr: Optional[sp.csr_matrix] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_csr(cls, m: sp.csr_matrix, symmetric: bool = True) -> "SparseMatrix":
        m = m.tocsr()
        m.sort_indices()
        return cls(indptr=m.indptr, indices=m.indices, data=m.data,
                   n=m.shape[0], symmetric=symmetric, _csr=m)

    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.data, self.indices, self.indptr), shape=(self.n, self.n))
        return self._csr

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr() @ v


def gen_stencil(nx: int, ny: int, nz: int) -> Tuple[SparseMatrix, np.ndarray]:
    """27-point stencil on an nx*ny*nz grid: diagonal 27, off-diagonals -1,
    clipped at the boundary.  rhs is the row sums, so the exact solution is
    the all-ones vector (the usual benchmark convention)."""
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("grid dimensions must be >= 1")
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                             indexing="ij")
    ix, iy, iz = ix.ravel(), iy.ravel(), iz.ravel()
    row_of = (ix * ny + iy) * nz + iz

    rows, cols, vals = [], [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                jx, jy, jz = ix + dx, iy + dy, iz + dz
                ok = ((0 <= jx) & (jx < nx) & (0 <= jy) & (jy < ny)
                      & (0 <= jz) & (jz < nz))
                rows.append(row_of[ok])
                cols.append(((jx * ny + jy) * nz + jz)[ok])
                if dx == 0 and dy == 0 and dz == 0:
                    vals.append(np.full(int(ok.sum()), 27.0))
                else:
                    vals.append(np.full(int(ok.sum()), -1.0))
    n = nx * ny * nz
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    a = SparseMatrix.from_csr(coo.tocsr(), symmetric=True)
    rhs = a.matvec(np.ones(n))
    return a, rhs


def gen_graph_laplacian(n: int, edge_prob: float, seed: int = 0) -> SparseMatrix:
    """Laplacian L = D - A of an Erdos-Renyi G(n, edge_prob) graph."""
    if not (0.0 <= edge_prob <= 1.0):
        raise ValueError("edge_prob must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for i in range(n - 1):
        # row-at-a-time keeps memory O(n) for large graphs
        hits = np.flatnonzero(rng.random(n - i - 1) < edge_prob) + i + 1
        rows.append(np.full(hits.size, i))
        cols.append(hits)
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = np.empty(0, dtype=np.int64)
        c = np.empty(0, dtype=np.int64)
    ones = np.ones(r.size)
    adj = sp.coo_matrix((ones, (r, c)), shape=(n, n))
    adj = adj + adj.T
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = sp.diags(deg) - adj
    return SparseMatrix.from_csr(lap.tocsr(), symmetric=True)


@dataclass
class TraceRow:
    iteration: int
    call_site: str
    counts: dict
    n: int
    resid_or_lambda: float

    def pct(self, level: PrecisionLevel) -> float:
        return 100.0 * self.counts.get(level, 0) / self.n if self.n else 0.0


@dataclass
class SolveTrace:
    rows: List[TraceRow] = field(default_factory=list)

    def record(self, iteration: int, call_site: str, report: QdotReport,
               resid_or_lambda: float) -> None:
        self.rows.append(TraceRow(iteration, call_site, dict(report.counts),
                                  report.n, resid_or_lambda))

    def write_csv(self, out: Union[str, IO[str]]) -> None:
        own = isinstance(out, str)
        fh = open(out, "w", newline="") if own else out
        try:
            fh.write(TRACE_HEADER + "\n")
            w = csv.writer(fh, lineterminator="\n")
            for r in self.rows:
                w.writerow([
                    r.iteration, r.call_site,
                    repr(r.pct(PrecisionLevel.PERFORATE)),
                    repr(r.pct(PrecisionLevel.HALF)),
                    repr(r.pct(PrecisionLevel.SINGLE)),
                    repr(r.pct(PrecisionLevel.DOUBLE)),
                    repr(r.resid_or_lambda),
                ])
        finally:
            if own:
                fh.close()


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float
    trace: SolveTrace


def _norm_report(v: np.ndarray, cfg: ToleranceConfig, strategy) -> QdotReport:
    report = qdot(v, v, cfg, strategy=strategy)
    if not (report.value >= 0.0):
        raise AssertionError("norm computed by qdot must be nonnegative")
    return report


def acg(
    a: SparseMatrix,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tau: float = 1e-8,
    epsilon: float = 1e-8,
    split: SplitMode = SplitMode.PER_BIN,
    max_iters: int = 10_000,
    strategy: Strategy = None,
) -> CGResult:
    """Conjugate gradient with both per-iteration dot products replaced by
    qdot: the residual norm r.r (also the stopping quantity, square-rooted)
    and the curvature p.Ap.  Breakdown (nonpositive or non-finite curvature)
    raises instead of silently iterating."""
    if strategy is None:
        strategy = ExactBinning()
    if not a.symmetric:
        raise ValueError("CG needs a symmetric positive definite matrix")
    cfg = ToleranceConfig(epsilon=epsilon, split=split)
    n = a.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    trace = SolveTrace()

    r = b - a.matvec(x)
    p = r.copy()
    c_rep = _norm_report(r, cfg, strategy)
    c = c_rep.value
    resid = math.sqrt(c)
    trace.record(0, "rtr", c_rep, resid)

    k = 0
    while resid > tau and k < max_iters:
        q = a.matvec(p)
        d_rep = qdot(p, q, cfg, strategy=strategy)
        d = d_rep.value
        if not math.isfinite(d) or d <= 0.0:
            raise BreakdownError(f"p.Ap = {d!r} at iteration {k}")
        alpha = c / d
        x = x + alpha * p
        r = r - alpha * q
        c_rep = _norm_report(r, cfg, strategy)
        c_new = c_rep.value
        beta = c_new / c
        p = r + beta * p
        c = c_new
        resid = math.sqrt(c)
        k += 1
        trace.record(k, "pAp", d_rep, resid)
        trace.record(k, "rtr", c_rep, resid)

    return CGResult(x=x, iterations=k, converged=resid <= tau,
                    residual_norm=resid, trace=trace)


def reference_cg(
    a: SparseMatrix,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tau: float = 1e-8,
    max_iters: int = 10_000,
) -> CGResult:
    """Plain double CG with the identical stopping rule, for iteration-count
    comparisons."""
    n = a.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - a.matvec(x)
    p = r.copy()
    c = float(np.dot(r, r))
    resid = math.sqrt(c)
    k = 0
    while resid > tau and k < max_iters:
        q = a.matvec(p)
        d = float(np.dot(p, q))
        if not math.isfinite(d) or d <= 0.0:
            raise BreakdownError(f"p.Ap = {d!r} at iteration {k}")
        alpha = c / d
        x = x + alpha * p
        r = r - alpha * q
        c_new = float(np.dot(r, r))
        beta = c_new / c
        p = r + beta * p
        c = c_new
        resid = math.sqrt(c)
        k += 1
    return CGResult(x=x, iterations=k, converged=resid <= tau,
                    residual_norm=resid, trace=SolveTrace())


@dataclass
class PMResult:
    eigenvalue: float
    x: np.ndarray
    iterations: int
    converged: bool
    trace: SolveTrace


def apm(
    a: SparseMatrix,
    x0: np.ndarray,
    tau: float = 1e-6,
    epsilon: float = 1e-7,
    split: SplitMode = SplitMode.PER_BIN,
    max_iters: int = 300,
    strategy: Strategy = None,
) -> PMResult:
    """Power method with its two dot products replaced by qdot.

    Per iteration: z = A x, the squared norm z.z comes from qdot and feeds
    the normalization, and the eigenvalue estimate is qdot(x, z/|z|) * |z|,
    i.e. the Rayleigh quotient of the unit iterate.  Stops when successive
    eigenvalue estimates differ by at most tau.
    """
    if strategy is None:
        strategy = ExactBinning()
    cfg = ToleranceConfig(epsilon=epsilon, split=split)
    x = np.array(x0, dtype=np.float64)
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ZeroIterateError("x0 is the zero vector")
    x = x / nrm
    trace = SolveTrace()

    lam_prev = None
    lam = 0.0
    k = 0
    converged = False
    while k < max_iters:
        z = a.matvec(x)
        if not np.any(z):
            raise ZeroIterateError(f"A x vanished at iteration {k}")
        c_rep = _norm_report(z, cfg, strategy)
        c = c_rep.value
        s = math.sqrt(c)
        x_next = z / s
        lam_rep = qdot(x, x_next, cfg, strategy=strategy)
        lam = lam_rep.value * s
        k += 1
        trace.record(k, "norm", c_rep, lam)
        trace.record(k, "lambda", lam_rep, lam)
        x = x_next
        if lam_prev is not None and abs(lam - lam_prev) <= tau:
            converged = True
            break
        lam_prev = lam

    return PMResult(eigenvalue=lam, x=x, iterations=k, converged=converged,
                    trace=trace)


def reference_pm(
    a: SparseMatrix,
    x0: np.ndarray,
    tau: float = 1e-6,
    max_iters: int = 300,
) -> PMResult:
    """Plain double power method with the identical stopping rule."""
    x = np.array(x0, dtype=np.float64)
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ZeroIterateError("x0 is the zero vector")
    x = x / nrm
    lam_prev = None
    lam = 0.0
    k = 0
    converged = False
    while k < max_iters:
        z = a.matvec(x)
        if not np.any(z):
            raise ZeroIterateError(f"A x vanished at iteration {k}")
        c = float(np.dot(z, z))
        s = math.sqrt(c)
        x_next = z / s
        lam = float(np.dot(x, x_next)) * s
        k += 1
        x = x_next
        if lam_prev is not None and abs(lam - lam_prev) <= tau:
            converged = True
            break
        lam_prev = lam
    return PMResult(eigenvalue=lam, x=x, iterations=k, converged=converged,
                    trace=SolveTrace())
