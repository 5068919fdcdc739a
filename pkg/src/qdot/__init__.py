"""qdot: error-bounded mixed-precision approximate dot product.

Components are binned by the exponent sum of each product, every bin gets
the coarsest precision (double / single / half / full perforation) its
closed-form score allows for the requested relative tolerance, and per-bin
dots are computed at those precisions and accumulated.  The report carries
provable absolute and relative error bounds.
"""

from .apps import (BreakdownError, CGResult, PMResult, SolveTrace,
                   SparseMatrix, ZeroIterateError, acg, apm,
                   gen_graph_laplacian, gen_stencil, reference_cg,
                   reference_pm)
from .binning import (Bin, BinPartition, BinSplitting, ExactBinning,
                      RangedBinning, SortKind, choose_sort, exact_bins,
                      parse_strategy, ranged_bins, sorted_bin_init, split_bins)
from .emulate import RoundedValue, bin_dot, neumaier_sum, qdot_accumulate, round_to
from .floatbits import ExponentSummary, exponent_preprocess, flexp
from .harness import (DistSpec, MetricRecord, generate, run_sweep,
                      run_tightness, run_trial, write_csv)
from .kernel import (QdotReport, ReferenceResult, qdot, reference_dot,
                     select_parameters)
from .scoring import (ParameterSet, PrecisionLevel, SplitMode, ToleranceConfig,
                      assign_precisions, bin_score, early_termination,
                      precision_of)

__version__ = "0.1.0"
