"""Command-line front end: dot / verify / bench / cg / power.

Flags override a key=value config file; every command is deterministic for a
fixed seed (timing columns are zeroed unless --measure-timings is given).
Exit codes: 0 success, 2 configuration or I/O error, 3 bound violation
(verify only).
"""

from __future__ import annotations

import argparse
import math
import os
import struct
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .apps import (BreakdownError, ZeroIterateError, acg, apm,
                   gen_graph_laplacian, gen_stencil, reference_cg)
from .binning import parse_strategy
from .harness import (DistSpec, MetricRecord, run_sweep, run_trial,
                      write_csv)
from .kernel import qdot, reference_dot
from .scoring import PrecisionLevel, SplitMode, ToleranceConfig


def parse_epsilon(text: str) -> float:
    """Accept decimal ('1e-8') or exact power-of-two ('2^-34') literals."""
    text = text.strip()
    if text.startswith("2^"):
        return math.ldexp(1.0, int(text[2:]))
    return float(text)


def parse_epsilon_scan(text: str) -> List[float]:
    """'LO:HI:xF' -> geometric grid LO, LO*F, ... up to HI inclusive."""
    try:
        lo_s, hi_s, step_s = text.split(":")
        if not step_s.lower().startswith("x"):
            raise ValueError
        lo = parse_epsilon(lo_s)
        hi = parse_epsilon(hi_s)
        factor = float(step_s[1:])
    except ValueError as exc:
        raise ValueError(f"bad scan spec {text!r}, expected LO:HI:xF") from exc
    if lo <= 0 or hi < lo or factor <= 1:
        raise ValueError(f"bad scan spec {text!r}")
    out = []
    v = lo
    while v <= hi * (1 + 1e-12):
        out.append(v)
        v *= factor
    return out


def parse_config(text: str) -> Dict[str, str]:
    """key=value lines; '#' starts a comment; blank lines ignored."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def serialize_config(cfg: Dict[str, str]) -> str:
    return "".join(f"{k}={cfg[k]}\n" for k in sorted(cfg))


def read_vector(path: str) -> np.ndarray:
    """Binary (8-byte LE length header + little-endian f64) or whitespace text."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) >= 8:
        (count,) = struct.unpack("<Q", blob[:8])
        if len(blob) == 8 + 8 * count:
            return np.frombuffer(blob, dtype="<f8", offset=8).copy()
    return np.array([float(tok) for tok in blob.decode().split()], dtype=np.float64)


def write_vector_binary(path: str, v: np.ndarray) -> None:
    v = np.ascontiguousarray(v, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", v.size))
        fh.write(v.tobytes())


def _fmt_value(v: float) -> str:
    if isinstance(v, float) and math.isfinite(v) and v == int(v) and abs(v) < 2**63:
        return str(int(v))
    return repr(v)


def _merge_config(args: argparse.Namespace, parser_defaults: Dict[str, object]) -> None:
    """Fill argparse Namespace holes from --config; flags always win."""
    if not getattr(args, "config", None):
        for key, default in parser_defaults.items():
            if getattr(args, key, None) is None:
                setattr(args, key, default)
        return
    try:
        with open(args.config) as fh:
            file_cfg = parse_config(fh.read())
    except OSError as exc:
        raise ValueError(f"cannot read config: {exc}") from exc
    for key, default in parser_defaults.items():
        if getattr(args, key, None) is not None:
            continue
        if key in file_cfg:
            setattr(args, key, file_cfg[key])
        else:
            setattr(args, key, default)


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return int(args.threads)
    return int(os.environ.get("QDOT_THREADS", "1"))


def _split_mode(text: str) -> SplitMode:
    return SplitMode.PER_BIN if text == "per-bin" else SplitMode.NONE


_DOT_DEFAULTS = dict(epsilon="2^-34", split="none", strategy="exact")


def cmd_dot(args) -> int:
    _merge_config(args, _DOT_DEFAULTS)
    x = read_vector(args.x)
    y = read_vector(args.y)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    eps = parse_epsilon(str(args.epsilon))
    cfg = ToleranceConfig(epsilon=eps, split=_split_mode(args.split))
    strategy = parse_strategy(args.strategy)

    ref = reference_dot(x, y) if args.with_reference and x.size else None
    report = qdot(x, y, cfg, strategy=strategy, reference=ref)

    print(f"value={_fmt_value(report.value)}")
    for level in PrecisionLevel:
        print(f"count_{level.label}={report.count(level)}")
    print(f"n={report.n}")
    print(f"abs_bound={report.abs_bound!r}")
    print(f"rel_bound={report.rel_bound!r}")
    print(f"abs_cap={report.abs_cap!r}")
    print(f"rel_guarantee={report.rel_guarantee!r}")
    print(f"rel_hypothesis={report.rel_hypothesis}")
    print(f"early_terminated={str(report.early_terminated).lower()}")
    print(f"epsilon={report.epsilon!r}")
    print(f"split={report.split.value}")
    print(f"strategy={report.strategy}")
    if ref is not None:
        relerr = abs(ref.value - report.value) / abs(ref.value) if ref.value else 0.0
        print(f"reference={_fmt_value(ref.value)}")
        print(f"relerr={relerr!r}")
    if args.measure_timings:
        print(f"t_select_ns={report.phase_ns['select']}")
        print(f"t_compute_ns={report.phase_ns['compute']}")
    return 0


_VERIFY_DEFAULTS = dict(family="B", t="13", n="1e4", trials="100",
                        epsilon="1e-8", split="per-bin", strategy="exact",
                        seed="0", norm_mode="true")


def cmd_verify(args) -> int:
    _merge_config(args, _VERIFY_DEFAULTS)
    eps = parse_epsilon(str(args.epsilon))
    split = _split_mode(args.split)
    strategy = parse_strategy(args.strategy)
    norm_mode = str(args.norm_mode).lower() in ("1", "true", "yes")
    n = int(float(args.n))
    trials = int(float(args.trials))
    seed = int(args.seed)

    records: List[MetricRecord] = []
    for t_text in str(args.t).split(","):
        spec = DistSpec(args.family, float(t_text), n, seed)
        for trial in range(trials):
            records.append(run_trial(spec, trial, eps, split, strategy, norm_mode))

    violations = 0
    for r in records:
        abs_err = abs(r.reference - r.value)
        if abs_err > r.abs_bound:
            violations += 1
        elif norm_mode and r.relerr > r.rel_bound:
            violations += 1

    if args.out:
        write_csv(records, args.out, include_timings=args.measure_timings)
    else:
        write_csv(records, sys.stdout, include_timings=args.measure_timings)
    if violations:
        print(f"bound violations: {violations}/{len(records)}", file=sys.stderr)
        return 3
    return 0


_BENCH_DEFAULTS = dict(family="B", t="5,9,13", n="1e5", trials="50",
                       epsilons="1e-15:1e-1:x10", split="per-bin",
                       strategy="exact", seed="0")


def cmd_bench(args) -> int:
    _merge_config(args, _BENCH_DEFAULTS)
    records = run_sweep(
        epsilons=parse_epsilon_scan(args.epsilons),
        family=args.family,
        t_values=[float(t) for t in str(args.t).split(",")],
        n_values=[int(float(v)) for v in str(args.n).split(",")],
        trials=int(float(args.trials)),
        seed=int(args.seed),
        split=_split_mode(args.split),
        strategy=parse_strategy(args.strategy),
        threads=_threads(args),
    )
    if args.out:
        write_csv(records, args.out, include_timings=args.measure_timings)
    else:
        write_csv(records, sys.stdout, include_timings=args.measure_timings)
    return 0


_CG_DEFAULTS = dict(nx="100", ny="100", nz="1", tau="1e-8", epsilon=None,
                    epsilon_scan=None, split="per-bin", strategy="exact",
                    max_iters="10000")


def cmd_cg(args) -> int:
    _merge_config(args, _CG_DEFAULTS)
    a, b = gen_stencil(int(args.nx), int(args.ny), int(args.nz))
    tau = float(args.tau)
    split = _split_mode(args.split)
    strategy = parse_strategy(args.strategy)
    max_iters = int(float(args.max_iters))

    if args.epsilon_scan:
        ref = reference_cg(a, b, tau=tau, max_iters=max_iters)
        lines = ["epsilon,iterations,reference_iterations,converged,breakdown"]
        for eps in parse_epsilon_scan(args.epsilon_scan):
            try:
                res = acg(a, b, tau=tau, epsilon=eps, split=split,
                          max_iters=max_iters, strategy=strategy)
                lines.append(f"{eps!r},{res.iterations},{ref.iterations},"
                             f"{str(res.converged).lower()},false")
            except BreakdownError:
                lines.append(f"{eps!r},-1,{ref.iterations},false,true")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0

    eps = parse_epsilon(str(args.epsilon if args.epsilon else "1e-8"))
    res = acg(a, b, tau=tau, epsilon=eps, split=split, max_iters=max_iters,
              strategy=strategy)
    if args.out:
        res.trace.write_csv(args.out)
    else:
        res.trace.write_csv(sys.stdout)
    print(f"iterations={res.iterations} converged={str(res.converged).lower()}",
          file=sys.stderr)
    return 0


_POWER_DEFAULTS = dict(n="1000", edge_prob="0.01", tau="1e-6", epsilon="1e-7",
                       split="per-bin", strategy="exact", seed="0",
                       max_iters="300")


def cmd_power(args) -> int:
    _merge_config(args, _POWER_DEFAULTS)
    n = int(float(args.n))
    seed = int(args.seed)
    a = gen_graph_laplacian(n, float(args.edge_prob), seed=seed)
    rng = np.random.default_rng(seed + 1)
    x0 = rng.standard_normal(n)
    x0 /= np.linalg.norm(x0)
    res = apm(a, x0, tau=float(args.tau),
              epsilon=parse_epsilon(str(args.epsilon)),
              split=_split_mode(args.split),
              max_iters=int(float(args.max_iters)),
              strategy=parse_strategy(args.strategy))
    if args.out:
        res.trace.write_csv(args.out)
    else:
        res.trace.write_csv(sys.stdout)
    print(f"lambda={res.eigenvalue!r} iterations={res.iterations} "
          f"converged={str(res.converged).lower()}", file=sys.stderr)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--threads", type=int, default=None,
                   help="worker bound (default: QDOT_THREADS or 1)")
    p.add_argument("--measure-timings", action="store_true",
                   help="record real nanosecond timings (breaks byte-determinism)")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdot",
                                     description="error-bounded approximate dot product toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dot", help="approximate one dot product from vector files")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--split", choices=["none", "per-bin"], default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--with-reference", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("verify", help="bound-soundness trials (exit 3 on violation)")
    p.add_argument("--family", choices=["A", "B"], default=None)
    p.add_argument("--t", default=None, help="t value or comma list")
    p.add_argument("--n", default=None)
    p.add_argument("--trials", default=None)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--split", choices=["none", "per-bin"], default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--norm-mode", dest="norm_mode", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="tolerance sweep with metrics CSV")
    p.add_argument("--family", choices=["A", "B"], default=None)
    p.add_argument("--t", default=None, help="comma list of t values")
    p.add_argument("--n", default=None, help="comma list of sizes")
    p.add_argument("--trials", default=None)
    p.add_argument("--epsilons", default=None, help="LO:HI:xF grid")
    p.add_argument("--split", choices=["none", "per-bin"], default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--seed", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cg", help="approximate CG on the stencil problem")
    p.add_argument("--nx", default=None)
    p.add_argument("--ny", default=None)
    p.add_argument("--nz", default=None)
    p.add_argument("--tau", default=None)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--epsilon-scan", dest="epsilon_scan", default=None)
    p.add_argument("--split", choices=["none", "per-bin"], default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--max-iters", dest="max_iters", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_cg)

    p = sub.add_parser("power", help="approximate power method on a graph Laplacian")
    p.add_argument("--n", default=None)
    p.add_argument("--edge-prob", dest="edge_prob", default=None)
    p.add_argument("--tau", default=None)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--split", choices=["none", "per-bin"], default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--max-iters", dest="max_iters", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_power)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ZeroIterateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BreakdownError as exc:
        print(f"breakdown: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
