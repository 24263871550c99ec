"""``perfdiscrim`` command line.

Subcommands::

    gen       write a synthetic benchmark trace file
    cluster   cluster traces at a fixed K and write plot data
    analyze   full analysis: report.json, tree.dot, clusters.csv
    export    re-render a report.json as DOT or JSON
    eval      label agreement between a report and ground truth

Exit codes: 0 success, 1 usage error, 2 no K fits the error bound,
3 I/O or file-format error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse.linalg

from . import benchgen
from .dtree import TreeParams
from .export import report_to_dot
from .klinear import KLinearConfig, klinear_cluster
from .pipeline import NoFit, NumericFailure, PipelineConfig, analyze, fixed_k_analyze
from .scoring import label_agreement
from .spectral import AlignmentConfig, alignment_kernel_approx, spectral_cluster
from .traces import TraceFormatError, load_traces, project_points, save_traces

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOFIT = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which collides with the NoFit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not (value > 0 and np.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not (value >= 0 and np.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _add_engine_args(p):
    p.add_argument("--engine", choices=("klinear", "spectral"), default="klinear")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    p.add_argument("--restarts", type=_positive_int, default=20)
    p.add_argument("--max-iterations", type=_positive_int, default=100)
    p.add_argument("--init", choices=("random-partition", "tube-pairs"), default="random-partition")
    p.add_argument("--delta", type=_positive_float, default=None,
                   help="alignment tube half-width (default 0.25%% of the output range)")
    p.add_argument("--neighbors", type=_positive_int, default=None,
                   help="alignment partners per point (default 32)")
    p.add_argument("--neighbor-pool", choices=("random", "nearest"), default="random")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="perfdiscrim", description="Functional performance-class analysis of execution traces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic benchmark trace file")
    g.add_argument("--preset", required=True, choices=benchgen.PRESETS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noiseless", action="store_true")
    g.add_argument("--traces", type=_positive_int, default=None, help="override the trace count")
    g.add_argument("-o", "--output", required=True)

    c = sub.add_parser("cluster", help="cluster traces at fixed K and write plot CSV")
    c.add_argument("traces")
    c.add_argument("--k", type=_positive_int, required=True)
    _add_engine_args(c)
    c.add_argument("-o", "--output", required=True, help="plot CSV: inputs, output, cluster")
    c.add_argument("--dump-similarity", default=None, help="write the similarity matrix as CSV")

    a = sub.add_parser("analyze", help="cluster, learn the discriminant tree, write artifacts")
    a.add_argument("traces")
    _add_engine_args(a)
    bound = a.add_mutually_exclusive_group()
    bound.add_argument("--mse-bound", type=_positive_float, default=None)
    bound.add_argument("--k", type=_positive_int, default=None, help="skip the K search")
    a.add_argument("--max-clusters", type=_positive_int, default=10)
    a.add_argument("--folds", type=int, default=10)
    a.add_argument("--max-height", type=int, default=10)
    a.add_argument("--min-leaf", type=_positive_int, default=5)
    a.add_argument("--min-impurity-decrease", type=_nonneg_float, default=1e-4)
    a.add_argument("--strict", action="store_true", help="require an explicit --seed")
    a.add_argument("--out-dir", default=".")
    a.add_argument("--record-timing", action="store_true",
                   help="store wall time in report.json (breaks byte-identical reruns)")

    e = sub.add_parser("export", help="render report.json as DOT or JSON")
    e.add_argument("report")
    e.add_argument("--format", choices=("dot", "json"), default="dot")
    e.add_argument("-o", "--output", default=None, help="default: stdout")

    v = sub.add_parser("eval", help="best-permutation agreement with ground-truth labels")
    v.add_argument("report")
    v.add_argument("truth", help="trace CSV with a truth: column")
    return parser


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _alignment(args) -> AlignmentConfig:
    return AlignmentConfig(
        delta=args.delta,
        neighbor_samples=args.neighbors,
        neighbors=args.neighbor_pool,
        seed=_seed(args),
    )


def _load(path):
    try:
        return load_traces(path)
    except TraceFormatError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None


def _read_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: not a JSON report ({exc.msg})") from None
    if not isinstance(report, dict) or "tree" not in report or "models" not in report:
        raise TraceFormatError(f"{path}: missing tree or models")
    return report


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_gen(args) -> int:
    spec = benchgen.preset(args.preset, seed=args.seed, noiseless=args.noiseless, n_traces=args.traces)
    ts = benchgen.generate(spec)
    save_traces(ts, args.output)
    print(f"wrote {len(ts)} traces ({spec.n_lines} lines) to {args.output}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    ts = _load(args.traces)
    ps = project_points(ts)
    if args.k > len(ps):
        raise UsageError(f"--k {args.k} exceeds the {len(ps)} traces")
    if args.engine == "spectral" and args.k > 1:
        sim = alignment_kernel_approx(ps, _alignment(args), keep_raw=False)
        if args.dump_similarity:
            sim.to_csv(args.dump_similarity)
        clustering = spectral_cluster(sim, ps, args.k, _seed(args))
    else:
        if args.dump_similarity:
            raise UsageError("--dump-similarity needs --engine spectral and --k >= 2")
        cfg = KLinearConfig(args.k, args.restarts, args.max_iterations, args.init, seed=_seed(args))
        clustering = klinear_cluster(ps, cfg)
    clustering = clustering.canonical()
    schema = ts.schema
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*schema.input_names, schema.output_name, "cluster"])
        for x, y, lab in zip(ts.inputs, ts.outputs, clustering.assignments):
            writer.writerow([*(repr(float(v)) for v in x), repr(float(y)), int(lab)])
    print(f"K={clustering.k} MSE={clustering.mse:.6g} flags={','.join(clustering.flags) or '-'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.strict and args.seed is None:
        raise UsageError("--strict requires an explicit --seed")
    if args.k is None and args.mse_bound is None:
        raise UsageError("one of --mse-bound or --k is required")
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if args.max_height < 0:
        raise UsageError("--max-height must be >= 0")
    out_dir = Path(args.out_dir)
    ts = _load(args.traces)
    if args.k is not None and args.k > len(ts):
        raise UsageError(f"--k {args.k} exceeds the {len(ts)} traces")
    cfg = PipelineConfig(
        mse_bound=args.mse_bound if args.mse_bound is not None else float("inf"),
        max_clusters=args.max_clusters,
        engine=args.engine,
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        init=args.init,
        alignment=_alignment(args),
        tree=TreeParams(args.max_height, args.min_leaf, args.min_impurity_decrease),
        folds=args.folds,
        seed=_seed(args),
    )
    result = fixed_k_analyze(ts, args.k, cfg) if args.k is not None else analyze(ts, cfg)
    if isinstance(result, NoFit):
        per_k = ", ".join(f"K={k}: {v:.6g}" for k, v in result.per_k_mse.items())
        print(
            f"no fit: no K <= {result.max_clusters} reaches MSE <= {result.mse_bound:.6g} ({per_k})",
            file=sys.stderr,
        )
        return EXIT_NOFIT

    out_dir.mkdir(parents=True, exist_ok=True)
    report_json = result.dumps(include_timing=args.record_timing)
    _write_text(out_dir / "report.json", report_json)
    _write_text(out_dir / "tree.dot", report_to_dot(json.loads(report_json)))
    ps = project_points(ts)
    residuals = result.clustering.residuals(ps)
    schema = ts.schema
    with open(out_dir / "clusters.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", *schema.input_names, schema.output_name, "label", "residual"])
        for i in range(len(ts)):
            writer.writerow([
                i,
                *(repr(float(v)) for v in ts.inputs[i]),
                repr(float(ts.outputs[i])),
                int(result.clustering.assignments[i]),
                repr(float(residuals[i])),
            ])
    print(result.metric_line())
    return EXIT_OK


def cmd_export(args) -> int:
    report = _read_report(args.report)
    if args.format == "dot":
        text = report_to_dot(report)
    else:
        text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = _read_report(args.report)
    try:
        assigned = report["clustering"]["assignments"]
    except KeyError:
        raise TraceFormatError(f"{args.report}: report has no cluster assignments") from None
    try:
        truth = load_traces(args.truth, with_truth=True).truth
    except TraceFormatError as exc:
        raise TraceFormatError(f"{args.truth}: {exc}") from None
    if len(assigned) != len(truth):
        raise UsageError(f"length mismatch: report has {len(assigned)} points, truth has {len(truth)}")
    print(f"agreement={label_agreement(assigned, truth):.6f}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "cluster": cmd_cluster,
    "analyze": cmd_analyze,
    "export": cmd_export,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        # non-finite results are detected and reported as numeric failures
        with np.errstate(over="ignore", invalid="ignore"):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"perfdiscrim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        where = exc.filename if exc.filename is not None else "?"
        print(f"perfdiscrim: I/O error on {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except TraceFormatError as exc:
        print(f"perfdiscrim: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericFailure, np.linalg.LinAlgError, FloatingPointError,
            scipy.sparse.linalg.ArpackError) as exc:
        print(f"perfdiscrim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"perfdiscrim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
