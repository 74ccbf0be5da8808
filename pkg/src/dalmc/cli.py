"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 usage or contract error,
3 I/O or data-file error. Failures print ``dalmc: error in stage '<stage>'``
to standard error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .data import (FORMATS, NORMALIZE_MODES, SynthSpec, generate_synthetic, load_dataset,
                   read_labels, read_manifest, save_dataset)
from .errors import DataError, InvalidConfig, NumericalFailure
from .harness import (BETA_GRID, RunOptions, StageError, stage, sweep_anchors, sweep_beta,
                      run_fit, trace_rows, write_sweep_csv, write_trace_csv)
from .metrics import evaluate

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _add_solver_flags(p, k_required=True):
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    p.add_argument("--k", type=int, required=k_required, help="number of clusters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", choices=NORMALIZE_MODES, default="none")
    p.add_argument("--embed-dims", type=_int_list, default=None,
                   help="comma-separated per-view embedding sizes (default min(d, max(2k, l)))")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--rel-tol", type=float, default=1e-6)


def _add_kmeans_flags(p):
    p.add_argument("--restarts", type=int, default=20, help="K-means restarts")
    p.add_argument("--no-metrics", action="store_true", help="skip label-based evaluation")


def build_parser():
    parser = argparse.ArgumentParser(prog="dalmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit, cluster and evaluate once")
    _add_solver_flags(p)
    _add_kmeans_flags(p)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--anchors", type=int, default=None, help="anchor count l (default k)")
    p.add_argument("--reruns", type=int, default=1,
                   help="whole-pipeline reruns with seeds seed..seed+R-1")
    p.add_argument("-o", "--output", required=True, help="JSON report path")

    p = sub.add_parser("sweep-beta", help="one run per beta value")
    _add_solver_flags(p)
    _add_kmeans_flags(p)
    p.add_argument("--anchors", type=int, default=None)
    p.add_argument("--grid", type=_float_list, default=list(BETA_GRID))
    p.add_argument("-o", "--output", required=True, help="JSON report path")
    p.add_argument("--csv", default=None, help="CSV table path (default: report path with .csv)")

    p = sub.add_parser("sweep-anchors", help="one run per anchor count")
    _add_solver_flags(p)
    _add_kmeans_flags(p)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--grid", type=_int_list, default=None, help="default k,2k,3k,5k")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("trace", help="per-iteration objective as CSV")
    _add_solver_flags(p, k_required=False)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--anchors", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="CSV path")

    p = sub.add_parser("synth", help="write a seeded synthetic multi-view dataset")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--dims", type=_int_list, default=[20, 30, 40])
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--format", choices=FORMATS, default="raw-f64")
    p.add_argument("-o", "--output-dir", required=True)

    p = sub.add_parser("evaluate", help="score a predicted label file against ground truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    return parser


def _load(args, timings):
    with stage("load", timings):
        return load_dataset(read_manifest(args.manifest))


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _options(args, **over):
    kw = dict(
        k=args.k, seed=args.seed, normalize=args.normalize, embed_dims=args.embed_dims,
        max_iter=args.max_iter, rel_tol=args.rel_tol,
    )
    for name in ("beta", "anchors", "restarts", "reruns"):
        if hasattr(args, name) and getattr(args, name) is not None:
            kw[name] = getattr(args, name)
    if hasattr(args, "no_metrics"):
        kw["metrics"] = not args.no_metrics
    kw.update(over)
    return RunOptions(**kw)


def cmd_fit(args):
    timings = {}
    x = _load(args, timings)
    report = run_fit(x, _options(args), source=str(args.manifest))
    report["timing"]["load"] = timings["load"]
    _write_json(report, args.output)
    m = report["metrics"]
    if m:
        print(" ".join(f"{key}={m['best'][key]:.4f}" for key in ("acc", "nmi", "f1", "purity")))
    return EXIT_OK


def _finish_sweep(report, args):
    for row in report["rows"]:
        if row["status"] != "ok":
            print(f"dalmc: warning: {row['status']}", file=sys.stderr)
    _write_json(report, args.output)
    table = args.csv or str(Path(args.output).with_suffix(".csv"))
    write_sweep_csv(report, table)
    return EXIT_OK


def cmd_sweep_beta(args):
    x = _load(args, {})
    report = sweep_beta(x, _options(args), grid=args.grid, source=str(args.manifest))
    return _finish_sweep(report, args)


def cmd_sweep_anchors(args):
    x = _load(args, {})
    report = sweep_anchors(x, _options(args), grid=args.grid, source=str(args.manifest))
    return _finish_sweep(report, args)


def cmd_trace(args):
    if args.k is None and args.anchors is None:
        raise StageError("config", InvalidConfig("trace needs --k or --anchors"))
    x = _load(args, {})
    k = args.k if args.k is not None else args.anchors
    rows = trace_rows(x, _options(args, k=k, metrics=False))
    write_trace_csv(rows, args.output)
    return EXIT_OK


def cmd_synth(args):
    spec = SynthSpec(n=args.n, k=args.k, v=len(args.dims), dims=args.dims,
                     separation=args.separation, noise=args.noise, seed=args.seed)
    with stage("synth", {}):
        x = generate_synthetic(spec)
    with stage("save", {}):
        path = save_dataset(x, args.output_dir, fmt=args.format, name="synthetic")
    print(path)
    return EXIT_OK


def cmd_evaluate(args):
    with stage("load", {}):
        truth = read_labels(args.truth)
        pred = read_labels(args.pred)
    with stage("metrics", {}):
        bundle = evaluate(truth, pred)
    print(json.dumps(bundle.as_dict()))
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "sweep-beta": cmd_sweep_beta,
    "sweep-anchors": cmd_sweep_anchors,
    "trace": cmd_trace,
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"dalmc: error in stage '{exc.stage}': {exc.error}", file=sys.stderr)
        if isinstance(exc.error, NumericalFailure):
            return EXIT_NUMERICAL
        if isinstance(exc.error, DataError):
            return EXIT_IO
        return EXIT_USAGE
    except OSError as exc:
        print(f"dalmc: error in stage 'output': {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
