"""End-to-end runs and parameter sweeps, producing JSON-ready report dicts.

Every field except those under ``"timing"`` is a deterministic function of
the inputs and flags.
"""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import solver
from .cluster import KMeansConfig, kmeans_fit
from .data import normalize_with_stats
from .errors import DalmcError, InvalidConfig
from .metrics import evaluate

REPORT_SCHEMA = "dalmc.report/1"
SWEEP_SCHEMA = "dalmc.sweep/1"
BETA_GRID = (0.0001, 0.001, 0.01, 0.1, 1.0, 10.0)
THREADS_ENV = "DALMC_THREADS"
METRIC_NAMES = ("acc", "nmi", "f1", "purity")


class LabelsRequired(InvalidConfig):
    pass


class StageError(Exception):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"stage '{stage}': {error}")
        self.stage = stage
        self.error = error


@contextmanager
def stage(name: str, timings: Dict[str, float]):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except DalmcError as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


@dataclass
class RunOptions:
    k: int
    beta: float = 0.1
    anchors: Optional[int] = None
    embed_dims: Optional[Sequence[int]] = None
    seed: int = 0
    normalize: str = "none"
    max_iter: int = 100
    rel_tol: float = 1e-6
    restarts: int = 20
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-7
    reruns: int = 1
    metrics: bool = True

    def solver_config(self, x, seed=None) -> solver.SolverConfig:
        return solver.SolverConfig.for_dataset(
            x, self.k, anchors=self.anchors, embed_dims=self.embed_dims,
            beta=self.beta, max_iter=self.max_iter, rel_tol=self.rel_tol,
            seed=self.seed if seed is None else seed)

    def kmeans_config(self, seed=None) -> KMeansConfig:
        return KMeansConfig(k=self.k, restarts=self.restarts, max_iter=self.kmeans_max_iter,
                            tol=self.kmeans_tol, seed=self.seed if seed is None else seed)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _mean_std(bundles) -> dict:
    arr = {m: np.array([b[m] for b in bundles]) for m in METRIC_NAMES}
    return {
        "mean": {m: float(arr[m].mean()) for m in METRIC_NAMES},
        "std": {m: float(arr[m].std()) for m in METRIC_NAMES},
    }


def dataset_echo(x, source=None) -> dict:
    return {"name": x.name, "source": source, "n": x.n, "v": x.v, "dims": x.dims,
            "has_labels": x.labels is not None}


def _single_run(x, opts: RunOptions, seed: int, timings: Dict[str, float]) -> dict:
    """Solve, cluster and score once; ``x`` is already normalized."""
    if opts.k < 2 or opts.k > x.n:
        raise StageError("config", InvalidConfig(f"k={opts.k} must lie in [2, n={x.n}]"))
    with stage("config", timings):
        cfg = opts.solver_config(x, seed)
        cfg.validate(x)
    with stage("fit", timings):
        rep = solver.fit(x, cfg)
    with stage("kmeans", timings):
        km = kmeans_fit(rep.state.s, opts.kmeans_config(seed))
    out = {
        "solver_config": {"anchors": cfg.anchors, "embed_dims": list(cfg.embed_dims),
                          "beta": cfg.beta, "max_iter": cfg.max_iter,
                          "rel_tol": cfg.rel_tol, "seed": cfg.seed},
        "fit": {
            "iterations": rep.iterations,
            "converged": rep.converged,
            "lower_bound": rep.lower_bound,
            "final_objective": rep.state.objective_trace[-1],
            "objective_trace": list(rep.state.objective_trace),
            "alpha": rep.state.alpha.tolist(),
            "degeneracies": list(rep.degeneracies),
        },
        "kmeans": {"inertia": km.inertia, "restart_inertias": list(km.restart_inertias)},
        "labels": km.labels.tolist(),
        "metrics": None,
    }
    if opts.metrics:
        with stage("metrics", timings):
            best = evaluate(x.labels, km.labels).as_dict()
            per_restart = [evaluate(x.labels, lab).as_dict() for lab in km.restart_labels]
        out["metrics"] = {"best": best, "restarts": _mean_std(per_restart)}
    return out


def run_fit(x, opts: RunOptions, source=None, normalize_done=False) -> dict:
    """Normalize, fit, cluster and evaluate. Returns the report dict."""
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    if opts.metrics and x.labels is None:
        raise StageError("metrics", LabelsRequired("labels required to compute metrics"))
    degenerate = 0
    if not normalize_done:
        with stage("normalize", timings):
            x, degenerate = normalize_with_stats(x, opts.normalize)
    main = _single_run(x, opts, opts.seed, timings)

    report = {
        "schema": REPORT_SCHEMA,
        "command": "fit",
        "dataset": dataset_echo(x, source),
        "config": {
            "k": opts.k, "beta": opts.beta, "anchors": opts.anchors,
            "embed_dims": None if opts.embed_dims is None else list(opts.embed_dims),
            "seed": opts.seed, "normalize": opts.normalize, "max_iter": opts.max_iter,
            "rel_tol": opts.rel_tol, "restarts": opts.restarts,
            "kmeans_max_iter": opts.kmeans_max_iter, "kmeans_tol": opts.kmeans_tol,
            "reruns": opts.reruns, "metrics": opts.metrics,
        },
        "normalize_degenerate": degenerate,
        **main,
        "reruns": None,
    }
    if opts.reruns > 1 and opts.metrics:
        runs = [main] + [_single_run(x, opts, opts.seed + i, timings)
                         for i in range(1, opts.reruns)]
        bundles = [r["metrics"]["best"] for r in runs]
        report["reruns"] = {"seeds": [opts.seed + i for i in range(opts.reruns)],
                            "best": bundles, **_mean_std(bundles)}
    timings["total"] = time.perf_counter() - t0
    report["timing"] = timings
    return report


def _sweep_row(x, opts: RunOptions, key: str, value):
    t0 = time.perf_counter()
    row = {key: value, "status": "ok"}
    try:
        res = _single_run(x, opts, opts.seed, {})
    except StageError as exc:
        if exc.stage != "config":
            raise
        row["status"] = f"skipped: {exc.error}"
        return row, time.perf_counter() - t0
    row.update({
        "metrics": res["metrics"]["best"] if res["metrics"] else None,
        "restarts": res["metrics"]["restarts"] if res["metrics"] else None,
        "iterations": res["fit"]["iterations"],
        "converged": res["fit"]["converged"],
        "final_objective": res["fit"]["final_objective"],
        "anchors": res["solver_config"]["anchors"],
        "embed_dims": res["solver_config"]["embed_dims"],
    })
    return row, time.perf_counter() - t0


def _sweep(x, opts: RunOptions, key: str, grid: Sequence, make_opts, source, threads):
    if not grid:
        raise StageError("config", InvalidConfig("sweep grid is empty"))
    if opts.metrics and x.labels is None:
        raise StageError("metrics", LabelsRequired("labels required to compute metrics"))
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    with stage("normalize", timings):
        x, degenerate = normalize_with_stats(x, opts.normalize)
    threads = default_threads() if threads is None else max(1, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves grid order whatever the completion order
        done = list(pool.map(lambda val: _sweep_row(x, make_opts(val), key, val), grid))
    rows = [row for row, _ in done]
    timings["rows"] = [secs for _, secs in done]
    timings["sweep"] = time.perf_counter() - t0
    return {
        "schema": SWEEP_SCHEMA,
        "command": f"sweep-{key}" if key != "anchors" else "sweep-anchors",
        "dataset": dataset_echo(x, source),
        "config": {"k": opts.k, "beta": opts.beta, "anchors": opts.anchors,
                   "seed": opts.seed, "normalize": opts.normalize, "grid": list(grid),
                   "restarts": opts.restarts, "max_iter": opts.max_iter, "rel_tol": opts.rel_tol},
        "normalize_degenerate": degenerate,
        "rows": rows,
        "timing": timings,
    }


def sweep_beta(x, opts: RunOptions, grid: Sequence[float] = BETA_GRID, source=None,
               threads=None) -> dict:
    return _sweep(x, opts, "beta", [float(b) for b in grid],
                  lambda b: replace(opts, beta=b), source, threads)


def default_anchor_grid(k: int) -> List[int]:
    return [k, 2 * k, 3 * k, 5 * k]


def sweep_anchors(x, opts: RunOptions, grid: Optional[Sequence[int]] = None, source=None,
                  threads=None) -> dict:
    grid = default_anchor_grid(opts.k) if grid is None else [int(g) for g in grid]
    return _sweep(x, opts, "anchors", grid,
                  lambda l: replace(opts, anchors=l), source, threads)


def write_sweep_csv(report: dict, path) -> None:
    key = "beta" if report["command"] == "sweep-beta" else "anchors"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([key, *METRIC_NAMES, "iterations", "converged", "status"])
        for row in report["rows"]:
            m = row.get("metrics") or {}
            w.writerow([row[key], *[repr(m[name]) if name in m else "" for name in METRIC_NAMES],
                        row.get("iterations", ""), row.get("converged", ""), row["status"]])


def trace_rows(x, opts: RunOptions) -> List[tuple]:
    """``(iteration, objective)`` pairs, iteration 0 being the initial point."""
    timings: Dict[str, float] = {}
    with stage("normalize", timings):
        x, _ = normalize_with_stats(x, opts.normalize)
    with stage("config", timings):
        cfg = opts.solver_config(x)
        cfg.validate(x)
    with stage("fit", timings):
        rep = solver.fit(x, cfg)
    return list(enumerate(rep.state.objective_trace))


def write_trace_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective"])
        for it, f in rows:
            w.writerow([it, repr(float(f))])
