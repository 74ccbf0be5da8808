"""Alternating minimization for discriminative anchor learning.

Minimizes, over per-view embeddings ``H[p]`` (d'_p x n, orthonormal rows),
bases ``Z[p]`` (d_p x d'_p), anchors ``A[p]`` (d'_p x l, orthonormal
columns), a consensus anchor graph ``S`` (l x n, orthonormal rows) and view
weights ``alpha`` on the simplex::

    sum_p 0.5 * alpha_p**2 * ||X[p] - Z[p] H[p]||_F**2
        - beta * sum_p Tr(H[p] (A[p] S)^T)

Each block update below is an exact minimizer with the other blocks fixed,
so the objective never increases across a sweep.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidShape, NumericalFailure
from .linalg import orthonormalize, polar_factor, thin_svd

# guards 1/r_p in the view-weight update when a view is factorized exactly
ALPHA_EPS = 1e-12


@dataclass
class MultiViewDataset:
    """``v`` feature matrices of shape (d_p, n) over the same ``n`` samples."""

    views: List[np.ndarray]
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.views = [np.asarray(x, dtype=np.float64) for x in self.views]
        if not self.views:
            raise InvalidShape("dataset needs at least one view")
        for p, x in enumerate(self.views):
            if x.ndim != 2 or x.shape[0] < 1:
                raise InvalidShape(f"view {p} must be a non-empty 2-D array, got shape {x.shape}")
        ns = {x.shape[1] for x in self.views}
        if len(ns) != 1:
            raise InvalidShape(f"views disagree on sample count: {sorted(ns)}")
        if self.n < 1:
            raise InvalidShape("dataset needs at least one sample")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise InvalidShape(
                    f"labels must have length n={self.n}, got shape {self.labels.shape}")

    @property
    def n(self) -> int:
        return self.views[0].shape[1]

    @property
    def v(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> List[int]:
        return [x.shape[0] for x in self.views]


@dataclass
class SolverConfig:
    anchors: int
    embed_dims: Sequence[int]
    beta: float = 0.1
    max_iter: int = 100
    rel_tol: float = 1e-6
    seed: int = 0

    @classmethod
    def for_dataset(cls, x: MultiViewDataset, k: int, anchors: Optional[int] = None,
                    embed_dims: Optional[Sequence[int]] = None, **kw) -> "SolverConfig":
        """Fill in defaults: ``l = k`` and ``d'_p = min(d_p, n, max(2k, l))``."""
        l = k if anchors is None else anchors
        if embed_dims is None:
            embed_dims = [min(d, x.n, max(2 * k, l)) for d in x.dims]
        return cls(anchors=l, embed_dims=list(embed_dims), **kw)

    def validate(self, x: MultiViewDataset) -> None:
        dims = list(self.embed_dims)
        if len(dims) != x.v:
            raise InvalidConfig(f"embed_dims has {len(dims)} entries for {x.v} views")
        for p, (dp, d) in enumerate(zip(dims, x.dims)):
            if not 1 <= dp <= min(d, x.n):
                raise InvalidConfig(
                    f"embed dim {dp} for view {p} must lie in [1, min(d={d}, n={x.n})]")
        if not 1 <= self.anchors <= min(min(dims), x.n):
            raise InvalidConfig(
                f"anchor count {self.anchors} must lie in [1, min(min embed dim={min(dims)}, n={x.n})]")
        if not self.beta >= 0:
            raise InvalidConfig(f"beta must be >= 0, got {self.beta}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.rel_tol >= 0:
            raise InvalidConfig(f"rel_tol must be >= 0, got {self.rel_tol}")
        if self.seed < 0:
            raise InvalidConfig(f"seed must be unsigned, got {self.seed}")


@dataclass
class SolverState:
    h: List[np.ndarray]
    z: List[np.ndarray]
    a: List[np.ndarray]
    s: np.ndarray
    alpha: np.ndarray
    objective_trace: List[float] = field(default_factory=list)

    def copy(self) -> "SolverState":
        return SolverState(
            h=[m.copy() for m in self.h],
            z=[m.copy() for m in self.z],
            a=[m.copy() for m in self.a],
            s=self.s.copy(),
            alpha=self.alpha.copy(),
            objective_trace=list(self.objective_trace),
        )


@dataclass
class FitReport:
    state: SolverState
    iterations: int
    converged: bool
    lower_bound: float
    wall_time: float
    degeneracies: List[str] = field(default_factory=list)


def _check_state(x: MultiViewDataset, st: SolverState, cfg: SolverConfig) -> None:
    if not (len(st.h) == len(st.z) == len(st.a) == x.v == len(st.alpha)):
        raise InvalidShape("state and dataset disagree on the number of views")
    l, n = cfg.anchors, x.n
    if st.s.shape != (l, n):
        raise InvalidShape(f"S must be {(l, n)}, got {st.s.shape}")
    for p, (xp, dp) in enumerate(zip(x.views, cfg.embed_dims)):
        expected = {"H": (dp, n), "Z": (xp.shape[0], dp), "A": (dp, l)}
        actual = {"H": st.h[p].shape, "Z": st.z[p].shape, "A": st.a[p].shape}
        for key in expected:
            if expected[key] != actual[key]:
                raise InvalidShape(
                    f"{key}[{p}] must be {expected[key]}, got {actual[key]}")


def residuals(x: MultiViewDataset, st: SolverState) -> np.ndarray:
    """Per-view squared reconstruction errors ``||X[p] - Z[p] H[p]||_F**2``."""
    return np.array([np.sum((xp - zp @ hp) ** 2)
                     for xp, zp, hp in zip(x.views, st.z, st.h)])


def objective(x: MultiViewDataset, st: SolverState, cfg: SolverConfig) -> float:
    _check_state(x, st, cfg)
    alpha = np.asarray(st.alpha, dtype=np.float64)
    fit_term = 0.5 * float(np.sum(alpha ** 2 * residuals(x, st)))
    # Tr(H (A S)^T) is the entrywise inner product <H, A S>
    graph_term = sum(float(np.sum(hp * (ap @ st.s))) for hp, ap in zip(st.h, st.a))
    return fit_term - cfg.beta * graph_term


def update_h(x: MultiViewDataset, st: SolverState, cfg: SolverConfig, p: int,
             degeneracies: Optional[list] = None) -> np.ndarray:
    """Row-orthonormal ``H[p]`` maximizing ``Tr(H B)``.

    ``B = alpha_p**2 X[p]^T Z[p] + beta S^T A[p]^T`` (n x d'_p); the quadratic
    term ``||Z H||_F**2`` is constant under ``H H^T = I``.
    """
    b = st.alpha[p] ** 2 * (x.views[p].T @ st.z[p]) + cfg.beta * (st.s.T @ st.a[p].T)
    q, degenerate = polar_factor(b)
    if degenerate and degeneracies is not None:
        degeneracies.append(f"H[{p}]")
    return q.T


def update_z(x: MultiViewDataset, st: SolverState, p: int) -> np.ndarray:
    xp, hp = x.views[p], st.h[p]
    if hp.shape[1] != xp.shape[1]:
        raise InvalidShape(f"H[{p}] has {hp.shape[1]} columns, view has {xp.shape[1]}")
    return xp @ hp.T


def update_s(st: SolverState, cfg: SolverConfig,
             degeneracies: Optional[list] = None) -> np.ndarray:
    """Row-orthonormal ``S`` maximizing ``sum_p Tr(H[p] (A[p] S)^T)``.

    beta > 0 only scales this block, so it does not enter the argmax.
    """
    # fixed summation order keeps the result bit-stable
    m = st.a[0].T @ st.h[0]
    for ap, hp in zip(st.a[1:], st.h[1:]):
        m = m + ap.T @ hp
    q, degenerate = polar_factor(m.T)
    if degenerate and degeneracies is not None:
        degeneracies.append("S")
    return q.T


def update_a(st: SolverState, p: int, degeneracies: Optional[list] = None) -> np.ndarray:
    """Column-orthonormal ``A[p]`` maximizing ``Tr(A^T H[p] S^T)``."""
    q, degenerate = polar_factor(st.h[p] @ st.s.T)
    if degenerate and degeneracies is not None:
        degeneracies.append(f"A[{p}]")
    return q


def alpha_from_residuals(r) -> np.ndarray:
    """Simplex minimizer of ``sum_p alpha_p**2 r_p``: weights proportional to ``1/r_p``."""
    inv = 1.0 / (np.asarray(r, dtype=np.float64) + ALPHA_EPS)
    return inv / inv.sum()


def update_alpha(x: MultiViewDataset, st: SolverState) -> np.ndarray:
    return alpha_from_residuals(residuals(x, st))


def init_state(x: MultiViewDataset, cfg: SolverConfig) -> SolverState:
    """Feasible starting point.

    ``H[p]`` takes the leading right singular vectors of ``X[p]``, ``Z[p]`` is
    the matching least-squares basis, ``A[p]`` and ``S`` are orthonormalized
    Gaussian draws from ``cfg.seed`` and ``alpha`` is uniform.
    """
    cfg.validate(x)
    rng = np.random.default_rng(cfg.seed)
    l, n = cfg.anchors, x.n
    h, z, a = [], [], []
    for xp, dp in zip(x.views, cfg.embed_dims):
        hp = thin_svd(xp).v[:, :dp].T.copy()
        h.append(hp)
        z.append(xp @ hp.T)
    for dp in cfg.embed_dims:
        a.append(orthonormalize(rng.standard_normal((dp, l))))
    s = orthonormalize(rng.standard_normal((n, l))).T.copy()
    alpha = np.full(x.v, 1.0 / x.v)
    return SolverState(h=h, z=z, a=a, s=s, alpha=alpha)


def lower_bound(cfg: SolverConfig) -> float:
    """Lower bound on the objective from ``Tr(H (A S)^T) <= ||H|| ||S|| ||A|| = l sqrt(d'_p)``.

    The fit term is nonnegative; the graph term is at most
    ``beta * sum_p l sqrt(d'_p)``, which is bounded by the unscaled sum when
    ``beta <= 1``.
    """
    total = sum(cfg.anchors * np.sqrt(dp) for dp in cfg.embed_dims)
    return -max(1.0, cfg.beta) * float(total)


def sweep(x: MultiViewDataset, st: SolverState, cfg: SolverConfig,
          degeneracies: Optional[list] = None) -> None:
    """One pass of the five block updates, in place, in the fixed order H, Z, S, A, alpha."""
    for p in range(x.v):
        st.h[p] = update_h(x, st, cfg, p, degeneracies)
    for p in range(x.v):
        st.z[p] = update_z(x, st, p)
    st.s = update_s(st, cfg, degeneracies)
    for p in range(x.v):
        st.a[p] = update_a(st, p, degeneracies)
    st.alpha = update_alpha(x, st)


def relative_change(prev: float, cur: float) -> float:
    return abs(prev - cur) / (1.0 + abs(prev))


def fit(x: MultiViewDataset, cfg: SolverConfig,
        init: Optional[SolverState] = None) -> FitReport:
    """Run sweeps until the relative objective change drops to ``cfg.rel_tol``.

    ``objective_trace[0]`` is the objective at the initial state and entry
    ``i`` the objective after sweep ``i``. Passing ``init`` bypasses
    :func:`init_state`; it is copied, never mutated.
    """
    t0 = time.perf_counter()
    cfg.validate(x)
    st = init_state(x, cfg) if init is None else init.copy()
    _check_state(x, st, cfg)
    st.objective_trace = [objective(x, st, cfg)]
    if not np.isfinite(st.objective_trace[0]):
        raise NumericalFailure("objective is not finite at the initial state", iteration=0)

    flags: List[str] = []
    converged = False
    iterations = 0
    for it in range(1, cfg.max_iter + 1):
        found: List[str] = []
        sweep(x, st, cfg, found)
        flags.extend(f"iter {it}: {name}" for name in found)
        f = objective(x, st, cfg)
        if not np.isfinite(f):
            raise NumericalFailure(f"objective became non-finite at sweep {it}", iteration=it)
        prev = st.objective_trace[-1]
        st.objective_trace.append(f)
        iterations = it
        if relative_change(prev, f) <= cfg.rel_tol:
            converged = True
            break

    return FitReport(
        state=st,
        iterations=iterations,
        converged=converged,
        lower_bound=lower_bound(cfg),
        wall_time=time.perf_counter() - t0,
        degeneracies=flags,
    )
