"""Dense kernels: sign-normalized thin SVD and the orthogonal linear maximizer.

The maximizer solves ``max Tr(Q^T M)`` subject to ``Q^T Q = I`` and is the
closed-form step behind the H, S and A updates of the solver.
"""
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, InvalidShape


class ThinSvd(NamedTuple):
    u: np.ndarray      # (m, r)
    sigma: np.ndarray  # (r,), non-increasing
    v: np.ndarray      # (k, r)


def _as_finite_matrix(m, name="m"):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidShape(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidShape(f"{name} must have at least one row and column, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return m


def thin_svd(m) -> ThinSvd:
    """Thin SVD ``m = u @ diag(sigma) @ v.T`` with a deterministic sign convention.

    Each column of ``u`` is flipped so that its largest-magnitude entry is
    positive; magnitude ties resolve to the lowest row index. The matching
    column of ``v`` is flipped with it.
    """
    m = _as_finite_matrix(m)
    u, sigma, vt = np.linalg.svd(m, full_matrices=False)
    v = vt.T
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return ThinSvd(np.ascontiguousarray(u * signs), sigma, np.ascontiguousarray(v * signs))


# relative singular-value floor below which the maximizer is reported as non-unique
RANK_TOL = 1e-12


def polar_factor(m):
    """Return ``(Q, degenerate)`` where ``Q = u @ v.T`` from :func:`thin_svd`.

    ``degenerate`` is True when ``m`` is numerically rank deficient, so the
    maximizer of ``Tr(Q^T m)`` is not unique.
    """
    m = _as_finite_matrix(m)
    a, b = m.shape
    if a < b:
        raise InvalidShape(f"linear_orthogonal_max needs rows >= cols, got {m.shape}")
    svd = thin_svd(m)
    degenerate = bool(svd.sigma[-1] <= RANK_TOL * max(svd.sigma[0], 1.0))
    return svd.u @ svd.v.T, degenerate


def linear_orthogonal_max(m) -> np.ndarray:
    """Return ``Q`` (a x b, a >= b) with orthonormal columns maximizing ``Tr(Q^T m)``.

    The maximizer is the polar factor ``u @ v.T`` of ``m``; the optimal value
    equals the nuclear norm of ``m``. For rank-deficient ``m`` the maximizer is
    not unique and the sign-normalized SVD output is returned.
    """
    return polar_factor(m)[0]


def orthonormality_residual(q) -> float:
    """Frobenius norm of ``Q^T Q - I`` for a tall (or square) ``q``."""
    q = np.asarray(q, dtype=np.float64)
    return float(np.linalg.norm(q.T @ q - np.eye(q.shape[1])))


def _fix_column_signs(q):
    # largest-magnitude entry of each column made positive; argmax breaks ties low
    pivot = np.argmax(np.abs(q), axis=0)
    return q * np.where(q[pivot, np.arange(q.shape[1])] < 0, -1.0, 1.0)


def orthonormalize(g) -> np.ndarray:
    """Orthonormal basis of the columns of tall ``g`` (QR, then the SVD sign convention)."""
    g = _as_finite_matrix(g, "g")
    if g.shape[0] < g.shape[1]:
        raise InvalidShape(f"orthonormalize needs rows >= cols, got {g.shape}")
    q, _ = np.linalg.qr(g)
    return _fix_column_signs(q)
