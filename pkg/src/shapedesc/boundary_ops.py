"""Operators that act on a single boundary loop.

All per-node arrays here are indexed by position along the curve
(``0 .. len(curve) - 1``), not by global node number.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import SolverError
from .mesh import BoundaryCurve


@dataclass(frozen=True)
class FilterConfig:
    """Gaussian boundary filter of width ``sigma`` (arc length), cut off at 3 sigma."""

    sigma: float = 0.1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def cutoff(self) -> float:
        return 3.0 * self.sigma


def laplace_beltrami_matrix(spacing: np.ndarray) -> sp.csr_matrix:
    """Periodic three-point stencil for the second arc-length derivative.

    ``spacing[j]`` is the distance between nodes j-1 and j.
    """
    h = np.asarray(spacing, dtype=float)
    k = len(h)
    h_next = np.roll(h, -1)
    total = h + h_next
    right = 2.0 / (h_next * total)
    left = 2.0 / (h * total)
    idx = np.arange(k)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([(idx + 1) % k, (idx - 1) % k, idx])
    data = np.concatenate([right, left, -(right + left)])
    return sp.coo_matrix((data, (rows, cols)), shape=(k, k)).tocsr()


def fd_laplace_beltrami(curve_or_spacing, v: np.ndarray) -> np.ndarray:
    spacing = curve_or_spacing.spacing if isinstance(curve_or_spacing, BoundaryCurve) else curve_or_spacing
    h = np.asarray(spacing, dtype=float)
    v = np.asarray(v, dtype=float)
    h_next = np.roll(h, -1)
    total = h + h_next
    vn = np.roll(v, -1, axis=0)
    vp = np.roll(v, 1, axis=0)
    if v.ndim == 2:
        h, h_next, total = h[:, None], h_next[:, None], total[:, None]
    return 2.0 * (vn - v) / (h_next * total) - 2.0 * (v - vp) / (h * total)


def _design_mask(curve: BoundaryCurve, design) -> np.ndarray:
    return np.asarray(curve.design if design is None else design, dtype=bool)


def _screened_solve(curve: BoundaryCurve, rhs: np.ndarray, A: float, design) -> np.ndarray:
    """Solve (I - A L) x = rhs on design nodes with x = 0 on the rest."""
    if not (np.isfinite(A) and A >= 0):
        raise SolverError(f"conductivity A must be non-negative, got {A}")
    if np.any(~(curve.spacing > 0)):
        raise SolverError("non-positive boundary spacing")
    mask = _design_mask(curve, design)
    out = np.zeros_like(rhs, dtype=float)
    if not mask.any():
        return out
    if A == 0:
        out[mask] = rhs[mask]
        return out
    k = len(curve)
    op = (sp.identity(k, format="csr") - A * laplace_beltrami_matrix(curve.spacing)).tocsr()
    idx = np.flatnonzero(mask)
    sub = op[idx][:, idx].tocsc()
    try:
        x = spla.splu(sub).solve(np.ascontiguousarray(rhs[idx]))
    except RuntimeError as exc:
        raise SolverError(f"Laplace-Beltrami system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("Laplace-Beltrami solve produced non-finite values")
    out[idx] = x
    return out


def solve_slb(curve: BoundaryCurve, s: np.ndarray, A: float = 0.1, design=None) -> np.ndarray:
    """Scalar smoothing u - A u'' = s on design nodes, u = 0 elsewhere.

    A fully designable loop is solved periodically. Returns the scalar field;
    the shape update direction is ``-u * normals``.
    """
    return _screened_solve(curve, np.asarray(s, dtype=float), A, design)


def solve_vlb(curve: BoundaryCurve, s: np.ndarray, A: float = 0.1, design=None) -> np.ndarray:
    """Componentwise smoothing of the vector s*n; returns (K, 2)."""
    rhs = np.asarray(s, dtype=float)[:, None] * curve.normals
    return _screened_solve(curve, rhs, A, design)


def arc_distances(curve: BoundaryCurve) -> np.ndarray:
    """Pairwise shortest distance along the closed loop, (K, K)."""
    arc = curve.arc
    d = np.abs(arc[:, None] - arc[None, :])
    return np.minimum(d, curve.length - d)


def filter_weights(curve: BoundaryCurve, cfg: FilterConfig, design=None) -> np.ndarray:
    """Normalized Gaussian weights (K, K); rows of non-design nodes are zero."""
    mask = _design_mask(curve, design)
    d = arc_distances(curve)
    w = np.exp(-(d * d) / (2.0 * cfg.sigma**2))
    w[d > cfg.cutoff] = 0.0
    np.fill_diagonal(w, 1.0)
    w[:, ~mask] = 0.0
    w[~mask, :] = 0.0
    sums = w.sum(axis=1, keepdims=True)
    return np.divide(w, sums, out=np.zeros_like(w), where=sums > 0)


def filter_sensitivity(curve: BoundaryCurve, s: np.ndarray, cfg: FilterConfig = FilterConfig(), design=None) -> np.ndarray:
    w = filter_weights(curve, cfg, design)
    return -w @ (np.asarray(s, dtype=float)[:, None] * curve.normals)


def direct_sensitivity(curve: BoundaryCurve, s: np.ndarray, design=None) -> np.ndarray:
    mask = _design_mask(curve, design)
    theta = -np.asarray(s, dtype=float)[:, None] * curve.normals
    theta[~mask] = 0.0
    return theta
