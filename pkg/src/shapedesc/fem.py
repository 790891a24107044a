"""Linear (P1) finite elements on triangles.

Systems may carry several right-hand sides as columns (``rhs`` of shape
``(ndof, k)``); componentwise vector diffusion uses one scalar matrix with two
columns, one per displacement component. Elasticity interleaves the two
components per node: dof ``2*i`` is x, ``2*i + 1`` is y.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BoundaryCurve, TriMesh

logger = logging.getLogger(__name__)


class AssemblyError(ValueError):
    pass


class ConstraintError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofs_per_node: int = 1
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray | None = None

    @property
    def ndof(self) -> int:
        return self.matrix.shape[0]

    def residual(self, u: np.ndarray) -> np.ndarray:
        """f - K u over all dofs (reactions appear at constrained dofs)."""
        return self.rhs - self.matrix @ u


@dataclass(frozen=True)
class ElasticityParams:
    lam: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("shear modulus mu must be positive")
        if not self.lam + self.mu > 0:
            raise ValueError("lam + mu must be positive")


@dataclass(frozen=True)
class PicardConfig:
    """Exponent continuation for the p-Laplacian.

    ``schedule`` defaults to 2, 2.5, 3, ..., p. ``eps_g`` defaults to
    1e-8 / (domain diameter). ``relaxation`` defaults to 2/q at exponent q,
    which bounds the error contraction per sweep by (q - 2)/q.
    """

    p: float = 4.0
    schedule: tuple | None = None
    eps_g: float | None = None
    max_iter: int = 200
    tol: float = 1e-10
    relaxation: float | None = None

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2")
        sched = self.stages()
        if sched[0] != 2 or sched[-1] != self.p or np.any(np.diff(sched) <= 0):
            raise ValueError("schedule must increase strictly from 2 to p")
        if self.eps_g is not None and not self.eps_g > 0:
            raise ValueError("eps_g must be positive")

    def stages(self) -> tuple:
        if self.schedule is not None:
            return tuple(float(q) for q in self.schedule)
        qs = list(np.arange(2.0, self.p, 0.5))
        return tuple(qs + [float(self.p)]) if self.p > 2 else (2.0,)


def p1_gradients(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Shape-function gradients (M, 3, 2) and signed areas (M,)."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=-1) / (2.0 * area)[:, None, None]
    return grads, area


def _scatter(mesh: TriMesh, local: np.ndarray, dpn: int = 1) -> sp.csr_matrix:
    t = mesh.triangles
    if dpn == 1:
        dofs = t
    else:
        dofs = np.stack([dpn * t + k for k in range(dpn)], axis=2).reshape(len(t), -1)
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    ndof = dpn * mesh.n_nodes
    # coo -> csr sums duplicates in a fixed order, so assembly is deterministic
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()


def element_stiffness(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit-conductivity local stiffness matrices (M, 3, 3) and areas."""
    g, area = p1_gradients(mesh)
    return np.einsum("mik,mjk->mij", g, g) * area[:, None, None], area


def _coefficient(mesh: TriMesh, coeff) -> np.ndarray:
    if callable(coeff):
        vals = np.asarray(coeff(mesh.centroids), dtype=float)
    else:
        vals = np.asarray(coeff, dtype=float)
    return np.broadcast_to(vals, (mesh.n_triangles,)).astype(float)


def assemble_scalar_diffusion(mesh: TriMesh, conductivity=1.0, mass_coeff: float = 0.0, ncols: int = 0) -> SparseSystem:
    """Stiffness sum_T k(c_T) grad(phi_a).grad(phi_b) |T| plus mass_coeff times consistent mass.

    ``conductivity`` is a scalar, a per-triangle array, or a callable of
    centroid positions. ``ncols`` > 0 gives a zero rhs with that many columns.
    """
    kappa = _coefficient(mesh, conductivity)
    if np.any(~np.isfinite(kappa)) or np.any(kappa <= 0):
        raise AssemblyError("conductivity must be positive and finite at every centroid")
    kloc, area = element_stiffness(mesh)
    local = kloc * kappa[:, None, None]
    if mass_coeff:
        mloc = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = local + mass_coeff * area[:, None, None] * mloc[None]
    rhs = np.zeros((mesh.n_nodes, ncols)) if ncols else np.zeros(mesh.n_nodes)
    return SparseSystem(_scatter(mesh, local), rhs, dofs_per_node=1)


def elasticity_matrix(params: ElasticityParams) -> np.ndarray:
    """Plane-strain constitutive matrix in Voigt notation (engineering shear)."""
    lam, mu = params.lam, params.mu
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def assemble_elasticity(mesh: TriMesh, params: ElasticityParams = ElasticityParams()) -> SparseSystem:
    g, area = p1_gradients(mesh)
    m = mesh.n_triangles
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = g[:, :, 0]
    B[:, 1, 1::2] = g[:, :, 1]
    B[:, 2, 0::2] = g[:, :, 1]
    B[:, 2, 1::2] = g[:, :, 0]
    D = elasticity_matrix(params)
    local = np.einsum("mki,kl,mlj->mij", B, D, B) * area[:, None, None]
    return SparseSystem(_scatter(mesh, local, dpn=2), np.zeros(2 * mesh.n_nodes), dofs_per_node=2)


def body_load(mesh: TriMesh, f) -> np.ndarray:
    """Nodal load of a volume source f (centroid rule), shape (N,) or (N, k)."""
    vals = np.asarray(f(mesh.centroids), dtype=float)
    share = mesh.areas / 3.0
    out = np.zeros((mesh.n_nodes,) + vals.shape[1:])
    contrib = (share.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals)
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], contrib)
    return out


def _as_curves(curves) -> list[BoundaryCurve]:
    return [curves] if isinstance(curves, BoundaryCurve) else list(curves)


def traction_load(n_nodes: int, curves, s: np.ndarray, design_only: bool = True) -> np.ndarray:
    """Nodal vector load of the boundary traction s*n (trapezoidal rule, constant normal per edge).

    ``s`` is indexed by global node number. Returns (n_nodes, 2).
    """
    s = np.asarray(s, dtype=float)
    load = np.zeros((n_nodes, 2))
    for c in _as_curves(curves):
        use = c.edge_design if design_only else np.ones(len(c), bool)
        cur = c.nodes
        prev = np.roll(c.nodes, 1)
        half = 0.5 * c.spacing[use]
        n = c.edge_normals[use]
        np.add.at(load, prev[use], (half * s[prev[use]])[:, None] * n)
        np.add.at(load, cur[use], (half * s[cur[use]])[:, None] * n)
    return load


def flux_load(n_nodes: int, curves, s: np.ndarray, design_only: bool = True) -> np.ndarray:
    """Nodal load of a scalar boundary flux s (trapezoidal rule)."""
    s = np.asarray(s, dtype=float)
    load = np.zeros(n_nodes)
    for c in _as_curves(curves):
        use = c.edge_design if design_only else np.ones(len(c), bool)
        prev = np.roll(c.nodes, 1)[use]
        cur = c.nodes[use]
        half = 0.5 * c.spacing[use]
        np.add.at(load, prev, half * s[prev])
        np.add.at(load, cur, half * s[cur])
    return load


def apply_neumann_load(system: SparseSystem, curves, s: np.ndarray, design_only: bool = True) -> SparseSystem:
    """Add the boundary integral of (s n).v to the rhs.

    Interleaved vector systems and two-column scalar systems receive the
    traction s*n; single-column scalar systems receive the flux s.
    """
    if system.dofs_per_node == 2:
        n_nodes = system.ndof // 2
        system.rhs = system.rhs + traction_load(n_nodes, curves, s, design_only).ravel()
    elif system.rhs.ndim == 2 and system.rhs.shape[1] == 2:
        system.rhs = system.rhs + traction_load(system.ndof, curves, s, design_only)
    else:
        system.rhs = system.rhs + flux_load(system.ndof, curves, s, design_only)
    return system


def apply_dirichlet(system: SparseSystem, dofs, values=0.0) -> SparseSystem:
    """Register Dirichlet constraints; they are eliminated symmetrically at solve time.

    ``dofs`` may also be a dict mapping dof -> value. Re-constraining a dof to
    the same value is allowed, to a different value raises ConstraintError.
    """
    if isinstance(dofs, dict):
        items = sorted(dofs.items())
        dofs = np.array([k for k, _ in items], dtype=np.int64)
        values = np.array([v for _, v in items], dtype=float)
    dofs = np.asarray(dofs, dtype=np.int64).reshape(-1)
    col_shape = system.rhs.shape[1:]
    vals = np.broadcast_to(np.asarray(values, dtype=float), (len(dofs),) + col_shape).copy()
    if np.any(dofs < 0) or np.any(dofs >= system.ndof):
        raise ConstraintError("constraint dof out of range")
    merged: dict[int, np.ndarray] = {}
    old_vals = system.values if system.values is not None else np.zeros((0,) + col_shape)
    for d, v in zip(list(system.constrained) + list(dofs), list(old_vals) + list(vals)):
        d = int(d)
        if d in merged and not np.array_equal(merged[d], v):
            raise ConstraintError(f"conflicting constraints on dof {d}")
        merged[d] = np.asarray(v)
    keys = np.array(sorted(merged), dtype=np.int64)
    system.constrained = keys
    system.values = np.array([merged[k] for k in keys.tolist()]).reshape((len(keys),) + col_shape)
    return system


def _jacobi_cg(A: sp.csr_matrix, b: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has non-positive diagonal; not SPD")
    M = sp.diags(1.0 / diag)
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    res = np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300)
    if info != 0 or not np.isfinite(res) or res > tol * 10:
        raise SolverError(f"CG did not converge (relative residual {res:.3e})", res)
    return x


def _direct(A: sp.csr_matrix, b: np.ndarray, tol: float) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            lu = spla.splu(A.tocsc())
            x = lu.solve(b)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SolverError(f"direct solve failed: {exc}") from exc
    res = np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300)
    if not np.all(np.isfinite(x)) or res > max(tol, 1e-8):
        raise SolverError(f"direct solve inaccurate or singular (relative residual {res:.3e})", res)
    return x


def solve_spd(system: SparseSystem, tol: float = 1e-10, method: str = "cg", maxiter: int | None = None) -> np.ndarray:
    """Solve K u = f with the registered constraints eliminated.

    ``method`` is "cg" (Jacobi-preconditioned conjugate gradients) or
    "direct" (sparse LU). Returns the full dof vector (constrained values
    reinserted), shaped like ``system.rhs``.
    """
    K = system.matrix.tocsr()
    f = system.rhs
    u = np.zeros_like(f, dtype=float)
    fixed = system.constrained
    if len(fixed):
        u[fixed] = system.values
    free = np.setdiff1d(np.arange(system.ndof), fixed, assume_unique=True)
    if len(free) == 0:
        return u
    Kff = K[free][:, free]
    b = f[free] - (K[free][:, fixed] @ u[fixed] if len(fixed) else 0.0)
    cols = [b] if b.ndim == 1 else [b[:, k] for k in range(b.shape[1])]
    sols = []
    if method == "direct":
        x = _direct(Kff, np.column_stack(cols) if b.ndim == 2 else b, tol)
        sols = [x] if b.ndim == 1 else [x[:, k] for k in range(b.shape[1])]
    elif method == "cg":
        cap = maxiter or max(10 * len(free), 1000)
        for col in cols:
            if not np.any(col):
                sols.append(np.zeros_like(col))
            else:
                sols.append(_jacobi_cg(Kff, col, tol, cap))
    else:
        raise ValueError(f"unknown solver method {method!r}")
    u[free] = sols[0] if b.ndim == 1 else np.column_stack(sols)
    return u


@dataclass
class PicardResult:
    u: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list)  # (q, iteration, change, residual)
    converged: bool = True


def _grad_sq(grads: np.ndarray, tris: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of the elementwise gradient of a (N, k) nodal field."""
    ue = u[tris]  # (M, 3, k)
    G = np.einsum("mik,mic->mck", grads, ue)  # (M, k, 2)
    return (G * G).sum(axis=(1, 2))


def solve_p_laplacian(
    mesh: TriMesh,
    curves,
    s: np.ndarray,
    alpha: float,
    cfg: PicardConfig = PicardConfig(),
    dirichlet: tuple[np.ndarray, np.ndarray] | None = None,
    method: str = "direct",
) -> PicardResult:
    """Vector p-Laplacian with traction alpha*s*n on design edges, by damped Picard sweeps.

    ``dirichlet`` is ``(nodes, values (k, 2))``; by default every boundary
    node that is not a design node is held at zero. Each sweep freezes the
    elementwise weight (|grad u|^2 + eps_g^2)^((q-2)/2), shared by both
    components, solves the linear problem and relaxes toward its solution.
    """
    n = mesh.n_nodes
    load = alpha * traction_load(n, curves, s) if s is not None else np.zeros((n, 2))
    if dirichlet is None:
        bnodes = mesh.boundary_nodes()
        fixed = bnodes[~mesh.design_nodes()[bnodes]]
        fvals = np.zeros((len(fixed), 2))
    else:
        fixed, fvals = dirichlet
        fixed = np.asarray(fixed, dtype=np.int64)
        fvals = np.broadcast_to(np.asarray(fvals, dtype=float), (len(fixed), 2))
    if len(fixed) == 0:
        raise SolverError("p-Laplacian needs at least one Dirichlet node")
    eps = cfg.eps_g if cfg.eps_g is not None else 1e-8 / mesh.diameter()
    kloc, _ = element_stiffness(mesh)
    grads, _ = p1_gradients(mesh)
    tris = mesh.triangles

    def system(weight):
        sysm = SparseSystem(_scatter(mesh, kloc * weight[:, None, None]), load.copy())
        apply_dirichlet(sysm, fixed, fvals)
        return sysm

    u = solve_spd(system(np.ones(mesh.n_triangles)), method=method)
    history = [(2.0, 0, 0.0, 0.0)]
    total = 0
    converged = True
    res = 0.0
    for q in cfg.stages():
        if q == 2.0:
            continue
        beta = cfg.relaxation if cfg.relaxation is not None else 2.0 / q
        ref = max(np.linalg.norm(u), 1e-300)
        ok = False
        for it in range(1, cfg.max_iter + 1):
            w = (_grad_sq(grads, tris, u) + eps * eps) ** ((q - 2.0) / 2.0)
            trial = solve_spd(system(w), method=method)
            new = u + beta * (trial - u)
            change = np.linalg.norm(new - u) / max(np.linalg.norm(new), 1e-300)
            u = new
            res = _p_residual(mesh, kloc, grads, u, load, fixed, q, eps)
            history.append((q, it, float(change), float(res)))
            total += 1
            if not np.all(np.isfinite(u)) or np.linalg.norm(u) > 1e3 * ref:
                raise SolverError(f"Picard iterates diverge at q={q}", res)
            if change <= cfg.tol:
                ok = True
                break
        if not ok:
            converged = False
            logger.warning("Picard stage q=%g stopped after %d sweeps (change %.2e)", q, cfg.max_iter, change)
    if len(cfg.stages()) == 1:
        res = _p_residual(mesh, kloc, grads, u, load, fixed, 2.0, eps)
    return PicardResult(u=u, residual=float(res), iterations=total, history=history, converged=converged)


def _p_residual(mesh, kloc, grads, u, load, fixed, q, eps) -> float:
    w = (_grad_sq(grads, mesh.triangles, u) + eps * eps) ** ((q - 2.0) / 2.0)
    K = _scatter(mesh, kloc * w[:, None, None])
    Ku = K @ u
    r = load - Ku
    free = np.ones(mesh.n_nodes, bool)
    free[fixed] = False
    denom = np.linalg.norm(load) + np.linalg.norm(Ku)
    return float(np.linalg.norm(r[free]) / max(denom, 1e-300))


def distance_to_boundary(mesh: TriMesh, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Exact Euclidean distance from each point to the nearest boundary edge segment."""
    pts = np.asarray(points, dtype=float)
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    d = mesh.nodes[mesh.boundary_edges[:, 1]] - a
    ll = (d * d).sum(axis=1)
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk]
        rel = p[:, None, :] - a[None]
        t = np.clip((rel * d[None]).sum(-1) / ll[None], 0.0, 1.0)
        diff = rel - t[..., None] * d[None]
        out[start : start + chunk] = np.sqrt((diff * diff).sum(-1).min(axis=1))
    return out


def wall_distance(mesh: TriMesh) -> np.ndarray:
    w = distance_to_boundary(mesh, mesh.nodes)
    w[mesh.boundary_nodes()] = 0.0
    return w
