"""Steepest descent on meshes with step-size control and optional remeshing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fem import SolverError
from .mesh import TriMesh, boundary_loops, displace, min_quality
from .problem import SensitivityProvider, mean_boundary_displacement
from .remesh import RemeshError, remesh
from .updates import UpdateMethod, compute_update

logger = logging.getLogger(__name__)

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


class StepError(ValueError):
    pass


@dataclass(frozen=True)
class DescentConfig:
    method: UpdateMethod
    step_mode: str = "line-search"  # or "max-displacement"
    theta_max: float | None = None  # default 0.02 * domain diameter
    alpha0: float | None = None  # line-search start; default from the max-displacement rule
    expansion: float = 2.0
    shrink_tol: float = 1e-2
    alpha_min: float = 1e-6
    quality_gate: float = 2.0
    remesh_every: int = 0
    remesh_on_stall: bool = False  # implied by remesh_every > 0
    remesh_h: float | None = None
    max_iter: int = 50
    g_tol: float = 1e-4
    j_rel_tol: float = 1e-3
    alpha_hint: float = 1.0

    def __post_init__(self):
        if self.step_mode not in ("line-search", "max-displacement"):
            raise ValueError(f"unknown step mode {self.step_mode!r}")
        if self.theta_max is not None and not self.theta_max > 0:
            raise ValueError("theta_max must be positive")
        if not self.alpha_min > 0:
            raise ValueError("alpha_min must be positive")
        if not 0 < self.quality_gate < 60:
            raise ValueError("quality gate must lie in (0, 60) degrees")
        if self.remesh_every < 0 or self.max_iter < 1:
            raise ValueError("remesh_every must be >= 0 and max_iter >= 1")
        if not self.expansion > 1 or not 0 < self.shrink_tol < 1:
            raise ValueError("expansion must exceed 1 and shrink_tol lie in (0, 1)")


@dataclass
class IterationRecord:
    iteration: int
    J: float
    G: float
    alpha: float
    min_quality: float
    n_boundary_nodes: int
    diagnostics: dict = field(default_factory=dict)


@dataclass
class DescentResult:
    records: list
    mesh: TriMesh
    reason: str
    error: Exception | None = None
    snapshots: list = field(default_factory=list)  # boundary curves after each iteration


def max_displacement_step(theta: np.ndarray, theta_max: float) -> float:
    """Step that moves the fastest node by exactly theta_max."""
    if theta_max < 0:
        raise ValueError("theta_max must be non-negative")
    peak = float(np.linalg.norm(np.asarray(theta, dtype=float), axis=1).max()) if len(theta) else 0.0
    if peak == 0:
        raise StepError("zero update direction; nothing to scale")
    return theta_max / peak


def line_search(mesh: TriMesh | None, theta, evaluate_J, cfg: DescentConfig, alpha0: float | None = None) -> float:
    """Bracket and shrink toward the first local minimizer of J along theta.

    Steps whose mesh falls below the quality gate count as infeasible, so a
    quality-limited search ends at the largest acceptable step. Returns 0
    when no step of at least ``alpha_min`` decreases J. With ``mesh=None`` no
    quality check is made.
    """
    cache: dict[float, float] = {}

    def J(a: float) -> float:
        if a not in cache:
            if a > 0 and mesh is not None and min_quality(displace(mesh, theta, a)) < cfg.quality_gate:
                cache[a] = np.inf
            else:
                cache[a] = float(evaluate_J(a))
        return cache[a]

    if alpha0 is None:
        alpha0 = cfg.alpha0
    if alpha0 is None:
        if mesh is None:
            raise ValueError("alpha0 is required without a mesh")
        tmax = cfg.theta_max if cfg.theta_max is not None else 0.02 * mesh.diameter()
        alpha0 = max_displacement_step(theta, tmax)
    J0 = J(0.0)
    a, b = 0.0, alpha0
    if J(b) < J0:
        # expand until J stops decreasing or the mesh degrades
        c = b * cfg.expansion
        for _ in range(200):
            if J(c) >= J(b):
                break
            a, b, c = b, c, c * cfg.expansion
        else:
            return b
    else:
        # shrink until a decrease appears
        c = b
        while True:
            b = c / cfg.expansion
            if b < cfg.alpha_min:
                return 0.0
            if J(b) < J0:
                break
            c = b
    # golden-section narrowing of (a, c) around b, keeping J(b) <= J(a), J(c)
    while c - a > cfg.shrink_tol * c:
        if b - a > c - b:
            x = b - (1 - GOLDEN) * (b - a)
            if J(x) < J(b):
                c, b = b, x
            else:
                a = x
        else:
            x = b + (1 - GOLDEN) * (c - b)
            if J(x) < J(b):
                a, b = b, x
            else:
                c = x
    best = a if a > 0 and J(a) < J0 else b
    return best if best >= cfg.alpha_min and J(best) < J0 else 0.0


def run_descent(provider: SensitivityProvider, mesh0: TriMesh, cfg: DescentConfig, keep_snapshots: bool = False) -> DescentResult:
    """Steepest descent loop; J, G and the step are logged per iteration.

    Iteration 0 records the initial state. Errors from solvers or remeshing
    end the run with the records gathered so far.
    """
    mesh = mesh0
    method = cfg.method
    curves = boundary_loops(mesh)
    J = provider.objective(mesh)
    records = [IterationRecord(0, J, 0.0, 0.0, min_quality(mesh), sum(len(c) for c in curves))]
    snapshots = [curves] if keep_snapshots else []
    h_remesh = cfg.remesh_h or float(np.mean(np.concatenate([c.spacing for c in curves])))
    fixed_alpha = None
    failures = 0
    reason = "max-iter"
    error = None

    for it in range(1, cfg.max_iter + 1):
        try:
            curves = boundary_loops(mesh)
            J, s = provider.evaluate(mesh, curves)
            upd = compute_update(mesh, curves, s, method, cfg.alpha_hint)
            theta = upd.theta
            diag = dict(upd.diagnostics, predicted=upd.predicted_decrease)
            if not np.any(theta):
                records.append(IterationRecord(it, J, 0.0, 0.0, min_quality(mesh), sum(len(c) for c in curves), diag))
                reason = "zero-update"
                break
            if cfg.step_mode == "max-displacement":
                if fixed_alpha is None:
                    tmax = cfg.theta_max if cfg.theta_max is not None else 0.02 * mesh.diameter()
                    fixed_alpha = max_displacement_step(theta, tmax)
                alpha = fixed_alpha
                if min_quality(displace(mesh, theta, alpha)) < cfg.quality_gate:
                    # the fixed step would degrade the mesh; reject it like a failed search
                    diag["quality_rejected"] = True
                    alpha = 0.0
            else:
                alpha = line_search(mesh, theta, lambda a: provider.objective(displace(mesh, theta, a)), cfg)
            if alpha < cfg.alpha_min:
                failures += 1
                diag["stalled"] = True
                records.append(IterationRecord(it, J, 0.0, 0.0, min_quality(mesh), sum(len(c) for c in curves), diag))
                if keep_snapshots:
                    snapshots.append(curves)
                if failures >= 2:
                    reason = "stalled"
                    break
                if cfg.remesh_every > 0 or cfg.remesh_on_stall:
                    mesh = remesh(curves, h_remesh)
                    diag["remeshed"] = True
                continue
            failures = 0
            new_mesh = displace(mesh, theta, alpha)
            J_new = provider.objective(new_mesh)
            G = mean_boundary_displacement(theta, alpha, curves)
            if method.tag == "PHD":
                # displacement alpha*theta(alpha_hint) equals the PHD step for this parameter
                p = method.picard_config().p
                diag["phd_alpha"] = cfg.alpha_hint * (alpha / cfg.alpha_hint) ** (p - 1)
            mesh = new_mesh
            if cfg.remesh_every > 0 and it % cfg.remesh_every == 0:
                mesh = remesh(boundary_loops(mesh), h_remesh)
                J_new = provider.objective(mesh)
                diag["remeshed"] = True
            new_curves = boundary_loops(mesh)
            records.append(IterationRecord(it, J_new, G, alpha, min_quality(mesh), sum(len(c) for c in new_curves), diag))
            if keep_snapshots:
                snapshots.append(new_curves)
            if G < cfg.g_tol:
                reason = "G-tol"
                break
            if cfg.j_rel_tol > 0 and abs(J_new - J) <= cfg.j_rel_tol * abs(J):
                reason = "J-rel-tol"
                break
        except (SolverError, RemeshError) as exc:
            logger.error("iteration %d aborted: %s", it, exc)
            reason = f"error: {exc}"
            error = exc
            break
    return DescentResult(records, mesh, reason, error, snapshots)
