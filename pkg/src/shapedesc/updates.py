"""Turn a boundary sensitivity into a domain update direction.

Boundary approaches (DS, FS, SLB, VLB) build a direction on the boundary and
extend it into the mesh; domain approaches (SP-SM, SP-WD, PHD) solve for the
whole field at once with the sensitivity as a boundary traction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boundary_ops as bops
from . import fem
from .mesh import BoundaryCurve, TriMesh

TAGS = ("DS", "FS", "SLB", "VLB", "SP-SM", "SP-WD", "PHD")
EXTENSIONS = ("wall-distance", "elasticity")


@dataclass(frozen=True)
class UpdateMethod:
    tag: str
    sigma: float = 0.1
    A: float = 0.1
    lam: float = 0.0
    mu: float = 1.0
    eps: float | None = None  # SP-WD regularization; default 1e-3 * domain diameter
    p: float = 4.0
    picard: fem.PicardConfig | None = None
    extension: str = "wall-distance"
    solver: str = "direct"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown update method {self.tag!r}; expected one of {TAGS}")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"unknown extension {self.extension!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.A >= 0:
            raise ValueError(f"A must be non-negative, got {self.A}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        fem.ElasticityParams(self.lam, self.mu)
        if self.p < 2:
            raise ValueError("p must be >= 2")

    @property
    def label(self) -> str:
        extra = {"FS": f"sigma={self.sigma:g}", "SLB": f"A={self.A:g}", "VLB": f"A={self.A:g}", "PHD": f"p={self.p:g}"}
        return f"{self.tag}({extra[self.tag]})" if self.tag in extra else self.tag

    def picard_config(self) -> fem.PicardConfig:
        return self.picard if self.picard is not None else fem.PicardConfig(p=self.p)

    @property
    def linear(self) -> bool:
        return self.tag != "PHD"


@dataclass
class UpdateResult:
    theta: np.ndarray  # (N, 2) on all nodes
    theta_gamma: np.ndarray  # (N, 2), theta on boundary nodes, zero elsewhere
    predicted_decrease: float
    diagnostics: dict = field(default_factory=dict)


def fixed_boundary_nodes(mesh: TriMesh) -> np.ndarray:
    b = mesh.boundary_nodes()
    return b[~mesh.design_nodes()[b]]


def predicted_decrease(curves, s: np.ndarray, theta_gamma: np.ndarray) -> float:
    """Trapezoidal boundary quadrature of the shape derivative along theta_gamma.

    ``s`` and ``theta_gamma`` are indexed by global node number.
    """
    if isinstance(curves, BoundaryCurve):
        curves = [curves]
    load = fem.traction_load(len(s), curves, s)
    return float((load * theta_gamma).sum())


def _wall_conductivity(mesh: TriMesh, eps: float | None) -> np.ndarray:
    if eps is None:
        eps = 1e-3 * mesh.diameter()
    w = fem.distance_to_boundary(mesh, mesh.centroids)
    return 1.0 / (w + eps)


def extend_to_domain(
    mesh: TriMesh,
    theta_gamma: np.ndarray,
    constitutive: str = "wall-distance",
    params: fem.ElasticityParams = fem.ElasticityParams(),
    eps: float | None = None,
    solver: str = "direct",
) -> np.ndarray:
    """Harmonic-type extension with theta_gamma prescribed on every boundary node."""
    theta_gamma = np.asarray(theta_gamma, dtype=float)
    bnodes = mesh.boundary_nodes()
    vals = theta_gamma[bnodes]
    if constitutive == "elasticity":
        system = fem.assemble_elasticity(mesh, params)
        fem.apply_dirichlet(system, np.c_[2 * bnodes, 2 * bnodes + 1].ravel(), vals.ravel())
        return fem.solve_spd(system, method=solver).reshape(-1, 2)
    if constitutive == "wall-distance":
        system = fem.assemble_scalar_diffusion(mesh, _wall_conductivity(mesh, eps), ncols=2)
        fem.apply_dirichlet(system, bnodes, vals)
        return fem.solve_spd(system, method=solver)
    raise ValueError(f"unknown extension {constitutive!r}")


def boundary_direction(mesh: TriMesh, curves, s: np.ndarray, method: UpdateMethod) -> np.ndarray:
    """theta_gamma (N, 2) for the boundary approaches."""
    out = np.zeros((mesh.n_nodes, 2))
    for c in curves:
        sc = np.asarray(s, dtype=float)[c.nodes]
        if method.tag == "DS":
            t = bops.direct_sensitivity(c, sc)
        elif method.tag == "FS":
            t = bops.filter_sensitivity(c, sc, bops.FilterConfig(method.sigma))
        elif method.tag == "SLB":
            t = -bops.solve_slb(c, sc, method.A)[:, None] * c.normals
        elif method.tag == "VLB":
            t = -bops.solve_vlb(c, sc, method.A)
        else:
            raise ValueError(f"{method.tag} is not a boundary approach")
        t[~c.design] = 0.0
        out[c.nodes] = t
    return out


def compute_update(mesh: TriMesh, curves, s: np.ndarray, method: UpdateMethod, alpha_hint: float = 1.0) -> UpdateResult:
    """Shape and domain update direction for the sensitivity ``s`` (global nodal array)."""
    if isinstance(curves, BoundaryCurve):
        curves = [curves]
    s = np.asarray(s, dtype=float)
    diag: dict = {"method": method.label}
    n = mesh.n_nodes
    if method.tag in ("DS", "FS", "SLB", "VLB"):
        tg = boundary_direction(mesh, curves, s, method)
        params = fem.ElasticityParams(method.lam, method.mu)
        theta = extend_to_domain(mesh, tg, method.extension, params, method.eps, method.solver)
    else:
        fixed = fixed_boundary_nodes(mesh)
        if len(fixed) == 0:
            raise ValueError(f"{method.tag} needs a fixed (non-design) boundary part")
        if method.tag == "SP-SM":
            system = fem.assemble_elasticity(mesh, fem.ElasticityParams(method.lam, method.mu))
            fem.apply_neumann_load(system, curves, s)
            fem.apply_dirichlet(system, np.c_[2 * fixed, 2 * fixed + 1].ravel(), 0.0)
            theta = -fem.solve_spd(system, method=method.solver).reshape(-1, 2)
        elif method.tag == "SP-WD":
            system = fem.assemble_scalar_diffusion(mesh, _wall_conductivity(mesh, method.eps), ncols=2)
            fem.apply_neumann_load(system, curves, s)
            fem.apply_dirichlet(system, fixed, 0.0)
            theta = -fem.solve_spd(system, method=method.solver)
        else:
            if not alpha_hint > 0:
                raise ValueError("alpha_hint must be positive")
            res = fem.solve_p_laplacian(mesh, curves, s, alpha_hint, method.picard_config(), method=method.solver)
            theta = -res.u / alpha_hint
            diag.update(picard_residual=res.residual, picard_iterations=res.iterations, picard_converged=res.converged)
        theta[fixed] = 0.0
    tg = np.zeros((n, 2))
    b = mesh.boundary_nodes()
    tg[b] = theta[b]
    return UpdateResult(theta, tg, predicted_decrease(curves, s, tg), diag)
