"""Level-set benchmark: minimize the integral of f over the domain.

The minimizing domain is bounded by the zero level set of f, so the
sensitivity on the boundary is f itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .mesh import BoundaryCurve, TriMesh, integrate_domain, shepard_to_nodes


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class IllustrativeProblem:
    C1: float = 0.0
    C2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.C1) and np.isfinite(self.C2)):
            raise ValueError("C1 and C2 must be finite")


def f_eval(x, problem: IllustrativeProblem = IllustrativeProblem()):
    """f at a point (2,) or at an array of points (..., 2)."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    val = 2 * x1**4 + x2**4 - x1**2 - 4 * x2**2 - 3 * problem.C1 * np.abs(np.maximum(x1, x2))
    if problem.C2:
        val = val + problem.C2 / 10 * (np.sin(50 * x1) + np.sin(50 * x2))
    return val


def objective(mesh: TriMesh, problem: IllustrativeProblem = IllustrativeProblem()) -> float:
    return integrate_domain(mesh, lambda pts: f_eval(pts, problem))


def sensitivity(curve: BoundaryCurve, problem: IllustrativeProblem = IllustrativeProblem()) -> np.ndarray:
    """f at the design nodes of the curve, 0 elsewhere (indexed along the curve)."""
    s = f_eval(curve.points, problem)
    return np.where(curve.design, s, 0.0)


def levelset_oracle(phi: float, problem: IllustrativeProblem = IllustrativeProblem(), lo: float = 0.31, hi: float = 4.0) -> float:
    """Smallest radius t in (lo, hi] where f changes sign along the ray at angle phi."""
    if problem.C2 != 0:
        raise OracleError("the level-set oracle requires C2 = 0")
    direction = np.array([np.cos(phi), np.sin(phi)])
    grid = np.arange(lo, hi + 5e-4, 1e-3)
    vals = f_eval(grid[:, None] * direction, problem)
    if vals[0] == 0:
        return float(grid[0])
    change = np.flatnonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))
    if len(change) == 0:
        raise OracleError(f"no sign change of f along phi={phi} in [{lo}, {hi}]")
    a, b = grid[change[0]], grid[change[0] + 1]
    fa = f_eval(a * direction, problem)
    while b - a > 1e-10:
        m = 0.5 * (a + b)
        fm = f_eval(m * direction, problem)
        if fm == 0:
            return float(m)
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def mean_boundary_displacement(theta: np.ndarray, alpha: float, curves) -> float:
    """Mean of |alpha * theta| over all boundary nodes of all loops."""
    if isinstance(curves, BoundaryCurve):
        curves = [curves]
    nodes = np.concatenate([c.nodes for c in curves])
    theta = np.asarray(theta, dtype=float)
    return float(abs(alpha) * np.linalg.norm(theta[nodes], axis=1).mean())


class SensitivityProvider(Protocol):
    def evaluate(self, mesh: TriMesh, curves: list[BoundaryCurve]) -> tuple[float, np.ndarray]:
        """Return J and the nodal sensitivity (indexed by global node, 0 off the design boundary)."""

    def objective(self, mesh: TriMesh) -> float: ...


def _design_sensitivity(n_nodes: int, curves, values_at) -> np.ndarray:
    s = np.zeros(n_nodes)
    for c in curves:
        idx = c.nodes[c.design]
        s[idx] = values_at(idx)
    return s


@dataclass(frozen=True)
class AnalyticProvider:
    problem: IllustrativeProblem = IllustrativeProblem()

    def objective(self, mesh: TriMesh) -> float:
        return objective(mesh, self.problem)

    def evaluate(self, mesh, curves):
        s = _design_sensitivity(mesh.n_nodes, curves, lambda idx: f_eval(mesh.nodes[idx], self.problem))
        return self.objective(mesh), s


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class ExternalSensitivity:
    """Cell-centered sensitivity loaded from file, mapped to nodes by Shepard interpolation."""

    J: float
    cell_values: np.ndarray
    normalized: bool = True
    source: str = ""

    def _check(self, mesh: TriMesh) -> None:
        if len(self.cell_values) != mesh.n_triangles:
            raise ParseError(
                f"{self.source}: {len(self.cell_values)} sensitivity rows for a mesh with {mesh.n_triangles} triangles"
            )

    def objective(self, mesh: TriMesh) -> float:
        self._check(mesh)
        return self.J

    def evaluate(self, mesh, curves):
        self._check(mesh)
        nodal = shepard_to_nodes(mesh, self.cell_values, normalized=self.normalized)
        return self.J, _design_sensitivity(mesh.n_nodes, curves, lambda idx: nodal[idx])


def load_external_sensitivity(path, mesh: TriMesh | None = None, normalized: bool = True) -> ExternalSensitivity:
    """Parse ``J,<value>`` followed by ``cell_index,s_value`` rows."""
    path = Path(path)
    lines = path.read_text().splitlines()
    J = None
    rows: dict[int, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if J is None:
            if len(parts) != 2 or parts[0] != "J":
                raise ParseError(f"{path}:{lineno}: expected header 'J,<value>'")
            try:
                J = float(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: objective value is not a number") from None
            continue
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'cell_index,s_value'")
        try:
            idx, val = int(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed row {line!r}") from None
        if idx < 0 or idx in rows:
            raise ParseError(f"{path}:{lineno}: invalid or duplicate cell index {idx}")
        if not np.isfinite(val):
            raise ParseError(f"{path}:{lineno}: non-finite sensitivity")
        rows[idx] = val
    if J is None:
        raise ParseError(f"{path}:1: empty sensitivity file")
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise ParseError(f"{path}: cell indices must cover 0..{n - 1}")
    provider = ExternalSensitivity(J, np.array([rows[i] for i in range(n)]), normalized, str(path))
    if mesh is not None:
        provider._check(mesh)
    return provider
