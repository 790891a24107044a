"""Shape comparisons against the level-set oracle, used by benchmarks and tests."""
from __future__ import annotations

import numpy as np

from .mesh import BoundaryCurve, TriMesh, boundary_loops
from .problem import IllustrativeProblem, levelset_oracle
from .remesh import turning_angles


def design_curve(mesh: TriMesh) -> BoundaryCurve:
    """The loop carrying design nodes (the outer loop for the benchmarks)."""
    for c in boundary_loops(mesh):
        if c.design.any():
            return c
    raise ValueError("mesh has no design boundary")


def radial_deviation(mesh: TriMesh, problem: IllustrativeProblem = IllustrativeProblem()) -> float:
    """Largest |r - r_oracle(phi)| over the design nodes, in polar coordinates about the origin."""
    c = design_curve(mesh)
    pts = c.points[c.design]
    r = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    return float(max(abs(ri - levelset_oracle(p, problem)) for ri, p in zip(r, phi)))


def oracle_polyline(problem: IllustrativeProblem = IllustrativeProblem(), n: int = 720) -> np.ndarray:
    phi = 2 * np.pi * np.arange(n) / n
    r = np.array([levelset_oracle(p, problem) for p in phi])
    return r[:, None] * np.c_[np.cos(phi), np.sin(phi)]


def oracle_corner(problem: IllustrativeProblem, near_phi: float = np.pi, window: float = np.pi / 8, n: int = 1440) -> np.ndarray:
    """Oracle vertex with the sharpest turn within ``window`` of the angle ``near_phi``."""
    poly = oracle_polyline(problem, n)
    phi = 2 * np.pi * np.arange(n) / n
    gap = np.abs((phi - near_phi + np.pi) % (2 * np.pi) - np.pi)
    turn = np.where(gap <= window, np.abs(turning_angles(poly)), -1.0)
    return poly[int(np.argmax(turn))]


def distance_to_point(mesh: TriMesh, point) -> float:
    """Smallest distance from a boundary node of the design loop to ``point``."""
    c = design_curve(mesh)
    return float(np.linalg.norm(c.points - np.asarray(point), axis=1).min())


def total_turning(mesh: TriMesh) -> float:
    """Sum of absolute turning angles along the design loop (radians)."""
    return float(np.abs(turning_angles(design_curve(mesh).points)).sum())
