"""Mesh generation for the benchmark geometries and remeshing during descent.

Triangulation is delegated to Shewchuk's Triangle (quality-constrained
Delaunay refinement) via the ``triangle`` package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import triangle
from shapely.geometry import LinearRing, Polygon

from .mesh import BoundaryCurve, TriMesh, min_quality

# Triangle's max-area switch with this factor gives a mean edge length close to h
_AREA_FACTOR = 1.5 * np.sqrt(3.0) / 4.0


class RemeshError(RuntimeError):
    """Meshing failed: invalid input loops or unreachable quality goal."""


@dataclass(frozen=True)
class MeshSpec:
    h: float
    loops: tuple  # of (K, 2) arrays
    min_angle: float = 20.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")


def _circle(radius: float, h: float, min_pts: int = 8) -> np.ndarray:
    n = max(min_pts, int(round(2 * np.pi * radius / h)))
    t = 2 * np.pi * np.arange(n) / n
    return np.c_[radius * np.cos(t), radius * np.sin(t)]


def _polygon_with_spacing(corners: np.ndarray, h: float) -> np.ndarray:
    pts = []
    k = len(corners)
    for i in range(k):
        a, b = corners[i], corners[(i + 1) % k]
        n = max(1, int(round(np.linalg.norm(b - a) / h)))
        t = np.arange(n)[:, None] / n
        pts.append(a + t * (b - a))
    return np.vstack(pts)


def _inside_point(loop: np.ndarray) -> np.ndarray:
    p = Polygon(loop).representative_point()
    return np.array([p.x, p.y])


def _triangulate(loops: list[np.ndarray], h: float, min_angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Constrained Delaunay refinement of the region inside loops[0] and outside the others."""
    verts, segs = [], []
    offset = 0
    for lp in loops:
        k = len(lp)
        verts.append(lp)
        idx = offset + np.arange(k)
        segs.append(np.c_[idx, np.roll(idx, -1)])
        offset += k
    data = {"vertices": np.vstack(verts), "segments": np.vstack(segs)}
    holes = [_inside_point(lp) for lp in loops[1:]]
    if holes:
        data["holes"] = np.array(holes)
    max_area = _AREA_FACTOR * h * h
    out = triangle.triangulate(data, f"pq{min_angle:.6f}a{max_area:.12f}Q")
    return out["vertices"], out["triangles"]


def _finish(nodes, tris, loops, loop_design, min_angle) -> TriMesh:
    """Tag boundary edges by nearest input segment and check the angle goal."""
    seg_a = np.vstack([lp for lp in loops])
    seg_b = np.vstack([np.roll(lp, -1, axis=0) for lp in loops])
    seg_flag = np.concatenate(loop_design)

    def design(_loop_ids, mid):
        return seg_flag[_nearest_segment(mid, seg_a, seg_b)]

    mesh = TriMesh.from_triangles(nodes, tris, design=design)
    q = min_quality(mesh)
    if q < min_angle - 1e-6:
        raise RemeshError(f"refinement reached only {q:.2f} deg minimum angle (goal {min_angle})")
    return mesh


def _nearest_segment(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    ll = np.maximum((d * d).sum(axis=1), 1e-300)
    best = np.full(len(pts), np.inf)
    arg = np.zeros(len(pts), dtype=np.int64)
    for start in range(0, len(pts), 256):
        p = pts[start : start + 256]
        t = np.clip(((p[:, None, :] - a[None]) * d[None]).sum(-1) / ll[None], 0.0, 1.0)
        proj = a[None] + t[..., None] * d[None]
        dist = ((p[:, None, :] - proj) ** 2).sum(-1)
        arg[start : start + 256] = dist.argmin(axis=1)
        best[start : start + 256] = dist.min(axis=1)
    return arg


def generate_annulus(R: float, r: float, h: float, min_angle: float = 20.0) -> TriMesh:
    """Ring between circles of radius R (design) and r (fixed), centered at the origin."""
    if not (0 < r < R):
        raise RemeshError(f"annulus requires 0 < r < R, got r={r}, R={R}")
    if not (0 < h < R - r):
        raise RemeshError(f"annulus requires 0 < h < R - r, got h={h}")
    outer = _circle(R, h)
    inner = _circle(r, h)[::-1]
    loops = [outer, inner]
    nodes, tris = _triangulate(loops, h, min_angle)
    return _finish(nodes, tris, loops, [np.ones(len(outer), bool), np.zeros(len(inner), bool)], min_angle)


def generate_diamond_annulus(circumradius: float, r: float, h: float, min_angle: float = 20.0) -> TriMesh:
    """Square rotated by 45 degrees (design) around a fixed circular hole."""
    c = circumradius
    inradius = c / np.sqrt(2.0)
    if not (0 < r < inradius):
        raise RemeshError(f"diamond requires 0 < r < circumradius/sqrt(2), got r={r}")
    if not (0 < h < inradius - r):
        raise RemeshError(f"diamond requires 0 < h < inradius - r, got h={h}")
    corners = np.array([[c, 0.0], [0.0, c], [-c, 0.0], [0.0, -c]])
    outer = _polygon_with_spacing(corners, h)
    inner = _circle(r, h)[::-1]
    loops = [outer, inner]
    nodes, tris = _triangulate(loops, h, min_angle)
    return _finish(nodes, tris, loops, [np.ones(len(outer), bool), np.zeros(len(inner), bool)], min_angle)


def turning_angles(points: np.ndarray) -> np.ndarray:
    """Signed turning angle (radians) at each vertex of a closed polyline."""
    d_in = points - np.roll(points, 1, axis=0)
    d_out = np.roll(points, -1, axis=0) - points
    cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
    dot = (d_in * d_out).sum(axis=1)
    return np.arctan2(cross, dot)


def resample_loop(points: np.ndarray, edge_design: np.ndarray, h: float, corner_deg: float = 30.0):
    """Resample a closed polyline at spacing ~h by arc length.

    Vertices with turning angle above ``corner_deg`` and vertices where the
    design tag changes are kept exactly. ``edge_design[j]`` tags the edge
    ending at vertex j; the returned tags follow the same convention.
    """
    k = len(points)
    keep = np.abs(np.degrees(turning_angles(points))) > corner_deg
    keep |= edge_design != np.roll(edge_design, -1)
    anchors = np.flatnonzero(keep)
    if len(anchors) == 0:
        anchors = np.array([0])
    out_pts, out_flags = [], []
    for i, a in enumerate(anchors):
        b = anchors[(i + 1) % len(anchors)]
        idx = np.arange(a, a + ((b - a) % k or k) + 1) % k
        piece = points[idx]
        flags = edge_design[idx[1:]]
        seg = np.linalg.norm(np.diff(piece, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        n = max(1, int(round(s[-1] / h)))
        targets = s[-1] * np.arange(n) / n
        out_pts.append(np.c_[np.interp(targets, s, piece[:, 0]), np.interp(targets, s, piece[:, 1])])
        # tag of the edge ending at each new vertex: the piece edge containing the midpoint before it
        mids = s[-1] * (np.arange(n) + 0.5) / n
        seg_idx = np.clip(np.searchsorted(s, mids, side="right") - 1, 0, len(flags) - 1)
        out_flags.append(flags[seg_idx])
    pts = np.vstack(out_pts)
    fl = np.concatenate(out_flags)
    # edge ending at vertex j starts at vertex j-1: shift tags by one
    return pts, np.roll(fl, 1)


def _check_loops(loops: list[np.ndarray]) -> None:
    rings = []
    for lp in loops:
        if len(lp) < 3:
            raise RemeshError("boundary loop with fewer than 3 vertices")
        ring = LinearRing(lp)
        if not ring.is_simple:
            raise RemeshError("self-intersecting boundary loop")
        rings.append(ring)
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            if rings[i].intersects(rings[j]):
                raise RemeshError(f"boundary loops {i} and {j} intersect")


def remesh(curves, h: float, min_angle: float = 20.0, corner_deg: float = 30.0) -> TriMesh:
    """Triangulate the region bounded by the given loops at target edge length h.

    ``curves`` holds BoundaryCurve objects or ``(points, edge_design)`` pairs.
    The loop enclosing the largest area is the outer boundary.
    """
    raw = []
    for c in curves:
        if isinstance(c, BoundaryCurve):
            raw.append((np.asarray(c.points, float), np.asarray(c.edge_design, bool)))
        else:
            pts, flags = c
            raw.append((np.asarray(pts, float), np.asarray(flags, bool)))
    _check_loops([p for p, _ in raw])
    raw.sort(key=lambda pf: -abs(Polygon(pf[0]).area))
    loops, flags = [], []
    for pts, fl in raw:
        p, f = resample_loop(pts, fl, h, corner_deg)
        loops.append(p)
        flags.append(f)
    _check_loops(loops)
    nodes, tris = _triangulate(loops, h, min_angle)
    # segment i of each loop runs from vertex i to i+1, i.e. ends at vertex i+1
    seg_flags = [np.roll(f, -1) for f in flags]
    return _finish(nodes, tris, loops, seg_flags, min_angle)


def unit_square(n: int, diagonal: str = "right") -> TriMesh:
    """Structured n x n grid on [0, 1]^2, each cell split into two triangles.

    ``diagonal="alternate"`` flips the split in a checkerboard pattern.
    Every boundary edge is a design edge.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.c_[X.ravel(), Y.ravel()]
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            if diagonal == "alternate" and (i + j) % 2:
                tris += [[a, b, d], [b, c, d]]
            else:
                tris += [[a, b, c], [a, c, d]]
    return TriMesh.from_triangles(nodes, np.array(tris))
