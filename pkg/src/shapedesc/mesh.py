"""Planar triangle meshes with tagged boundary loops.

Nodal and cell fields are plain numpy arrays: shape ``(n,)`` for scalars and
``(n, 2)`` for vectors, indexed by node or triangle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Structural defect in a triangulation or its boundary."""


@dataclass(frozen=True)
class TriMesh:
    """Triangulation of a planar domain.

    Parameters
    ----------
    nodes : (N, 2) float array
    triangles : (M, 3) int array, counterclockwise
    boundary_edges : (E, 2) int array, oriented so the domain lies to the left
    edge_loop : (E,) int array, loop id of each boundary edge
    edge_design : (E,) bool array, True where the edge belongs to the design boundary
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_loop: np.ndarray
    edge_design: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "edge_loop", np.asarray(self.edge_loop, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "edge_design", np.asarray(self.edge_design, dtype=bool).reshape(-1))
        n_e = len(self.boundary_edges)
        if len(self.edge_loop) != n_e or len(self.edge_design) != n_e:
            raise MeshError("boundary edge tags do not match boundary edge count")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.nodes)):
            raise MeshError("triangle node index out of range")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for counterclockwise)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def design_nodes(self) -> np.ndarray:
        """Boolean mask of nodes whose adjacent boundary edges are all design edges.

        Junction nodes between design and fixed edges are not design nodes.
        """
        on_design = np.zeros(self.n_nodes, dtype=bool)
        on_fixed = np.zeros(self.n_nodes, dtype=bool)
        on_design[self.boundary_edges[self.edge_design].ravel()] = True
        on_fixed[self.boundary_edges[~self.edge_design].ravel()] = True
        return on_design & ~on_fixed

    def diameter(self) -> float:
        pts = self.nodes[self.boundary_nodes()] if len(self.boundary_edges) else self.nodes
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        return float(d.max())

    def check(self) -> None:
        """Raise MeshError if any invariant is violated."""
        if np.any(self.areas <= 0):
            raise MeshError("triangle with non-positive area")
        edge_tri_counts(self)  # raises on non-manifold boundary edges
        boundary_loops(self)

    @classmethod
    def from_triangles(cls, nodes, triangles, design=None) -> "TriMesh":
        """Build a mesh, deriving boundary edges from the triangulation.

        Triangles are reoriented counterclockwise. ``design`` is either None
        (every boundary edge is design), a callable mapping edge midpoints
        ``(E, 2)`` to a bool mask, or a callable taking the loop id array and
        midpoints. Loop ids are assigned by decreasing enclosed area, so the
        outer loop of a simply-connected-with-holes domain is loop 0.
        """
        nodes = np.asarray(nodes, dtype=float)
        tris = np.asarray(triangles, dtype=np.int64).copy()
        p = nodes[tris]
        signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
            p[:, 2, 0] - p[:, 0, 0]
        )
        flip = signed < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        key = np.sort(directed, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        bedges = directed[counts[inverse] == 1]
        loops = _chain_edges(bedges)
        # order loops by decreasing absolute enclosed area
        loop_area = [abs(_polygon_area(nodes[lp])) for lp in loops]
        order = np.argsort(loop_area, kind="stable")[::-1]
        edges, loop_ids = [], []
        for new_id, old in enumerate(order):
            lp = loops[old]
            edges.append(np.c_[lp, np.roll(lp, -1)])
            loop_ids.append(np.full(len(lp), new_id))
        edges = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
        loop_ids = np.concatenate(loop_ids) if loop_ids else np.zeros(0, dtype=np.int64)
        mid = nodes[edges].mean(axis=1)
        if design is None:
            flags = np.ones(len(edges), dtype=bool)
        else:
            try:
                flags = np.asarray(design(loop_ids, mid), dtype=bool)
            except TypeError:
                flags = np.asarray(design(mid), dtype=bool)
        return cls(nodes, tris, edges, loop_ids, flags)


@dataclass(frozen=True)
class BoundaryCurve:
    """One closed boundary loop, domain on the left.

    ``spacing[j]`` is the distance from node j to its predecessor, and
    ``edge_normals[j]`` the unit outward normal of the edge (j-1, j).
    """

    loop_id: int
    nodes: np.ndarray
    points: np.ndarray
    spacing: np.ndarray
    edge_normals: np.ndarray
    normals: np.ndarray
    design: np.ndarray
    edge_design: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def length(self) -> float:
        return float(self.spacing.sum())

    @property
    def arc(self) -> np.ndarray:
        """Arc-length coordinate of each node, starting at 0 for node 0."""
        return np.concatenate([[0.0], np.cumsum(self.spacing[1:])])

    @property
    def signed_area(self) -> float:
        return _polygon_area(self.points)


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _chain_edges(edges: np.ndarray) -> list[np.ndarray]:
    """Split directed edges into closed node loops."""
    if len(edges) == 0:
        return []
    succ: dict[int, int] = {}
    pred_count: dict[int, int] = {}
    for a, b in edges:
        a, b = int(a), int(b)
        if a in succ:
            raise MeshError(f"boundary node {a} has more than one outgoing boundary edge")
        succ[a] = b
        pred_count[b] = pred_count.get(b, 0) + 1
    if any(c != 1 for c in pred_count.values()) or set(pred_count) != set(succ):
        raise MeshError("boundary edges do not form closed loops")
    loops = []
    seen: set[int] = set()
    for a, _ in edges:
        a = int(a)
        if a in seen:
            continue
        loop = [a]
        seen.add(a)
        nxt = succ[a]
        while nxt != a:
            if nxt in seen:
                raise MeshError("boundary loop revisits a node")
            loop.append(nxt)
            seen.add(nxt)
            nxt = succ[nxt]
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def edge_tri_counts(mesh: TriMesh) -> np.ndarray:
    """Number of triangles adjacent to each boundary edge; raises unless all are 1."""
    t = mesh.triangles
    key = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    lookup = {tuple(e): c for e, c in zip(uniq.tolist(), counts.tolist())}
    bkey = np.sort(mesh.boundary_edges, axis=1)
    res = np.array([lookup.get(tuple(e), 0) for e in bkey.tolist()], dtype=np.int64)
    if np.any(res != 1):
        raise MeshError("boundary edge not adjacent to exactly one triangle")
    return res


def outward_normal(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unit outward normal of directed edge(s) a->b with the domain on the left."""
    t = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def boundary_loops(mesh: TriMesh, renormalize: bool = False) -> list[BoundaryCurve]:
    """Chain the tagged boundary edges into closed curves, ordered by loop id."""
    if len(mesh.boundary_edges) == 0:
        raise MeshError("mesh has no boundary edges")
    design_of = {}
    for (a, b), d in zip(mesh.boundary_edges.tolist(), mesh.edge_design.tolist()):
        design_of[(a, b)] = d
    loop_of = dict(zip(mesh.boundary_edges[:, 0].tolist(), mesh.edge_loop.tolist()))
    curves = []
    for chain in _chain_edges(mesh.boundary_edges):
        pts = mesh.nodes[chain]
        prev = np.roll(pts, 1, axis=0)
        spacing = np.linalg.norm(pts - prev, axis=1)
        if np.any(spacing <= 0):
            raise MeshError("zero-length boundary edge")
        en = outward_normal(prev, pts)  # normal of edge (j-1, j)
        normals = 0.5 * (en + np.roll(en, -1, axis=0))
        if renormalize:
            normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        prev_idx = np.roll(chain, 1)
        edesign = np.array([design_of[(int(a), int(b))] for a, b in zip(prev_idx, chain)])
        # node j is a design node iff both adjacent edges are design edges
        ndesign = edesign & np.roll(edesign, -1)
        curves.append(
            BoundaryCurve(
                loop_id=int(loop_of[int(chain[0])]),
                nodes=chain,
                points=pts,
                spacing=spacing,
                edge_normals=en,
                normals=normals,
                design=ndesign,
                edge_design=edesign,
            )
        )
    curves.sort(key=lambda c: c.loop_id)
    return curves


def node_normal(curve: BoundaryCurve, j: int) -> np.ndarray:
    """Average of the unit outward normals of the two edges at node j (not renormalized)."""
    k = len(curve)
    return 0.5 * (curve.edge_normals[j % k] + curve.edge_normals[(j + 1) % k])


def integrate_domain(mesh: TriMesh, f) -> float:
    """One-point centroid rule; ``f`` maps an (M, 2) array of points to (M,) values."""
    vals = np.asarray(f(mesh.centroids), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand is not finite at a triangle centroid")
    return float(np.dot(vals, mesh.areas))


def triangle_angles(mesh: TriMesh) -> np.ndarray:
    """Interior angles in degrees, shape (M, 3)."""
    p = mesh.nodes[mesh.triangles]
    out = np.empty((len(p), 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        dot = (u * v).sum(axis=1)
        out[:, i] = np.degrees(np.arctan2(cross, dot))
    return out


def min_quality(mesh: TriMesh) -> float:
    """Smallest interior angle over all triangles, in degrees.

    Inverted triangles count as degenerate and give 0.
    """
    if np.any(mesh.areas <= 0):
        return 0.0
    return float(triangle_angles(mesh).min())


def displace(mesh: TriMesh, theta: np.ndarray, alpha: float) -> TriMesh:
    """Move every node x to x + alpha * theta(x); topology is unchanged."""
    theta = np.asarray(theta, dtype=float)
    if alpha == 0:
        return mesh
    return replace(mesh, nodes=mesh.nodes + alpha * theta)


def shepard_to_nodes(mesh: TriMesh, cell_values: np.ndarray, normalized: bool = True) -> np.ndarray:
    """Inverse-distance interpolation of cell-center values to the nodes.

    With ``normalized=False`` the weights ``1 - d_c / sum_d d_d`` are averaged
    over the ``N`` adjacent cells, i.e. divided by ``N`` rather than by their
    sum ``N - 1``; this does not reproduce constants and gives 0 at nodes with
    a single adjacent cell. ``normalized=True`` divides by the weight sum.
    """
    vals = np.asarray(cell_values, dtype=float)
    tri = mesh.triangles
    cent = mesh.centroids
    node_idx = tri.ravel()
    cell_idx = np.repeat(np.arange(len(tri)), 3)
    dist = np.linalg.norm(mesh.nodes[node_idx] - cent[cell_idx], axis=1)
    n = mesh.n_nodes
    count = np.bincount(node_idx, minlength=n).astype(float)
    if np.any(count == 0):
        raise MeshError("node without adjacent triangle")
    dsum = np.bincount(node_idx, weights=dist, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = 1.0 - dist / dsum[node_idx]
    w = np.where(np.isfinite(w), w, 1.0)
    trailing = vals.shape[1:]
    wv = w.reshape((-1,) + (1,) * len(trailing)) * vals[cell_idx]
    acc = np.zeros((n,) + trailing)
    np.add.at(acc, node_idx, wv)
    if normalized:
        wsum = np.bincount(node_idx, weights=w, minlength=n)
        single = count == 1
        wsum[single] = 1.0
        # a lone adjacent cell carries weight 0; take its value directly
        if np.any(single):
            lone = np.zeros((n,) + trailing)
            np.add.at(lone, node_idx, vals[cell_idx])
            acc[single] = lone[single]
        return acc / wsum.reshape((-1,) + (1,) * len(trailing))
    if np.any(count == 1):
        logger.warning("%d node(s) with a single adjacent cell get value 0", int((count == 1).sum()))
    return acc / count.reshape((-1,) + (1,) * len(trailing))
