"""Mesh and boundary file formats: OFF, legacy VTK (ASCII), boundary CSV."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import BoundaryCurve, MeshError, TriMesh, boundary_loops

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_off(mesh: TriMesh, path) -> None:
    lines = ["OFF", f"{mesh.n_nodes} {mesh.n_triangles} 0"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path, design=None) -> TriMesh:
    """Read an ASCII OFF triangle mesh; boundary tags are rebuilt from topology."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError(f"{path}: missing OFF header")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)[:, :2]
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        if k != 3:
            raise MeshError(f"{path}: only triangular faces are supported")
        faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
        pos += 4
    return TriMesh.from_triangles(verts, np.array(faces), design=design)


def write_vtk(mesh: TriMesh, path, point_vectors: dict | None = None, point_scalars: dict | None = None) -> None:
    """Legacy ASCII UNSTRUCTURED_GRID with optional per-node fields."""
    out = ["# vtk DataFile Version 3.0", "shapedesc mesh", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_nodes} double")
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    m = mesh.n_triangles
    out.append(f"CELLS {m} {4 * m}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {m}")
    out += ["5"] * m
    point_vectors = point_vectors or {}
    point_scalars = point_scalars or {}
    if point_vectors or point_scalars:
        out.append(f"POINT_DATA {mesh.n_nodes}")
    for name, vec in point_vectors.items():
        vec = np.asarray(vec, dtype=float)
        out.append(f"VECTORS {name} double")
        out += [f"{fmt(a)} {fmt(b)} 0" for a, b in vec]
    for name, val in point_scalars.items():
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out += [fmt(v) for v in np.asarray(val, dtype=float)]
    Path(path).write_text("\n".join(out) + "\n")


def write_boundary_csv(curves: list[BoundaryCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loop", "x", "y", "design"])
        for c in curves:
            for (x, y), d in zip(c.points, c.edge_design):
                w.writerow([c.loop_id, fmt(x), fmt(y), int(d)])


def read_boundary_csv(path) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Return ``(loop_id, points, edge_design)`` per loop, in file order.

    ``edge_design[j]`` tags the edge ending at point j.
    """
    loops: dict[int, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                lid = int(row["loop"])
                pt = (float(row["x"]), float(row["y"]))
                d = bool(int(row.get("design") or 1))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed boundary row") from exc
            loops.setdefault(lid, ([], []))
            loops[lid][0].append(pt)
            loops[lid][1].append(d)
    return [(lid, np.array(p), np.array(d)) for lid, (p, d) in loops.items()]


def mesh_boundary_csv(mesh: TriMesh, path) -> None:
    write_boundary_csv(boundary_loops(mesh), path)


def write_table(path, header: list[str], rows) -> None:
    """CSV with floats at 17 significant digits; ints and strings as-is."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path) -> dict[str, list]:
    """Read a CSV written by this package into columns; numeric cells become floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for h, cell in zip(header, row):
                try:
                    cols[h].append(float(cell))
                except ValueError:
                    cols[h].append(cell)
    return cols
