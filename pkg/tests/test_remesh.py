import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import LineString, Polygon

from shapedesc.mesh import boundary_loops, integrate_domain, min_quality
from shapedesc.remesh import (
    MeshSpec,
    RemeshError,
    generate_annulus,
    generate_diamond_annulus,
    remesh,
    resample_loop,
    turning_angles,
    unit_square,
)


def area(m):
    return integrate_domain(m, lambda p: np.ones(len(p)))


def assert_valid(m, min_angle=20.0):
    m.check()
    assert np.all(m.areas > 0)
    assert min_quality(m) >= min_angle - 1e-6


def test_annulus_outer_node_count(annulus_coarse):
    outer, inner = boundary_loops(annulus_coarse)
    assert abs(len(outer) - round(2 * np.pi / 0.1)) <= 1
    assert outer.edge_design.all() and not inner.edge_design.any()
    assert_valid(annulus_coarse)


def test_annulus_mean_edge_length_near_h(annulus_fine):
    t = annulus_fine.triangles
    e = np.linalg.norm(annulus_fine.nodes[t] - annulus_fine.nodes[np.roll(t, 1, axis=1)], axis=2)
    assert e.mean() == pytest.approx(0.05, rel=0.2)


def test_annulus_area_converges_quadratically(annulus_coarse, annulus_fine):
    exact = np.pi * (1 - 0.09)
    for m, h in ((annulus_coarse, 0.1), (annulus_fine, 0.05)):
        n_out, n_in = (len(c) for c in boundary_loops(m))
        # the mesh fills exactly the region between two inscribed regular polygons
        ngon = 0.5 * n_out * np.sin(2 * np.pi / n_out) - 0.5 * 0.09 * n_in * np.sin(2 * np.pi / n_in)
        assert area(m) == pytest.approx(ngon, rel=1e-12)
        assert 0 < exact - area(m) < 1.0 * h**2


@pytest.mark.parametrize("R, r, h", [(1.0, 1.1, 0.1), (1.0, 0.0, 0.1), (1.0, 0.3, 0.8)])
def test_annulus_rejects_bad_input(R, r, h):
    with pytest.raises(RemeshError):
        generate_annulus(R, r, h)


def test_diamond_corners_and_perimeter(diamond):
    outer = boundary_loops(diamond)[0]
    turn = np.degrees(turning_angles(outer.points))
    corners = np.flatnonzero(np.abs(turn) > 1e-6)
    assert len(corners) == 4
    np.testing.assert_allclose(np.abs(turn[corners]), 90.0, atol=1e-9)
    assert outer.length == pytest.approx(4 * np.sqrt(2), abs=0.05)
    assert_valid(diamond)


def test_diamond_rejects_hole_outside_square():
    with pytest.raises(RemeshError):
        generate_diamond_annulus(1.0, 0.75, 0.05)


def test_mesh_spec_validates_h():
    with pytest.raises(ValueError):
        MeshSpec(h=-1.0, loops=())


def test_remesh_pristine_annulus_preserves_area(annulus_coarse):
    m2 = remesh(boundary_loops(annulus_coarse), 0.1)
    assert_valid(m2)
    assert abs(area(m2) - area(annulus_coarse)) < 0.1**2
    m3 = remesh(boundary_loops(m2), 0.1)
    # a second remesh changes the area by less than one triangle's area
    assert abs(area(m3) - area(m2)) < m2.areas.max()


def test_remesh_keeps_design_flags(annulus_coarse):
    m2 = remesh(boundary_loops(annulus_coarse), 0.1)
    outer, inner = boundary_loops(m2)
    assert outer.edge_design.all() and not inner.edge_design.any()


def test_remesh_keeps_right_angle_corner():
    sq = np.array([[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1], [0, 0.5]], float)
    m = remesh([(sq, np.ones(len(sq), bool))], 0.1)
    assert_valid(m)
    pts = boundary_loops(m)[0].points
    for corner in ([0, 0], [1, 0], [1, 1], [0, 1]):
        assert np.any(np.all(pts == corner, axis=1))


def test_remesh_boundary_stays_close_to_input(diamond):
    c = boundary_loops(diamond)[0]
    m = remesh(boundary_loops(diamond), 0.08)
    out = boundary_loops(m)[0]
    d = Polygon(c.points).exterior.hausdorff_distance(Polygon(out.points).exterior)
    assert d <= 0.04


def test_remesh_design_inheritance_mixed_loop():
    # square whose bottom side is fixed
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    flags = np.array([False, True, True, True])  # edge ending at vertex j; edge 3->0 ... vertex0 is end of left edge
    flags = np.array([True, False, True, True])  # edge (0,1) is the bottom, it ends at vertex 1
    m = remesh([(sq, flags)], 0.1)
    c = boundary_loops(m)[0]
    mids = 0.5 * (c.points + np.roll(c.points, 1, axis=0))
    bottom = np.isclose(mids[:, 1], 0.0)
    assert not c.edge_design[bottom].any()
    assert c.edge_design[~bottom].all()
    # junction nodes are not design nodes
    for corner in ([0, 0], [1, 0]):
        j = np.flatnonzero(np.all(c.points == corner, axis=1))[0]
        assert not c.design[j]


def test_remesh_rejects_bowtie():
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
    with pytest.raises(RemeshError):
        remesh([(bow, np.ones(4, bool))], 0.1)


def test_remesh_rejects_intersecting_loops():
    a = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
    b = np.array([[1, 1], [3, 1], [3, 3], [1, 3]], float)[::-1]
    with pytest.raises(RemeshError):
        remesh([(a, np.ones(4, bool)), (b, np.zeros(4, bool))], 0.2)


@settings(max_examples=20, deadline=None)
@given(
    n=st.integers(5, 30),
    h=st.floats(0.05, 0.5),
    seed=st.integers(0, 10_000),
)
def test_resample_keeps_corners_and_length(n, h, seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 2 * np.pi, n))
    if np.min(np.diff(np.r_[t, t[0] + 2 * np.pi])) < 1e-3:
        return
    r = 1 + 0.3 * rng.uniform(size=n)
    pts = np.c_[r * np.cos(t), r * np.sin(t)]
    flags = np.ones(n, bool)
    out, oflags = resample_loop(pts, flags, h)
    corners = np.abs(np.degrees(turning_angles(pts))) > 30
    for p in pts[corners]:
        assert np.any(np.all(out == p, axis=1))
    assert oflags.all()
    # resampled polyline has all vertices on the input polyline
    line = LineString(np.vstack([pts, pts[:1]]))
    from shapely.geometry import Point

    assert max(line.distance(Point(*p)) for p in out) < 1e-9


def test_unit_square_structure():
    m = unit_square(4)
    assert m.n_nodes == 25 and m.n_triangles == 32
    assert area(m) == pytest.approx(1.0)
    assert boundary_loops(m)[0].length == pytest.approx(4.0)
