import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapedesc import boundary_ops as bops
from shapedesc.fem import SolverError
from shapedesc.mesh import BoundaryCurve, boundary_loops
from shapedesc.remesh import unit_square

from conftest import regular_polygon_mesh

spacings = arrays(float, st.integers(5, 40), elements=st.floats(1e-3, 10.0))


def polygon(n):
    return boundary_loops(regular_polygon_mesh(n))[0]


def partial_design(curve: BoundaryCurve, keep) -> BoundaryCurve:
    mask = np.asarray(keep, bool)
    return BoundaryCurve(curve.loop_id, curve.nodes, curve.points, curve.spacing, curve.edge_normals,
                         curve.normals, mask, curve.edge_design)


# --- stencil -------------------------------------------------------------

def test_central_difference_on_uniform_spacing():
    h = 0.3
    v = np.zeros(9)
    v[4] = 1.0
    out = bops.fd_laplace_beltrami(np.full(9, h), v)
    assert out[4] == pytest.approx(-2 / h**2, rel=1e-14)
    assert out[3] == pytest.approx(1 / h**2) and out[5] == pytest.approx(1 / h**2)


@settings(max_examples=100, deadline=None)
@given(h=spacings, a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linear_in_arc_length_gives_zero(h, a, b):
    arc = np.concatenate([[0.0], np.cumsum(h[1:])])
    out = bops.fd_laplace_beltrami(h, a + b * arc)
    scale = (abs(a) + abs(b) * arc[-1]) / h.min() ** 2
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-12 * max(scale, 1.0))


@settings(max_examples=200, deadline=None)
@given(h=spacings)
def test_quadratic_in_arc_length_gives_exactly_one(h):
    arc = np.concatenate([[0.0], np.cumsum(h[1:])])
    out = bops.fd_laplace_beltrami(h, 0.5 * arc**2)
    # cancellation error grows with arc^2 / h^2; exact within roundoff
    tol = 1e-12 * max(1.0, (arc[-1] / h.min()) ** 2 * 1e-2)
    np.testing.assert_allclose(out[1:-1], 1.0, atol=tol)


def test_quadratic_exactness_fixed_example():
    h = np.array([0.1, 0.25, 0.05, 0.4, 0.2, 0.15])
    arc = np.concatenate([[0.0], np.cumsum(h[1:])])
    np.testing.assert_allclose(bops.fd_laplace_beltrami(h, 0.5 * arc**2)[1:-1], 1.0, atol=1e-12)


def test_matrix_matches_stencil():
    rng = np.random.default_rng(0)
    h = rng.uniform(0.1, 1, 12)
    v = rng.normal(size=12)
    np.testing.assert_allclose(bops.laplace_beltrami_matrix(h) @ v, bops.fd_laplace_beltrami(h, v), rtol=1e-13, atol=1e-12)
    vv = rng.normal(size=(12, 2))
    np.testing.assert_allclose(bops.fd_laplace_beltrami(h, vv)[:, 1], bops.fd_laplace_beltrami(h, vv[:, 1]))


# --- SLB / VLB ---------------------------------------------------------------

def test_slb_with_zero_A_is_identity_on_design():
    c = partial_design(polygon(12), np.arange(12) < 8)
    s = np.arange(12.0)
    out = bops.solve_slb(c, s, 0.0)
    np.testing.assert_array_equal(out, np.where(c.design, s, 0.0))


def test_slb_constant_on_full_loop():
    c = polygon(17)
    np.testing.assert_allclose(bops.solve_slb(c, np.full(17, 2.5), 0.3), 2.5, rtol=1e-13)


@pytest.mark.parametrize("k", [1, 3, 7])
@pytest.mark.parametrize("A", [0.01, 0.1, 1.0])
def test_slb_fourier_damping(k, A):
    N = 32
    c = polygon(N)
    h = c.spacing[0]
    phase = 2 * np.pi * np.arange(N) / N
    s = np.cos(k * phase)
    lam = 2 * (1 - np.cos(2 * np.pi * k / N)) / h**2
    np.testing.assert_allclose(bops.solve_slb(c, s, A), s / (1 + A * lam), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(A=st.floats(1e-3, 10), k1=st.integers(1, 14), dk=st.integers(1, 2))
def test_higher_harmonics_damped_more(A, k1, dk):
    N, h = 32, 0.2
    k2 = k1 + dk
    damp = lambda k: 1 / (1 + A * 2 * (1 - np.cos(2 * np.pi * k / N)) / h**2)
    assert damp(k2) < damp(k1)


def test_vlb_examples():
    N = 24
    c = polygon(N)
    s = np.ones(N)
    np.testing.assert_array_equal(bops.solve_vlb(c, s, 0.0), c.normals)
    np.testing.assert_array_equal(bops.solve_vlb(c, np.zeros(N), 0.5), 0.0)
    # the normal field is the k=1 harmonic: result stays radial, damped by 1/(1 + A lambda_1)
    A, h = 0.1, c.spacing[0]
    lam1 = 2 * (1 - np.cos(2 * np.pi / N)) / h**2
    np.testing.assert_allclose(bops.solve_vlb(c, s, A), c.normals / (1 + A * lam1), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(-3, 3), b=st.floats(-3, 3), A=st.floats(0, 2))
def test_slb_vlb_linear_in_s(seed, a, b, A):
    c = partial_design(polygon(20), np.arange(20) % 7 != 0)
    rng = np.random.default_rng(seed)
    s1, s2 = rng.normal(size=(2, 20))
    for f in (bops.solve_slb, bops.solve_vlb):
        np.testing.assert_allclose(f(c, a * s1 + b * s2, A), a * f(c, s1, A) + b * f(c, s2, A), atol=1e-10)


def test_negative_A_or_bad_spacing_raises():
    c = polygon(10)
    with pytest.raises(SolverError):
        bops.solve_slb(c, np.ones(10), -0.1)
    bad = BoundaryCurve(c.loop_id, c.nodes, c.points, np.r_[0.0, c.spacing[1:]], c.edge_normals, c.normals, c.design, c.edge_design)
    with pytest.raises(SolverError):
        bops.solve_vlb(bad, np.ones(10), 0.1)


def test_partial_design_uses_zero_dirichlet():
    c = partial_design(polygon(16), np.arange(16) < 10)
    u = bops.solve_slb(c, np.ones(16), 1.0)
    assert not u[~c.design].any()
    # the screened solve with zero ends is strictly below the data inside
    assert np.all((u[c.design] > 0) & (u[c.design] < 1))


# --- filter and DS -------------------------------------------------------------

def test_filter_sigma_to_zero_is_ds():
    c = polygon(30)
    s = np.random.default_rng(2).normal(size=30)
    np.testing.assert_allclose(bops.filter_sensitivity(c, s, bops.FilterConfig(1e-6)), bops.direct_sensitivity(c, s), atol=1e-15)


def test_filter_weights_rows_sum_to_one():
    c = partial_design(polygon(40), np.arange(40) < 30)
    w = bops.filter_weights(c, bops.FilterConfig(0.2))
    np.testing.assert_allclose(w.sum(axis=1)[c.design], 1.0, rtol=1e-15)
    assert not w[~c.design].any() and not w[:, ~c.design].any()
    d = bops.arc_distances(c)
    assert not w[d > 0.6].any()


def test_filter_uniform_circle_is_radial_inward():
    c = polygon(36)
    theta = bops.filter_sensitivity(c, np.ones(36), bops.FilterConfig(0.3))
    radial = c.points / np.linalg.norm(c.points, axis=1, keepdims=True)
    mag = np.linalg.norm(theta, axis=1)
    np.testing.assert_allclose(mag, mag[0], rtol=1e-12)
    assert mag[0] <= 1.0
    np.testing.assert_allclose(theta / mag[:, None], -radial, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), sigma=st.floats(0.01, 1.0))
def test_filter_bounded_by_max_s(seed, sigma):
    c = polygon(25)
    s = np.random.default_rng(seed).normal(size=25)
    theta = bops.filter_sensitivity(c, s, bops.FilterConfig(sigma))
    assert np.linalg.norm(theta, axis=1).max() <= np.abs(s).max() + 1e-12


def test_filter_config_validation():
    with pytest.raises(ValueError):
        bops.FilterConfig(0.0)
    assert bops.FilterConfig(0.2).cutoff == pytest.approx(0.6)


def test_arc_distance_wraps_around():
    c = polygon(8)
    d = bops.arc_distances(c)
    assert d[0, 7] == pytest.approx(c.spacing[0])
    assert d[0, 4] == pytest.approx(c.length / 2)


def test_direct_sensitivity_examples():
    m = unit_square(2)
    c = boundary_loops(m)[0]
    np.testing.assert_array_equal(bops.direct_sensitivity(c, np.zeros(len(c))), 0.0)
    theta = bops.direct_sensitivity(c, np.ones(len(c)))
    top = np.flatnonzero((c.points == [0.5, 1.0]).all(axis=1))[0]
    corner = np.flatnonzero((c.points == [1.0, 1.0]).all(axis=1))[0]
    np.testing.assert_allclose(theta[top], [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(theta[corner], [-0.5, -0.5])


def test_all_operators_zero_off_design():
    c = partial_design(polygon(20), np.arange(20) >= 5)
    s = np.random.default_rng(3).normal(size=20)
    outs = [bops.direct_sensitivity(c, s), bops.filter_sensitivity(c, s), bops.solve_vlb(c, s), bops.solve_slb(c, s)]
    for out in outs:
        assert not np.asarray(out)[~c.design].any()
