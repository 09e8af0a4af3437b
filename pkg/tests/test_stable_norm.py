import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import shortest_path

from coarselab.cover import BudgetExceeded
from coarselab.metric_graph import Edge, GraphError, MetricGraph, load_graph
from coarselab.stable_norm import (
    EllipseFitError,
    PeriodicGraph,
    displacement,
    ellipse_residual,
    fit_ellipse,
    honeycomb,
    primitive_directions,
    rect_grid,
    stable_norm,
    triangular_grid,
    unit_ball,
    unit_ball_csv,
    unit_grid,
)


def grid_window_distance(dx, dy, m, window=10):
    """Independent oracle: scipy shortest paths on a finite window of the grid."""
    side = 2 * window + 1
    idx = lambda x, y: (x + window) * side + (y + window)
    adj = lil_matrix((side * side, side * side))
    for x in range(-window, window + 1):
        for y in range(-window, window + 1):
            if x < window:
                adj[idx(x, y), idx(x + 1, y)] = dx
            if y < window:
                adj[idx(x, y), idx(x, y + 1)] = dy
    d = shortest_path(adj.tocsr(), directed=False, indices=[idx(0, 0)])
    return float(d[0, idx(*m)])


small = st.integers(-2, 2)
vectors = st.tuples(small, small).filter(lambda v: v != (0, 0))


def test_displacement_examples():
    assert displacement(unit_grid(), (0, 0)) == 0.0
    assert displacement(unit_grid(), (3, 4)) == 7.0 == grid_window_distance(1, 1, (3, 4))
    assert displacement(rect_grid(1, 2), (1, 1)) == 3.0 == grid_window_distance(1, 2, (1, 1))


@given(st.integers(-4, 4), st.integers(-4, 4))
@settings(max_examples=20)
def test_displacement_matches_window_oracle(p, q):
    assert displacement(rect_grid(1, 2), (p, q)) == grid_window_distance(1, 2, (p, q), window=5)


@pytest.mark.parametrize("v, expected", [((1, 0), 1.0), ((1, 1), 2.0), ((0, 0), 0.0), ((2, -3), 5.0)])
def test_unit_grid_norm_is_l1(v, expected):
    est = stable_norm(unit_grid(), v, n=8)
    assert est.value == expected and est.error_bound == 0.0


def test_weighted_grid_norm():
    for p, q in [(1, 0), (0, 1), (2, 1), (-1, 3)]:
        assert stable_norm(rect_grid(1, 2), (p, q), n=8).value == abs(p) + 2 * abs(q)


def test_triangular_grid_norm():
    # hexagonal norm: |p| + |q| when signs agree, max(|p|, |q|) otherwise
    assert stable_norm(triangular_grid(), (1, 1), n=8).value == 2.0
    assert stable_norm(triangular_grid(), (2, -1), n=8).value == 2.0


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        displacement(unit_grid(), (40, 40), node_budget=100)


def test_disconnected_cover_rejected():
    g = MetricGraph(("o",), (Edge("o", "o", 1.0, (2, 0)), Edge("o", "o", 1.0, (0, 1))))
    with pytest.raises(GraphError, match="span"):
        PeriodicGraph(g)
    with pytest.raises(GraphError, match="translation"):
        PeriodicGraph(MetricGraph(("o",), (Edge("o", "o", 1.0),)))


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        stable_norm(unit_grid(), (1, 0), n=0)


def test_example_graph_files(data_dir):
    pg = PeriodicGraph(load_graph(data_dir / "graphs" / "honeycomb.json"))
    assert stable_norm(pg, (1, 0), n=8) == stable_norm(honeycomb(), (1, 0), n=8)


@given(vectors)
@settings(max_examples=20)
def test_norm_symmetry_is_exact(v):
    pg = honeycomb()
    assert stable_norm(pg, v, n=4).value == stable_norm(pg, (-v[0], -v[1]), n=4).value


@given(vectors, st.sampled_from([2, 3]))
@settings(max_examples=15)
def test_homogeneity(v, k):
    pg = honeycomb()
    big = stable_norm(pg, (k * v[0], k * v[1]), n=2)
    small_est = stable_norm(pg, v, n=2 * k)
    assert abs(big.value - k * small_est.value) <= big.error_bound + k * small_est.error_bound + 1e-9


@given(vectors, vectors)
@settings(max_examples=20)
def test_triangle_inequality(u, v):
    pg = honeycomb()
    w = (u[0] + v[0], u[1] + v[1])
    nu, nv, nw = (stable_norm(pg, x, n=4) for x in (u, v, w))
    assert nw.value <= nu.value + nv.value + nu.error_bound + nv.error_bound + nw.error_bound + 1e-9


@pytest.mark.parametrize("v", [(1, 0), (1, 1), (2, 1)])
def test_estimates_decrease_along_doubling(v):
    # subadditivity: a(2m) <= 2 a(m)
    pg = honeycomb()
    values = [stable_norm(pg, v, n=n).value for n in (2, 4, 8, 16)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("v", [(1, 0), (1, 2)])
def test_defect_stays_bounded(v):
    """d(0, n v) - n |v| does not keep growing with n."""
    pg = honeycomb()
    limit = displacement(pg, (64 * v[0], 64 * v[1])) / 64
    gaps = [displacement(pg, (n * v[0], n * v[1])) - n * limit for n in range(1, 25)]
    assert min(gaps) >= -1e-9
    assert max(gaps[12:]) <= max(gaps[:12]) + 1e-9


def test_primitive_directions():
    dirs = primitive_directions(16)
    assert len(dirs) == 16 and len(set(dirs)) == 16
    assert all(math.gcd(p, q) == 1 for p, q in dirs)
    assert {(-p, -q) for p, q in dirs} == set(dirs)
    with pytest.raises(ValueError):
        primitive_directions(6)


def test_unit_ball_of_unit_grid_is_the_l1_square():
    samples = unit_ball(unit_grid(), directions=16, n=16)
    pts = np.array([s.point for s in samples])
    np.testing.assert_allclose(np.abs(pts).sum(axis=1), 1.0, atol=1e-12)
    for vertex in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
        assert np.abs(pts - vertex).max(axis=1).min() <= 0.05
    assert ellipse_residual(pts) > 0.1


def test_unit_ball_weighted_grid_is_elongated():
    samples = unit_ball(rect_grid(1, 2), directions=8, n=8)
    for s in samples:
        p, q = s.vector
        assert s.norm == abs(p) + 2 * abs(q)
    pts = np.array([s.point for s in samples])
    assert np.abs(pts[:, 0]).max() == 1.0 and np.abs(pts[:, 1]).max() == 0.5


def test_unit_ball_is_centrally_symmetric():
    samples = unit_ball(honeycomb(), directions=8, n=8)
    by_vec = {s.vector: s for s in samples}
    for (p, q), s in by_vec.items():
        t = by_vec[(-p, -q)]
        assert s.point == (-t.point[0], -t.point[1])


def test_unit_ball_workers_agree():
    assert unit_ball(honeycomb(), 8, 4, workers=2) == unit_ball(honeycomb(), 8, 4)


def test_unit_ball_csv():
    text = unit_ball_csv(unit_ball(unit_grid(), 8, 4))
    lines = text.splitlines()
    assert lines[0] == "vx,vy,norm,err" and len(lines) == 9
    assert lines[1] == "1,0,1.0,0.0"


def ellipse_points(a, b, k=24):
    t = np.linspace(0, 2 * np.pi, k, endpoint=False)
    return np.column_stack([a * np.cos(t), b * np.sin(t)])


def test_exact_ellipse_fits():
    assert ellipse_residual(ellipse_points(2, 1)) < 1e-9
    fit = fit_ellipse(ellipse_points(1, 1))
    assert fit.residual < 1e-9
    np.testing.assert_allclose(fit.form, np.eye(2), atol=1e-12)


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0, np.pi))
def test_rotated_ellipses_fit(a, b, theta):
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert ellipse_residual(ellipse_points(a, b) @ rot.T) < 1e-9


def test_degenerate_and_indefinite_samples_rejected():
    collinear = [(t, 0.0) for t in (-3, -2, -1, 1, 2, 3)] + [(0.0, 1.0), (0.0, -1.0)]
    with pytest.raises(EllipseFitError, match="degenerate"):
        fit_ellipse(collinear)
    t = np.linspace(-1, 1, 8)
    hyperbola = np.column_stack([np.cosh(t), np.sinh(t)])
    with pytest.raises(EllipseFitError, match="positive definite"):
        fit_ellipse(np.vstack([hyperbola, -hyperbola]))
    with pytest.raises(EllipseFitError, match="at least 6"):
        fit_ellipse([(1, 0), (0, 1)])
