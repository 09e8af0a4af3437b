import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coarselab.metric_graph import (
    Edge,
    GraphError,
    MetricGraph,
    NormalizedLengths,
    complete_bipartite,
    cycle,
    generators,
    k4,
    parse_graph,
    reverse,
    rose,
    scale_metric,
    spanning_tree,
)


def graph_text(vertices, edges, **extra):
    return json.dumps({"vertices": vertices, "edges": edges, **extra})


def test_k4_file_total_length():
    edges = [{"u": f"v{i}", "v": f"v{j}", "length": 1.0} for i in range(4) for j in range(i + 1, 4)]
    g = parse_graph(graph_text([f"v{i}" for i in range(4)], edges))
    assert g.total_length == 6.0
    assert g.base == "v0"
    assert g.n_half_edges == 12


def test_rose_file_degree_counts_loops_twice():
    text = graph_text(["o"], [{"u": "o", "v": "o", "length": 1}, {"u": "o", "v": "o", "length": 2}])
    g = parse_graph(text)
    assert g.max_degree == 4
    assert g.rank == 2


@pytest.mark.parametrize(
    "text, message, location",
    [
        (graph_text(["a", "b"], [{"u": "a", "v": "b", "length": 0}]), "nonpositive length", "edges[0]"),
        (graph_text(["a", "b"], [{"u": "a", "v": "b", "length": -1}]), "nonpositive length", "edges[0]"),
        (graph_text(["a", "b", "c"], [{"u": "a", "v": "b", "length": 1}]), "disconnected", None),
        (graph_text(["a"], [{"u": "a", "v": "z", "length": 1}]), "unknown vertex", "edges[0]"),
        (graph_text(["a"], [], base="q"), "unknown base", "base"),
        ('{"vertices": ["a"], "edges": [', "malformed JSON", "line 1"),
        (graph_text(["a"], [{"u": "a", "v": "a"}]), "missing field 'length'", "edges[0]"),
    ],
)
def test_parse_errors_carry_location(text, message, location):
    with pytest.raises(GraphError, match=message) as info:
        parse_graph(text)
    if location is not None:
        assert info.value.location.startswith(location)


def test_degree_below_three_is_accepted():
    assert min(cycle(3).degrees) == 2


def test_half_edges():
    g = k4()
    for h in range(g.n_half_edges):
        assert reverse(reverse(h)) == h
        assert g.source(h) == g.target(reverse(h))
        assert reverse(h) not in g.followers(h)
        assert len(g.followers(h)) == 2


@pytest.mark.parametrize(
    "g, alpha, expected",
    [
        (k4(), 1.0, [1.0] * 6),
        (k4(), 2.0, [2.0] * 6),
        (rose(1, 2), 0.5, [0.5, 1.0]),
    ],
)
def test_scale_metric(g, alpha, expected):
    scaled = scale_metric(g, alpha)
    assert list(scaled.lengths) == expected
    assert [(e.u, e.v) for e in scaled.edges] == [(e.u, e.v) for e in g.edges]


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_scale_metric_rejects_nonpositive(alpha):
    with pytest.raises(GraphError):
        scale_metric(k4(), alpha)


@pytest.mark.parametrize(
    "g, count",
    [(rose(1, 2), 2), (k4(), 3), (cycle(3), 1), (complete_bipartite(3, 3), 4)],
)
def test_generator_count(g, count):
    gens = generators(g)
    assert len(gens) == count == g.rank


def test_rose_generators_are_the_loops():
    assert generators(rose(1, 2)) == [(0,), (2,)]


def test_generators_are_based_closed_paths():
    g = complete_bipartite(3, 3)
    for loop in generators(g):
        assert g.source_index(loop[0]) == g.base_index
        assert g.target_index(loop[-1]) == g.base_index
        for a, b in zip(loop, loop[1:]):
            assert g.target_index(a) == g.source_index(b)
            assert b != reverse(a)


def test_spanning_tree_reaches_every_vertex():
    g = complete_bipartite(3, 3)
    parent = spanning_tree(g)
    assert set(parent) | {g.base_index} == set(range(g.n_vertices))


def test_normalized_lengths():
    nl = NormalizedLengths.normalize([1, 2, 3, 4])
    assert abs(math.fsum(nl.values) - 1) <= 1e-12
    uniform = NormalizedLengths.uniform(6).as_array()
    np.testing.assert_allclose(uniform, 1 / 6, rtol=1e-15)
    with pytest.raises(GraphError):
        NormalizedLengths((0.5, 0.6))
    with pytest.raises(GraphError):
        NormalizedLengths((1.0, 0.0))


# -- properties ------------------------------------------------------------


@st.composite
def connected_graphs(draw, max_vertices=6):
    n = draw(st.integers(1, max_vertices))
    vertices = [f"x{i}" for i in range(n)]
    lengths = st.floats(0.01, 100, allow_nan=False, allow_infinity=False)
    edges = []
    for i in range(1, n):
        j = draw(st.integers(0, i - 1))
        edges.append(Edge(vertices[j], vertices[i], draw(lengths)))
    for _ in range(draw(st.integers(0, 5))):
        a, b = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        edges.append(Edge(vertices[a], vertices[b], draw(lengths)))
    if not edges:
        edges.append(Edge(vertices[0], vertices[0], draw(lengths)))
    base = draw(st.sampled_from(vertices))
    return MetricGraph(tuple(vertices), tuple(edges), base)


@given(connected_graphs())
def test_round_trip(g):
    assert parse_graph(g.to_json()) == g


@given(connected_graphs())
def test_generator_count_is_rank(g):
    assert len(generators(g)) == g.n_edges - g.n_vertices + 1


@given(connected_graphs(), st.floats(0.01, 100))
def test_scale_round_trip(g, alpha):
    back = scale_metric(scale_metric(g, alpha), 1 / alpha)
    np.testing.assert_allclose(back.lengths, g.lengths, rtol=1e-12)


@given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=12))
def test_normalize_sums_to_one(raw):
    nl = NormalizedLengths.normalize(raw)
    assert abs(math.fsum(nl.values) - 1.0) <= 1e-12
    assert all(v > 0 for v in nl.values)
