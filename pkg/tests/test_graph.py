import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcr.errors import GraphError
from rcr.graph import (
    Graph,
    all_pairs_distances,
    bfs_distances,
    biconnected_components,
    build_grid,
    connected_components,
    cut_vertices,
    is_connected_induced,
    load_graph,
    parse_edge_list,
    reach_within,
    set_distance,
)


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], name=f"P{n}")


def bowtie():
    return Graph.from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)])


@st.composite
def connected_graphs(draw, max_n=9):
    n = draw(st.integers(1, max_n))
    # random spanning tree plus extra edges keeps the graph connected
    edges = {(draw(st.integers(0, v - 1)), v) for v in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return Graph.from_edges(n, sorted(edges))


def to_nx(g, s=None):
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges())
    return h if s is None else h.subgraph(s)


def test_grid_numbering():
    g = build_grid(3, 2)
    assert g.n == 6 and g.num_edges == 7
    assert g.adjacency[0] == (1, 3)
    assert g.adjacency[4] == (1, 3, 5)
    assert g.name == "grid:3x2"


def test_grid_1x1_has_no_edges():
    g = build_grid(1, 1)
    assert g.n == 1 and g.num_edges == 0


def test_parse_edge_list_roundtrip():
    text = "# triangle with tail\n4 4\n0 1\n1 2\n2 0\n2 3\n"
    g = parse_edge_list(text)
    assert g.edges() == [(0, 1), (0, 2), (1, 2), (2, 3)]


@pytest.mark.parametrize(
    "text, line",
    [
        ("3 2\n0 1\n1 1\n", 3),
        ("3 2\n0 1\n0 5\n", 3),
        ("3 3\n0 1\n1 2\n2 1\n", 4),
        ("3 2\n0 1\nx y\n", 3),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(GraphError) as err:
        parse_edge_list(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_parse_rejects_disconnected_and_bad_count():
    with pytest.raises(GraphError, match="disconnected"):
        parse_edge_list("4 2\n0 1\n2 3\n")
    with pytest.raises(GraphError, match="declares"):
        parse_edge_list("3 3\n0 1\n1 2\n")


def test_load_graph_file(tmp_path):
    f = tmp_path / "p3.txt"
    f.write_text("3 2\n0 1\n1 2\n")
    g = load_graph(str(f))
    assert g.n == 3 and g.name == str(f)
    assert load_graph("grid:2x3").n == 6
    with pytest.raises(GraphError):
        load_graph("grid:2by3")


def test_distances_on_path():
    dm = all_pairs_distances(path(5))
    assert dm[0].tolist() == [0, 1, 2, 3, 4]
    assert not dm.flags.writeable
    assert path(5).diameter == 4


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_distance_rows_match_bfs(g):
    dm = all_pairs_distances(g)
    for v in range(g.n):
        assert dm[v].tolist() == bfs_distances(g, v)


def test_set_distance():
    dm = all_pairs_distances(path(5))
    assert set_distance(dm, 0, {3, 4}) == 3
    assert set_distance(dm, 2, set()) == float("inf")


def test_connectivity_primitives():
    g = path(5)
    assert is_connected_induced(g, {1, 2, 3})
    assert not is_connected_induced(g, {0, 2})
    assert not is_connected_induced(g, set())
    assert reach_within(g, {0, 1, 3, 4}, 0) == {0, 1}
    with pytest.raises(ValueError):
        reach_within(g, {1, 2}, 0)
    assert connected_components(g, {0, 1, 3, 4}) == [frozenset({0, 1}), frozenset({3, 4})]


def test_cut_vertices_examples():
    assert cut_vertices(path(5), range(5)) == {1, 2, 3}
    assert cut_vertices(bowtie(), range(5)) == {2}
    assert sorted(map(sorted, biconnected_components(bowtie(), range(5)))) == [[0, 1, 2], [2, 3, 4]]
    assert cut_vertices(build_grid(3, 3), range(9)) == set()


def test_block_errors():
    with pytest.raises(ValueError):
        biconnected_components(path(3), {1})
    with pytest.raises(ValueError):
        cut_vertices(path(5), {0, 2})


@settings(max_examples=80, deadline=None)
@given(connected_graphs(), st.data())
def test_cuts_and_blocks_match_networkx(g, data):
    s = data.draw(st.sets(st.integers(0, g.n - 1), min_size=1))
    h = to_nx(g, s)
    if not nx.is_connected(h):
        with pytest.raises(ValueError):
            cut_vertices(g, s)
        return
    assert cut_vertices(g, s) == set(nx.articulation_points(h))
    if len(s) >= 2:
        ours = sorted(sorted(b) for b in biconnected_components(g, s))
        theirs = sorted(sorted(b) for b in nx.biconnected_components(h))
        assert ours == theirs


@settings(max_examples=80, deadline=None)
@given(connected_graphs(), st.data())
def test_cut_vertex_iff_removal_splits(g, data):
    s = data.draw(st.sets(st.integers(0, g.n - 1), min_size=1))
    if not is_connected_induced(g, s):
        return
    cuts = cut_vertices(g, s)
    for v in s:
        rest = s - {v}
        assert (v in cuts) == (len(connected_components(g, rest)) >= 2)


@settings(max_examples=60, deadline=None)
@given(connected_graphs(), st.data())
def test_blocks_share_only_cut_vertices(g, data):
    if g.n < 2:
        return
    s = data.draw(st.sets(st.integers(0, g.n - 1), min_size=2))
    if not is_connected_induced(g, s):
        return
    blocks = biconnected_components(g, s)
    cuts = cut_vertices(g, s)
    assert frozenset().union(*blocks) == s
    for i, a in enumerate(blocks):
        for b in blocks[i + 1 :]:
            shared = a & b
            assert len(shared) <= 1
            assert shared <= cuts
    for v in cuts:
        assert sum(v in b for b in blocks) >= 2


def test_graph_validation():
    with pytest.raises(GraphError):
        Graph(2, ((1,), ()))
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 0)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    assert np.array_equal(path(3).mask([0, 2]), [True, False, True])
