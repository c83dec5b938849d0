from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantcons import fixtures
from quantcons.graph import (
    Digraph,
    GraphError,
    TransmissionPolicy,
    format_edges,
    is_strongly_connected,
    parse_edges,
    random_strongly_connected,
    strongly_connected_components,
    uniform_policy,
)


def test_fig1_structure():
    g = fixtures.fig1()
    assert g.n == 4
    # receiver/sender pairs m21, m31, m42, m13, m23, m34 in 0-based form
    assert g.edges == {(1, 0), (2, 0), (3, 1), (0, 2), (1, 2), (2, 3)}
    assert g.out_neighbors == ((1, 2), (3,), (0, 1), (2,))
    assert g.in_neighbors == ((2,), (0, 2), (0, 3), (1,))


def test_strong_connectivity_examples():
    assert is_strongly_connected(fixtures.fig1())
    assert is_strongly_connected(fixtures.fig2())
    assert len(fixtures.fig2().edges) == 13
    one_way = Digraph(2, frozenset({(1, 0)}))
    assert not is_strongly_connected(one_way)


def test_scc_split_graph():
    # two 2-cycles joined by a single arc 1 -> 2
    g = Digraph.from_arcs(4, [(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)])
    comps = sorted(strongly_connected_components(g))
    assert comps == [[0, 1], [2, 3]]
    assert not is_strongly_connected(g)


def test_long_path_does_not_recurse():
    n = 5000
    g = Digraph.from_arcs(n, [(i, (i + 1) % n) for i in range(n)])
    assert is_strongly_connected(g)


@pytest.mark.parametrize("bad", [
    lambda: Digraph(1, frozenset()),
    lambda: Digraph(3, frozenset({(1, 1)})),
    lambda: Digraph(3, frozenset({(0, 5)})),
])
def test_digraph_rejects_malformed(bad):
    with pytest.raises(GraphError):
        bad()


def test_uniform_policy_fig1_matches_printed_matrix():
    b = uniform_policy(fixtures.fig1()).matrix()
    t, h = Fraction(1, 3), Fraction(1, 2)
    expected = [
        [t, 0, t, 0],
        [t, h, t, 0],
        [t, 0, t, h],
        [0, h, 0, h],
    ]
    assert b == expected


def test_uniform_policy_small_cases():
    pol = uniform_policy(fixtures.two_cycle())
    assert pol.probs == ({0: Fraction(1, 2), 1: Fraction(1, 2)}, {0: Fraction(1, 2), 1: Fraction(1, 2)})
    sink = Digraph(2, frozenset({(1, 0)}))
    assert uniform_policy(sink).probs[1] == {1: Fraction(1)}


def test_policy_validation():
    g = fixtures.two_cycle()
    uniform_policy(g).validate(g)
    TransmissionPolicy(({0: 0.25, 1: 0.75}, {0: 0.5, 1: 0.5})).validate(g)
    with pytest.raises(GraphError):
        TransmissionPolicy(({0: Fraction(1, 3), 1: Fraction(1, 3)}, {0: 1, 1: 0})).validate(g)
    with pytest.raises(GraphError):
        TransmissionPolicy(({0: 0.5, 1: 0.5}, {1: 1.0})).validate(g)


def test_random_two_node_is_cycle():
    g = random_strongly_connected(2, 0.0, 3)
    assert g.edges == {(0, 1), (1, 0)}


def test_random_generation_deterministic():
    a = random_strongly_connected(20, 0.05, 11)
    b = random_strongly_connected(20, 0.05, 11)
    assert a.edges == b.edges
    assert is_strongly_connected(a)
    assert random_strongly_connected(20, 0.05, 12).edges != a.edges


def test_random_rejects_bad_params():
    with pytest.raises(GraphError):
        random_strongly_connected(1, 0.1, 0)
    with pytest.raises(GraphError):
        random_strongly_connected(5, 1.5, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.floats(0, 1), st.integers(0, 2**32))
def test_generated_graph_properties(n, p, seed):
    g = random_strongly_connected(n, p, seed)
    assert is_strongly_connected(g)
    assert all(j != i for j, i in g.edges)
    for i in range(n):
        for j in g.out_neighbors[i]:
            assert i in g.in_neighbors[j]
    for j in range(n):
        for i in g.in_neighbors[j]:
            assert j in g.out_neighbors[i]
    pol = uniform_policy(g)
    pol.validate(g)
    assert all(sum(col.values()) == 1 for col in pol.probs)


def test_edge_file_roundtrip():
    g = fixtures.fig2()
    assert parse_edges(format_edges(g)) == g
    text = "# comment\nn 3\n2 1   # v2 hears v1\n3 2\n1 3\n"
    assert parse_edges(text).edges == {(1, 0), (2, 1), (0, 2)}


@pytest.mark.parametrize("text", ["", "3\n", "n 3\n1 4\n", "n 3\n1\n", "n 3\nx 1\n", "n 3\n2 2\n"])
def test_edge_file_errors(text):
    with pytest.raises(GraphError):
        parse_edges(text)
