import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus
from coread.conetwork import (
    CoGraph, connected_in_both, divergence_ranking, graph_rows, induce_cograph, js_divergence,
    neighbor_distribution, read_graph, top_neighbors, top_quartile_filter,
)
from coread.errors import ConfigError, DataError, DegenerateInputError, UnknownIdError
from coread.report import GRAPH, GRAPH_SORT, emit_table
from oracles import cograph_brute, jsd_direct


def test_single_reader_edge():
    g = induce_cograph(make_corpus([("r1", "A", "borrow"), ("r1", "B", "borrow")]), ["A", "B"])
    assert g.edges() == [("A", "B", 1)]


def test_repeat_borrows_count_once():
    c = make_corpus([("r1", "A", "borrow"), ("r1", "A", "borrow"), ("r1", "B", "borrow")])
    assert induce_cograph(c, ["A", "B"]).weight("A", "B") == 1


def test_three_reader_example():
    c = make_corpus([("r1", "A", "borrow"), ("r1", "B", "borrow"), ("r2", "A", "borrow"),
                     ("r2", "B", "borrow"), ("r3", "A", "borrow"), ("r3", "C", "borrow")])
    g = induce_cograph(c, ["A", "B", "C"])
    assert g.edges() == [("A", "B", 2), ("A", "C", 1)]
    assert g.weight("B", "C") == 0


def test_kind_filter_and_id_map():
    c = make_corpus([("u", "b1", "review"), ("u", "b2", "review"), ("u", "b3", "rating")])
    g = induce_cograph(c, ["a1", "a2", "a3"], kinds=["review"], id_map={"b1": "a1", "b2": "a2", "b3": "a3"})
    assert g.edges() == [("a1", "a2", 1)]
    assert g.degree("a3") == 0


def test_universe_must_exist():
    with pytest.raises(UnknownIdError):
        induce_cograph(make_corpus([("r", "A", "borrow")]), ["A", "Z"])


def test_graph_invariants():
    with pytest.raises(DataError):
        CoGraph.from_edges([], [("A", "A", 1)])
    with pytest.raises(DataError):
        CoGraph.from_edges([], [("A", "B", 0)])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=50))
def test_cograph_matches_brute_force(pairs):
    c = make_corpus([(f"r{r}", f"i{i}", "borrow") for r, i in pairs], items=[f"i{i}" for i in range(10)])
    g = induce_cograph(c, c.items)
    reader_items = {}
    for r, i in pairs:
        reader_items.setdefault(f"r{r}", set()).add(f"i{i}")
    brute = cograph_brute(reader_items, c.items)
    assert {(u, v): w for u, v, w in g.edges()} == brute
    for u in g.nodes:
        for v in g.nodes:
            assert g.weight(u, v) == g.weight(v, u)
    incidence = sum(math.comb(len(s), 2) for s in reader_items.values())
    assert sum(w for _, _, w in g.edges()) == incidence


def test_connected_in_both():
    ga = CoGraph.from_edges(["A", "B", "C", "D", "E"], [("A", "B", 1), ("C", "D", 2), ("A", "E", 1)])
    gb = CoGraph.from_edges(["A", "B", "C", "D", "E"], [("A", "C", 1), ("B", "E", 3)])
    # degrees in a: A2 B1 C1 D1 E1; in b: A1 B1 C1 D0 E1
    assert connected_in_both(ga, gb) == {"A", "B", "C", "E"}
    gb2 = CoGraph.from_edges(["A", "B", "C", "D", "E"], [("A", "C", 1), ("B", "D", 1)])
    assert connected_in_both(ga, gb2) == {"A", "B", "C", "D"}
    gb3 = CoGraph.from_edges(["A", "B", "C", "D", "E"], [("A", "B", 1), ("B", "C", 1)])
    assert connected_in_both(ga, gb3) == {"A", "B", "C"}


def test_top_quartile_inclusive():
    items = ["x", "y", "z"]
    ca = {"x": 4, "y": 3, "z": 5}
    cb = {"x": 2600, "y": 10 ** 6, "z": 2599}
    assert top_quartile_filter(items, ca, cb) == {"x"}
    assert top_quartile_filter(items, ca, cb, 0, 0) == set(items)
    with pytest.raises(ConfigError):
        top_quartile_filter(items, ca, cb, -1, 0)


def test_neighbor_distribution():
    g = CoGraph.from_edges([], [("A", "B", 3), ("A", "C", 1), ("B", "C", 7)])
    assert neighbor_distribution(g, "A", ["A", "B", "C"]).tolist() == [0, 0.75, 0.25]
    h = CoGraph.from_edges(["Z"], [("A", "B", 2)])
    assert neighbor_distribution(h, "A", ["A", "B", "Z"]).tolist() == [0, 1, 0]
    with pytest.raises(DegenerateInputError):
        neighbor_distribution(h, "Z", ["A", "B", "Z"])


def test_jsd_examples():
    assert js_divergence([0.5, 0.5, 0], [0.5, 0.5, 0]) == 0
    assert js_divergence([1, 0], [0, 1], smoothing=0) == pytest.approx(1.0, abs=1e-15)
    p, q = [0.75, 0.25, 0], [0, 0.25, 0.75]
    assert js_divergence(p, q, 0.01) == pytest.approx(jsd_direct(p, q, 0.01), abs=1e-12)
    with pytest.raises(ConfigError):
        js_divergence(p, q, -0.1)


def _grid_distributions():
    steps = [0, 0.25, 0.5, 0.75, 1]
    return [d for d in itertools.product(steps, repeat=3) if abs(sum(d) - 1) < 1e-12]


@pytest.mark.parametrize("smoothing", [0.0, 0.01, 0.5])
def test_jsd_grid_vs_direct_summation(smoothing):
    dists = _grid_distributions()
    assert len(dists) == 15
    for p, q in itertools.product(dists, repeat=2):
        assert abs(js_divergence(p, q, smoothing) - jsd_direct(p, q, smoothing)) <= 1e-12


vectors = st.lists(st.floats(0, 10), min_size=4, max_size=4).filter(lambda v: sum(v) > 0)


@settings(max_examples=300)
@given(vectors, vectors, vectors, st.floats(0, 1))
def test_jsd_metric_properties(p, q, r, s):
    d = js_divergence(p, q, s)
    assert 0 <= d <= 1
    assert d == pytest.approx(js_divergence(q, p, s), abs=1e-12)
    assert js_divergence(p, p, s) == pytest.approx(0, abs=1e-12)
    pq, qr, pr = (math.sqrt(max(0.0, js_divergence(x, y, s))) for x, y in ((p, q), (q, r), (p, r)))
    assert pr <= pq + qr + 1e-9


def test_smoothing_contracts_to_zero():
    p, q = [0.6, 0.4, 0, 0], [0, 0.1, 0.2, 0.7]
    values = [js_divergence(p, q, s) for s in (0, 0.01, 0.1, 1, 10, 1000)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-5


def six_node_pair():
    """Item A keeps the same neighbors in both graphs; item B swaps them."""
    ga = CoGraph.from_edges([], [("A", "C", 4), ("A", "D", 1), ("B", "E", 4), ("B", "F", 1), ("C", "D", 1)])
    gb = CoGraph.from_edges([], [("A", "C", 4), ("A", "D", 1), ("B", "E", 1), ("B", "F", 4), ("E", "F", 2)])
    return ga, gb


def test_divergence_ordering_six_nodes():
    ga, gb = six_node_pair()
    rows = divergence_ranking(["A", "B"], ga, gb)
    assert [r.item for r in rows] == ["A", "B"]
    universe = sorted(set(ga.nodes) | set(gb.nodes))
    for r in rows:
        p = neighbor_distribution(ga, r.item, universe)
        q = neighbor_distribution(gb, r.item, universe)
        assert r.divergence == pytest.approx(jsd_direct(p, q, 0.01), abs=1e-12)
        assert (r.degree_a, r.degree_b) == (len(ga.adj[r.item]), len(gb.adj[r.item]))


def test_divergence_ties_by_id():
    g = CoGraph.from_edges([], [("X", "Z", 1), ("Y", "Z", 1)])
    rows = divergence_ranking(["Y", "X"], g, g)
    assert [(r.item, r.divergence) for r in rows] == [("X", 0.0), ("Y", 0.0)]


def test_top_neighbors():
    g = CoGraph.from_edges([], [("A", "B", 5), ("A", "C", 2), ("A", "D", 2)])
    assert top_neighbors(g, "A", 2) == [("B", 5), ("C", 2)]
    assert top_neighbors(g, "A", 10) == [("B", 5), ("C", 2), ("D", 2)]
    with pytest.raises(UnknownIdError):
        top_neighbors(g, "Q", 1)
    ga, _ = six_node_pair()
    for node in ga.nodes:
        brute = sorted(((v, ga.weight(node, v)) for v in ga.nodes if ga.weight(node, v)), key=lambda t: (-t[1], t[0]))
        assert top_neighbors(ga, node, 99) == brute


def test_graph_csv_round_trip_keeps_isolated(tmp_path):
    g = CoGraph.from_edges(["lonely"], [("A", "B", 3), ("B", "C", 1)])
    emit_table(graph_rows(g), GRAPH, GRAPH_SORT, tmp_path / "g.csv")
    back = read_graph(tmp_path / "g.csv")
    assert back.nodes == g.nodes
    assert back.edges() == g.edges()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_neighbor_vectors_normalized(seed):
    rng = random.Random(seed)
    edges = {}
    for _ in range(15):
        u, v = rng.sample("ABCDEFG", 2)
        edges[tuple(sorted((u, v)))] = rng.randint(1, 9)
    g = CoGraph.from_edges([], [(u, v, w) for (u, v), w in edges.items()])
    for n in g.nodes:
        vec = neighbor_distribution(g, n, g.nodes)
        assert abs(vec.sum() - 1) <= 1e-9
        assert vec[g.nodes.index(n)] == 0
        assert (np.asarray(vec) >= 0).all()
