import io
from collections import deque
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subvec.errors import DomainError, ParseError
from subvec.graph import (Graph, SubgraphSet, ego_net, induced_subgraph, make_link_split,
                          parse_communities, parse_edge_list, parse_subgraph_set,
                          planted_partition)

from conftest import ids


def label_edges(g):
    return {frozenset((g.labels[u], g.labels[v])) for u, v in g.edges()}


def check_invariants(g):
    for u in range(g.n):
        nb = g.neighbors(u).tolist()
        assert nb == sorted(set(nb))
        assert u not in nb
        for v in nb:
            assert u in g.neighbors(v)
    assert g.m * 2 == g.degrees.sum()


def bfs_connected(n, edges):
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, q = {0}, deque([0])
    while q:
        for w in adj[q.popleft()]:
            if w not in seen:
                seen.add(w)
                q.append(w)
    return len(seen) == n


graphs = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=120)))


class TestParse:
    def test_duplicate_and_reversed_edges_collapse(self):
        g = parse_edge_list(["a b", "b c", "b a"])
        assert (g.n, g.m) == (3, 2)

    def test_self_loop_dropped_with_warning(self):
        g = parse_edge_list(["x x"])
        assert (g.n, g.m, g.self_loops_dropped) == (1, 0, 1)

    def test_comments_and_blank_lines(self):
        g = parse_edge_list(["# header", "% other", "", "1\t2", "2 3"])
        assert g.labels == ("1", "2", "3") and g.m == 2

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_edge_list(["a b", "a b c"])
        with pytest.raises(ParseError, match="line 1"):
            parse_edge_list(["lonely"])

    def test_toy_fixture(self, toy):
        assert toy.n == 11
        assert toy.m == 18
        check_invariants(toy)
        for clique in ("abce", "hijk"):
            for u, v in combinations(clique, 2):
                assert toy.has_edge(toy.id_of(u), toy.id_of(v))
        assert toy.degree(toy.id_of("d")) == toy.degree(toy.id_of("g")) == 2
        f = toy.id_of("f")
        assert set(toy.neighbors(f)) == set(ids(toy, "eh"))

    @settings(max_examples=60, deadline=None)
    @given(graphs)
    def test_roundtrip_and_invariants(self, case):
        n, pairs = case
        lines = [f"n{u} n{v}" for u, v in pairs] or ["n0 n0"]
        g = parse_edge_list(lines)
        check_invariants(g)
        assert sorted(g._index.values()) == list(range(g.n))
        buf = io.StringIO()
        g.write_edge_list(buf)
        g2 = parse_edge_list(buf.getvalue().splitlines())
        assert label_edges(g2) == label_edges(g)


class TestInduced:
    def test_toy_g1(self, toy):
        sg = induced_subgraph(toy, ids(toy, "abce"), 0)
        assert sg.n == 4 and sg.m == 6

    def test_whole_graph(self, toy):
        sg = induced_subgraph(toy, range(toy.n))
        assert {tuple(e) for e in sg.edges().tolist()} == {tuple(e) for e in toy.edges().tolist()}

    def test_single_node(self, toy):
        sg = induced_subgraph(toy, ids(toy, "a"))
        assert (sg.n, sg.m) == (1, 0)

    def test_errors(self, toy):
        with pytest.raises(DomainError):
            induced_subgraph(toy, [])
        with pytest.raises(DomainError):
            induced_subgraph(toy, [toy.n])

    @settings(max_examples=60, deadline=None)
    @given(graphs, st.data())
    def test_matches_brute_force_filter(self, case, data):
        n, pairs = case
        g = Graph.from_edges(pairs, n=n)
        nodes = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
        sg = induced_subgraph(g, nodes)
        expect = {(u, v) for u, v in g.edges().tolist() if u in nodes and v in nodes}
        assert {tuple(e) for e in sg.edges().tolist()} == expect
        assert set(sg.nodes.tolist()) == nodes


class TestEgo:
    def test_toy_center_e(self, toy):
        e = toy.id_of("e")
        sg = ego_net(toy, e, 1)
        assert set(toy.labels[v] for v in sg.nodes) == set("abcdef")

    def test_isolated_node(self):
        g = Graph.from_edges([(0, 1)], n=3)
        sg = ego_net(g, 2, 1)
        assert sg.nodes.tolist() == [2] and sg.m == 0

    def test_star(self):
        g = Graph.from_edges([(0, i) for i in range(1, 8)])
        assert ego_net(g, 0, 1).n == 8

    def test_two_hops(self, toy):
        sg = ego_net(toy, toy.id_of("a"), 2)
        assert set(toy.labels[v] for v in sg.nodes) == set("abcedf")

    def test_exhaustive_one_hop(self):
        g, _ = planted_partition(4, 50, 0.1, 0.01, seed=3)
        for v in range(g.n):
            assert set(ego_net(g, v, 1).nodes.tolist()) == {v} | set(g.neighbors(v).tolist())

    def test_invalid(self, toy):
        with pytest.raises(DomainError):
            ego_net(toy, 99, 1)
        with pytest.raises(DomainError):
            ego_net(toy, 0, 3)


class TestFiles:
    def test_subgraph_set(self, toy_sets):
        assert toy_sets.names == ["g1", "g2", "g3"]
        assert [sg.sid for sg in toy_sets] == [0, 1, 2]
        assert [sg.m for sg in toy_sets] == [6, 5, 2]

    def test_subgraph_set_errors(self, toy):
        with pytest.raises(ParseError, match="line 2"):
            parse_subgraph_set(["s1 a b", "s2 zz"], toy)
        with pytest.raises(ParseError):
            parse_subgraph_set(["s1 a", "s1 b"], toy)

    def test_subgraph_set_roundtrip(self, toy_sets, toy):
        buf = io.StringIO()
        toy_sets.write(buf)
        again = parse_subgraph_set(buf.getvalue().splitlines(), toy)
        assert [s.nodes.tolist() for s in again] == [s.nodes.tolist() for s in toy_sets]

    def test_sids_must_be_contiguous(self, toy):
        sg = induced_subgraph(toy, [0], sid=3)
        with pytest.raises(DomainError):
            SubgraphSet([sg], toy)

    def test_communities(self, toy):
        truth = parse_communities(["a left", "h right"], toy)
        assert truth == {toy.id_of("a"): "left", toy.id_of("h"): "right"}
        with pytest.raises(ParseError, match="line 1"):
            parse_communities(["a"], toy)


class TestLinkSplit:
    def test_path_graph_shortfall(self):
        g = parse_edge_list(["a b", "b c"])
        sp = make_link_split(g, 30, seed=0)
        assert not sp.hidden_edges and sp.shortfall

    def test_cycle(self):
        g = Graph.from_edges([(i, (i + 1) % 10) for i in range(10)])
        sp = make_link_split(g, 10, seed=4)
        assert len(sp.hidden_edges) == 1 and not sp.shortfall
        assert sp.train_graph.is_connected()

    def _random_connected(self, seed):
        rng = np.random.default_rng(seed)
        n = 40
        edges = {(int(rng.integers(i)), i) for i in range(1, n)}  # spanning tree
        while len(edges) < 100:
            u, v = sorted(rng.choice(n, 2, replace=False).tolist())
            edges.add((u, v))
        return Graph.from_edges(sorted(edges), n=n)

    def test_determinism(self):
        g = self._random_connected(0)
        assert g.m == 100
        a = make_link_split(g, 20, seed=11)
        b = make_link_split(g, 20, seed=11)
        assert len(a.hidden_edges) == 20 and a.hidden_edges == b.hidden_edges

    def test_partition_of_edges(self):
        g = self._random_connected(1)
        sp = make_link_split(g, 20, seed=2)
        train = {tuple(e) for e in sp.train_graph.edges().tolist()}
        assert not train & sp.hidden_edges
        assert train | sp.hidden_edges == {tuple(e) for e in g.edges().tolist()}

    def test_connected_across_seeds(self):
        g = self._random_connected(2)
        for seed in range(50):
            sp = make_link_split(g, 30, seed)
            assert bfs_connected(g.n, sp.train_graph.edges().tolist())

    def test_preconditions(self):
        g = Graph.from_edges([(0, 1)], n=3)
        with pytest.raises(DomainError):
            make_link_split(g, 10, 0)
        with pytest.raises(DomainError):
            make_link_split(Graph.from_edges([(0, 1)]), 100, 0)
