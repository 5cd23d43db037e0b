import random

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from ecss.graph import EdgeSet
from ecss.tree import TreeError, TreeEdge, covers, lca, root_tree

from conftest import graph1, random_tree_graph, tree_of


def path4():
    g = graph1(4, [(1, 2, 1), (2, 3, 1), (3, 4, 1)])
    return root_tree(g, frozenset({0, 1, 2}), 0)


def binary7():
    g = graph1(7, [(1, 2, 1), (1, 3, 1), (2, 4, 1), (2, 5, 1), (3, 6, 1), (3, 7, 1)])
    return root_tree(g, frozenset(range(6)), 0)


def test_path_labels():
    t = path4()
    assert t.depth[3] == 3
    assert t.subtree_size[1] == 3
    assert t.subtree_size[0] == 4


def test_binary_tree_sizes():
    t = binary7()
    assert t.subtree_size[1] == t.subtree_size[2] == 3


def test_root_tree_accepts_edgeset():
    g = graph1(3, [(1, 2, 1), (2, 3, 1), (1, 3, 1)])
    t = root_tree(g, EdgeSet.of(g, {0, 1}), 0)
    assert t.parent[2] == 1


@pytest.mark.parametrize("ids", [frozenset({0}), frozenset({0, 1, 2})])
def test_root_tree_rejects_non_trees(ids):
    g = graph1(3, [(1, 2, 1), (2, 3, 1), (1, 3, 1)])
    with pytest.raises(TreeError):
        root_tree(g, ids, 0)


def _parent_chain(t, v):
    out = [v]
    while v != t.root:
        v = t.parent[v]
        out.append(v)
    return out


@pytest.mark.parametrize("seed", range(100))
def test_interval_ancestry_matches_parent_chain(seed):
    rng = random.Random(seed)
    t = tree_of(random_tree_graph(rng, rng.randint(2, 40)))
    for v in range(t.n):
        chain = set(_parent_chain(t, v))
        for u in range(t.n):
            assert t.is_ancestor(u, v) == (u in chain)


@given(st.integers(2, 60), st.integers(0, 10**6))
def test_label_invariants(n, seed):
    t = tree_of(random_tree_graph(random.Random(seed), n))
    assert t.subtree_size[t.root] == n and t.depth[t.root] == 0
    for v in range(n):
        assert t.subtree_size[v] == 1 + sum(t.subtree_size[c] for c in t.children[v])
        if v != t.root:
            assert t.depth[v] == t.depth[t.parent[v]] + 1
        for u in range(n):
            nested = t.euler_in[u] <= t.euler_in[v] and t.euler_out[v] <= t.euler_out[u]
            nested |= t.euler_in[v] <= t.euler_in[u] and t.euler_out[u] <= t.euler_out[v]
            disjoint = t.euler_out[u] < t.euler_in[v] or t.euler_out[v] < t.euler_in[u]
            assert nested or disjoint


def test_lca_examples():
    assert lca(path4(), 2, 3) == 2
    g = graph1(5, [(1, 2, 1), (1, 3, 1), (2, 4, 1), (2, 5, 1)])
    t = root_tree(g, frozenset(range(4)), 0)
    assert lca(t, 3, 4) == 1


@pytest.mark.parametrize("seed", range(30))
def test_lca_matches_path_intersection(seed):
    rng = random.Random(seed)
    t = tree_of(random_tree_graph(rng, rng.randint(2, 30)))
    for u in range(t.n):
        pu = _parent_chain(t, u)
        for v in range(t.n):
            common = set(pu) & set(_parent_chain(t, v))
            expected = max(common, key=lambda x: t.depth[x])
            assert lca(t, u, v) == expected


@given(st.integers(2, 50), st.integers(0, 10**6), st.data())
def test_lca_algebra(n, seed, data):
    t = tree_of(random_tree_graph(random.Random(seed), n))
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1))
    w = lca(t, u, v)
    assert w == lca(t, v, u)
    assert lca(t, u, u) == u
    assert t.depth[w] <= min(t.depth[u], t.depth[v])
    if t.is_ancestor(u, v):
        assert w == u


def test_lca_matches_networkx():
    rng = random.Random(3)
    g = random_tree_graph(rng, 40)
    t = tree_of(g)
    nxt = nx.DiGraph([(t.parent[v], v) for v in range(t.n) if v != t.root])
    pairs = [(rng.randrange(40), rng.randrange(40)) for _ in range(200)]
    ref = dict(nx.tree_all_pairs_lowest_common_ancestor(nxt, root=t.root, pairs=pairs))
    for p in pairs:
        assert lca(t, *p) == ref[p]


def test_covers_examples():
    t = path4()
    assert covers(t, t.edge(2), 0, 3)
    assert not covers(t, t.edge(2), 2, 3)
    assert covers(t, 3, 2, 3)


@pytest.mark.parametrize("seed", range(30))
def test_covers_matches_explicit_path(seed):
    rng = random.Random(seed)
    t = tree_of(random_tree_graph(rng, rng.randint(2, 25)))
    for dec in range(t.n):
        chain = _parent_chain(t, dec)
        for k, anc in enumerate(chain):
            on_path = set(chain[:k])  # child endpoints of edges between dec and anc
            hits = [c for c in range(t.n) if c != t.root and covers(t, c, anc, dec)]
            assert set(hits) == on_path
            assert len(hits) == t.depth[dec] - t.depth[anc]


def test_tree_edges_and_path_children():
    t = path4()
    assert [e.child for e in t.edges()] == [1, 2, 3]
    assert t.edge(2) == TreeEdge(2, 1)
    assert t.path_children(0, 3) == [3, 2, 1]
    assert t.ancestor_at_depth(3, 1) == 1
