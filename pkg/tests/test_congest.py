import json

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from ecss.aggregates import MIN, SUM, XOR, bounded_union
from ecss.congest import (MessageBudgetError, NotNeighbourError, RoundCapError, RoundLedger,
                          Runtime, bfs_tree, boruvka_mst, broadcast_and_aggregate, flood,
                          log2_ceil, log_star, message_bits, run_tier0, sqrt_ceil)
from ecss.graph import generate, mst_kruskal

from conftest import graph1


def test_flood_on_c4_takes_two_rounds():
    rt = Runtime(generate("cycle", {"n": 4}, 0))
    heard = flood(rt, 0)
    assert rt.ledger.tier0_rounds == 2
    assert heard == {0: 0, 1: 1, 3: 1, 2: 2}


def test_bfs_grid_matches_sequential_bfs():
    g = generate("grid", {"rows": 5, "cols": 5}, 0)
    rt = Runtime(g)
    t = bfs_tree(rt, 0)
    ref = nx.single_source_shortest_path_length(nx.Graph([(e.u, e.v) for e in g.edges]), 0)
    assert [t.depth[v] for v in range(g.n)] == [ref[v] for v in range(g.n)]


def test_bfs_star_and_cycle():
    star = graph1(5, [(1, k, 1) for k in range(2, 6)])
    rt = Runtime(star)
    t = bfs_tree(rt, 0)
    assert all(t.depth[v] == 1 for v in range(1, 5))
    assert rt.ledger.tier0_rounds == 1
    c4 = Runtime(generate("cycle", {"n": 4}, 0))
    assert bfs_tree(c4, 0).depth == [0, 1, 2, 1]


def test_bfs_parent_tie_break_is_min_id():
    c4 = Runtime(generate("cycle", {"n": 4}, 0))
    assert bfs_tree(c4, 0).parent[2] == 1


@pytest.mark.parametrize("seed", range(20))
def test_bfs_random_graphs(seed):
    g = generate("random2ec", {"n": 30, "extra": 15}, seed)
    t = bfs_tree(Runtime(g), 0)
    ref = nx.single_source_shortest_path_length(nx.Graph([(e.u, e.v) for e in g.edges]), 0)
    assert all(t.depth[v] == ref[v] for v in range(g.n))


def test_oversized_message_is_rejected():
    g = generate("cycle", {"n": 4}, 0)
    rt = Runtime(g)
    budget = rt.message_budget_bits
    assert budget == 32 * log2_ceil(4)

    def handler(v, r, inbox):
        if v == 2 and r == 0:
            return {1: (1 << budget)}, True  # budget + 1 bits
        return {}, True

    with pytest.raises(MessageBudgetError) as info:
        run_tier0(rt, handler)
    assert info.value.vertex == 2 and info.value.round_no == 1


def test_message_at_budget_is_accepted():
    rt = Runtime(generate("cycle", {"n": 4}, 0))

    def handler(v, r, inbox):
        if v == 0 and r == 0:
            return {1: (1 << rt.message_budget_bits) - 1}, True
        return {}, True

    assert run_tier0(rt, handler).rounds == 1


def test_non_neighbour_and_round_cap():
    rt = Runtime(generate("cycle", {"n": 4}, 0), round_cap=5)
    with pytest.raises(NotNeighbourError):
        run_tier0(rt, lambda v, r, inbox: ({2: 1} if v == 0 else {}, True))

    def chatter(v, r, inbox):
        return {(v + 1) % 4: 1}, False

    with pytest.raises(RoundCapError):
        run_tier0(rt, chatter)


def test_tier0_one_message_per_directed_edge_per_round():
    rt = Runtime(generate("grid", {"rows": 3, "cols": 3}, 0))
    seen = []

    def handler(v, r, inbox):
        seen.append((r, v, tuple(sorted(inbox))))
        if r < 3:
            return {w: r for w in rt._nbrs[v]}, r >= 2
        return {}, True

    run_tier0(rt, handler)
    for r, v, senders in seen:
        assert len(senders) == len(set(senders))


def test_broadcast_min_of_ids():
    g = generate("random2ec", {"n": 20, "extra": 10}, 3)
    rt = Runtime(g)
    assert broadcast_and_aggregate(rt, [[v + 7] for v in range(g.n)], MIN) == [7]


def test_broadcast_sum_of_zeros_and_xor():
    g = generate("grid", {"rows": 3, "cols": 4}, 0)
    assert broadcast_and_aggregate(Runtime(g), [[0, 0] for _ in range(g.n)], SUM) == [0, 0]
    vals = [[v * 37 % 11] for v in range(g.n)]
    ref = 0
    for (x,) in vals:
        ref ^= x
    assert broadcast_and_aggregate(Runtime(g), vals, XOR) == [ref]


def test_broadcast_pipelined_rounds_bound():
    g = generate("grid", {"rows": 8, "cols": 8}, 0)
    rt = Runtime(g)
    k = sqrt_ceil(g.n)
    bfs_tree(rt, 0)
    before = rt.ledger.tier0_rounds
    res = broadcast_and_aggregate(rt, [[1] * k for _ in range(g.n)], SUM)
    assert res == [g.n] * k
    used = rt.ledger.tier0_rounds - before
    assert used <= 2 * (rt.diameter + k) + 2


def test_charge_and_totals():
    rt = Runtime(generate("cycle", {"n": 4}, 0))
    rt.charge("segment-info", rt.base_cost())
    assert len(rt.ledger.entries) == 1
    assert rt.base_cost() == 2 + 2
    rt2 = Runtime(generate("cycle", {"n": 5}, 0))
    rt2.charge("a", 5)
    rt2.charge("b", 7)
    flood(rt2, 0)
    # the two far vertices of C5 hear in round 2 and then exchange one more message
    assert rt2.ledger.tier0_rounds == 3
    assert rt2.ledger.total_rounds == 15
    with pytest.raises(ValueError):
        rt.charge("bad", -1)


def test_ledger_round_trips_through_json():
    rt = Runtime(generate("grid", {"rows": 3, "cols": 3}, 0))
    bfs_tree(rt, 0)
    rt.charge("x", 9)
    text = json.dumps(rt.ledger.to_json())
    again = RoundLedger.from_json(json.loads(text))
    assert again == rt.ledger


def test_tier0_deterministic_ledgers():
    g = generate("random2ec", {"n": 25, "extra": 12}, 9)
    a, b = Runtime(g), Runtime(g)
    for rt in (a, b):
        bfs_tree(rt, 0)
        broadcast_and_aggregate(rt, [[v] for v in range(g.n)], SUM)
    assert a.ledger == b.ledger


@pytest.mark.parametrize("seed", range(20))
def test_boruvka_equals_kruskal(seed):
    g = generate("random2ec", {"n": 30, "extra": 30, "wmax": 4}, seed)
    rt = Runtime(g)
    mst, phases = boruvka_mst(rt)
    assert mst.member_ids == mst_kruskal(g).member_ids
    assert phases <= log2_ceil(g.n)
    assert rt.ledger.by_primitive()["mst"] == rt.diameter + sqrt_ceil(g.n) * log_star(g.n)


@given(st.integers(1, 2**20))
def test_helpers(n):
    assert 2 ** log2_ceil(n) >= n
    assert sqrt_ceil(n) ** 2 >= n > (sqrt_ceil(n) - 1) ** 2
    assert log_star(n) >= 1


def test_message_bits_and_bounded_union():
    assert message_bits((3, True, None)) == 3
    agg = bounded_union(2)
    assert agg.op(frozenset({1}), frozenset({2})) == frozenset({1, 2})
    with pytest.raises(OverflowError):
        agg.op(frozenset({1, 2}), frozenset({3}))
