"""Round-synchronous CONGEST simulator with a two-tier round ledger.

Tier 0 primitives exchange real messages through `run_tier0`; tier 1 primitives are
computed by the orchestrator and charged an analytic round count through `charge`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .aggregates import Aggregate
from .graph import EdgeSet, WeightedGraph, hop_diameter
from .tree import LabeledTree, root_tree

DEFAULT_ROUND_CAP = 10**6


class CongestError(RuntimeError):
    pass


class MessageBudgetError(CongestError):
    def __init__(self, vertex: int, round_no: int, bits: int, budget: int):
        super().__init__(
            f"vertex {vertex} sent a {bits}-bit message in round {round_no} (budget {budget})"
        )
        self.vertex = vertex
        self.round_no = round_no


class RoundCapError(CongestError):
    pass


class NotNeighbourError(CongestError):
    pass


def log2_ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def sqrt_ceil(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 0 else 0


def log_star(n: int) -> int:
    k, x = 0, float(n)
    while x > 1:
        x = math.log2(x)
        k += 1
    return max(k, 1)


def message_bits(msg: Any) -> int:
    """Bit size of a message built from ints, bools, Fractions, None and tuples."""
    if msg is None:
        return 0
    if isinstance(msg, bool):
        return 1
    if isinstance(msg, int):
        return max(1, abs(msg).bit_length() + (1 if msg < 0 else 0))
    if isinstance(msg, Fraction):
        return message_bits(msg.numerator) + message_bits(msg.denominator)
    if isinstance(msg, (tuple, list, frozenset)):
        return sum(message_bits(x) for x in msg)
    raise TypeError(f"cannot size message of type {type(msg).__name__}")


@dataclass
class LedgerEntry:
    primitive: str
    tier: int
    rounds: int
    messages: int = 0

    def to_json(self) -> list:
        return [self.primitive, self.tier, self.rounds, self.messages]

    @classmethod
    def from_json(cls, row: list) -> "LedgerEntry":
        return cls(str(row[0]), int(row[1]), int(row[2]), int(row[3]))


@dataclass
class RoundLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def add(self, primitive: str, tier: int, rounds: int, messages: int = 0) -> None:
        if rounds < 0:
            raise ValueError("rounds must be nonnegative")
        self.entries.append(LedgerEntry(primitive, tier, rounds, messages))

    @property
    def total_rounds(self) -> int:
        return sum(e.rounds for e in self.entries)

    @property
    def tier0_rounds(self) -> int:
        return sum(e.rounds for e in self.entries if e.tier == 0)

    @property
    def messages(self) -> int:
        return sum(e.messages for e in self.entries)

    def by_primitive(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.primitive] = out.get(e.primitive, 0) + e.rounds
        return out

    def to_json(self) -> list:
        return [e.to_json() for e in self.entries]

    @classmethod
    def from_json(cls, rows: list) -> "RoundLedger":
        return cls([LedgerEntry.from_json(r) for r in rows])


class Runtime:
    def __init__(self, graph: WeightedGraph, message_budget_bits: int | None = None,
                 round_cap: int = DEFAULT_ROUND_CAP):
        self.graph = graph
        self.n = graph.n
        self.round_counter = 0
        self.message_budget_bits = message_budget_bits or 32 * log2_ceil(graph.n)
        self.round_cap = round_cap
        self.ledger = RoundLedger()
        self._diameter: int | None = None
        self._bfs: LabeledTree | None = None
        self._nbrs = [frozenset(x for x, _ in graph.adj[v]) for v in range(graph.n)]

    @property
    def diameter(self) -> int:
        if self._diameter is None:
            self._diameter = hop_diameter(self.graph)
        return self._diameter

    def base_cost(self) -> int:
        """O(D + sqrt n) instantiated as D + ceil(sqrt n)."""
        return self.diameter + sqrt_ceil(self.n)

    def charge(self, primitive_name: str, rounds: int, tier: int = 1) -> None:
        self.ledger.add(primitive_name, tier, rounds)
        self.round_counter += rounds


Handler = Callable[[int, int, dict], tuple[dict, bool]]


@dataclass
class Tier0Report:
    rounds: int
    messages: int
    halted: bool


def run_tier0(rt: Runtime, program: Handler, name: str = "tier0") -> Tier0Report:
    """Run lock-step rounds until every vertex halts and no message is in flight.

    `program(v, round, inbox)` returns `(outbox, halted)` where outbox maps a neighbour
    to one message. A round is counted only when at least one message is sent.
    """
    n = rt.n
    inbox: list[dict] = [{} for _ in range(n)]
    halted = [False] * n
    rounds = 0
    messages = 0
    step = 0
    while True:
        if step > rt.round_cap:
            raise RoundCapError(f"{name}: no termination within {rt.round_cap} rounds")
        outgoing: list[dict] = [{} for _ in range(n)]
        sent = 0
        for v in range(n):
            if halted[v] and not inbox[v]:
                continue
            out, done = program(v, rounds, inbox[v])
            halted[v] = bool(done)
            for w, msg in (out or {}).items():
                if w not in rt._nbrs[v]:
                    raise NotNeighbourError(f"{name}: vertex {v} sent to non-neighbour {w}")
                bits = message_bits(msg)
                if bits > rt.message_budget_bits:
                    raise MessageBudgetError(v, rounds + 1, bits, rt.message_budget_bits)
                outgoing[w][v] = msg
                sent += 1
        step += 1
        if sent == 0:
            if all(halted):
                break
            inbox = [{} for _ in range(n)]
            continue
        rounds += 1
        messages += sent
        inbox = outgoing
    rt.ledger.add(name, 0, rounds, messages)
    rt.round_counter += rounds
    return Tier0Report(rounds, messages, all(halted))


def flood(rt: Runtime, source: int) -> dict[int, int]:
    """Flood a token from `source`; returns the round in which each vertex first heard it."""
    heard = {source: 0}

    def handler(v, r, inbox):
        if v == source and r == 0:
            return {w: 1 for w in rt._nbrs[v]}, True
        if inbox and v not in heard:
            heard[v] = r
            return {w: 1 for w in rt._nbrs[v] if w not in inbox}, True
        return {}, True

    run_tier0(rt, handler, "flood")
    return heard


def bfs_tree(rt: Runtime, root: int = 0) -> LabeledTree:
    g = rt.graph
    parent = {root: root}
    edge_between: dict[tuple[int, int], int] = {}
    for e in g.edges:
        key = (min(e.u, e.v), max(e.u, e.v))
        if key not in edge_between:
            edge_between[key] = e.id

    def handler(v, r, inbox):
        if v == root and r == 0:
            return {w: v for w in rt._nbrs[v]}, True
        if inbox and v not in parent:
            parent[v] = min(inbox)
            return {w: v for w in rt._nbrs[v] if w not in inbox}, True
        return {}, True

    report = run_tier0(rt, handler, "bfs")
    if len(parent) != g.n:
        raise CongestError("graph is disconnected; BFS did not reach every vertex")
    ids = [edge_between[(min(v, p), max(v, p))] for v, p in parent.items() if v != root]
    tree = root_tree(g, frozenset(ids), root)
    _ = report
    if root == 0:
        rt._bfs = tree
    return tree


def broadcast_and_aggregate(rt: Runtime, values: list[list[Any]], combine: Aggregate,
                            tree: LabeledTree | None = None) -> list[Any]:
    """Pipelined convergecast of k items over a BFS tree, then pipelined broadcast.

    `values[v]` holds vertex v's k inputs. Returns the k combined results, which every
    vertex holds at termination (checked internally).
    """
    if tree is None:
        tree = rt._bfs or bfs_tree(rt, 0)
    n = rt.n
    k = len(values[0]) if values else 0
    if k == 0:
        return []
    nchild = [len(tree.children[v]) for v in range(n)]
    partial = [list(values[v]) for v in range(n)]
    got = [[0] * k for _ in range(n)]
    next_up = [0] * n
    result: list[list[Any]] = [[None] * k for _ in range(n)]
    have = [0] * n
    down_queue: list[list[int]] = [[] for _ in range(n)]
    root = tree.root

    def handler(v, r, inbox):
        out: dict[int, Any] = {}
        for sender, (direction, j, val) in inbox.items():
            if direction == 0:
                partial[v][j] = combine.op(partial[v][j], val)
                got[v][j] += 1
            else:
                result[v][j] = val
                have[v] += 1
                down_queue[v].append(j)
        if v == root:
            while next_up[v] < k and got[v][next_up[v]] == nchild[v]:
                j = next_up[v]
                result[v][j] = partial[v][j]
                have[v] += 1
                down_queue[v].append(j)
                next_up[v] += 1
        elif next_up[v] < k and got[v][next_up[v]] == nchild[v]:
            j = next_up[v]
            out[tree.parent[v]] = (0, j, partial[v][j])
            next_up[v] += 1
        if down_queue[v] and tree.children[v]:
            j = down_queue[v].pop(0)
            for c in tree.children[v]:
                out[c] = (1, j, result[v][j])
        elif down_queue[v]:
            down_queue[v].clear()
        done = have[v] == k and not down_queue[v] and (v == root or next_up[v] == k)
        return out, done

    run_tier0(rt, handler, "broadcast-aggregate")
    for v in range(n):
        if have[v] != k:
            raise CongestError(f"vertex {v} did not receive all aggregate results")
    return result[root]


def boruvka_mst(rt: Runtime) -> tuple[EdgeSet, int]:
    """Borůvka phases under the (weight, id) order; returns the MST and the phase count.

    Computed by the orchestrator and charged D + ceil(sqrt n)·log* n rounds.
    """
    g = rt.graph
    comp = list(range(g.n))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    chosen: set[int] = set()
    phases = 0
    components = g.n
    while components > 1:
        phases += 1
        best: dict[int, tuple[int, int]] = {}
        for e in g.edges:
            a, b = find(e.u), find(e.v)
            if a == b:
                continue
            key = (e.weight, e.id)
            for c in (a, b):
                if c not in best or key < best[c]:
                    best[c] = key
        if not best:
            raise CongestError("graph is disconnected")
        for _, eid in sorted(set(best.values())):
            e = g.edges[eid]
            a, b = find(e.u), find(e.v)
            if a != b:
                comp[a] = b
                chosen.add(eid)
                components -= 1
    rt.charge("mst", rt.diameter + sqrt_ceil(g.n) * log_star(g.n))
    return EdgeSet.of(g, chosen), phases
