"""Weighted multigraph model, text format, generators and global checks."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable


class GraphError(ValueError):
    pass


class GraphParseError(GraphError):
    """Base class for edge-list parse failures. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MalformedLineError(GraphParseError):
    pass


class VertexRangeError(GraphParseError):
    pass


class NonPositiveWeightError(GraphParseError):
    pass


class TooFewVerticesError(GraphParseError):
    pass


class DisconnectedGraphError(GraphError):
    pass


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    weight: int

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected multigraph on vertices 0..n-1 with dense edge ids 0..m-1."""

    n: int
    edges: tuple[Edge, ...]
    adj: tuple[tuple[tuple[int, int], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("vertex count must be positive")
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise GraphError(f"edge ids must be dense, got {e.id} at position {i}")
            if e.u == e.v:
                raise GraphError(f"self-loop on edge {e.id}")
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise GraphError(f"edge {e.id} has an endpoint out of range")
            if e.weight < 1:
                raise GraphError(f"edge {e.id} has weight {e.weight} < 1")
            adj[e.u].append((e.v, e.id))
            adj[e.v].append((e.u, e.id))
        object.__setattr__(self, "adj", tuple(tuple(a) for a in adj))

    @classmethod
    def from_triples(cls, n: int, triples: Iterable[tuple[int, int, int]]) -> "WeightedGraph":
        return cls(n, tuple(Edge(i, u, v, w) for i, (u, v, w) in enumerate(triples)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> list[int]:
        return sorted({x for x, _ in self.adj[v]})

    def weight_of(self, ids: Iterable[int]) -> int:
        return sum(self.edges[i].weight for i in ids)

    def subgraph(self, ids: Iterable[int]) -> "WeightedGraph":
        """Spanning subgraph keeping only the given edge ids (renumbered densely)."""
        keep = sorted(set(ids))
        return WeightedGraph.from_triples(
            self.n, [(self.edges[i].u, self.edges[i].v, self.edges[i].weight) for i in keep]
        )


@dataclass(frozen=True)
class EdgeSet:
    member_ids: frozenset[int]
    total_weight: int

    @classmethod
    def of(cls, g: WeightedGraph, ids: Iterable[int]) -> "EdgeSet":
        members = frozenset(ids)
        return cls(members, g.weight_of(members))

    def __len__(self) -> int:
        return len(self.member_ids)

    def __contains__(self, edge_id: object) -> bool:
        return edge_id in self.member_ids


def parse_graph(text: str) -> WeightedGraph:
    lines = text.splitlines()
    if not lines:
        raise MalformedLineError(1, "missing header 'n m'")
    header = lines[0].split()
    if len(header) != 2:
        raise MalformedLineError(1, "header must be 'n m'")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise MalformedLineError(1, "header values must be integers") from None
    if n < 2:
        raise TooFewVerticesError(1, f"need at least 2 vertices, got {n}")
    if m < 0:
        raise MalformedLineError(1, "edge count must be nonnegative")
    body = lines[1:]
    if len(body) < m:
        raise MalformedLineError(len(lines) + 1, f"expected {m} edge lines, found {len(body)}")
    triples = []
    for idx in range(m):
        lineno = idx + 2
        parts = body[idx].split()
        if len(parts) != 3:
            raise MalformedLineError(lineno, "edge line must be 'u v w'")
        try:
            u, v, w = (int(p) for p in parts)
        except ValueError:
            raise MalformedLineError(lineno, "edge fields must be integers") from None
        for x in (u, v):
            if not 1 <= x <= n:
                raise VertexRangeError(lineno, f"vertex {x} outside 1..{n}")
        if u == v:
            raise MalformedLineError(lineno, "self-loop")
        if w < 1:
            raise NonPositiveWeightError(lineno, f"nonpositive weight {w}")
        triples.append((u - 1, v - 1, w))
    for extra in body[m:]:
        if extra.strip():
            raise MalformedLineError(len(lines), "trailing content after edge list")
    return WeightedGraph.from_triples(n, triples)


def serialize_graph(g: WeightedGraph) -> str:
    out = [f"{g.n} {g.m}"]
    for e in sorted(g.edges, key=lambda e: e.id):
        out.append(f"{e.u + 1} {e.v + 1} {e.weight}")
    return "\n".join(out) + "\n"


def generate(family: str, params: dict, seed: int = 0) -> WeightedGraph:
    """Build a 2-edge-connected instance from one of the known families."""
    if family == "cycle":
        n = int(params.get("n", 0))
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        return WeightedGraph.from_triples(n, [(i, (i + 1) % n, 1) for i in range(n)])
    if family == "grid":
        rows = int(params.get("rows", params.get("r", 0)))
        cols = int(params.get("cols", params.get("c", 0)))
        if rows < 2 or cols < 2:
            raise GraphError("grid needs rows, cols >= 2")
        triples = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    triples.append((v, v + 1, 1))
                if r + 1 < rows:
                    triples.append((v, v + cols, 1))
        return WeightedGraph.from_triples(rows * cols, triples)
    if family == "random2ec":
        n = int(params.get("n", 0))
        extra = int(params.get("extra_edges", params.get("extra", 0)))
        wmax = int(params.get("weight_max", params.get("wmax", 1)))
        if n < 3 or extra < 0 or wmax < 1:
            raise GraphError("random2ec needs n >= 3, extra_edges >= 0, weight_max >= 1")
        rng = random.Random(seed)
        perm = list(range(n))
        rng.shuffle(perm)
        triples = []
        present = set()
        for i in range(n):
            a, b = perm[i], perm[(i + 1) % n]
            triples.append((a, b, rng.randint(1, wmax)))
            present.add((min(a, b), max(a, b)))
        room = n * (n - 1) // 2 - len(present)
        for _ in range(min(extra, room)):
            while True:
                a, b = rng.randrange(n), rng.randrange(n)
                key = (min(a, b), max(a, b))
                if a != b and key not in present:
                    break
            present.add(key)
            triples.append((a, b, rng.randint(1, wmax)))
        return WeightedGraph.from_triples(n, triples)
    raise GraphError(f"unknown family {family!r}")


def is_connected(g: WeightedGraph) -> bool:
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        x = queue.popleft()
        for y, _ in g.adj[x]:
            if not seen[y]:
                seen[y] = True
                count += 1
                queue.append(y)
    return count == g.n


def find_bridges(g: WeightedGraph) -> set[int]:
    """Edge ids of all bridges, via an iterative lowlink traversal on edge ids."""
    disc = [-1] * g.n
    low = [0] * g.n
    bridges: set[int] = set()
    timer = 0
    for start in range(g.n):
        if disc[start] != -1:
            continue
        disc[start] = low[start] = timer
        timer += 1
        # frame: (vertex, edge id used to enter, iterator position)
        stack = [(start, -1, 0)]
        while stack:
            v, via, pos = stack[-1]
            if pos < len(g.adj[v]):
                stack[-1] = (v, via, pos + 1)
                w, eid = g.adj[v][pos]
                if eid == via:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, eid, 0))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        bridges.add(via)
    return bridges


def is_two_edge_connected(g: WeightedGraph) -> bool:
    if g.n < 2:
        return False
    return is_connected(g) and not find_bridges(g)


def mst_kruskal(g: WeightedGraph) -> EdgeSet:
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for e in sorted(g.edges, key=lambda e: (e.weight, e.id)):
        a, b = find(e.u), find(e.v)
        if a != b:
            parent[a] = b
            chosen.append(e.id)
    if len(chosen) != g.n - 1:
        raise DisconnectedGraphError("graph is disconnected; no spanning tree")
    return EdgeSet.of(g, chosen)


def hop_diameter(g: WeightedGraph) -> int:
    """Unweighted diameter D by a BFS from every vertex."""
    best = 0
    for s in range(g.n):
        dist = [-1] * g.n
        dist[s] = 0
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y, _ in g.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if min(dist) < 0:
            raise DisconnectedGraphError("graph is disconnected")
        best = max(best, max(dist))
    return best
