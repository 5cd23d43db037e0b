"""Rooted spanning trees with Euler-interval labels for ancestry, LCA and cover queries."""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import EdgeSet, GraphError, WeightedGraph


class TreeError(GraphError):
    pass


@dataclass(frozen=True, order=True)
class TreeEdge:
    """The tree edge {child, p(child)}; host_edge_id is its id in the host graph."""

    child: int
    host_edge_id: int


@dataclass
class LabeledTree:
    n: int
    root: int
    parent: list[int]
    depth: list[int]
    euler_in: list[int]
    euler_out: list[int]
    subtree_size: list[int]
    host_edge: list[int]  # host edge id of {v, p(v)}; -1 at the root
    children: list[list[int]]
    preorder: list[int]
    tree_edge_ids: frozenset[int]
    _up: list[list[int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._up = [self.parent[:]]
        self._up[0][self.root] = self.root
        k = 1
        while (1 << k) < self.n:
            prev = self._up[-1]
            self._up.append([prev[prev[v]] for v in range(self.n)])
            k += 1

    def is_ancestor(self, a: int, b: int) -> bool:
        """True iff a is an ancestor of b (a vertex is its own ancestor)."""
        return self.euler_in[a] <= self.euler_in[b] and self.euler_out[b] <= self.euler_out[a]

    def edges(self) -> list[TreeEdge]:
        return [TreeEdge(v, self.host_edge[v]) for v in self.preorder if v != self.root]

    def edge(self, child: int) -> TreeEdge:
        if child == self.root:
            raise TreeError("the root has no parent edge")
        return TreeEdge(child, self.host_edge[child])

    def ancestor_at_depth(self, v: int, d: int) -> int:
        diff = self.depth[v] - d
        k = 0
        while diff:
            if diff & 1:
                v = self._up[k][v]
            diff >>= 1
            k += 1
        return v

    def path_children(self, anc: int, dec: int) -> list[int]:
        """Child endpoints of the tree edges on P_{anc,dec}, listed bottom-up."""
        out = []
        v = dec
        while v != anc:
            out.append(v)
            v = self.parent[v]
        return out


def root_tree(g: WeightedGraph, tree_edges: EdgeSet | frozenset[int], root: int = 0) -> LabeledTree:
    ids = tree_edges.member_ids if isinstance(tree_edges, EdgeSet) else frozenset(tree_edges)
    n = g.n
    if len(ids) != n - 1:
        raise TreeError(f"a spanning tree needs {n - 1} edges, got {len(ids)}")
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for eid in sorted(ids):
        e = g.edges[eid]
        adj[e.u].append((e.v, eid))
        adj[e.v].append((e.u, eid))
    parent = [-1] * n
    depth = [0] * n
    host = [-1] * n
    tin = [0] * n
    tout = [0] * n
    size = [1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    preorder = []
    seen = [False] * n
    seen[root] = True
    clock = 0
    stack = [(root, 0)]
    tin[root] = clock
    clock += 1
    preorder.append(root)
    while stack:
        v, pos = stack[-1]
        if pos < len(adj[v]):
            stack[-1] = (v, pos + 1)
            w, eid = adj[v][pos]
            if eid == host[v]:
                continue
            if seen[w]:
                raise TreeError("tree edges contain a cycle")
            seen[w] = True
            parent[w] = v
            depth[w] = depth[v] + 1
            host[w] = eid
            children[v].append(w)
            tin[w] = clock
            clock += 1
            preorder.append(w)
            stack.append((w, 0))
        else:
            stack.pop()
            tout[v] = clock
            clock += 1
            if parent[v] >= 0:
                size[parent[v]] += size[v]
    if len(preorder) != n:
        raise TreeError("tree edges do not span the graph")
    return LabeledTree(n, root, parent, depth, tin, tout, size, host, children, preorder, ids)


def lca(t: LabeledTree, u: int, v: int) -> int:
    if t.is_ancestor(u, v):
        return u
    if t.is_ancestor(v, u):
        return v
    for k in range(len(t._up) - 1, -1, -1):
        x = t._up[k][u]
        if not t.is_ancestor(x, v):
            u = x
    return t.parent[u]


def covers(t: LabeledTree, tree_edge: TreeEdge | int, anc: int, dec: int) -> bool:
    """Whether the tree edge lies on the vertical path between anc and dec."""
    child = tree_edge.child if isinstance(tree_edge, TreeEdge) else tree_edge
    if child == t.root:
        return False
    return t.is_ancestor(anc, t.parent[child]) and t.is_ancestor(child, dec)
