"""Segment decomposition, layering, petals and the two aggregate primitives.

All routines here run centrally (tier 1). When a Runtime is passed they charge the
round counts that the distributed versions need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from .aggregates import Aggregate
from .congest import Runtime, log2_ceil, log_star, sqrt_ceil
from .tree import LabeledTree, TreeEdge, lca
from .virtual import HALF_RANK, VirtualEdge, VirtualTapInstance


# --------------------------------------------------------------------------- segments


@dataclass
class Segment:
    segment_id: int
    r: int
    d: int
    highway: list[int]  # vertices from r down to d
    member_children: list[int]  # tree edges {v, p(v)} owned by the segment, keyed by v

    def member_edges(self, t: LabeledTree) -> set[TreeEdge]:
        return {t.edge(v) for v in self.member_children}

    @property
    def highway_children(self) -> list[int]:
        """Child endpoints of the highway edges, top-down."""
        return self.highway[1:]


@dataclass
class SegmentDecomposition:
    tree: LabeledTree
    s: int
    segments: list[Segment]
    home: list[int]  # home[v] = segment owning edge {v, p(v)}; -1 at the root
    skeleton_parent: list[int]  # per segment; -1 when r is the tree root
    skeleton_vertices: frozenset[int]
    hw_index: dict[int, int] = field(default_factory=dict)  # internal highway vertex -> segment

    def segment_of(self, v: int) -> Segment:
        return self.segments[self.home[v]]

    def vertices_of(self, seg: Segment) -> set[int]:
        out = set()
        for c in seg.member_children:
            out.add(c)
            out.add(self.tree.parent[c])
        if not out:
            out.add(seg.r)
        return out


def build_segments(t: LabeledTree, rt: Optional[Runtime] = None) -> SegmentDecomposition:
    """Bottom-up ⌈√n⌉ chunking, LCA closure of the marked set, one segment per skeleton edge."""
    n = t.n
    s = sqrt_ceil(n)
    region = [0] * n
    marked = [False] * n
    for v in reversed(t.preorder):
        region[v] = 1 + sum(region[c] for c in t.children[v] if not marked[c])
        marked[v] = region[v] >= s
    keys = {v for v in range(n) if marked[v]} | {t.root}
    ordered = sorted(keys, key=lambda v: t.euler_in[v])
    for a, b in zip(ordered, ordered[1:]):
        keys.add(lca(t, a, b))
    in_k = [False] * n
    for v in keys:
        in_k[v] = True
    # does the subtree of v contain a skeleton vertex?
    has_k = [False] * n
    for v in reversed(t.preorder):
        has_k[v] = in_k[v] or any(has_k[c] for c in t.children[v])

    segments: list[Segment] = []
    home = [-1] * n
    hw_index: dict[int, int] = {}
    seg_by_d: dict[int, int] = {}
    for d in sorted(keys - {t.root}, key=lambda v: t.euler_in[v]):
        path = [d]
        x = t.parent[d]
        while not in_k[x]:
            path.append(x)
            x = t.parent[x]
        path.append(x)
        path.reverse()
        sid = len(segments)
        seg = Segment(sid, x, d, path, [])
        segments.append(seg)
        seg_by_d[d] = sid
        for v in path[1:]:
            home[v] = sid
        for v in path[1:-1]:
            hw_index[v] = sid

    def claim_subtree(root_child: int, sid: int) -> None:
        stack = [root_child]
        while stack:
            v = stack.pop()
            home[v] = sid
            stack.extend(t.children[v])

    root_segments = [sg.segment_id for sg in segments if sg.r == t.root]
    for v in t.preorder:
        for c in t.children[v]:
            if home[c] != -1 or has_k[c]:
                continue
            # c roots a subtree free of skeleton vertices hanging at v
            if v in hw_index:
                claim_subtree(c, hw_index[v])
            elif v != t.root:
                claim_subtree(c, seg_by_d[v])
            else:
                if not root_segments:
                    segments.append(Segment(len(segments), t.root, t.root, [t.root], []))
                    root_segments.append(len(segments) - 1)
                claim_subtree(c, root_segments[0])
    for v in t.preorder:
        if v != t.root:
            segments[home[v]].member_children.append(v)
    skeleton_parent = [seg_by_d.get(sg.r, -1) if sg.r != t.root else -1 for sg in segments]
    if rt is not None:
        rt.charge("segments", rt.diameter + s * log_star(n))
    return SegmentDecomposition(t, s, segments, home, skeleton_parent, frozenset(keys), hw_index)


def _tree_diameter(edges: list[tuple[int, int]]) -> int:
    if not edges:
        return 0
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    def far(src):
        dist = {src: 0}
        stack = [src]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    stack.append(y)
        node = max(dist, key=lambda k: (dist[k], -k))
        return node, dist[node]

    a, _ = far(edges[0][0])
    _, dd = far(a)
    return dd


def check_segments(seg: SegmentDecomposition, c1: int = 4, c2: int = 4) -> list[str]:
    """Violations of the segment contract; an empty list means it holds."""
    t = seg.tree
    problems = []
    owner: dict[int, int] = {}
    for sg in seg.segments:
        for c in sg.member_children:
            if c in owner:
                problems.append(f"edge {c} in segments {owner[c]} and {sg.segment_id}")
            owner[c] = sg.segment_id
    if set(owner) != {v for v in range(t.n) if v != t.root}:
        problems.append("segments do not cover every tree edge")
    bound = seg.s
    if len(seg.segments) > c1 * bound:
        problems.append(f"{len(seg.segments)} segments exceed {c1}*{bound}")
    appear: dict[int, set[int]] = {}
    for sg in seg.segments:
        diam = _tree_diameter([(c, t.parent[c]) for c in sg.member_children])
        if diam > c2 * bound:
            problems.append(f"segment {sg.segment_id} has diameter {diam} > {c2}*{bound}")
        for x in seg.vertices_of(sg):
            appear.setdefault(x, set()).add(sg.segment_id)
        for a, b in zip(sg.highway, sg.highway[1:]):
            if t.parent[b] != a:
                problems.append(f"segment {sg.segment_id} highway is not a vertical path")
    for x, sids in appear.items():
        if len(sids) > 1:
            for sid in sids:
                sg = seg.segments[sid]
                if x not in (sg.r, sg.d):
                    problems.append(f"vertex {x} shared by segment {sid} but is not its r or d")
    return problems


# --------------------------------------------------------------------------- layers


@dataclass
class Layering:
    tree: LabeledTree
    layer: list[int]  # per child vertex; 0 at the root
    leaf_of: list[int]  # per child vertex
    path_id: list[int]  # per child vertex
    position: list[int]  # index of the edge on its path, 0 at the leaf end
    paths: list[list[int]]  # per path: child endpoints bottom-up
    path_layer: list[int]
    layer_count: int
    deepest: list[dict[int, int]] = field(default_factory=list, repr=False)

    @property
    def path_heads(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for pid, p in enumerate(self.paths):
            out.setdefault(self.path_layer[pid], set()).add(self.tree.parent[p[-1]])
        return out

    @property
    def path_leaves(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for pid, p in enumerate(self.paths):
            out.setdefault(self.path_layer[pid], set()).add(p[0])
        return out

    def edges_in_layer(self, i: int) -> list[int]:
        return [c for pid, p in enumerate(self.paths) if self.path_layer[pid] == i for c in p]


def compute_layers(t: LabeledTree, rt: Optional[Runtime] = None) -> Layering:
    n = t.n
    layer = [0] * n
    leaf_of = [-1] * n
    path_id = [-1] * n
    position = [-1] * n
    paths: list[list[int]] = []
    path_layer: list[int] = []
    remaining = [len(t.children[v]) for v in range(n)]
    alive = set(range(n))
    i = 0
    while len(alive) > 1:
        i += 1
        leaves = sorted((v for v in alive if remaining[v] == 0 and v != t.root),
                        key=lambda v: t.euler_in[v])
        junction = {v for v in alive if remaining[v] >= 2}
        tops = []
        for leaf in leaves:
            path = []
            v = leaf
            while True:
                path.append(v)
                p = t.parent[v]
                if p == t.root or p in junction:
                    break
                v = p
            pid = len(paths)
            paths.append(path)
            path_layer.append(i)
            for pos, c in enumerate(path):
                layer[c] = i
                leaf_of[c] = leaf
                path_id[c] = pid
                position[c] = pos
            tops.append(t.parent[path[-1]])
            alive.difference_update(path)
        for top in tops:
            remaining[top] -= 1
    deepest: list[dict[int, int]] = [dict() for _ in range(n)]
    for v in t.preorder:
        if v != t.root:
            dv = dict(deepest[t.parent[v]])
            dv[layer[v]] = v
            deepest[v] = dv
    if rt is not None:
        rt.charge("layers", rt.base_cost() * log2_ceil(n))
    return Layering(t, layer, leaf_of, path_id, position, paths, path_layer, i, deepest)


def check_layers(lay: Layering) -> list[str]:
    t = lay.tree
    problems = []
    if lay.layer_count > log2_ceil(t.n) + 1:
        problems.append(f"{lay.layer_count} layers exceed log2 bound")
    for v in range(t.n):
        if v == t.root:
            continue
        p = t.parent[v]
        if p != t.root and lay.layer[p] < lay.layer[v]:
            problems.append(f"layer decreases toward the root at edge {v}")
        if not t.is_ancestor(v, lay.leaf_of[v]):
            problems.append(f"leaf_of({v}) is not below the edge")
    for pid, path in enumerate(lay.paths):
        for a, b in zip(path, path[1:]):
            if t.parent[a] != b:
                problems.append(f"path {pid} is not contiguous")
    return problems


# --------------------------------------------------------------------------- petals


@dataclass
class Petals:
    higher: dict[int, VirtualEdge]
    lower: dict[int, VirtualEdge]
    with_respect_to: frozenset[VirtualEdge]
    layer_index: int


def layer_interval(inst: VirtualTapInstance, lay: Layering, e: VirtualEdge, i: int):
    """(path id, a, b): e covers positions a..b-1 of one layer-i path, or None."""
    c = lay.deepest[e.dec].get(i)
    if c is None:
        return None
    t = inst.tree
    pid = lay.path_id[c]
    a = lay.position[c]
    leaf_depth = t.depth[lay.paths[pid][0]]
    b = min(len(lay.paths[pid]), leaf_depth - t.depth[e.anc])
    if a >= b:
        return None
    return pid, a, b


def _paint(lay: Layering, items: list[tuple[tuple, int, int, int, VirtualEdge]]) -> dict[int, VirtualEdge]:
    """Each path position takes the first (best-keyed) interval that covers it."""
    out: dict[int, VirtualEdge] = {}
    nxt: dict[int, list[int]] = {}

    def find(arr, x):
        root = x
        while arr[root] != root:
            root = arr[root]
        while arr[x] != root:
            arr[x], x = root, arr[x]
        return root

    for _, pid, a, b, e in sorted(items, key=lambda it: it[0]):
        arr = nxt.get(pid)
        if arr is None:
            arr = list(range(len(lay.paths[pid]) + 1))
            nxt[pid] = arr
        j = find(arr, a)
        while j < b:
            out[lay.paths[pid][j]] = e
            arr[j] = j + 1
            j = find(arr, j + 1)
    return out


def compute_petals(inst: VirtualTapInstance, lay: Layering, X: Iterable[VirtualEdge], i: int,
                   rt: Optional[Runtime] = None) -> Petals:
    t = inst.tree
    xs = frozenset(X)
    hi_items = []
    lo_items = []
    for e in xs:
        iv = layer_interval(inst, lay, e, i)
        if iv is None:
            continue
        pid, a, b = iv
        tie = (e.origin_edge_id, HALF_RANK[e.half])
        hi_items.append(((t.depth[e.anc],) + tie, pid, a, b, e))
        # smallest a is the deepest u_e = lca(leaf(t), dec) on the layer path
        lo_items.append(((a,) + tie, pid, a, b, e))
    if rt is not None:
        rt.charge("petals", rt.base_cost())
    return Petals(_paint(lay, hi_items), _paint(lay, lo_items), xs, i)


# --------------------------------------------------------------------------- aggregates


def _segment_tables(seg: SegmentDecomposition, f: Aggregate, m: Mapping[int, Any]):
    t = seg.tree
    ident = f.identity
    up = [ident] * t.n
    for v in t.preorder:
        if v == t.root:
            continue
        p = t.parent[v]
        val = m.get(v, ident)
        up[v] = val if p == seg.segments[seg.home[v]].r else f.op(val, up[p])
    hw = []
    hfd: dict[int, Any] = {}
    for sg in seg.segments:
        acc = ident
        for x in reversed(sg.highway[1:]):
            acc = f.op(acc, m.get(x, ident))
            hfd[t.parent[x]] = acc
        hw.append(acc)
    return up, hw, hfd


def agg_tree(inst: VirtualTapInstance, seg: SegmentDecomposition, f: Aggregate,
             m: Mapping[int, Any], edges: Optional[Iterable[VirtualEdge]] = None,
             rt: Optional[Runtime] = None) -> dict[VirtualEdge, Any]:
    """For every virtual edge e, the fold of f over the inputs of the tree edges in S_e.

    `m` maps a tree-edge child vertex to its input (missing entries are the identity).
    """
    t = inst.tree
    targets = list(inst.virtual_edges if edges is None else edges)
    out: dict[VirtualEdge, Any] = {}
    if f.inverse is not None:
        pref = [f.identity] * t.n
        for v in t.preorder:
            if v != t.root:
                pref[v] = f.op(pref[t.parent[v]], m.get(v, f.identity))
        for e in targets:
            out[e] = f.inverse(pref[e.dec], pref[e.anc])
    else:
        up, hw, hfd = _segment_tables(seg, f, m)
        for e in targets:
            sid = seg.home[e.dec]
            sg = seg.segments[sid]
            if t.depth[e.anc] >= t.depth[sg.r]:
                # both endpoints inside one segment: walk the short path
                acc = f.identity
                v = e.dec
                while v != e.anc:
                    acc = f.op(acc, m.get(v, f.identity))
                    v = t.parent[v]
                out[e] = acc
                continue
            acc = up[e.dec]
            sid = seg.skeleton_parent[sid]
            while True:
                sg = seg.segments[sid]
                if t.depth[e.anc] >= t.depth[sg.r]:
                    acc = f.op(acc, hw[sid] if e.anc == sg.r else hfd[e.anc])
                    break
                acc = f.op(acc, hw[sid])
                sid = seg.skeleton_parent[sid]
            out[e] = acc
    if rt is not None:
        rt.charge("agg-tree", rt.base_cost())
    return out


def agg_nontree(inst: VirtualTapInstance, seg: SegmentDecomposition, f: Aggregate,
                m: Mapping[VirtualEdge, Any], rt: Optional[Runtime] = None,
                stats: Optional[dict] = None) -> dict[int, Any]:
    """For every tree edge (keyed by child), the fold of f over covering edges in m's keys.

    Without an inverse, covering edges are split per segment into the local part (the
    descendant lies in the segment), mid-range edges entering the highway from below and
    ending strictly inside it, and long-range edges spanning the whole highway.
    """
    t = inst.tree
    ident = f.identity
    res = [ident] * t.n
    if f.inverse is not None:
        down = [ident] * t.n
        upv = [ident] * t.n
        for e, val in m.items():
            down[e.dec] = f.op(down[e.dec], val)
            upv[e.anc] = f.op(upv[e.anc], val)
        for v in reversed(t.preorder):
            if v != t.root:
                p = t.parent[v]
                down[p] = f.op(down[p], down[v])
                upv[p] = f.op(upv[p], upv[v])
        for v in range(t.n):
            if v != t.root:
                res[v] = f.inverse(down[v], upv[v])
    else:
        nseg = len(seg.segments)
        mid: dict[int, Any] = {}
        long = [ident] * nseg
        counts = {"short": 0, "mid": 0, "long": 0}
        for e, val in m.items():
            sid = seg.home[e.dec]
            r = seg.segments[sid].r
            v = e.dec
            while v != e.anc and v != r:
                res[v] = f.op(res[v], val)
                v = t.parent[v]
            if v == e.anc:
                counts["short"] += 1
                continue
            sid = seg.skeleton_parent[sid]
            while True:
                sg = seg.segments[sid]
                if t.depth[e.anc] >= t.depth[sg.r]:
                    if e.anc == sg.r:
                        long[sid] = f.op(long[sid], val)
                        counts["long"] += 1
                    else:
                        mid[e.anc] = f.op(mid.get(e.anc, ident), val)
                        counts["mid"] += 1
                    break
                long[sid] = f.op(long[sid], val)
                sid = seg.skeleton_parent[sid]
        for sid, sg in enumerate(seg.segments):
            acc = ident
            for x in sg.highway[1:]:
                res[x] = f.op(res[x], f.op(acc, long[sid]))
                acc = f.op(acc, mid.get(x, ident))
        if stats is not None:
            stats.update(counts)
    if rt is not None:
        rt.charge("agg-nontree", rt.base_cost())
    return {v: res[v] for v in range(t.n) if v != t.root}
