"""Shortcut-based tree tools and the sampled parallel greedy O(log n) augmentation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, NamedTuple, Optional, Sequence

from .aggregates import SUM, XOR, Aggregate, bounded_union
from .congest import Runtime, bfs_tree, boruvka_mst, log2_ceil, run_tier0
from .graph import EdgeSet, WeightedGraph, is_two_edge_connected
from .primal_dual import IntegrityError, NotTwoEdgeConnectedError
from .tree import LabeledTree, root_tree


# --------------------------------------------------------------------------- hierarchy


@dataclass
class Merge:
    centre: int  # fragment id at the lower level
    attached: list[int]  # child fragment ids merged into the centre


@dataclass
class FragmentHierarchy:
    """levels[l][f] = (root vertex, member vertices) for fragment f at level l."""

    levels: list[list[tuple[int, list[int]]]]
    merges: list[list[Merge]]  # merges[l] turns level l into level l+1

    @property
    def depth(self) -> int:
        return len(self.merges)


def build_fragment_hierarchy(t: LabeledTree) -> FragmentHierarchy:
    """Merge fragments level by level until one fragment remains.

    Fragments at one parity of the fragment-tree depth act as centres and absorb all their
    child fragments; the parity giving more merges is used, so the fragment count drops to
    at most (F+1)/2 and the level count stays within ⌈log2 n⌉.
    """
    level = [(v, [v]) for v in t.preorder]
    levels = [level]
    merges: list[list[Merge]] = []
    while len(level) > 1:
        frag_of = {}
        for f, (_, members) in enumerate(level):
            for v in members:
                frag_of[v] = f
        # fragments listed in preorder of their roots, so parents precede children
        fdepth = [0] * len(level)
        fparent = [-1] * len(level)
        kids: list[list[int]] = [[] for _ in level]
        for f, (r, _) in enumerate(level):
            if r != t.root:
                pf = frag_of[t.parent[r]]
                fparent[f] = pf
                fdepth[f] = fdepth[pf] + 1
                kids[pf].append(f)
        gain = [sum(1 for f in range(len(level)) if fparent[f] >= 0 and fdepth[f] % 2 != p)
                for p in (0, 1)]
        parity = 0 if gain[0] >= gain[1] else 1
        step: list[Merge] = []
        nxt = []
        for f, (r, members) in enumerate(level):
            if fdepth[f] % 2 == parity or fparent[f] < 0:
                step.append(Merge(f, kids[f] if fdepth[f] % 2 == parity else []))
                merged = list(members)
                for c in step[-1].attached:
                    merged.extend(level[c][1])
                nxt.append((r, merged))
        merges.append(step)
        levels.append(nxt)
        level = nxt
    return FragmentHierarchy(levels, merges)


# --------------------------------------------------------------------------- providers


@dataclass(frozen=True)
class ShortcutQuality:
    alpha: int
    beta: int
    gamma: int

    @property
    def sc(self) -> int:
        return self.alpha + self.beta + self.gamma


class ShortcutProvider:
    name = "abstract"

    def build(self, parts: Sequence[Sequence[int]]) -> ShortcutQuality:
        raise NotImplementedError


def _diameter_in_tree(t: LabeledTree, members: Sequence[int]) -> int:
    if len(members) <= 1:
        return 0
    inside = set(members)
    adj: dict[int, list[int]] = {v: [] for v in members}
    for v in members:
        p = t.parent[v]
        if p in inside:
            adj[v].append(p)
            adj[p].append(v)

    def far(src):
        dist = {src: 0}
        stack = [src]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    stack.append(y)
        best = max(dist, key=lambda k: (dist[k], -k))
        return best, dist[best]

    a, _ = far(members[0])
    return far(a)[1]


class TreeNativeProvider(ShortcutProvider):
    """No augmenting subgraphs: each part communicates inside its own tree fragment."""

    name = "tree-native"

    def __init__(self, t: LabeledTree):
        self.tree = t

    def build(self, parts):
        beta = max((_diameter_in_tree(self.tree, p) for p in parts), default=0)
        return ShortcutQuality(1, beta, 0)


class BfsStarProvider(ShortcutProvider):
    """Every part routes through one global BFS tree of the host graph."""

    name = "bfs-star"

    def __init__(self, g: WeightedGraph, bfs: LabeledTree, diameter: int):
        self.bfs = bfs
        self.diameter = diameter
        self.bfs_depth = max(bfs.depth)

    def build(self, parts):
        load = [0] * self.bfs.n
        for part in parts:
            used = set()
            for v in part:
                while v != self.bfs.root and v not in used:
                    used.add(v)
                    v = self.bfs.parent[v]
            for v in used:
                load[v] += 1
        return ShortcutQuality(max(load, default=0) or 1, 2 * self.bfs_depth + 2, self.diameter)


def make_provider(name: str, g: WeightedGraph, t: LabeledTree, rt: Optional[Runtime] = None):
    if name == "tree-native":
        return TreeNativeProvider(t)
    if name == "bfs-star":
        rt = rt or Runtime(g)
        return BfsStarProvider(g, bfs_tree(rt, 0), rt.diameter)
    raise ValueError(f"unknown provider {name!r}")


class _Tools:
    """Hierarchy plus per-level shortcut qualities for one tree and provider."""

    def __init__(self, t: LabeledTree, provider: ShortcutProvider):
        self.tree = t
        self.provider = provider
        self.hierarchy = build_fragment_hierarchy(t)
        self.quality = [provider.build([m for _, m in lvl]) for lvl in self.hierarchy.levels[:-1]]

    def level_costs(self) -> list[int]:
        return [q.sc for q in self.quality]

    def sc(self) -> int:
        return max(self.level_costs(), default=0)


_TOOLS_CACHE: dict[tuple[int, int], tuple[LabeledTree, ShortcutProvider, _Tools]] = {}


def _tools(t: LabeledTree, provider: ShortcutProvider) -> _Tools:
    key = (id(t), id(provider))
    hit = _TOOLS_CACHE.get(key)
    if hit is None or hit[0] is not t or hit[1] is not provider:
        if len(_TOOLS_CACHE) > 64:
            _TOOLS_CACHE.clear()
        hit = (t, provider, _Tools(t, provider))
        _TOOLS_CACHE[key] = hit
    return hit[2]


# --------------------------------------------------------------------------- sums


def descendants_sum(t: LabeledTree, x: Sequence[Any], combine: Aggregate,
                    provider: Optional[ShortcutProvider] = None,
                    rt: Optional[Runtime] = None) -> list[Any]:
    """result(u) = fold of x over T_u, built up the fragment hierarchy."""
    provider = provider or TreeNativeProvider(t)
    tools = _tools(t, provider)
    h = tools.hierarchy
    sub = list(x)
    for lvl, step in enumerate(h.merges):
        frags = h.levels[lvl]
        for mg in step:
            top = frags[mg.centre][0]
            for c in mg.attached:
                r = frags[c][0]
                total = sub[r]
                v = t.parent[r]
                while True:
                    sub[v] = combine.op(sub[v], total)
                    if v == top:
                        break
                    v = t.parent[v]
    if rt is not None:
        rt.charge("descendants-sum", sum(tools.level_costs()))
    return sub


def ancestors_sum(t: LabeledTree, x: Sequence[Any], combine: Aggregate,
                  provider: Optional[ShortcutProvider] = None,
                  rt: Optional[Runtime] = None) -> list[Any]:
    """result(u) = fold of x over the root path of u, root first.

    Each merge pushes the centre's value at the attachment point (z) into the child
    fragment, so only associativity is needed.
    """
    provider = provider or TreeNativeProvider(t)
    tools = _tools(t, provider)
    h = tools.hierarchy
    local = list(x)
    for lvl, step in enumerate(h.merges):
        frags = h.levels[lvl]
        for mg in step:
            for c in mg.attached:
                r, members = frags[c]
                z = local[t.parent[r]]
                for u in members:
                    local[u] = combine.op(z, local[u])
    if rt is not None:
        rt.charge("ancestors-sum", tools.sc() * log2_ceil(t.n))
    return local


# --------------------------------------------------------------------------- heavy-light


class LightEdge(NamedTuple):
    child: int
    parent: int
    plen_child: int
    plen_parent: int
    m_child: int
    m_parent: int


@dataclass
class HeavyLightInfo:
    path_len: list[int]
    light_edges: list[frozenset[LightEdge]]
    heavy_flag: dict[int, bool]  # keyed by child vertex
    marked_count: list[int]
    subtree_size: list[int]


def heavy_light(t: LabeledTree, marked: Iterable[int], provider: Optional[ShortcutProvider] = None,
                rt: Optional[Runtime] = None) -> HeavyLightInfo:
    """`marked` holds tree edges by child vertex."""
    n = t.n
    marks = set(marked)
    size = descendants_sum(t, [1] * n, SUM, provider, rt)
    heavy = {v: 2 * size[v] > size[t.parent[v]] for v in range(n) if v != t.root}
    plen = ancestors_sum(t, [1] * n, SUM, provider, rt)
    mcount = ancestors_sum(t, [1 if (v in marks and v != t.root) else 0 for v in range(n)],
                           SUM, provider, rt)
    x = []
    for v in range(n):
        if v != t.root and not heavy[v]:
            p = t.parent[v]
            x.append(frozenset([LightEdge(v, p, plen[v], plen[p], mcount[v], mcount[p])]))
        else:
            x.append(frozenset())
    limit = log2_ceil(n)
    try:
        light = ancestors_sum(t, x, bounded_union(limit), provider, rt)
    except OverflowError as err:
        raise IntegrityError(f"light-edge set exceeded {limit} entries") from err
    return HeavyLightInfo(plen, light, heavy, mcount, size)


def lca_light(h: HeavyLightInfo, u: int, v: int) -> int:
    """LCA from the light-edge sets: strip the common light edges, then each side's entry
    point onto the LCA's heavy path is the parent of its topmost remaining light edge (or
    the vertex itself); the shallower entry point is the LCA."""
    lu, lv = h.light_edges[u], h.light_edges[v]
    common = lu & lv

    def entry(own: frozenset, x: int) -> tuple[int, int]:
        rest = own - common
        if not rest:
            return h.path_len[x], x
        top = min(rest, key=lambda le: le.plen_child)
        return top.plen_parent, top.parent

    eu, ev = entry(lu, u), entry(lv, v)
    return min(eu, ev)[1]


def cover_counts(t: LabeledTree, h: HeavyLightInfo, nontree: Iterable[tuple[int, int]]) -> list[int]:
    """Marked tree edges on the path of each non-tree edge: M_v + M_u − 2·M_w."""
    out = []
    for v, u in nontree:
        w = lca_light(h, v, u)
        out.append(h.marked_count[v] + h.marked_count[u] - 2 * h.marked_count[w])
    return out


# --------------------------------------------------------------------------- coverage flags


def covered_flags(t: LabeledTree, S: Sequence[tuple[int, int]], seed: int | random.Random,
                  provider: Optional[ShortcutProvider] = None,
                  rt: Optional[Runtime] = None) -> dict[int, bool]:
    """Randomised coverage test: tree edge {u, p(u)} is flagged iff the XOR of the
    identifiers of S-edges with exactly one endpoint in T_u is nonzero.

    Identifiers have 10·⌈log2 n⌉ bits and are drawn from the seeded generator in the
    order of S; zero is redrawn so an identifier never vanishes on its own.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    bits = 10 * log2_ceil(t.n)
    x = [0] * t.n
    for u, v in S:
        rid = 0
        while rid == 0:
            rid = rng.getrandbits(bits)
        x[u] ^= rid
        x[v] ^= rid
    if rt is not None and _tree_is_host_subgraph(rt, t):
        sub = _xor_convergecast(rt, t, x)
    else:
        sub = descendants_sum(t, x, XOR, provider, rt)
    return {v: sub[v] != 0 for v in range(t.n) if v != t.root}


def _tree_is_host_subgraph(rt: Runtime, t: LabeledTree) -> bool:
    return rt.graph.n == t.n and all(
        t.parent[v] in rt._nbrs[v] for v in range(t.n) if v != t.root)


def _xor_convergecast(rt: Runtime, t: LabeledTree, x: list[int]) -> list[int]:
    acc = list(x)
    waiting = [len(t.children[v]) for v in range(t.n)]
    sent = [False] * t.n

    def handler(v, r, inbox):
        for val in inbox.values():
            acc[v] ^= val
            waiting[v] -= 1
        if waiting[v] == 0 and not sent[v]:
            sent[v] = True
            if v != t.root:
                return {t.parent[v]: acc[v]}, True
        return {}, sent[v]

    run_tier0(rt, handler, "xor-convergecast")
    return acc


# --------------------------------------------------------------------------- greedy


@dataclass
class GreedyConfig:
    eps: Fraction = Fraction(1, 4)
    good_set_divisor: int = 100
    c_rep: int = 8
    rng_seed: int = 0

    def repetitions(self, n: int) -> int:
        return max(1, math.ceil(self.c_rep * math.log(n)))


def _power_at_least(base: Fraction, target: Fraction) -> int:
    """Smallest integer i with base**i >= target."""
    i = 0
    if target <= 1:
        while base ** (i - 1) >= target:
            i -= 1
        return i
    while base**i < target:
        i += 1
    return i


def _power_at_most(base: Fraction, target: Fraction) -> int:
    """Largest integer i with base**i <= target."""
    i = 0
    if target >= 1:
        while base ** (i + 1) <= target:
            i += 1
        return i
    while base**i > target:
        i -= 1
    return i


@dataclass
class GreedyTrace:
    phases: list[dict] = field(default_factory=list)
    accepted: list[dict] = field(default_factory=list)
    repetitions: int = 0
    rejected: int = 0


@dataclass
class GreedyResult:
    cover: EdgeSet
    trace: GreedyTrace


def parallel_greedy_tap(g: WeightedGraph, t: LabeledTree, cfg: GreedyConfig,
                        provider: Optional[ShortcutProvider] = None,
                        rt: Optional[Runtime] = None) -> GreedyResult:
    provider = provider or TreeNativeProvider(t)
    eps = Fraction(cfg.eps)
    if not 0 < eps < 1:
        raise ValueError("greedy epsilon must lie in (0, 1)")
    base = 1 + eps
    n = g.n
    rng = random.Random(cfg.rng_seed)
    nontree = [e for e in g.edges if e.id not in t.tree_edge_ids]
    pairs = [(e.u, e.v) for e in nontree]
    uncovered = {v for v in range(n) if v != t.root}
    chosen: list[int] = []
    trace = GreedyTrace()
    w_max = max((e.weight for e in nontree), default=1)
    hi_exp = _power_at_least(base, Fraction(n))
    lo_exp = _power_at_most(base, Fraction(1, w_max))
    reps = cfg.repetitions(n)
    sub_top = _power_at_least(base, Fraction(max(len(nontree), 1)))

    hl = heavy_light(t, uncovered, provider, rt)
    counts = cover_counts(t, hl, pairs)

    def degrees(active: list[int]) -> list[int]:
        """Number of active edges covering each tree edge: endpoints in T_v minus twice
        the edges whose LCA lies in T_v."""
        deg = [0] * n
        tops = [0] * n
        for j in active:
            u, v = pairs[j]
            deg[u] += 1
            deg[v] += 1
            tops[lca_light(hl, u, v)] += 1
        a = descendants_sum(t, deg, SUM, provider, rt)
        b = descendants_sum(t, tops, SUM, provider, rt)
        return [a[v] - 2 * b[v] for v in range(n)]

    for i in range(hi_exp, lo_exp - 1, -1):
        if not uncovered:
            break
        delta = base**i
        threshold = delta * (1 - eps)
        active = [j for j in range(len(nontree)) if counts[j] > 0
                  and Fraction(counts[j], nontree[j].weight) >= threshold]
        trace.phases.append({"i": i, "active": len(active)})
        if not active:
            continue
        for jexp in range(sub_top, -1, -1):
            d = base**jexp
            for _ in range(reps):
                active = [j for j in active if counts[j] > 0
                          and Fraction(counts[j], nontree[j].weight) >= threshold]
                if not active or not uncovered:
                    break
                deg = degrees(active)
                if max(deg[v] for v in uncovered) < d * (1 - eps):
                    break
                trace.repetitions += 1
                p = 1 / (2 * d)
                sample = [j for j in active if rng.random() < p]
                if not sample:
                    continue
                flags = covered_flags(t, [pairs[j] for j in sample], rng, provider, rt)
                newly = {v for v in uncovered if flags[v]}
                weight = sum(nontree[j].weight for j in sample)
                if rt is not None:
                    rt.charge("global-aggregate", rt.diameter)
                if Fraction(len(newly), weight) * cfg.good_set_divisor >= delta:
                    chosen.extend(nontree[j].id for j in sample)
                    uncovered -= newly
                    trace.accepted.append({"delta": delta, "d": d, "size": len(sample),
                                           "newly": len(newly), "weight": weight,
                                           "remaining": len(uncovered)})
                    hl = heavy_light(t, uncovered, provider, rt)
                    counts = cover_counts(t, hl, pairs)
                else:
                    trace.rejected += 1
            if not uncovered:
                break
    if uncovered:
        raise IntegrityError(f"greedy ended with {len(uncovered)} uncovered tree edges")
    return GreedyResult(EdgeSet.of(g, chosen), trace)


@dataclass
class ShortcutRun:
    edges: EdgeSet
    mst: EdgeSet
    augmentation: EdgeSet
    tree: LabeledTree
    trace: GreedyTrace
    quality: ShortcutQuality
    runtime: Runtime


def run_shortcut_log(g: WeightedGraph, eps, provider: str = "tree-native", seed: int = 0,
                     rt: Optional[Runtime] = None) -> ShortcutRun:
    if not is_two_edge_connected(g):
        raise NotTwoEdgeConnectedError("input graph is not 2-edge-connected")
    rt = rt or Runtime(g)
    mst, _ = boruvka_mst(rt)
    t = root_tree(g, mst, 0)
    prov = make_provider(provider, g, t, rt)
    res = parallel_greedy_tap(g, t, GreedyConfig(eps=Fraction(eps), rng_seed=seed), prov, rt)
    tools = _tools(t, prov)
    q = max(tools.quality, key=lambda q: q.sc, default=ShortcutQuality(1, 0, 0))
    total = EdgeSet.of(g, mst.member_ids | res.cover.member_ids)
    return ShortcutRun(total, mst, res.cover, t, res.trace, q, rt)


def shortcut_2ecss_log(g: WeightedGraph, eps, provider: str = "tree-native", seed: int = 0,
                       rt: Optional[Runtime] = None) -> EdgeSet:
    return run_shortcut_log(g, eps, provider, seed, rt).edges
