"""Primal-dual weighted tree augmentation on G′ and the end-to-end 2-ECSS pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .aggregates import MIN, SUM
from .congest import Runtime, boruvka_mst, log_star, sqrt_ceil
from .decomposition import (
    Layering,
    Petals,
    SegmentDecomposition,
    agg_nontree,
    agg_tree,
    build_segments,
    compute_layers,
    compute_petals,
)
from .graph import EdgeSet, WeightedGraph, is_two_edge_connected
from .tree import LabeledTree, root_tree
from .virtual import VirtualEdge, VirtualTapInstance, build_virtual_graph, project_to_original

VARIANTS = ("base4", "improved2")
COVER_FACTOR = {"base4": 4, "improved2": 2}


class IntegrityError(RuntimeError):
    """An algorithmic invariant failed; indicates a bug or an infeasible input."""


class NotTwoEdgeConnectedError(ValueError):
    pass


@dataclass
class DualState:
    y: dict[int, Fraction]
    s: dict[VirtualEdge, Fraction]
    A: dict[VirtualEdge, int]  # member -> epoch tag k
    R: dict[int, frozenset[int]]
    F: dict[int, frozenset[int]]
    first_cover_epoch: dict[int, int]
    epsilon_prime: Fraction
    iterations: dict[int, int] = field(default_factory=dict)

    def A_k(self, k: int) -> set[VirtualEdge]:
        return {e for e, tag in self.A.items() if tag == k}

    def dual_value(self) -> Fraction:
        return sum(self.y.values(), Fraction(0))


def _cover_counts(inst: VirtualTapInstance, seg: SegmentDecomposition,
                  edges: Iterable[VirtualEdge]) -> dict[int, int]:
    return agg_nontree(inst, seg, SUM, {e: 1 for e in edges})


def forward_phase(inst: VirtualTapInstance, lay: Layering, seg: SegmentDecomposition,
                  eps_prime, rt: Optional[Runtime] = None) -> DualState:
    eps_prime = Fraction(eps_prime)
    if eps_prime <= 0:
        raise ValueError("eps_prime must be positive")
    t = inst.tree
    children = [v for v in t.preorder if v != t.root]
    y = {c: Fraction(0) for c in children}
    A: dict[VirtualEdge, int] = {}
    first: dict[int, int] = {}
    R: dict[int, frozenset[int]] = {}
    iterations: dict[int, int] = {}
    growth = 1 + eps_prime

    def add_tight(s_vals, k):
        for e, val in s_vals.items():
            if e not in A and val >= e.weight:
                A[e] = k

    def refresh_cover(k):
        cnt = _cover_counts(inst, seg, A)
        for c in children:
            if cnt[c] > 0 and c not in first:
                first[c] = k
        return cnt

    for k in range(1, lay.layer_count + 1):
        outside = [e for e in inst.virtual_edges if e not in A]
        s_now = agg_tree(inst, seg, SUM, y, outside)
        add_tight(s_now, k)  # guard against a zero minimum from an unadded tight edge
        cnt = refresh_cover(k)
        R_k = frozenset(c for c in children if lay.layer[c] == k and cnt[c] == 0)
        R[k] = R_k
        iterations[k] = 0
        if not R_k:
            continue
        outside = [e for e in inst.virtual_edges if e not in A]
        s_now = {e: s_now[e] for e in outside}
        sk = agg_tree(inst, seg, SUM, {c: 1 for c in R_k}, outside)
        ratios = {e: (e.weight - s_now[e]) / sk[e] for e in outside if sk[e] > 0}
        best = agg_nontree(inst, seg, MIN, ratios)
        for c in R_k:
            if best[c] is None:
                raise IntegrityError(f"tree edge {c} has no covering edge")
            y[c] = best[c]
        while True:
            iterations[k] += 1
            if rt is not None:
                rt.charge("forward-iteration", rt.base_cost())
            s_now = agg_tree(inst, seg, SUM, y, [e for e in inst.virtual_edges if e not in A])
            add_tight(s_now, k)
            cnt = refresh_cover(k)
            remaining = [c for c in R_k if cnt[c] == 0]
            if not remaining:
                break
            for c in remaining:
                y[c] *= growth
    s_final = agg_tree(inst, seg, SUM, y)
    F: dict[int, frozenset[int]] = {}
    for k in range(1, lay.layer_count + 1):
        F[k] = frozenset(c for c, ep in first.items() if ep == k)
    if len(first) != len(children):
        raise IntegrityError("forward phase ended with uncovered tree edges")
    return DualState(y, s_final, A, R, F, first, eps_prime, iterations)


def iteration_bound(n: int, eps_prime) -> int:
    """Per-epoch cap: ceil(log_{1+eps'} n) + 2."""
    return math.ceil(math.log(n) / math.log(1 + float(eps_prime))) + 2


# --------------------------------------------------------------------------- MIS on G_i


@dataclass
class MisResult:
    anchors: list[tuple[int, str]]  # (tree-edge child, "global" | "local")
    global_set: list[int]
    petals: Petals


def _covers(t: LabeledTree, e: VirtualEdge, c: int) -> bool:
    return t.is_ancestor(e.anc, t.parent[c]) and t.is_ancestor(c, e.dec)


def mis_on_Gi(inst: VirtualTapInstance, lay: Layering, seg: SegmentDecomposition,
              X: Iterable[VirtualEdge], H_tilde: Iterable[int], both_petals: bool = True,
              petals: Optional[Petals] = None, rt: Optional[Runtime] = None) -> MisResult:
    """Anchors for one reverse-delete iteration: a global MIS over the highway extremes,
    then a bottom-up scan of every layer path. The scan carries the reach of the last
    local anchor's higher petal across segment boundaries, so two local anchors never
    share a coverer.

    With both_petals=False (improved variant) anchors only contribute their higher petal,
    which is also what the local scan propagates.
    """
    t = inst.tree
    ht = set(H_tilde)
    if not ht:
        return MisResult([], [], petals or Petals({}, {}, frozenset(X), 0))
    i = lay.layer[next(iter(ht))]
    if petals is None:
        petals = compute_petals(inst, lay, X, i)
    for c in ht:
        if c not in petals.higher:
            raise IntegrityError(f"tree edge {c} in layer {i} is not covered by X")

    def contributed(c):
        if both_petals:
            return {petals.higher[c], petals.lower[c]}
        return {petals.higher[c]}

    # global part: extremes of each highway inside H̃_i
    t_prime = []
    for sg in seg.segments:
        on_hw = [c for c in sg.highway_children if c in ht]
        if on_hw:
            t_prime.append((sg.segment_id, t.depth[on_hw[0]], t.host_edge[on_hw[0]], on_hw[0]))
            if on_hw[-1] != on_hw[0]:
                t_prime.append((sg.segment_id, t.depth[on_hw[-1]], t.host_edge[on_hw[-1]], on_hw[-1]))
    t_prime.sort()

    def adjacent(a, b):
        return (_covers(t, petals.higher[a], b) or _covers(t, petals.higher[b], a)
                or _covers(t, petals.lower[a], b) or _covers(t, petals.lower[b], a))

    global_set: list[int] = []
    for *_, c in t_prime:
        if all(not adjacent(c, g) for g in global_set):
            global_set.append(c)
    added: set[VirtualEdge] = set()
    for c in global_set:
        added |= contributed(c)

    # coverage after the global part, restricted to H̃_i (the only edges that may anchor)
    gcount = _cover_counts(inst, seg, added) if added else {}
    global_cover = {c for c in ht if gcount.get(c, 0) > 0}
    gset = set(global_set)
    local: list[int] = []
    for pid, path in enumerate(lay.paths):
        if lay.path_layer[pid] != i:
            continue
        if not any(c in ht for c in path):
            continue
        best_anc = None
        for c in path:
            p = t.parent[c]
            if best_anc is not None and t.is_ancestor(best_anc, p):
                continue
            if c not in ht or c in global_cover or c in gset:
                continue
            local.append(c)
            best_anc = petals.higher[c].anc
    for c in local:
        added |= contributed(c)
    anchors = [(c, "global") for c in global_set] + [(c, "local") for c in local]
    if rt is not None:
        rt.charge("mis-iteration", rt.base_cost())
    return MisResult(anchors, global_set, petals)


# --------------------------------------------------------------------------- reverse delete


@dataclass
class IterationTrace:
    epoch: int
    layer: int
    X: frozenset[VirtualEdge]
    H_tilde: frozenset[int]
    anchors: list[tuple[int, str]]


@dataclass
class ReverseState:
    B: frozenset[VirtualEdge]
    variant: str
    trace: list[IterationTrace] = field(default_factory=list)
    cleaned: dict[int, list[VirtualEdge]] = field(default_factory=dict)

    def weight(self) -> int:
        return sum(e.weight for e in self.B)


def _reverse_delete(inst: VirtualTapInstance, lay: Layering, seg: SegmentDecomposition,
                    ds: DualState, variant: str, rt: Optional[Runtime] = None,
                    keep_trace: bool = True) -> ReverseState:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    improved = variant == "improved2"
    L = lay.layer_count
    B: set[VirtualEdge] = set()
    trace: list[IterationTrace] = []
    cleaned: dict[int, list[VirtualEdge]] = {}
    for k in range(L, 0, -1):
        X = frozenset(B | ds.A_k(k))
        F = {c for c, ep in ds.first_cover_epoch.items() if ep >= k}
        Y: set[VirtualEdge] = set()
        global_anchors: list[int] = []
        for i in range(k, L + 1):
            if rt is not None:
                rt.charge("reverse-iteration", rt.base_cost())
            H_i = [c for c in F if lay.layer[c] == i]
            if not H_i:
                continue
            cnt = _cover_counts(inst, seg, Y)
            ht = frozenset(c for c in H_i if cnt[c] == 0)
            if not ht:
                continue
            petals = compute_petals(inst, lay, X, i)
            res = mis_on_Gi(inst, lay, seg, X, ht, both_petals=not improved, petals=petals)
            for c, tag in res.anchors:
                Y.add(petals.higher[c])
                if not improved:
                    Y.add(petals.lower[c])
                if tag == "global":
                    global_anchors.append(c)
            if keep_trace:
                trace.append(IterationTrace(k, i, X, ht, res.anchors))
        if improved:
            removed = _cleaning(inst, seg, ds.R.get(k, frozenset()), Y, global_anchors, X, lay, k)
            cleaned[k] = removed
            Y.difference_update(removed)
            if rt is not None:
                rt.charge("cleaning", rt.base_cost())
        cnt = _cover_counts(inst, seg, Y)
        lost = [c for c in F if cnt[c] == 0]
        if lost:
            raise IntegrityError(f"epoch {k}: {len(lost)} tree edges of F left uncovered")
        limit = COVER_FACTOR[variant]
        over = [c for c in ds.R.get(k, ()) if cnt[c] > limit]
        if over:
            raise IntegrityError(f"epoch {k}: edges covered more than {limit} times")
        B = Y
    return ReverseState(frozenset(B), variant, trace, cleaned)


def _cleaning(inst, seg, R_k, Y, global_anchors, X, lay, k) -> list[VirtualEdge]:
    """For each t in R_k covered exactly 3 times, drop the higher petal of the global
    anchor below t that covers it. Removals are decided on the pre-cleaning Y."""
    t = inst.tree
    cnt = _cover_counts(inst, seg, Y)
    # higher petal of each global anchor, with respect to X in the anchor's layer
    by_layer: dict[int, Petals] = {}
    petal_of: dict[int, VirtualEdge] = {}
    for a in global_anchors:
        i = lay.layer[a]
        if i not in by_layer:
            by_layer[i] = compute_petals(inst, lay, X, i)
        petal_of[a] = by_layer[i].higher[a]
    removed: set[VirtualEdge] = set()
    for c in R_k:
        if cnt[c] != 3:
            continue
        below = [a for a in global_anchors
                 if a != c and t.is_ancestor(c, a) and _covers(t, petal_of[a], c)
                 and petal_of[a] in Y]
        if len(below) != 1:
            raise IntegrityError(f"tree edge {c} is covered 3 times without the expected pattern")
        removed.add(petal_of[below[0]])
    return sorted(removed, key=lambda e: e.key)


def reverse_delete_base(inst, lay, seg, ds, rt=None, keep_trace=True) -> ReverseState:
    return _reverse_delete(inst, lay, seg, ds, "base4", rt, keep_trace)


def reverse_delete_improved(inst, lay, seg, ds, rt=None, keep_trace=True) -> ReverseState:
    return _reverse_delete(inst, lay, seg, ds, "improved2", rt, keep_trace)


@dataclass
class UnweightedResult:
    cover: frozenset[VirtualEdge]
    mis: list[int]
    trace: list[IterationTrace]


def unweighted_tap(inst: VirtualTapInstance, lay: Layering, seg: SegmentDecomposition,
                   rt: Optional[Runtime] = None) -> UnweightedResult:
    X = frozenset(inst.virtual_edges)
    Y: set[VirtualEdge] = set()
    mis: list[int] = []
    trace = []
    for i in range(1, lay.layer_count + 1):
        cnt = _cover_counts(inst, seg, Y)
        ht = frozenset(c for c in lay.edges_in_layer(i) if cnt[c] == 0)
        if rt is not None:
            rt.charge("unweighted-iteration", rt.base_cost())
        if not ht:
            continue
        petals = compute_petals(inst, lay, X, i)
        res = mis_on_Gi(inst, lay, seg, X, ht, both_petals=True, petals=petals)
        for c, _ in res.anchors:
            Y.add(petals.higher[c])
            Y.add(petals.lower[c])
            mis.append(c)
        trace.append(IterationTrace(0, i, X, ht, res.anchors))
    return UnweightedResult(frozenset(Y), mis, trace)


# --------------------------------------------------------------------------- pipeline


def epsilon_prime_for(eps, variant: str) -> Fraction:
    """ε′ = ε/(2c), so that 1 + 2c(1+ε′) = (2c+1) + ε end to end."""
    return Fraction(eps) / (2 * COVER_FACTOR[variant])


@dataclass
class PipelineResult:
    edges: EdgeSet
    mst: EdgeSet
    augmentation: EdgeSet
    instance: VirtualTapInstance
    layering: Layering
    segments: SegmentDecomposition
    dual: DualState
    reverse: ReverseState
    runtime: Runtime


def run_approximation(g: WeightedGraph, eps, variant: str = "improved2",
                      rt: Optional[Runtime] = None, keep_trace: bool = False) -> PipelineResult:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if not is_two_edge_connected(g):
        raise NotTwoEdgeConnectedError("input graph is not 2-edge-connected")
    rt = rt or Runtime(g)
    mst, _ = boruvka_mst(rt)
    tree = root_tree(g, mst, 0)
    inst = build_virtual_graph(g, tree)
    rt.charge("virtual-graph", _labels_cost(rt))
    lay = compute_layers(tree, rt)
    seg = build_segments(tree, rt)
    ds = forward_phase(inst, lay, seg, epsilon_prime_for(eps, variant), rt)
    rev = _reverse_delete(inst, lay, seg, ds, variant, rt, keep_trace)
    aug = project_to_original(inst, rev.B)
    total = EdgeSet.of(g, mst.member_ids | aug.member_ids)
    return PipelineResult(total, mst, aug, inst, lay, seg, ds, rev, rt)


def _labels_cost(rt: Runtime) -> int:
    return rt.diameter + sqrt_ceil(rt.n) * log_star(rt.n)


def approximate_2ecss(g: WeightedGraph, eps, variant: str = "improved2",
                      rt: Optional[Runtime] = None) -> EdgeSet:
    return run_approximation(g, eps, variant, rt).edges
