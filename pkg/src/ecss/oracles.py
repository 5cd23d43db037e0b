"""Exact small-instance solvers and structural verifiers.

These deliberately avoid the tree labels and aggregate machinery they audit: tree paths
are re-derived from a private parent map by explicit walks.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .graph import WeightedGraph


class BudgetExceeded(RuntimeError):
    """The instance is past the oracle's enumeration budget; no answer is given."""


@dataclass(frozen=True)
class OracleBudget:
    max_nontree_edges: int = 18
    max_vertices_2ecss: int = 8
    max_edges_2ecss: int = 20
    time_cap_seconds: int = 60


DEFAULT_BUDGET = OracleBudget()


def parent_map(g: WeightedGraph, tree_edge_ids: Iterable[int], root: int = 0) -> dict[int, int]:
    adj: dict[int, list[int]] = {v: [] for v in range(g.n)}
    for eid in tree_edge_ids:
        e = g.edges[eid]
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    par = {root: -1}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in par:
                par[y] = x
                queue.append(y)
    return par


def root_path(par: dict[int, int], v: int) -> list[int]:
    out = [v]
    while par[out[-1]] != -1:
        out.append(par[out[-1]])
    return out


def path_edges(par: dict[int, int], u: int, v: int) -> set[int]:
    """Tree edges (by child vertex) on the tree path between u and v."""
    pu, pv = root_path(par, u), root_path(par, v)
    common = set(pu) & set(pv)
    out = set()
    for p in (pu, pv):
        for x in p:
            if x in common:
                break
            out.add(x)
    return out


def _tree_of(obj):
    """(graph, tree edge ids, root) from a VirtualTapInstance or a LabeledTree + graph pair."""
    if hasattr(obj, "virtual_edges"):
        return obj.graph, obj.tree.tree_edge_ids, obj.tree.root
    raise TypeError("expected a VirtualTapInstance")


# --------------------------------------------------------------------------- set cover


def exact_set_cover(universe: Sequence[int], sets: Sequence[frozenset], weights: Sequence[int],
                    budget: OracleBudget = DEFAULT_BUDGET) -> tuple[int, list[int]]:
    """Minimum-weight cover by branch and bound: branch on the uncovered element with the
    fewest candidate sets, prune against the incumbent."""
    if len(sets) > budget.max_nontree_edges:
        raise BudgetExceeded(f"{len(sets)} candidates > {budget.max_nontree_edges}")
    deadline = time.monotonic() + budget.time_cap_seconds
    holders: dict[int, list[int]] = {x: [] for x in universe}
    for j, s in enumerate(sets):
        for x in s:
            if x in holders:
                holders[x].append(j)
    for x, hs in holders.items():
        if not hs:
            raise ValueError(f"element {x} cannot be covered")
        hs.sort(key=lambda j: weights[j])
    best_w = sum(weights) + 1
    best: list[int] = []
    chosen: list[int] = []

    def rec(uncovered: frozenset, w: int):
        nonlocal best_w, best
        if time.monotonic() > deadline:
            raise BudgetExceeded("time cap reached")
        if not uncovered:
            if w < best_w:
                best_w, best = w, list(chosen)
            return
        # cheapest way to cover the most constrained element bounds the remaining cost
        x = min(uncovered, key=lambda z: (len(holders[z]), z))
        if w + weights[holders[x][0]] >= best_w:
            return
        for j in holders[x]:
            if w + weights[j] >= best_w:
                break
            chosen.append(j)
            rec(uncovered - sets[j], w + weights[j])
            chosen.pop()

    rec(frozenset(universe), 0)
    return best_w, sorted(best)


def exact_tap(inst, budget: OracleBudget = DEFAULT_BUDGET, unit_weights: bool = False):
    """OPT of TAP on the virtual instance: (weight, optimal list of virtual edges).

    With unit_weights every candidate costs 1, giving the cardinality optimum."""
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    universe = sorted(v for v in par if v != root)
    cands = list(inst.virtual_edges)
    sets = []
    for e in cands:
        walk = set()
        v = e.dec
        while v != e.anc:
            walk.add(v)
            v = par[v]
        sets.append(frozenset(walk))
    w, idx = exact_set_cover(universe, sets, [1 if unit_weights else e.weight for e in cands], budget)
    return w, [cands[j] for j in idx]


def exact_tap_original(g: WeightedGraph, tree_edge_ids: Iterable[int], root: int = 0,
                       budget: OracleBudget = DEFAULT_BUDGET) -> tuple[int, list[int]]:
    """OPT of TAP in G itself: (weight, optimal list of non-tree edge ids)."""
    tids = frozenset(tree_edge_ids)
    par = parent_map(g, tids, root)
    universe = sorted(v for v in par if v != root)
    cands = [e for e in g.edges if e.id not in tids]
    sets = [frozenset(path_edges(par, e.u, e.v)) for e in cands]
    w, idx = exact_set_cover(universe, sets, [e.weight for e in cands], budget)
    return w, [cands[j].id for j in idx]


# --------------------------------------------------------------------------- 2-ECSS


def _two_ec(n: int, edges: list[tuple[int, int]]) -> bool:
    """Connected and bridgeless, by deleting each edge and re-testing connectivity."""

    def connected(skip: int) -> bool:
        adj: list[list[int]] = [[] for _ in range(n)]
        for j, (a, b) in enumerate(edges):
            if j != skip:
                adj[a].append(b)
                adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == n

    if not connected(-1):
        return False
    return all(connected(j) for j in range(len(edges)))


def exact_2ecss(g: WeightedGraph, budget: OracleBudget = DEFAULT_BUDGET) -> tuple[int, list[int]]:
    """Minimum-weight 2-edge-connected spanning subgraph by include/exclude search."""
    if g.n > budget.max_vertices_2ecss and g.m > budget.max_edges_2ecss:
        raise BudgetExceeded(f"n={g.n}, m={g.m} past the 2-ECSS budget")
    pairs = [(e.u, e.v) for e in g.edges]
    if not _two_ec(g.n, pairs):
        raise ValueError("graph is not 2-edge-connected")
    deadline = time.monotonic() + budget.time_cap_seconds
    order = sorted(range(g.m), key=lambda j: (-g.edges[j].weight, j))
    weight = [g.edges[j].weight for j in range(g.m)]
    best_w = sum(weight)
    best = list(range(g.m))

    def rec(pos: int, kept: list[int], kept_w: int):
        nonlocal best_w, best
        if time.monotonic() > deadline:
            raise BudgetExceeded("time cap reached")
        if kept_w >= best_w:
            return
        if pos == len(order):
            if kept_w < best_w:
                best_w, best = kept_w, sorted(kept)
            return
        j = order[pos]
        rest = order[pos + 1:]
        # exclude j if the remaining edges can still form a 2-ECSS
        cand = kept + rest
        if _two_ec(g.n, [pairs[x] for x in cand]):
            rec(pos + 1, kept, kept_w)
        if kept_w + weight[j] < best_w:
            kept.append(j)
            rec(pos + 1, kept, kept_w + weight[j])
            kept.pop()

    rec(0, [], 0)
    return best_w, best


# --------------------------------------------------------------------------- verifiers


def coverage_counts(inst, cover: Iterable) -> dict[int, int]:
    """Multiplicity with which each tree edge (by child vertex) is covered, by explicit walks."""
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    cnt = {v: 0 for v in par if v != root}
    for e in cover:
        v = e.dec
        while v != e.anc:
            cnt[v] += 1
            v = par[v]
    return cnt


def conflict_graph(inst, X: Iterable, H_tilde: Iterable[int]) -> dict[int, set[int]]:
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    nodes = set(H_tilde)
    adj: dict[int, set[int]] = {c: set() for c in nodes}
    for e in X:
        hit = []
        v = e.dec
        while v != e.anc:
            if v in nodes:
                hit.append(v)
            v = par[v]
        for a in hit:
            for b in hit:
                if a != b:
                    adj[a].add(b)
    return adj


def mis_violations(inst, X: Iterable, H_tilde: Iterable[int], anchors) -> list[str]:
    """Reasons the anchor set fails to be an MIS of G_i (empty when it is one).

    `anchors` is either a collection of tree-edge children or of (child, tag) pairs. With
    tags, an adjacent pair is tolerated only when a global anchor sits above a local one.
    """
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    adj = conflict_graph(inst, X, H_tilde)
    anchors = list(anchors)
    tagged = bool(anchors) and isinstance(anchors[0], tuple)
    tags = dict(anchors) if tagged else {a: None for a in anchors}
    problems = []
    for a in tags:
        if a not in adj:
            problems.append(f"anchor {a} is not in H~_i")
    members = [a for a in tags if a in adj]
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if b not in adj[a]:
                continue
            if not tagged:
                problems.append(f"anchors {a} and {b} share a covering edge")
                continue
            upper, lower = (a, b) if b in _descendants_via(par, a, b) else (b, a)
            if not (tags[upper] == "global" and tags[lower] == "local"):
                problems.append(f"anchors {a} and {b} are adjacent with tags "
                                f"{tags[upper]} above {tags[lower]}")
    mset = set(members)
    for c in adj:
        if c not in mset and not (adj[c] & mset):
            problems.append(f"tree edge {c} has no anchor neighbour")
    return problems


def _descendants_via(par: dict[int, int], a: int, b: int) -> set[int]:
    """{b} if the edge with child b lies strictly below the edge with child a, else empty."""
    return {b} if a in root_path(par, b)[1:] else set()


def verify_mis(inst, X: Iterable, H_tilde: Iterable[int], anchors) -> bool:
    return not mis_violations(inst, X, H_tilde, anchors)


@dataclass
class DualAudit:
    violations: list[str] = field(default_factory=list)
    dual_sum: Fraction = Fraction(0)

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_dual(ds, inst, eps_prime, B: Optional[Iterable] = None, c: Optional[int] = None,
               opt: Optional[int] = None) -> DualAudit:
    eps_prime = Fraction(eps_prime)
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    report = DualAudit()
    y = ds.y
    report.dual_sum = sum(y.values(), Fraction(0))
    s: dict = {}
    for e in inst.virtual_edges:
        total = Fraction(0)
        v = e.dec
        while v != e.anc:
            total += y.get(v, 0)
            v = par[v]
        s[e] = total
        if ds.s.get(e) != total:
            report.violations.append(f"s({e.key}) recorded {ds.s.get(e)} but recomputed {total}")
        if total > (1 + eps_prime) * e.weight:
            report.violations.append(f"s({e.key}) = {total} exceeds (1+eps')w = "
                                     f"{(1 + eps_prime) * e.weight}")
    for e in ds.A:
        if s.get(e, Fraction(0)) < e.weight:
            report.violations.append(f"A member {e.key} is not tight")
    for t, val in y.items():
        if val < 0:
            report.violations.append(f"y({t}) is negative")
        if val > 0:
            homes = [k for k, Rk in ds.R.items() if t in Rk]
            if len(homes) != 1:
                report.violations.append(f"y({t}) > 0 but t lies in {len(homes)} sets R_k")
    if B is not None and c is not None:
        B = list(B)
        wB = sum(e.weight for e in B)
        paid = sum((s[e] for e in B), Fraction(0))
        if wB > paid:
            report.violations.append(f"weight(B) = {wB} exceeds its payment {paid}")
        if paid > c * report.dual_sum:
            report.violations.append(f"payment {paid} exceeds {c}*sum(y) = {c * report.dual_sum}")
        if opt is not None and c * report.dual_sum > c * (1 + eps_prime) * opt:
            report.violations.append("c*sum(y) exceeds c(1+eps')OPT")
    return report


def petal_violations(inst, lay, X: Iterable, i: int, petals) -> list[str]:
    """Brute-force check that each layer-i edge's petals cover its X-neighbours in layers >= i."""
    g, tids, root = _tree_of(inst)
    par = parent_map(g, tids, root)
    X = list(X)
    walks = []
    for e in X:
        w = set()
        v = e.dec
        while v != e.anc:
            w.add(v)
            v = par[v]
        walks.append(w)
    problems = []
    for c in range(g.n):
        if c == root or lay.layer[c] != i:
            continue
        covering = [j for j, w in enumerate(walks) if c in w]
        if not covering:
            if c in petals.higher:
                problems.append(f"edge {c} has a petal but no X edge covers it")
            continue
        hi, lo = petals.higher.get(c), petals.lower.get(c)
        if hi is None or lo is None:
            problems.append(f"edge {c} is covered by X but lacks petals")
            continue
        hw = walks[X.index(hi)]
        lw = walks[X.index(lo)]
        if c not in hw or c not in lw:
            problems.append(f"petal of {c} does not cover it")
        nbrs = set()
        for j in covering:
            nbrs |= {x for x in walks[j] if lay.layer[x] >= i}
        missing = nbrs - hw - lw
        if missing:
            problems.append(f"petals of {c} miss neighbours {sorted(missing)}")
    return problems
