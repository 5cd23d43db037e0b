"""The virtual graph G′: every non-tree edge becomes one or two ancestor-descendant edges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .graph import EdgeSet, WeightedGraph
from .tree import LabeledTree, lca

HALF_RANK = {"left": 0, "right": 1, "whole": 2}


class CoverIntegrityError(RuntimeError):
    pass


@dataclass(frozen=True)
class VirtualEdge:
    anc: int
    dec: int
    weight: int
    origin_edge_id: int
    half: str  # "whole", "left" or "right"

    @property
    def key(self) -> tuple[int, int]:
        """Stable identity: origin edge plus half rank."""
        return (self.origin_edge_id, HALF_RANK[self.half])


@dataclass
class VirtualTapInstance:
    graph: WeightedGraph
    tree: LabeledTree
    virtual_edges: list[VirtualEdge]
    _covers_index: dict[int, list[int]] | None = field(default=None, repr=False)

    def span(self, e: VirtualEdge) -> int:
        return self.tree.depth[e.dec] - self.tree.depth[e.anc]

    def covered_children(self, e: VirtualEdge) -> list[int]:
        return self.tree.path_children(e.anc, e.dec)

    def covers_index(self) -> dict[int, list[int]]:
        """tree-edge child -> indices of virtual edges covering it (built eagerly, once)."""
        if self._covers_index is None:
            idx: dict[int, list[int]] = {v: [] for v in range(self.tree.n) if v != self.tree.root}
            for i, e in enumerate(self.virtual_edges):
                for c in self.covered_children(e):
                    idx[c].append(i)
            self._covers_index = idx
        return self._covers_index


def build_virtual_graph(g: WeightedGraph, t: LabeledTree) -> VirtualTapInstance:
    out: list[VirtualEdge] = []
    for e in g.edges:
        if e.id in t.tree_edge_ids:
            continue
        u, v = e.u, e.v
        if t.is_ancestor(u, v):
            out.append(VirtualEdge(u, v, e.weight, e.id, "whole"))
        elif t.is_ancestor(v, u):
            out.append(VirtualEdge(v, u, e.weight, e.id, "whole"))
        else:
            w = lca(t, u, v)
            # both endpoints differ from w here, so neither half is degenerate
            out.append(VirtualEdge(w, u, e.weight, e.id, "left"))
            out.append(VirtualEdge(w, v, e.weight, e.id, "right"))
    return VirtualTapInstance(g, t, out)


def uncovered_children(inst: VirtualTapInstance, cover: Iterable[VirtualEdge]) -> list[int]:
    t = inst.tree
    cnt = [0] * t.n
    for e in cover:
        cnt[e.dec] += 1
        cnt[e.anc] -= 1
    for v in reversed(t.preorder):
        if v != t.root:
            cnt[t.parent[v]] += cnt[v]
    return [v for v in t.preorder if v != t.root and cnt[v] <= 0]


def project_to_original(inst: VirtualTapInstance, cover: Iterable[VirtualEdge]) -> EdgeSet:
    cover = list(cover)
    missing = uncovered_children(inst, cover)
    if missing:
        raise CoverIntegrityError(f"cover leaves {len(missing)} tree edges uncovered")
    return EdgeSet.of(inst.graph, {e.origin_edge_id for e in cover})


def virtual_weight(cover: Iterable[VirtualEdge]) -> int:
    return sum(e.weight for e in cover)
