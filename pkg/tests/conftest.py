import random

import pytest
from hypothesis import HealthCheck, settings

from ecss.decomposition import build_segments, compute_layers
from ecss.graph import WeightedGraph, generate, mst_kruskal
from ecss.tree import root_tree
from ecss.virtual import build_virtual_graph

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def graph1(n, triples):
    """Build a graph from 1-based (u, v, w) triples; edge ids follow list order."""
    return WeightedGraph.from_triples(n, [(u - 1, v - 1, w) for u, v, w in triples])


def random_tree_graph(rng: random.Random, n: int, extra: int = 0, wmax: int = 5):
    """Random labelled tree (edge ids 0..n-2) plus `extra` random non-tree chords."""
    triples = [(rng.randrange(v), v, 1) for v in range(1, n)]
    present = {(min(a, b), max(a, b)) for a, b, _ in triples}
    for _ in range(extra):
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b and (min(a, b), max(a, b)) not in present:
            present.add((min(a, b), max(a, b)))
            triples.append((a, b, rng.randint(1, wmax)))
    return WeightedGraph.from_triples(n, triples)


def tree_of(g):
    """The tree formed by the first n-1 edge ids (as built by random_tree_graph)."""
    return root_tree(g, frozenset(range(g.n - 1)), 0)


class Parts:
    def __init__(self, g):
        self.g = g
        self.mst = mst_kruskal(g)
        self.tree = root_tree(g, self.mst, 0)
        self.inst = build_virtual_graph(g, self.tree)
        self.lay = compute_layers(self.tree)
        self.seg = build_segments(self.tree)


def parts(g):
    return Parts(g)


def random_instance(seed: int, n_lo=4, n_hi=10, extra_hi=6, wmax=5):
    rng = random.Random(seed)
    n = rng.randint(n_lo, n_hi)
    return generate("random2ec", {"n": n, "extra": rng.randint(1, extra_hi), "wmax": wmax}, seed)


@pytest.fixture
def path_f123():
    """Path 1-2-3-4 (edge ids 0..2) plus f1={1,3} w1, f2={2,4} w1, f3={1,4} w3."""
    return graph1(4, [(1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 3, 1), (2, 4, 1), (1, 4, 3)])


@pytest.fixture
def c4():
    return generate("cycle", {"n": 4}, 0)


@pytest.fixture
def theta():
    return graph1(3, [(1, 2, 1), (1, 3, 1), (2, 3, 5)])


# One verdict line per acceptance criterion, printed after the run whatever the capture mode.
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
