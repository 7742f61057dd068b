import itertools

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from privcon.graph import WeightedDigraph, is_strongly_connected, is_weight_balanced

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def cycle_union(n: int, cycles, weights) -> np.ndarray:
    """Sum of weighted directed cycles; always weight-balanced."""
    w = np.zeros((n, n))
    for cyc, a in zip(cycles, weights):
        for u, v in zip(cyc, cyc[1:] + cyc[:1]):
            w[u, v] += a
    return w


@st.composite
def balanced_digraphs(draw, min_n=2, max_n=5, unit=None, undirected=False):
    """Strongly connected weight-balanced digraphs.

    A Hamiltonian cycle over a random permutation guarantees strong
    connectivity; extra cycles keep the graph balanced. ``unit=True`` keeps
    only edge-disjoint cycles of weight 1.
    """
    n = draw(st.integers(min_n, max_n))
    if unit is None:
        unit = draw(st.booleans())
    perm = draw(st.permutations(range(n)))
    cycles = [list(perm)]
    n_extra = draw(st.integers(0, 4))
    for _ in range(n_extra):
        size = draw(st.integers(2, n))
        cyc = draw(st.permutations(range(n)))[:size]
        cycles.append(list(cyc))
    if unit:
        used = set()
        kept = []
        for cyc in cycles:
            es = set(zip(cyc, cyc[1:] + cyc[:1]))
            if es & used:
                continue
            used |= es
            kept.append(cyc)
        cycles, weights = kept, [1.0] * len(kept)
    else:
        weights = [draw(st.floats(0.2, 3.0)) for _ in cycles]
    w = cycle_union(n, cycles, weights)
    if undirected:
        w = w + w.T
    return WeightedDigraph(w)


def sample_topologies(count: int, seed: int = 0, max_n: int = 5):
    """Deterministic mix of unit and random-weight balanced digraphs with 2..max_n nodes.

    Includes every unit-weight balanced strongly connected digraph on 3 nodes.
    """
    out = []
    for bits in itertools.product([0, 1], repeat=6):
        w = np.zeros((3, 3))
        for b, (i, j) in zip(bits, [(i, j) for i in range(3) for j in range(3) if i != j]):
            w[i, j] = b
        g = WeightedDigraph(w)
        if is_weight_balanced(g) and is_strongly_connected(g):
            out.append(g)
    rng = np.random.default_rng(seed)
    while len(out) < count:
        n = int(rng.integers(2, max_n + 1))
        cycles = [list(rng.permutation(n))]
        for _ in range(int(rng.integers(0, 5))):
            size = int(rng.integers(2, n + 1))
            cycles.append(list(rng.permutation(n)[:size]))
        if len(out) % 2 == 0:
            used, kept = set(), []
            for cyc in cycles:
                es = set(zip(cyc, cyc[1:] + cyc[:1]))
                if not es & used:
                    used |= es
                    kept.append(cyc)
            w = cycle_union(n, kept, [1.0] * len(kept))
        else:
            w = cycle_union(n, cycles, rng.uniform(0.2, 3.0, size=len(cycles)))
        if rng.random() < 0.3:
            w = w + w.T
        out.append(WeightedDigraph(w))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
