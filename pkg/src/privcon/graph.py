"""Weighted digraphs, Laplacians, spectra and stepsize bounds.

Convention: ``weights[i, j] = a_ij > 0`` means agent ``i`` receives from
agent ``j`` (edge ``i -> j``, ``j`` is an out-neighbor of ``i``). Node labels
in every public function are 1-based; array positions are ``node - 1``.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import eig
from .errors import GraphError, PreconditionError

BALANCE_TOL = 1e-9
ZERO_EIG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise GraphError(f"weights must be a non-empty square matrix, got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise GraphError("weights must be finite and non-negative")
        if np.any(np.diag(w) != 0):
            raise GraphError("self-loops are not allowed (a_ii must be 0)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def out_degree(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """All edges ``(i, j)`` (1-based) in row-major order."""
        rows, cols = np.nonzero(self.weights)
        return tuple((int(i) + 1, int(j) + 1) for i, j in zip(rows, cols))

    @cached_property
    def laplacian(self) -> np.ndarray:
        return laplacian(self)

    def a(self, i: int, j: int) -> float:
        return float(self.weights[i - 1, j - 1])

    def out_neighbors(self, i: int) -> frozenset[int]:
        return frozenset(int(j) + 1 for j in np.nonzero(self.weights[i - 1])[0])

    def in_neighbors(self, j: int) -> frozenset[int]:
        return frozenset(int(i) + 1 for i in np.nonzero(self.weights[:, j - 1])[0])

    def is_undirected(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.weights - self.weights.T) <= tol))

    def scaled(self, c: float) -> "WeightedDigraph":
        return WeightedDigraph(self.weights * c)

    def subgraph(self, keep: Iterable[int]) -> "WeightedDigraph":
        idx = [k - 1 for k in keep]
        return WeightedDigraph(self.weights[np.ix_(idx, idx)])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i, j, self.a(i, j)] for i, j in self.edges],
        }

    def digest(self) -> str:
        """Stable content hash (sha256 of the canonical JSON edge list)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def build_digraph(n: int, edges: Iterable[tuple[int, int, float]]) -> WeightedDigraph:
    """Validate a 1-based edge list ``(from, to, weight)`` and build the graph."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise GraphError(f"n must be a positive integer, got {n!r}")
    w = np.zeros((n, n))
    seen = set()
    for pos, edge in enumerate(edges):
        try:
            i, j, a = edge
        except (TypeError, ValueError):
            raise GraphError(f"edge #{pos}: expected [from, to, weight], got {edge!r}") from None
        if not all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in (i, j)):
            raise GraphError(f"edge #{pos}: node indices must be integers, got {edge!r}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphError(f"edge #{pos}: node index out of range [1..{n}]: {edge!r}")
        if i == j:
            raise GraphError(f"edge #{pos}: self-loop at node {i}")
        if not np.isfinite(a) or a <= 0:
            raise GraphError(f"edge #{pos}: weight must be positive, got {a!r}")
        if (i, j) in seen:
            raise GraphError(f"edge #{pos}: duplicate edge ({i}, {j})")
        seen.add((i, j))
        w[i - 1, j - 1] = float(a)
    return WeightedDigraph(w)


def undirected(n: int, edges: Iterable[tuple[int, int, float]]) -> WeightedDigraph:
    """Build a graph with both directions of every listed edge."""
    both = []
    for i, j, a in edges:
        both += [(i, j, a), (j, i, a)]
    return build_digraph(n, both)


def load_graph(path: str | Path) -> WeightedDigraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    return graph_from_dict(doc, source=str(path))


def graph_from_dict(doc: dict, source: str = "<graph>") -> WeightedDigraph:
    if not isinstance(doc, dict):
        raise GraphError(f"{source}: expected an object with fields 'n' and 'edges'")
    for key in ("n", "edges"):
        if key not in doc:
            raise GraphError(f"{source}: missing field '{key}'")
    if not isinstance(doc["edges"], list):
        raise GraphError(f"{source}: field 'edges' must be a list")
    try:
        return build_digraph(doc["n"], [tuple(e) if isinstance(e, list) else e for e in doc["edges"]])
    except GraphError as exc:
        raise GraphError(f"{source}: {exc}") from None


def save_graph(g: WeightedDigraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2))


def is_weight_balanced(g: WeightedDigraph, tol: float = BALANCE_TOL) -> bool:
    return bool(np.all(np.abs(g.out_degree - g.in_degree) <= tol))


def _reach(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            if v not in seen:
                seen.add(int(v))
                queue.append(int(v))
    return seen


def is_strongly_connected(g: WeightedDigraph) -> bool:
    # one forward and one reverse search from node 0 suffice
    n = g.n
    return len(_reach(g.weights, 0)) == n and len(_reach(g.weights.T, 0)) == n


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """``L = Diag(d_out) - A`` with the diagonal set so each row sums to exactly zero."""
    lap = -g.weights.copy()
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    lap.setflags(write=False)
    return lap


def spectrum(lap: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Laplacian, sorted by real part then imaginary part."""
    vals = eig.eigvals(np.asarray(lap, dtype=float))
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


class StepsizeBound(NamedTuple):
    delta_bar: float
    alg1_range: tuple[float, float]
    alg2_range: tuple[float, float]


def nonzero_eigenvalues(g: WeightedDigraph, tol: float = ZERO_EIG_TOL) -> np.ndarray:
    """The n-1 eigenvalues other than the simple zero one (raises if zero is not simple)."""
    vals = spectrum(g.laplacian)
    scale = max(1.0, float(np.abs(vals).max()))
    zero = np.abs(vals) < tol * scale
    if zero.sum() != 1:
        raise PreconditionError(
            f"Laplacian has {int(zero.sum())} zero eigenvalues; expected exactly one"
        )
    return vals[~zero]


def stepsize_bound(g: WeightedDigraph) -> StepsizeBound:
    if not is_strongly_connected(g):
        raise PreconditionError("graph is not strongly connected")
    if not is_weight_balanced(g):
        raise PreconditionError("graph is not weight-balanced")
    if g.n == 1:
        raise PreconditionError("a single agent has no nonzero Laplacian eigenvalues")
    lam = nonzero_eigenvalues(g)
    delta_bar = float(np.min(2.0 * lam.real / np.abs(lam) ** 2))
    return StepsizeBound(delta_bar, (0.0, delta_bar), (0.0, min(2.0, delta_bar)))


def disagreement_radius(g: WeightedDigraph, delta: float) -> float:
    """Spectral radius of ``I - delta L`` on the complement of the consensus direction."""
    lam = nonzero_eigenvalues(g)
    return float(np.max(np.abs(1.0 - delta * lam)))


# ---------------------------------------------------------------------------
# presets

def demo_graph() -> WeightedDigraph:
    """Five-agent undirected stand-in for the demonstration topology.

    The exact demonstration edge set is unknown; this one is chosen so
    that, with agent 5 as the adversary, agents 1 and 3 each have neighbor 2
    that agent 5 does not see, agent 2 itself is hidden from agent 5, and all
    neighbors of agent 4 are neighbors of agent 5. Unit weights; agent 2 has
    degree 2, which reproduces the reference alternative vectors of the dispatch preset.
    """
    return undirected(5, [(1, 2, 1.0), (2, 3, 1.0), (1, 5, 1.0), (3, 5, 1.0), (3, 4, 1.0), (4, 5, 1.0)])


def two_node() -> WeightedDigraph:
    return undirected(2, [(1, 2, 1.0)])


def directed_cycle(n: int = 3, weight: float = 1.0) -> WeightedDigraph:
    return build_digraph(n, [(i, i % n + 1, weight) for i in range(1, n + 1)])


def complete_graph(n: int, weight: float = 1.0) -> WeightedDigraph:
    return build_digraph(n, [(i, j, weight) for i in range(1, n + 1) for j in range(1, n + 1) if i != j])
