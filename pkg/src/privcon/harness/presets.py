"""Optimal power dispatch demonstration: five generators, adversary agent 5."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PreconditionError
from ..graph import WeightedDigraph, demo_graph
from ..indistinguishability import shift_references

OPD_ALPHA = (188.3, 592.5, 2567.2, 1793.3, 2567.2)
OPD_BETA = (7.17, 45.9, 208.2, 166.6, 208.2)
OPD_DEMAND = 1500.0
OPD_ADVERSARY = 5
# e values that regenerate the two reference alternative alpha vectors on the
# stand-in topology (witness agent 2, degree 2); the reference vectors carry
# 0.1 of rounding slack in their sums, these are exact
OPD_ALT_E = (-1500.0, 1500.0)


@dataclass(frozen=True)
class OPDPreset:
    alpha: tuple[float, ...] = OPD_ALPHA
    beta: tuple[float, ...] = OPD_BETA
    demand: float = OPD_DEMAND
    adversary: int = OPD_ADVERSARY
    graph: WeightedDigraph = field(default_factory=demo_graph, compare=False)

    @property
    def n(self) -> int:
        return len(self.alpha)

    def alternatives(self, witness: int = 2) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(alpha_alt, x0_alt)`` pairs for ALG2 started at ``x0 = alpha``."""
        out = []
        for e in OPD_ALT_E:
            r2, x2, _ = shift_references(self.graph, witness, e, self.alpha, self.alpha)
            out.append((r2, x2))
        return out


def opd_dispatch(alpha, beta, demand: float, alpha_bar, beta_bar, n: int) -> np.ndarray:
    """``p_i = beta_i (P_D + n alpha_bar) / (n beta_bar) - alpha_i``.

    ``alpha_bar`` and ``beta_bar`` may be scalars or per-agent consensus
    estimates.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    beta_bar = np.asarray(beta_bar, dtype=float)
    if np.any(beta_bar <= 0):
        raise PreconditionError("beta_bar must be positive")
    return beta * (demand + n * np.asarray(alpha_bar, dtype=float)) / (n * beta_bar) - alpha


def opd_cost(p, alpha, beta) -> float:
    """Total quadratic cost with zero offsets."""
    p, alpha, beta = (np.asarray(a, dtype=float) for a in (p, alpha, beta))
    return float(np.sum((p + alpha) ** 2 / (2.0 * beta)))
