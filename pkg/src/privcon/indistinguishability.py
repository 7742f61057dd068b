"""Alternative ALG2 executions that the adversary cannot tell apart.

Pick a witness agent ``w`` whose messages the adversary never receives. Shift
its initial state by ``-e`` and move the references of ``w`` and its
in-neighbors by::

    r2[w] = r1[w] - d_out(w) * e
    r2[i] = r1[i] + a_iw * e        for i in N_in(w)

Then ``x1 - x2`` is zero at every agent but ``w``, where it decays as
``(1 - delta)^k e``; the adversary's received signals coincide exactly and the
average is unchanged on weight-balanced graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversary import extract_view, hidden_agents
from .errors import PreconditionError
from .graph import WeightedDigraph
from .protocols import Algorithm, ExecutionTrace, ProtocolSpec, run_alg2

RELATIVE_TOL = 1e-9


def find_witness(g: WeightedDigraph, adversary: int, target: int) -> int:
    """Smallest-index hidden agent in ``N_out(target) + {target}``."""
    hidden = hidden_agents(g, adversary, target)
    if not hidden:
        raise PreconditionError(
            f"target {target} has no out-neighbor hidden from agent {adversary}; privacy is not preserved"
        )
    return hidden[0]


@dataclass(frozen=True, eq=False)
class AlternativeExecution:
    adversary: int
    target: int
    witness: int
    e_x0: float
    base_reference: np.ndarray
    alt_reference: np.ndarray
    base_x0: np.ndarray
    alt_x0: np.ndarray
    moved: tuple[int, ...] = field(default=())

    @property
    def target_shift(self) -> float:
        """``r2[target] - r1[target]``."""
        t = self.target - 1
        return float(self.alt_reference[t] - self.base_reference[t])

    def spec(self, base: ProtocolSpec) -> ProtocolSpec:
        return base.replace(reference=self.alt_reference, x0=self.alt_x0)


def shift_references(g: WeightedDigraph, witness: int, e_x0: float, reference, x0):
    """Apply the witness construction to raw vectors; returns ``(r2, x0_2, moved)``."""
    w = witness - 1
    r2 = np.array(reference, dtype=float)
    x2 = np.array(x0, dtype=float)
    r2[w] -= g.out_degree[w] * e_x0
    ins = sorted(g.in_neighbors(witness))
    for i in ins:
        r2[i - 1] += g.a(i, witness) * e_x0
    x2[w] -= e_x0
    return r2, x2, tuple(sorted(ins + [witness]))


def construct_alternative(
    g: WeightedDigraph,
    adversary: int,
    target: int,
    e_x0: float,
    base: ProtocolSpec,
    witness: int | None = None,
) -> AlternativeExecution:
    if e_x0 == 0:
        raise PreconditionError("e_x0 = 0 gives an identical execution")
    if base.algorithm is not Algorithm.ALG2 or np.any(base.v0 != 0):
        raise PreconditionError("the construction applies to ALG2 with v0 = 0")
    if witness is None:
        witness = find_witness(g, adversary, target)
    elif witness not in hidden_agents(g, adversary, target):
        raise PreconditionError(f"agent {witness} is not a valid witness for target {target}")
    r2, x2, moved = shift_references(g, witness, e_x0, base.reference, base.x0)
    return AlternativeExecution(
        adversary, target, witness, float(e_x0),
        base.reference.copy(), r2, base.x0.copy(), x2, moved,
    )


def verify_indistinguishable(t1: ExecutionTrace, t2: ExecutionTrace, adversary: int) -> float:
    """Largest difference between what the adversary receives in the two runs.

    Includes the adversary's own state, which is part of what it knows.
    """
    if t1.graph.n != t2.graph.n or not np.array_equal(t1.graph.weights, t2.graph.weights):
        raise PreconditionError("traces run on different graphs")
    if t1.x.shape != t2.x.shape or t1.transmitted.shape != t2.transmitted.shape:
        raise PreconditionError("trace shapes differ")
    v1, v2 = extract_view(t1, adversary), extract_view(t2, adversary)
    dev = np.abs(v1.received - v2.received).max(initial=0.0)
    return float(max(dev, np.abs(v1.own_x - v2.own_x).max(initial=0.0)))


def indistinguishability_tol(e_x0: float) -> float:
    return RELATIVE_TOL * max(1.0, abs(e_x0))


@dataclass
class ErrorDynamicsReport:
    witness: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def error_dynamics_check(t1: ExecutionTrace, t2: ExecutionTrace, witness: int, tol: float = RELATIVE_TOL) -> ErrorDynamicsReport:
    """Check the error signals of a witness pair against the closed-form laws.

    * ``e_x`` vanishes away from the witness;
    * ``e_v[i](k+1) = e_v[i](k) - delta a_iw e_x[w](k)`` for ``i`` in ``N_in(w)``;
    * ``e_v`` summed over ``N_in(w) + {w}`` stays zero;
    * ``e_x[w](k) = (1 - delta)^k e_x[w](0)``.

    Tolerances are relative to ``max(1, |e_x[w](0)|)``.
    """
    g = t1.graph
    d = t1.spec.delta
    w = witness - 1
    ex = t1.x - t2.x
    ev = t1.v - t2.v
    e0 = ex[0, w]
    scale = tol * max(1.0, abs(e0))
    rep = ErrorDynamicsReport(witness)
    others = np.delete(ex, w, axis=1)
    if others.size and np.abs(others).max() > scale:
        k, i = np.unravel_index(np.abs(others).argmax(), others.shape)
        rep.violations.append(f"e_x nonzero away from the witness (step {k}, max {np.abs(others).max():.3e})")
    ins = sorted(g.in_neighbors(witness))
    for i in ins:
        pred = ev[:-1, i - 1] - d * g.a(i, witness) * ex[:-1, w]
        err = np.abs(ev[1:, i - 1] - pred).max(initial=0.0)
        if err > scale:
            rep.violations.append(f"e_v[{i}] breaks the in-neighbor recursion (max {err:.3e})")
    group = [i - 1 for i in ins] + [w]
    total = np.abs(ev[:, group].sum(axis=1)).max()
    if total > scale:
        rep.violations.append(f"e_v does not sum to zero over N_in(w)+{{w}} (max {total:.3e})")
    k = np.arange(ex.shape[0])
    law = np.abs(ex[:, w] - (1.0 - d) ** k * e0).max()
    if law > scale:
        rep.violations.append(f"witness error departs from (1-delta)^k decay (max {law:.3e})")
    return rep


@dataclass(frozen=True)
class IndistinguishabilityReport:
    adversary: int
    target: int
    witness: int
    e_x0: float
    max_deviation: float
    r_alt: list[float]

    def to_dict(self) -> dict:
        return {
            "adversary": self.adversary,
            "target": self.target,
            "witness": self.witness,
            "e_x3_0": self.e_x0,
            "max_deviation": self.max_deviation,
            "r_alt": self.r_alt,
        }


def certify(g: WeightedDigraph, adversary: int, target: int, e_x0: float, base: ProtocolSpec,
            base_trace: ExecutionTrace | None = None, witness: int | None = None):
    """Build, run and compare one alternative execution.

    Returns ``(report, alternative, base_trace, alt_trace)``.
    """
    alt = construct_alternative(g, adversary, target, e_x0, base, witness)
    t1 = base_trace if base_trace is not None else run_alg2(g, base)
    t2 = run_alg2(g, alt.spec(base))
    dev = verify_indistinguishable(t1, t2, adversary)
    rep = IndistinguishabilityReport(adversary, target, alt.witness, float(e_x0), dev, alt.alt_reference.tolist())
    return rep, alt, t1, t2


def exhaustive_search(g: WeightedDigraph, adversary: int, target: int, base: ProtocolSpec,
                      e_x0: float = 1.0, base_trace: ExecutionTrace | None = None) -> int | None:
    """Try the construction with every agent as witness, ignoring the classifier.

    A witness succeeds when the simulated pair is indistinguishable at
    tolerance and the target's reference actually moved. Returns the first
    successful witness or ``None``.
    """
    t1 = base_trace if base_trace is not None else run_alg2(g, base)
    for w in range(1, g.n + 1):
        if w == adversary:
            continue
        r2, x2, _ = shift_references(g, w, e_x0, base.reference, base.x0)
        if r2[target - 1] == base.reference[target - 1]:
            continue
        t2 = run_alg2(g, base.replace(reference=r2, x0=x2))
        if verify_indistinguishable(t1, t2, adversary) <= indistinguishability_tol(e_x0):
            return w
    return None

