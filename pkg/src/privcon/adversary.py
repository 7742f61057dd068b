"""Honest-but-curious adversary: knowledge model, attacks, privacy classifier.

The adversary knows the topology, the stepsize, its own reference and states,
and the messages it receives from its out-neighbors. Attacks only ever see an
:class:`AdversaryView`; nothing else from the trace is reachable through it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import PreconditionError
from .graph import WeightedDigraph
from .protocols import Algorithm, ExecutionTrace


@dataclass(frozen=True, eq=False)
class AdversaryView:
    adversary: int
    graph: WeightedDigraph
    algorithm: Algorithm
    delta: float
    own_reference: float
    own_x: np.ndarray
    own_v: np.ndarray
    observed: tuple[int, ...]
    received: np.ndarray  # rows = steps, columns follow ``observed``
    v0_known: np.ndarray

    @property
    def horizon(self) -> int:
        return self.own_x.shape[0] - 1

    def signal(self, j: int) -> np.ndarray:
        """Time series of agent ``j``'s messages as seen by the adversary (own state for ``j = adversary``)."""
        if j == self.adversary:
            return self.own_x
        try:
            col = self.observed.index(j)
        except ValueError:
            raise PreconditionError(f"agent {self.adversary} does not receive from agent {j}") from None
        return self.received[:, col]


def extract_view(trace: ExecutionTrace, adversary: int) -> AdversaryView:
    g = trace.graph
    if not 1 <= adversary <= g.n:
        raise PreconditionError(f"adversary {adversary} outside [1..{g.n}]")
    cols = [e for e, (i, _) in enumerate(trace.edges) if i == adversary]
    observed = tuple(trace.edges[e][1] for e in cols)
    received = trace.transmitted[:, cols].copy()
    received.setflags(write=False)
    a = adversary - 1
    own_x = trace.x[:, a].copy()
    own_v = trace.v[:, a].copy()
    return AdversaryView(
        adversary=adversary,
        graph=g,
        algorithm=trace.spec.algorithm,
        delta=trace.spec.delta,
        own_reference=float(trace.spec.reference[a]),
        own_x=own_x,
        own_v=own_v,
        observed=observed,
        received=received,
        v0_known=np.zeros(g.n),
    )


def _seen(g: WeightedDigraph, adversary: int) -> frozenset[int]:
    return g.out_neighbors(adversary) | {adversary}


def hidden_agents(g: WeightedDigraph, adversary: int, target: int) -> list[int]:
    """Agents in ``N_out(target) + {target}`` whose messages the adversary never receives."""
    candidates = g.out_neighbors(target) | {target}
    return sorted(candidates - _seen(g, adversary))


def privacy_classifier(g: WeightedDigraph, adversary: int, target: int) -> bool:
    """True when the target's reference is hidden from the adversary.

    Private iff the target, or one of its out-neighbors, is an agent whose
    messages the adversary does not receive (and is not the adversary).
    When the adversary receives from the target this is exactly "the target
    has an out-neighbor the adversary does not see"; a target the adversary
    does not hear from at all is always private.
    """
    if adversary == target:
        raise PreconditionError("adversary and target must differ")
    return bool(hidden_agents(g, adversary, target))


def fully_surveilled(g: WeightedDigraph, adversary: int, target: int) -> bool:
    """Adversary hears the target and every out-neighbor of the target."""
    return target in g.out_neighbors(adversary) and g.out_neighbors(target) <= _seen(g, adversary)


def _require_surveillance(view: AdversaryView, target: int) -> None:
    g = view.graph
    if target == view.adversary:
        raise PreconditionError("target must differ from the adversary")
    if not fully_surveilled(g, view.adversary, target):
        raise PreconditionError(
            f"agent {view.adversary} does not receive from agent {target} and all of its out-neighbors"
        )


def _target_series(view: AdversaryView, target: int):
    g = view.graph
    nbrs = sorted(g.out_neighbors(target))
    xt = view.signal(target)
    weights = np.array([g.a(target, j) for j in nbrs])
    xn = np.stack([view.signal(j) for j in nbrs], axis=1)
    # sum_j a_tj (x_t - x_j) at every step
    coupling = weights.sum() * xt - xn @ weights
    return xt, coupling


def recovery_series(view: AdversaryView, target: int) -> np.ndarray:
    """Reference estimates of ``target`` from every step pair ``(k-1, k)``, ``k = 1..K``.

    Rebuilds ``v_target`` from ``v(0) = 0`` with the observed couplings and
    solves the ALG2 ``x`` update for the reference.
    """
    _require_surveillance(view, target)
    if view.algorithm is not Algorithm.ALG2:
        raise PreconditionError("algebraic recovery assumes an unperturbed ALG2 trace")
    if view.horizon < 1:
        raise PreconditionError("need at least two recorded steps")
    d = view.delta
    xt, coupling = _target_series(view, target)
    v = np.empty_like(xt)
    v[0] = view.v0_known[target - 1]
    for k in range(xt.shape[0] - 1):
        v[k + 1] = v[k] + d * coupling[k]
    return (xt[1:] - xt[:-1]) / d + xt[:-1] + coupling[:-1] + v[:-1]


def recover_reference(view: AdversaryView, target: int, k: int = 1) -> float:
    """Exact reference of a fully surveilled target from steps ``k-1`` and ``k``."""
    series = recovery_series(view, target)
    if not 1 <= k <= series.shape[0]:
        raise PreconditionError(f"k={k} outside [1..{series.shape[0]}]")
    return float(series[k - 1])


@dataclass(frozen=True)
class ObserverState:
    target: int
    v_hat: float = 0.0
    x_hat: float = 0.0

    def z(self, x_target: float) -> float:
        return self.x_hat + x_target


def run_observer(view: AdversaryView, target: int, K: int | None = None) -> np.ndarray:
    """Asymptotic reference observer; returns ``z_hat(0..K)``.

    ``v_hat`` replicates the target's internal ``v`` from the observed
    couplings and ``x_hat`` absorbs the remainder, so that
    ``z_hat(k+1) = (1 - delta) z_hat(k) + delta (r + f(k))``. Works for ALG2
    and for ALG2 with perturbations whose discounted sum vanishes.
    """
    _require_surveillance(view, target)
    if view.algorithm not in (Algorithm.ALG2, Algorithm.ALG2_PERTURBED):
        raise PreconditionError("the observer targets ALG2 traces")
    K = view.horizon if K is None else int(K)
    if not 0 <= K <= view.horizon:
        raise PreconditionError(f"K={K} outside [0..{view.horizon}]")
    d = view.delta
    xt, coupling = _target_series(view, target)
    z = np.empty(K + 1)
    state = ObserverState(target)
    for k in range(K + 1):
        z[k] = state.z(xt[k])
        if k == K:
            break
        state = ObserverState(
            target,
            v_hat=state.v_hat + d * coupling[k],
            x_hat=state.x_hat + d * (coupling[k] + state.v_hat - state.x_hat),
        )
    return z


@dataclass(frozen=True)
class AttackReport:
    target: int
    method: str
    estimate: float
    true_value: float | None
    abs_error: float | None
    steps_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def attack_report(view: AdversaryView, target: int, method: str, true_value: float | None = None) -> AttackReport:
    if method == "recover":
        est, steps = recover_reference(view, target, 1), 1
    elif method == "observer":
        z = run_observer(view, target)
        est, steps = float(z[-1]), z.shape[0] - 1
    else:
        raise ValueError(f"unknown attack method {method!r}")
    err = None if true_value is None else abs(est - true_value)
    return AttackReport(target, method, est, true_value, err, steps)
