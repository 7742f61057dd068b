"""Discrete-time consensus engines with full per-edge message traces.

Every engine returns an :class:`ExecutionTrace` holding the agent states at
steps ``0..K`` and, for each edge ``(i, j)``, the value(s) agent ``i``
received from agent ``j`` at every step. Adversary views are cut from the
recorded messages, never reconstructed from states.

Algorithms
----------
ALG1            Laplacian consensus, ``x(0) = r``.
ALG2            dynamic-consensus form with internal state ``v``; only ``x`` is sent.
ALG2_PERTURBED  ALG2 with an additive per-agent signal ``f_i(k)`` in the ``x`` update.
ALG3            initialization-free variant for undirected graphs; ``x`` and ``v`` are sent.
M1              ALG1 run on noise-masked messages ``x + w`` with telescoping
                decaying noise ``w_i(k) = phi^k nu_i(k) - phi^(k-1) nu_i(k-1)``.
                This is the usual form of decaying-noise masking; other variants
                of the scheme exist and may differ in detail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import PreconditionError, StepsizeError
from .graph import (
    WeightedDigraph,
    is_strongly_connected,
    is_weight_balanced,
    stepsize_bound,
)

V0_SUM_TOL = 1e-12


class Algorithm(str, enum.Enum):
    ALG1 = "alg1"
    ALG2 = "alg2"
    ALG3 = "alg3"
    ALG2_PERTURBED = "alg2_perturbed"
    M1 = "m1"


@dataclass(frozen=True)
class Perturbation:
    """Deterministic per-agent signal ``f(k)``.

    ``kind`` is ``"zero"``, ``"finite"`` (``values[k]`` for ``k < len(values)``,
    zero afterwards), ``"geometric"`` (``c * rho**k``) or ``"constant"``
    (``c`` forever; never admissible, kept for attack experiments).
    """

    kind: str = "zero"
    values: tuple[float, ...] = ()
    c: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "finite", "geometric", "constant"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "geometric" and not abs(self.rho) < 1:
            raise ValueError(f"geometric perturbation needs |rho| < 1, got {self.rho}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def zero(cls) -> "Perturbation":
        return cls("zero")

    @classmethod
    def finite(cls, values: Sequence[float]) -> "Perturbation":
        return cls("finite", values=tuple(values))

    @classmethod
    def geometric(cls, c: float, rho: float) -> "Perturbation":
        return cls("geometric", c=c, rho=rho)

    @classmethod
    def constant(cls, c: float) -> "Perturbation":
        return cls("constant", c=c)

    def sequence(self, horizon: int) -> np.ndarray:
        """Values ``f(0..horizon)``."""
        out = np.zeros(horizon + 1)
        if self.kind == "finite":
            m = min(len(self.values), horizon + 1)
            out[:m] = self.values[:m]
        elif self.kind == "geometric":
            out[:] = self.c * self.rho ** np.arange(horizon + 1)
        elif self.kind == "constant":
            out[:] = self.c
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": list(self.values), "c": self.c, "rho": self.rho}


@dataclass(frozen=True)
class M1Noise:
    """Noise configuration for M1.

    Draws come from ``numpy.random.Generator(PCG64(seed)).standard_normal``,
    one ``(K+1, n)`` block per run in step-major order, scaled by ``sigma``.
    """

    phi: float = 0.9
    sigma: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def draws(self, horizon: int, n: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(int(self.seed)))
        return self.sigma * rng.standard_normal((horizon + 1, n))

    def to_dict(self) -> dict:
        return {"phi": self.phi, "sigma": self.sigma, "seed": int(self.seed)}


def masking_noise(nu: np.ndarray, phi: float) -> np.ndarray:
    """``w(0) = nu(0)``, ``w(k) = phi^k nu(k) - phi^(k-1) nu(k-1)``; rows are steps."""
    scaled = (phi ** np.arange(nu.shape[0]))[:, None] * nu
    w = scaled.copy()
    w[1:] -= scaled[:-1]
    return w


@dataclass(frozen=True)
class ProtocolSpec:
    algorithm: Algorithm
    delta: float
    horizon: int
    reference: np.ndarray
    x0: np.ndarray | None = None
    v0: np.ndarray | None = None
    perturbation: tuple[Perturbation, ...] | None = None
    noise: M1Noise | None = None

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        ref = _frozen(self.reference)
        object.__setattr__(self, "reference", ref)
        n = ref.shape[0]
        if self.algorithm in (Algorithm.ALG1, Algorithm.M1):
            # these algorithms are initialised at the reference by definition
            object.__setattr__(self, "x0", ref)
        else:
            object.__setattr__(self, "x0", ref if self.x0 is None else _frozen(self.x0))
        object.__setattr__(self, "v0", np.zeros(n) if self.v0 is None else _frozen(self.v0))
        if self.x0.shape != (n,) or self.v0.shape != (n,):
            raise PreconditionError("reference, x0 and v0 must all have length n")
        if int(self.horizon) < 1:
            raise PreconditionError(f"horizon must be a positive integer, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        if not self.delta > 0:
            raise StepsizeError(f"delta must be positive, got {self.delta}")
        if self.algorithm in (Algorithm.ALG2, Algorithm.ALG2_PERTURBED):
            if abs(self.v0.sum()) > V0_SUM_TOL:
                raise PreconditionError(f"sum of v0 must be 0, got {self.v0.sum():.3e}")
        if self.algorithm is Algorithm.ALG2_PERTURBED:
            if self.perturbation is None or len(self.perturbation) != n:
                raise PreconditionError("ALG2_PERTURBED needs one perturbation per agent")
        if self.perturbation is not None:
            object.__setattr__(self, "perturbation", tuple(self.perturbation))
        if self.algorithm is Algorithm.M1 and self.noise is None:
            raise PreconditionError("M1 needs a noise configuration")

    @property
    def n(self) -> int:
        return self.reference.shape[0]

    def replace(self, **changes) -> "ProtocolSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "delta": self.delta,
            "horizon": self.horizon,
            "reference": self.reference.tolist(),
            "x0": self.x0.tolist(),
            "v0": self.v0.tolist(),
            "perturbation": None if self.perturbation is None else [p.to_dict() for p in self.perturbation],
            "noise": None if self.noise is None else self.noise.to_dict(),
        }


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ExecutionTrace:
    """States ``x``, ``v`` (rows = steps 0..K) and per-edge received messages.

    ``transmitted[k, e]`` is what agent ``edges[e][0]`` received from agent
    ``edges[e][1]`` at step ``k``; for ALG3 the last axis holds ``(x, v)``.
    ``f`` and ``w`` are the perturbation and masking noise, when used.
    """

    graph: WeightedDigraph
    spec: ProtocolSpec
    x: np.ndarray
    v: np.ndarray
    edges: tuple[tuple[int, int], ...]
    transmitted: np.ndarray = field(repr=False)
    f: np.ndarray | None = None
    w: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.x.shape[0] - 1

    @property
    def sent(self) -> np.ndarray:
        """Per-sender broadcast values, rows = steps (``x`` or ``x + w``; ``(x, v)`` stacked for ALG3)."""
        if self.spec.algorithm is Algorithm.M1:
            return self.x + self.w
        if self.spec.algorithm is Algorithm.ALG3:
            return np.stack([self.x, self.v], axis=-1)
        return self.x


def _finish(g, spec, x, v, f=None, w=None) -> ExecutionTrace:
    sent = x if w is None else x + w
    if spec.algorithm is Algorithm.ALG3:
        sent = np.stack([x, v], axis=-1)
    edges = g.edges
    senders = np.array([j - 1 for _, j in edges], dtype=int)
    transmitted = sent[:, senders] if edges else np.zeros((x.shape[0], 0) + sent.shape[2:])
    for arr in (x, v, transmitted, f, w):
        if arr is not None:
            arr.setflags(write=False)
    return ExecutionTrace(g, spec, x, v, edges, transmitted, f, w)


def _check_common(g: WeightedDigraph, spec: ProtocolSpec) -> None:
    if spec.n != g.n:
        raise PreconditionError(f"spec has {spec.n} agents but graph has {g.n}")
    if not is_strongly_connected(g):
        raise PreconditionError("graph is not strongly connected")
    if not is_weight_balanced(g):
        raise PreconditionError("graph is not weight-balanced")


def _check_delta(delta: float, upper: float, what: str) -> None:
    if not 0.0 < delta < upper:
        raise StepsizeError(f"delta={delta} outside the {what} range (0, {upper:.6g})")


def _expect(spec: ProtocolSpec, *algs: Algorithm) -> None:
    if spec.algorithm not in algs:
        raise PreconditionError(f"spec algorithm {spec.algorithm.value} not accepted here")


def run_alg1(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    _expect(spec, Algorithm.ALG1)
    _check_common(g, spec)
    _check_delta(spec.delta, stepsize_bound(g).delta_bar, "ALG1")
    lap, d, K = g.laplacian, spec.delta, spec.horizon
    x = np.empty((K + 1, g.n))
    x[0] = spec.reference
    for k in range(K):
        x[k + 1] = x[k] - d * (lap @ x[k])
    return _finish(g, spec, x, np.zeros_like(x))


def _alg2_loop(g, spec, f):
    lap, d, K, r = g.laplacian, spec.delta, spec.horizon, spec.reference
    x = np.empty((K + 1, g.n))
    v = np.empty((K + 1, g.n))
    x[0], v[0] = spec.x0, spec.v0
    for k in range(K):
        lx = lap @ x[k]
        v[k + 1] = v[k] + d * lx
        drift = -(x[k] - r) - lx - v[k]
        if f is not None:
            drift = drift + f[k]
        x[k + 1] = x[k] + d * drift
    return x, v


def run_alg2(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    _expect(spec, Algorithm.ALG2)
    _check_common(g, spec)
    _check_delta(spec.delta, stepsize_bound(g).alg2_range[1], "ALG2")
    x, v = _alg2_loop(g, spec, None)
    return _finish(g, spec, x, v)


def run_alg2_perturbed(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    _expect(spec, Algorithm.ALG2_PERTURBED)
    _check_common(g, spec)
    _check_delta(spec.delta, stepsize_bound(g).alg2_range[1], "ALG2")
    f = np.stack([p.sequence(spec.horizon) for p in spec.perturbation], axis=1)
    if not f.any():
        # identical arithmetic to the unperturbed engine
        x, v = _alg2_loop(g, spec, None)
    else:
        x, v = _alg2_loop(g, spec, f)
    return _finish(g, spec, x, v, f=f)


def alg3_iteration_matrix(g: WeightedDigraph, delta: float) -> np.ndarray:
    """Linear part of ALG3 acting on the stacked state ``(x, v)``."""
    n, lap = g.n, g.laplacian
    eye = np.eye(n)
    return np.block([
        [(1.0 - delta) * eye - delta * lap, delta * lap],
        [-delta * lap, eye],
    ])


def alg3_disagreement_radius(g: WeightedDigraph, delta: float) -> float:
    """Spectral radius of the ALG3 iteration after removing the invariant mean of ``v``."""
    from .transforms import orthonormal_complement

    n = g.n
    split = orthonormal_complement(n)
    basis = np.hstack([split.r_vec[:, None], split.R_mat])
    # coordinates (x in full basis, v in complement basis only)
    t = np.zeros((2 * n, 2 * n - 1))
    t[:n, :n] = basis
    t[n:, n:] = split.R_mat
    m = alg3_iteration_matrix(g, delta)
    reduced = t.T @ m @ t
    from .eig import eigvals

    return float(np.max(np.abs(eigvals(reduced))))


def run_alg3(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    _expect(spec, Algorithm.ALG3)
    if spec.n != g.n:
        raise PreconditionError(f"spec has {spec.n} agents but graph has {g.n}")
    if not g.is_undirected():
        raise PreconditionError("ALG3 requires symmetric weights")
    if not is_strongly_connected(g):
        raise PreconditionError("graph is not connected")
    rho = alg3_disagreement_radius(g, spec.delta)
    if not rho < 1.0:
        raise StepsizeError(f"delta={spec.delta} is unstable for ALG3 (spectral radius {rho:.6g})")
    lap, d, K, r = g.laplacian, spec.delta, spec.horizon, spec.reference
    x = np.empty((K + 1, g.n))
    v = np.empty((K + 1, g.n))
    x[0], v[0] = spec.x0, spec.v0
    for k in range(K):
        lx = lap @ x[k]
        v[k + 1] = v[k] - d * lx
        x[k + 1] = x[k] + d * (-(x[k] - r) - lx + lap @ v[k])
    return _finish(g, spec, x, v)


def run_m1(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    _expect(spec, Algorithm.M1)
    if not g.is_undirected():
        raise PreconditionError("M1 requires an undirected graph")
    _check_common(g, spec)
    _check_delta(spec.delta, stepsize_bound(g).delta_bar, "ALG1")
    lap, d, K = g.laplacian, spec.delta, spec.horizon
    w = masking_noise(spec.noise.draws(K, g.n), spec.noise.phi)
    x = np.empty((K + 1, g.n))
    x[0] = spec.reference
    for k in range(K):
        masked = x[k] + w[k]
        x[k + 1] = masked - d * (lap @ masked)
    return _finish(g, spec, x, np.zeros_like(x), w=w)


ENGINES = {
    Algorithm.ALG1: run_alg1,
    Algorithm.ALG2: run_alg2,
    Algorithm.ALG3: run_alg3,
    Algorithm.ALG2_PERTURBED: run_alg2_perturbed,
    Algorithm.M1: run_m1,
}


def run(g: WeightedDigraph, spec: ProtocolSpec) -> ExecutionTrace:
    return ENGINES[spec.algorithm](g, spec)


def check_admissibility(
    f: Perturbation | np.ndarray,
    delta: float,
    horizon: int,
    tol: float = 1e-9,
    tail_fraction: float = 0.1,
) -> tuple[bool, float]:
    """Check the vanishing-convolution condition on a perturbation.

    Runs ``S(k+1) = (1 - delta) S(k) + f(k+1)`` with ``S(0) = f(0)`` and calls
    the signal admissible when ``|S(k)| <= tol`` over the last
    ``tail_fraction`` of the horizon (at least one step). Returns the verdict
    and the largest ``|S(k)|`` in that window.
    """
    if not 0.0 < delta < 2.0:
        raise StepsizeError(f"delta={delta} outside (0, 2); |1 - delta| < 1 is required")
    seq = f.sequence(horizon) if isinstance(f, Perturbation) else np.asarray(f, dtype=float)[: horizon + 1]
    s = np.empty(seq.shape[0])
    acc = 0.0
    decay = 1.0 - delta
    for k, fk in enumerate(seq):
        acc = decay * acc + fk
        s[k] = acc
    tail = max(1, int(math.ceil(tail_fraction * s.shape[0])))
    residual = float(np.max(np.abs(s[-tail:])))
    return residual <= tol, residual


def convergence_rate(g: WeightedDigraph, algorithm: Algorithm, delta: float, phi: float | None = None) -> float:
    """Subdominant spectral radius of the linear iteration (``phi`` included for M1)."""
    from .graph import disagreement_radius

    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.ALG3:
        return alg3_disagreement_radius(g, delta)
    rho = disagreement_radius(g, delta)
    if algorithm in (Algorithm.ALG2, Algorithm.ALG2_PERTURBED):
        rho = max(rho, abs(1.0 - delta))
    if algorithm is Algorithm.M1 and phi is not None:
        rho = max(rho, phi)
    return rho


def default_delta(g: WeightedDigraph, fraction: float = 0.45) -> float:
    """``fraction * min(2, delta_bar)``; inside both the ALG1 and ALG2 ranges."""
    return fraction * stepsize_bound(g).alg2_range[1]


def default_horizon(rho: float, target: float = 1e-8, cap: int = 5000) -> int:
    """Smallest K with ``rho**K < target``, capped."""
    if rho <= 0:
        return 1
    if rho >= 1:
        raise PreconditionError(f"iteration is not contracting (rate {rho})")
    return min(cap, int(math.ceil(math.log(target) / math.log(rho))) + 1)
