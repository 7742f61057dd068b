"""Change of variables that block-triangularises ALG1 and ALG2.

With ``r_vec = 1/sqrt(N)`` and an orthonormal completion ``R_mat``::

    q1   = r_vec' (v - Pi r)          p1   = r_vec' (x - r_avg 1)
    q2:N = R_mat' (v - Pi r) + R_mat' (x - r_avg 1)
    p2:N = R_mat' (x - r_avg 1)

The stepping functions below never touch the original graph dynamics and
serve as an independent oracle for the direct engines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True, eq=False)
class OrthonormalSplit:
    r_vec: np.ndarray
    R_mat: np.ndarray

    @property
    def n(self) -> int:
        return self.r_vec.shape[0]


@dataclass(frozen=True)
class QPState:
    q1: float
    q2n: np.ndarray
    p1: float
    p2n: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.q1], self.q2n, [self.p1], self.p2n])


def orthonormal_complement(n: int) -> OrthonormalSplit:
    """Householder reflector mapping ``e1`` to ``1/sqrt(n)``; its other columns span ``1^perp``."""
    if n < 2:
        raise PreconditionError(f"need n >= 2, got {n}")
    r = np.full(n, 1.0 / np.sqrt(n))
    u = r.copy()
    u[0] -= 1.0
    u /= np.linalg.norm(u)
    h = np.eye(n) - 2.0 * np.outer(u, u)
    # h is symmetric orthogonal with h e1 = r
    h[:, 0] = r
    return OrthonormalSplit(r, h[:, 1:].copy())


def reduced_laplacian(lap: np.ndarray, split: OrthonormalSplit) -> np.ndarray:
    """``L+ = R' L R``."""
    return split.R_mat.T @ lap @ split.R_mat


def to_qp(v, x, r, split: OrthonormalSplit) -> QPState:
    v, x, r = (np.asarray(a, dtype=float) for a in (v, x, r))
    r_avg = r.mean()
    v_shift = v - (r - r_avg)  # v - Pi r
    x_shift = x - r_avg
    rv, rm = split.r_vec, split.R_mat
    return QPState(
        q1=float(rv @ v_shift),
        q2n=rm.T @ v_shift + rm.T @ x_shift,
        p1=float(rv @ x_shift),
        p2n=rm.T @ x_shift,
    )


def from_qp(s: QPState, r, split: OrthonormalSplit) -> tuple[np.ndarray, np.ndarray]:
    """Inverse map; returns ``(v, x)``."""
    r = np.asarray(r, dtype=float)
    r_avg = r.mean()
    rv, rm = split.r_vec, split.R_mat
    x_shift = rv * s.p1 + rm @ s.p2n
    v_shift = rv * s.q1 + rm @ (s.q2n - s.p2n)
    return v_shift + (r - r_avg), x_shift + r_avg


def qp_step_alg2(s: QPState, delta: float, Lplus: np.ndarray, f=None, split: OrthonormalSplit | None = None) -> QPState:
    """One step of the transformed ALG2; ``f`` (with ``split``) adds the perturbation inputs."""
    eye = np.eye(Lplus.shape[0])
    q1 = s.q1
    q2n = (1.0 - delta) * s.q2n
    p1 = -delta * s.q1 + (1.0 - delta) * s.p1
    p2n = -delta * s.q2n + (eye - delta * Lplus) @ s.p2n
    if f is not None:
        if split is None:
            raise PreconditionError("a perturbation needs the orthonormal split")
        f = np.asarray(f, dtype=float)
        fr = split.R_mat.T @ f
        q2n = q2n + delta * fr
        p1 = p1 + delta * float(split.r_vec @ f)
        p2n = p2n + delta * fr
    return QPState(q1, q2n, p1, p2n)


def qp_step_alg1(s: QPState, delta: float, Lplus: np.ndarray) -> QPState:
    eye = np.eye(Lplus.shape[0])
    return QPState(s.q1, s.q2n, s.p1, (eye - delta * Lplus) @ s.p2n)


def p1_closed_form(p1_0: float, delta: float, f: np.ndarray, split: OrthonormalSplit, k: int) -> float:
    """``p1(k) = (1-delta)^k p1(0) + delta * sum_{m<k} (1-delta)^(k-1-m) r_vec' f(m)``.

    ``f`` has rows indexed by step. Valid for ALG2 with ``sum v(0) = 0``.
    """
    proj = np.asarray(f, dtype=float)[:k] @ split.r_vec
    weights = (1.0 - delta) ** np.arange(k - 1, -1, -1)
    return (1.0 - delta) ** k * p1_0 + delta * float(weights @ proj)
