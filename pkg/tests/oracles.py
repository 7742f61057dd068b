"""Independent reference computations used only by the tests.

Nothing here calls into the code under test beyond reading a graph's weights.
"""

from __future__ import annotations

import itertools

import numpy as np


def charpoly_roots(m: np.ndarray) -> np.ndarray:
    """Eigenvalues as roots of det(lambda I - M): Faddeev-LeVerrier coefficients + np.roots.

    A root of multiplicity m is only resolved to about eps**(1/m), but the mean
    of its cluster is well conditioned, so tight clusters are replaced by their mean.
    """
    roots = np.roots(_faddeev(np.asarray(m, dtype=float)))
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    out = roots.astype(complex)
    unassigned = list(range(len(roots)))
    while unassigned:
        i = unassigned.pop(0)
        group = [i] + [j for j in unassigned if abs(roots[j] - roots[i]) < 1e-3 * scale]
        unassigned = [j for j in unassigned if j not in group]
        out[group] = roots[group].mean()
    return out


def _faddeev(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(m)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(m @ mk) / k
    return coeffs


def multiset_distance(a, b) -> float:
    """Max distance under the best matching (brute force, small n)."""
    a, b = list(a), list(b)
    best = np.inf
    for perm in itertools.permutations(range(len(b))):
        best = min(best, max(abs(a[i] - b[p]) for i, p in enumerate(perm)))
    return best


def hand_laplacian(n: int, edges) -> np.ndarray:
    """Laplacian from a 1-based edge list, one entry at a time."""
    lap = [[0.0] * n for _ in range(n)]
    for i, j, a in edges:
        lap[i - 1][j - 1] -= a
        lap[i - 1][i - 1] += a
    return np.array(lap)


def bfs_strongly_connected(w: np.ndarray) -> bool:
    n = w.shape[0]
    for s in range(n):
        seen, stack = {s}, [s]
        while stack:
            u = stack.pop()
            for v in range(n):
                if w[u, v] > 0 and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != n:
            return False
    return True


def disagreement_radius_np(w: np.ndarray, delta: float) -> float:
    """Spectral radius of I - delta L on 1-perp, via numpy's eigvals."""
    n = w.shape[0]
    lap = np.diag(w.sum(axis=1)) - w
    q, _ = np.linalg.qr(np.hstack([np.ones((n, 1)), np.eye(n)[:, : n - 1]]))
    r = q[:, 1:]
    return float(np.max(np.abs(np.linalg.eigvals(r.T @ (np.eye(n) - delta * lap) @ r))))


def alg2_reference_identifiable(w: np.ndarray, delta: float, adversary: int, target: int) -> bool:
    """Is r_target a linear function of everything the adversary observes under ALG2 with v(0)=0?

    State (x, v, r) evolves linearly; unknowns are (x(0), r). The adversary
    sees its own x, v, r and the x of its out-neighbors. ``r_target`` is
    identifiable iff the observability null space has no component along it.
    """
    n = w.shape[0]
    lap = np.diag(w.sum(axis=1)) - w
    eye = np.eye(n)
    zero = np.zeros((n, n))
    m = np.block([
        [(1 - delta) * eye - delta * lap, -delta * eye, delta * eye],
        [delta * lap, eye, zero],
        [zero, zero, eye],
    ])
    e = np.block([[eye, zero], [zero, zero], [zero, eye]])
    a = adversary - 1
    rows = [a, n + a, 2 * n + a] + [j for j in range(n) if w[a, j] > 0]
    c = np.zeros((len(rows), 3 * n))
    c[np.arange(len(rows)), rows] = 1.0
    blocks, mk = [], np.eye(3 * n)
    for _ in range(3 * n + 1):
        blocks.append(c @ mk @ e)
        mk = m @ mk
    obs = np.vstack(blocks)
    _, s, vt = np.linalg.svd(obs)
    rank = int(np.sum(s > 1e-9 * s[0]))
    null = vt[rank:]
    if null.shape[0] == 0:
        return True
    return bool(np.linalg.norm(null[:, n + target - 1]) < 1e-6)


def alg3_two_node_oracle(r, x0, v0, delta: float, steps: int, a: float = 1.0) -> np.ndarray:
    """Explicit 4x4 iteration of ALG3 on two agents joined by weight ``a``; returns x(steps)."""
    d = delta
    m = np.array([
        [1 - d - d * a, d * a, d * a, -d * a],
        [d * a, 1 - d - d * a, -d * a, d * a],
        [-d * a, d * a, 1, 0],
        [d * a, -d * a, 0, 1],
    ])
    b = np.array([d * r[0], d * r[1], 0.0, 0.0])
    z = np.array([x0[0], x0[1], v0[0], v0[1]], dtype=float)
    for _ in range(steps):
        z = m @ z + b
    return z[:2]
