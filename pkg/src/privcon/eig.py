"""Dense eigenvalues of small nonsymmetric matrices.

Householder reduction to upper Hessenberg form followed by single-shift
complex QR iteration (Wilkinson shifts, Givens rotations, deflation on
negligible subdiagonal entries). Intended for the n <= 128 matrices that
appear in consensus analysis; nothing here is tuned for large problems.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, PreconditionError

MAX_DENSE_N = 128
MAX_ITER_PER_EIGENVALUE = 60

_EPS = np.finfo(float).eps


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Return an upper Hessenberg matrix similar to ``a`` (Householder reflections)."""
    h = np.array(a, dtype=complex, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        u = x
        u[0] += phase * alpha
        u /= np.linalg.norm(u)
        # H <- P H P with P = I - 2 u u^*
        h[k + 1 :, k:] -= 2.0 * np.outer(u, u.conj() @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ u, u.conj())
        h[k + 2 :, k] = 0.0
    return h


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4.0 - det)
    l1 = tr / 2.0 + disc
    l2 = tr / 2.0 - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def _qr_sweep(h: np.ndarray, lo: int, hi: int, mu: complex) -> None:
    """One shifted QR step ``H - mu I = QR, H <- RQ + mu I`` on the window [lo, hi]."""
    m = hi - lo + 1
    w = h[lo : hi + 1, lo : hi + 1]
    w[np.diag_indices(m)] -= mu
    rots = []
    for k in range(m - 1):
        a = w[k, k]
        b = w[k + 1, k]
        r = np.hypot(abs(a), abs(b))
        if r == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = a / r, b / r
        # G = [[c*, s*], [-s, c]] applied from the left
        rk = w[k, k:].copy()
        rk1 = w[k + 1, k:].copy()
        w[k, k:] = np.conj(c) * rk + np.conj(s) * rk1
        w[k + 1, k:] = -s * rk + c * rk1
        rots.append((c, s))
    for k, (c, s) in enumerate(rots):
        # multiply by G^* from the right
        ck = w[: k + 2, k].copy()
        ck1 = w[: k + 2, k + 1].copy()
        w[: k + 2, k] = c * ck + s * ck1
        w[: k + 2, k + 1] = -np.conj(s) * ck + np.conj(c) * ck1
    w[np.diag_indices(m)] += mu


def eigvals(a: np.ndarray, max_iter: int = MAX_ITER_PER_EIGENVALUE) -> np.ndarray:
    """All eigenvalues of a small dense square matrix.

    Raises ``ConvergenceError`` when a single eigenvalue needs more than
    ``max_iter`` QR sweeps to deflate, and ``PreconditionError`` when the
    matrix exceeds ``MAX_DENSE_N``.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_DENSE_N:
        raise PreconditionError(f"n={n} exceeds the dense limit {MAX_DENSE_N}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    h = hessenberg(a)
    scale = max(np.abs(h).max(), np.finfo(float).tiny)
    out = np.empty(n, dtype=complex)
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            out[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            sub = abs(h[lo, lo - 1])
            local = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if sub <= _EPS * (local if local > 0 else scale):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter:
            raise ConvergenceError(
                f"QR iteration did not deflate eigenvalue {hi} after {max_iter} sweeps"
            )
        if its % 11 == 0:
            # exceptional shift to break cycling
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1.0 + 0.5j)
        else:
            mu = _wilkinson_shift(
                h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi]
            )
        _qr_sweep(h, lo, hi, mu)
    if np.isrealobj(a):
        # conjugate symmetry of real input; snap tiny imaginary parts
        out.imag[np.abs(out.imag) <= 1e3 * _EPS * scale] = 0.0
    return out
