"""Complex Schur decomposition by Householder-Hessenberg reduction and shifted QR.

Pure numpy; no LAPACK eigen-driver involved. Used as the ``method="qr"``
backend of :func:`stadia.spectral.eig_dense` and as an independent cross-check
of the default LAPACK path.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


def hessenberg(A):
    """Reduce ``A`` to upper Hessenberg form ``H = Q^H A Q``.

    Returns
    -------
    H, Q : ndarray
        ``H`` upper Hessenberg, ``Q`` unitary.
    """
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        xnorm = np.linalg.norm(x)
        if xnorm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * xnorm
        v /= np.linalg.norm(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H, Q


def _givens(x, y):
    # c real, s complex, with [[c, s], [-conj(s), c]] @ [x, y] = [r, 0]
    ax = abs(x)
    r = np.hypot(ax, abs(y))
    if r == 0.0:
        return 1.0, 0.0
    if ax == 0.0:
        return 0.0, 1.0
    c = ax / r
    s = (x / ax) * np.conj(y) / r
    return c, s


def schur(A, max_sweeps_per_eig=30):
    """Complex Schur form ``A = Z T Z^H`` with ``T`` upper triangular.

    Single-shift implicit QR with Wilkinson shifts and exceptional shifts
    after 10 and 20 stalled sweeps.
    """
    T, Z = hessenberg(A)
    n = T.shape[0]
    anorm = max(np.abs(T).max(), _TINY)
    hi = n - 1
    stalled = 0
    total = 0
    budget = max_sweeps_per_eig * max(n, 1)
    while hi > 0:
        # locate the start of the active unreduced block
        lo = hi
        while lo > 0:
            sub = abs(T[lo, lo - 1])
            scale = abs(T[lo - 1, lo - 1]) + abs(T[lo, lo])
            if scale == 0.0:
                scale = anorm
            if sub <= _EPS * scale or sub < _TINY / _EPS:
                T[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            stalled = 0
            continue

        total += 1
        if total > budget:
            resid = abs(T[hi, hi - 1])
            raise ConvergenceError(
                f"QR iteration did not converge for a {n}x{n} matrix "
                f"(subdiagonal residual {resid:.3e} after {total} sweeps)"
            )

        if stalled in (10, 20):
            mu = T[hi, hi] + 0.75 * abs(T[hi, hi - 1])
        else:
            a, b = T[hi - 1, hi - 1], T[hi - 1, hi]
            c, d = T[hi, hi - 1], T[hi, hi]
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            m1 = d - half + disc  # = (a+d)/2 + disc
            m2 = d - half - disc
            mu = m1 if abs(m1 - d) <= abs(m2 - d) else m2
        stalled += 1

        x = T[lo, lo] - mu
        y = T[lo + 1, lo]
        for k in range(lo, hi):
            if k > lo:
                x = T[k, k - 1]
                y = T[k + 1, k - 1]
            cs, sn = _givens(x, y)
            c0 = max(k - 1, lo)
            rk = T[k, c0:].copy()
            rk1 = T[k + 1, c0:]
            T[k, c0:] = cs * rk + sn * rk1
            T[k + 1, c0:] = -np.conj(sn) * rk + cs * rk1
            if k > lo:
                T[k + 1, k - 1] = 0.0
            r1 = min(k + 2, hi) + 1
            ck = T[:r1, k].copy()
            ck1 = T[:r1, k + 1]
            T[:r1, k] = cs * ck + np.conj(sn) * ck1
            T[:r1, k + 1] = -sn * ck + cs * ck1
            zk = Z[:, k].copy()
            zk1 = Z[:, k + 1]
            Z[:, k] = cs * zk + np.conj(sn) * zk1
            Z[:, k + 1] = -sn * zk + cs * zk1
    return np.triu(T), Z


def triangular_eigenvectors(T):
    """Right eigenvectors of an upper-triangular matrix by back substitution."""
    n = T.shape[0]
    X = np.zeros((n, n), dtype=complex)
    smin = max(_EPS * np.abs(T).max(), _TINY)
    for k in range(n):
        lam = T[k, k]
        x = np.zeros(n, dtype=complex)
        x[k] = 1.0
        for i in range(k - 1, -1, -1):
            den = T[i, i] - lam
            if abs(den) < smin:
                den = smin
            x[i] = -(T[i, i + 1:k + 1] @ x[i + 1:k + 1]) / den
            big = abs(x[i])
            if big > 1e100:
                x /= big
        X[:, k] = x
    return X


def eig_qr(A):
    """Eigenvalues and unit-norm right eigenvectors via the Schur form."""
    T, Z = schur(A)
    values = np.diag(T).copy()
    vecs = Z @ triangular_eigenvectors(T)
    vecs /= np.linalg.norm(vecs, axis=0)
    return values, vecs
