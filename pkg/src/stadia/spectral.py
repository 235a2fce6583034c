"""Dense non-Hermitian eigendecomposition, biorthogonal pairing, level tracking.

Eigenvalues are ordered by ascending real part, ties broken by ascending
imaginary part. Right eigenvectors are unit-norm columns; left eigenvectors are
columns ``l_i`` of ``H^H`` with ``l_i^H r_j = delta_ij`` once
:func:`biorthogonalize` has run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, DegeneracyError, TrackingError, ValidationError
from .qr import eig_qr

MAX_DIM = 256
RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-8
PAIRING_TOL = 1e-10
HERMITIAN_TOL = 1e-14
TIE_TOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a single matrix.

    Attributes
    ----------
    values : ndarray, shape (n,)
        Complex eigenvalues, sorted.
    right_vectors, left_vectors : ndarray, shape (n, n)
        Eigenvectors stored as columns.
    residual_norm : float
        ``max_i ||H r_i - E_i r_i||``.
    matrix_norm : float
        Spectral norm of the decomposed matrix.
    hermitian : bool
        Whether the Hermitian driver was used (left vectors equal right ones).
    biorthogonal : bool
        Whether left vectors have been paired with the right ones.
    """

    values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    residual_norm: float
    matrix_norm: float
    hermitian: bool = False
    biorthogonal: bool = False

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def pairing(self) -> np.ndarray:
        """Matrix of overlaps ``<l_i|r_j>``."""
        return self.left_vectors.conj().T @ self.right_vectors

    def permuted(self, perm) -> "EigenSystem":
        perm = np.asarray(perm)
        return replace(
            self,
            values=self.values[perm],
            right_vectors=self.right_vectors[:, perm],
            left_vectors=self.left_vectors[:, perm],
        )


def _as_matrix(H) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {H.shape}")
    H = H.astype(complex, copy=False)
    if not np.all(np.isfinite(H)):
        raise ValidationError("matrix contains NaN or Inf entries")
    return H


def sort_order(values, tie_tol: float = 0.0) -> np.ndarray:
    """Indices sorting eigenvalues by real part, then imaginary part.

    Real parts within ``tie_tol`` of their sorted neighbour form one cluster,
    ordered by imaginary part, so round-off in nominally equal real parts does
    not decide the order.
    """
    values = np.asarray(values)
    order = np.lexsort((values.imag, values.real))
    if tie_tol <= 0 or values.size < 2:
        return order
    re = values.real[order]
    cluster = np.concatenate(([0], np.cumsum(np.diff(re) > tie_tol)))
    return order[np.lexsort((values.imag[order], cluster))]


def _fix_phase(vecs):
    # largest-modulus component made real positive, for reproducible output
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    mags = np.abs(pivots)
    mags[mags == 0] = 1.0
    return vecs * (mags / np.where(pivots == 0, 1.0, pivots))


def eig_dense(H, *, method: str = "lapack") -> EigenSystem:
    """All eigenpairs of a dense complex matrix.

    Parameters
    ----------
    H : array_like, shape (n, n)
        Finite complex matrix with ``n <= 256``.
    method : {"lapack", "qr"}
        ``"lapack"`` calls the LAPACK general driver; ``"qr"`` uses the
        in-package Hessenberg/shifted-QR solver. With ``"lapack"``, Hermitian
        input goes to the Hermitian driver so that degenerate subspaces come
        out orthonormal.

    Returns
    -------
    EigenSystem
        Raw (not yet biorthogonalized) eigensystem.

    Raises
    ------
    ValidationError
        Non-square, empty, oversized or non-finite input.
    ConvergenceError
        The solver failed or the residual exceeds ``1e-10 * ||H||``.
    """
    H = _as_matrix(H)
    n = H.shape[0]
    if n > MAX_DIM:
        raise ValidationError(f"dimension {n} exceeds the dense ceiling of {MAX_DIM}")
    norm = float(np.linalg.norm(H, 2))
    scale = norm if norm > 0 else 1.0
    hermitian = float(np.abs(H - H.conj().T).max()) <= HERMITIAN_TOL * scale

    try:
        if hermitian and method == "lapack":
            w, vr = np.linalg.eigh(H)
            w = w.astype(complex)
            vl = None
        elif method == "lapack":
            w, vl, vr = scipy.linalg.eig(H, left=True, right=True)
        elif method == "qr":
            w, vr = eig_qr(H)
            vl = None
        else:
            raise ValidationError(f"unknown eigensolver method {method!r}")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"eigensolver failed for a {n}x{n} matrix: {exc}") from exc

    order = sort_order(w, TIE_TOL * scale)
    w = w[order]
    vr = vr[:, order]
    vr = _fix_phase(vr / np.linalg.norm(vr, axis=0))
    if hermitian and method == "lapack":
        vl = vr.copy()
    elif vl is None:
        try:
            vl = np.linalg.solve(vr, np.eye(n, dtype=complex)).conj().T
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigenvector matrix singular for a {n}x{n} matrix") from exc
    else:
        vl = vl[:, order]
    vl = vl / np.linalg.norm(vl, axis=0)
    overlap = np.sum(vl.conj() * vr, axis=0)
    vl = vl * np.where(overlap == 0, 1.0, overlap / np.maximum(np.abs(overlap), 1e-300))

    residual = float(np.linalg.norm(H @ vr - vr * w, axis=0).max())
    if residual > RESIDUAL_TOL * scale:
        raise ConvergenceError(
            f"eigen-residual {residual:.3e} exceeds {RESIDUAL_TOL:g}*||H|| "
            f"for a {n}x{n} matrix"
        )
    return EigenSystem(w, vr, vl, residual, norm, hermitian=hermitian and method == "lapack")


def degenerate_pairs(values, threshold) -> list:
    """All index pairs ``(i, j)``, ``i < j``, with ``|E_i - E_j| <= threshold``."""
    values = np.asarray(values)
    dist = np.abs(values[:, None] - values[None, :])
    i, j = np.nonzero(np.triu(dist <= threshold, k=1))
    return list(zip(i.tolist(), j.tolist()))


def biorthogonalize(raw: EigenSystem, *, strict: bool = True,
                    degeneracy_tol: float = DEGENERACY_TOL) -> EigenSystem:
    """Rescale left vectors so that ``<l_i|r_j> = delta_ij``.

    With ``strict=True`` (the default) any pair of eigenvalues closer than
    ``degeneracy_tol * ||H||`` raises :class:`DegeneracyError`. With
    ``strict=False`` degenerate clusters are accepted and the whole left basis
    is taken from the inverse of the right-vector matrix, which pairs any
    diagonalizable spectrum.
    """
    n = raw.dim
    scale = raw.matrix_norm if raw.matrix_norm > 0 else 1.0
    close = degenerate_pairs(raw.values, degeneracy_tol * scale) if n > 1 else []
    if close and strict:
        i, j = close[0]
        sep = abs(raw.values[i] - raw.values[j])
        raise DegeneracyError(
            f"levels {i} and {j} are degenerate (|E_i - E_j| = {sep:.3e}); "
            "a non-degenerate spectrum is required",
            pair=(i, j), separation=sep,
        )

    R = raw.right_vectors
    if raw.hermitian:
        L = R.copy()
    else:
        c = np.sum(raw.left_vectors.conj() * R, axis=0)
        if np.any(np.abs(c) < 1e-300):
            k = int(np.argmin(np.abs(c)))
            raise DegeneracyError(f"level {k} has vanishing left-right overlap (defective matrix)",
                                  pair=(k, k), separation=0.0)
        L = raw.left_vectors / c.conj()
        err = np.abs(L.conj().T @ R - np.eye(n)).max()
        if close or err > PAIRING_TOL:
            L = np.linalg.solve(R, np.eye(n, dtype=complex)).conj().T
    return replace(raw, left_vectors=L, biorthogonal=True)


def eig_biorthogonal(H, *, strict: bool = True, method: str = "lapack") -> EigenSystem:
    """Shorthand for ``biorthogonalize(eig_dense(H))``."""
    return biorthogonalize(eig_dense(H, method=method), strict=strict)


def track_levels(sweep: Sequence, labels: Iterable[int] | None = None, *,
                 min_overlap: float = 0.7, ambiguity: float = 0.05) -> list:
    """Relabel eigensystems along a parameter sweep so each label is one physical level.

    Parameters
    ----------
    sweep : sequence of (R, EigenSystem)
        Biorthogonalized eigensystems on an ordered parameter grid.
    labels : iterable of int, optional
        Labels (indices at the first grid point) whose matching is checked for
        ambiguity. Defaults to every level. Unchecked levels are still assigned,
        so the relabeling is always a bijection.
    min_overlap, ambiguity : float
        A checked level must have best overlap above ``min_overlap`` and beat
        the runner-up by at least ``ambiguity``.

    Returns
    -------
    list of (R, EigenSystem)
        Same grid, eigensystems permuted so that label ``i`` at step ``m+1``
        is the level maximizing ``|<l_i(m)|r_j(m+1)>|``.
    """
    sweep = list(sweep)
    if not sweep:
        return []
    n = sweep[0][1].dim
    checked = list(range(n)) if labels is None else [int(i) for i in labels]
    out = [sweep[0]]
    prev = sweep[0][1]
    for m in range(1, len(sweep)):
        R, cur = sweep[m]
        C = np.abs(prev.left_vectors.conj().T @ cur.right_vectors)
        rows, cols = linear_sum_assignment(-C)
        perm = np.empty(n, dtype=int)
        perm[rows] = cols
        for i in checked:
            row = C[i]
            top = np.argsort(row)[::-1]
            best = row[top[0]]
            second = row[top[1]] if n > 1 else 0.0
            if best < min_overlap:
                raise TrackingError(
                    f"level {i} lost between R={sweep[m - 1][0]:.6g} and R={R:.6g} "
                    f"(best overlap {best:.3f} < {min_overlap}); use a finer R grid"
                )
            if best - second < ambiguity:
                raise TrackingError(
                    f"ambiguous match for level {i} between R={sweep[m - 1][0]:.6g} and "
                    f"R={R:.6g} (overlaps {best:.3f} vs {second:.3f}); use a finer R grid"
                )
            if perm[i] != top[0]:
                raise TrackingError(
                    f"level {i} conflicts with another level's best match near R={R:.6g}; "
                    "use a finer R grid"
                )
        cur = cur.permuted(perm)
        out.append((R, cur))
        prev = cur
    return out
