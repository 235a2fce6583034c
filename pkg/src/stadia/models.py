"""Hamiltonian constructors: effective two-level model, NH SSH chain, Rice-Mele pump.

Every constructor returns a :class:`DrivenModel`, a matrix-valued function of a
single real control parameter. Lattice bases are site-major:
``(A_1, B_1, A_2, B_2, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .errors import GapClosureError, ValidationError

Scalar = Union[float, complex]


@dataclass(frozen=True)
class DrivenModel:
    """A family ``R -> H(R)`` of dense square matrices of fixed size."""

    dim: int
    build: Callable[[float], np.ndarray]
    control_name: str = "R"
    static_params: Mapping[str, float] = field(default_factory=dict)
    boundary: str = "none"
    name: str = "model"

    def __call__(self, R: float) -> np.ndarray:
        return self.build(R)

    def derivative(self, R: float, step: float | None = None) -> np.ndarray:
        """Centered finite-difference ``dH/dR``."""
        h = step if step is not None else 1e-5 * max(1.0, abs(R))
        return (self.build(R + h) - self.build(R - h)) / (2.0 * h)

    def is_hermitian_at(self, R: float, tol: float = 1e-14) -> bool:
        H = self.build(R)
        return bool(np.abs(H - H.conj().T).max() <= tol * max(1.0, np.abs(H).max()))


# ---------------------------------------------------------------------------
# effective two-level model


@dataclass(frozen=True)
class TwoLevelParams:
    """Detuning ``delta0`` (number or function of R) and off-diagonal couplings."""

    delta0: Union[float, Callable[[float], float]]
    omega0: Scalar
    omega0p: Scalar

    def __post_init__(self):
        if self.omega0 * self.omega0p == 0:
            raise ValidationError("omega0 * omega0p must be non-zero (the minimal gap would vanish)")

    def delta_at(self, R: float) -> float:
        return float(self.delta0(R)) if callable(self.delta0) else float(self.delta0)

    @property
    def coupling_product(self) -> complex:
        return complex(self.omega0) * complex(self.omega0p)

    @property
    def hermitian(self) -> bool:
        return np.isclose(complex(self.omega0p), np.conj(complex(self.omega0)), rtol=0, atol=1e-15)


def effective_two_level(p: TwoLevelParams, R: float) -> np.ndarray:
    """``(1/2) [[delta0, omega0], [omega0p, -delta0]]`` at control value ``R``."""
    d = p.delta_at(R)
    if not np.isfinite(d):
        raise ValidationError(f"delta0({R}) is not finite")
    H = np.empty((2, 2), dtype=complex)
    H[0, 0] = 0.5 * d
    H[1, 1] = -0.5 * d
    H[0, 1] = 0.5 * complex(p.omega0)
    H[1, 0] = 0.5 * complex(p.omega0p)
    return H


def two_level_model(p: TwoLevelParams, control_name: str = "R") -> DrivenModel:
    return DrivenModel(
        dim=2,
        build=lambda R: effective_two_level(p, R),
        control_name=control_name,
        static_params={"omega0": p.omega0, "omega0p": p.omega0p},
        name="two-level",
    )


def landau_zener(v: float, omega0: float = 1.0) -> DrivenModel:
    """``H(t) = (1/2) [[v t, omega0], [omega0, -v t]]`` with time as control."""
    return two_level_model(TwoLevelParams(lambda t: v * t, omega0, omega0), control_name="t")


def two_level_gap(p: TwoLevelParams, R: float) -> complex:
    """Complex splitting ``E_+ - E_- = sqrt(delta0^2 + omega0 omega0p)``."""
    d = p.delta_at(R)
    return complex(np.sqrt(complex(d * d) + p.coupling_product))


def mixing_angles(p: TwoLevelParams, R: float) -> tuple[complex, complex]:
    """Complex mixing angles of ``H`` and of ``H^dagger``.

    ``theta = arccos(delta0 / sqrt(delta0^2 + omega0 omega0p))``; the
    conjugate-problem angle uses ``conj(omega0) conj(omega0p)`` instead.
    """
    d = p.delta_at(R)
    P = p.coupling_product
    g = np.sqrt(complex(d * d) + P)
    gt = np.sqrt(complex(d * d) + np.conj(P))
    if abs(g) < 1e-300 or abs(gt) < 1e-300:
        raise GapClosureError(f"complex gap vanishes at R={R} (exceptional point)")
    return complex(np.arccos(d / g)), complex(np.arccos(d / gt))


def two_level_vectors(p: TwoLevelParams, R: float):
    """Eigenvalues and biorthonormal eigenvectors rebuilt from the mixing angles.

    In the frame where the coupling is symmetrized by ``S = diag(sqrt(omega0),
    sqrt(omega0p))`` the upper/lower states are ``(cos t/2, sin t/2)`` and
    ``(-sin t/2, cos t/2)``; ``S`` maps them back. Left vectors use the
    conjugate angle.

    Returns
    -------
    values : ndarray, shape (2,)
        ``(E_+, E_-)``.
    right, left : ndarray, shape (2, 2)
        Columns ordered as ``values``; ``left^H right = I``.
    """
    theta, theta_t = mixing_angles(p, R)
    g = two_level_gap(p, R)
    S = np.diag([np.sqrt(complex(p.omega0)), np.sqrt(complex(p.omega0p))])
    w = S[0, 0] * S[1, 1]
    # sqrt(a) sqrt(b) may sit on the other branch of sqrt(ab)
    if abs(np.sin(theta) * g - w) > abs(np.sin(theta) * g + w):
        S[1, 1] = -S[1, 1]
    Sinv_h = np.linalg.inv(S).conj().T

    def frame(t):
        c, s = np.cos(t / 2), np.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)

    right = S @ frame(theta)
    # conj(frame(theta)) equals frame(theta_t) off the branch cut of arccos
    left = Sinv_h @ frame(theta_t)
    return np.array([0.5 * g, -0.5 * g]), right, left


# ---------------------------------------------------------------------------
# non-Hermitian SSH chain


@dataclass(frozen=True)
class SshParams:
    """Open NH SSH chain with ``2N - 1`` sites (last cell carries only an A site)."""

    n_cells: int
    t1: float = 0.0
    t2: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValidationError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        for name in ("t1", "t2", "gamma"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    @property
    def sites(self) -> int:
        return 2 * self.n_cells - 1

    @property
    def n_bonds(self) -> int:
        return self.n_cells - 1


def _bond_scale(scales, term, n):
    if scales is None or term not in scales:
        return np.ones(n)
    arr = np.broadcast_to(np.asarray(scales[term], dtype=float), (n,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"non-finite scale factors for term {term!r}")
    return arr


def nh_ssh(p: SshParams, scales: Mapping[str, object] | None = None) -> DrivenModel:
    """NH SSH Hamiltonian with the intracell hopping ``t1`` as control.

    ``H[A_i, B_i] = t1 + gamma/2``, ``H[B_i, A_i] = t1 - gamma/2`` and
    ``H[B_i, A_{i+1}] = H[A_{i+1}, B_i] = t2``.

    Parameters
    ----------
    scales : mapping, optional
        Per-bond multiplicative factors for the terms ``"t1"``, ``"t2"`` and
        ``"gamma"`` (scalar or one value per bond). Used for perturbation sweeps.
    """
    n = p.sites
    nb = p.n_bonds
    s1 = _bond_scale(scales, "t1", nb)
    s2 = _bond_scale(scales, "t2", nb)
    sg = _bond_scale(scales, "gamma", nb)
    a = 2 * np.arange(nb)
    b = a + 1
    M1 = np.zeros((n, n), dtype=complex)
    M1[a, b] = s1
    M1[b, a] = s1
    C = np.zeros((n, n), dtype=complex)
    C[a, b] = 0.5 * p.gamma * sg
    C[b, a] = -0.5 * p.gamma * sg
    C[b, a + 2] = p.t2 * s2
    C[a + 2, b] = p.t2 * s2

    def build(t1):
        return t1 * M1 + C

    return DrivenModel(
        dim=n,
        build=build,
        control_name="t1",
        static_params={"n_cells": p.n_cells, "t2": p.t2, "gamma": p.gamma},
        boundary="open",
        name="nh-ssh",
    )


def critical_t1(t2: float, gamma: float) -> float:
    """Intracell hopping where the zero mode hops from one edge to the other."""
    return float(np.sqrt(t2 * t2 + 0.25 * gamma * gamma))


def edge_target(p: SshParams, side: str) -> np.ndarray:
    """Site basis vector on the first (``"left"``) or last (``"right"``) A site."""
    v = np.zeros(p.sites, dtype=complex)
    if side == "left":
        v[0] = 1.0
    elif side == "right":
        v[-1] = 1.0
    else:
        raise ValidationError(f"side must be 'left' or 'right', got {side!r}")
    return v


def zero_mode_index(values) -> int:
    """Index of the eigenvalue closest to zero."""
    return int(np.argmin(np.abs(np.asarray(values))))


# ---------------------------------------------------------------------------
# Rice-Mele pump


@dataclass(frozen=True)
class RiceMeleParams:
    """Rice-Mele chain of ``n_cells`` two-site cells driven by the pump angle."""

    n_cells: int
    t0: float = 1.0
    delta0: float = 0.6
    Delta0: float = 0.36
    phi: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValidationError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        if self.boundary not in ("periodic", "open"):
            raise ValidationError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        for name in ("t0", "delta0", "Delta0", "phi"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def hoppings(self, phi: float) -> tuple[float, float, float]:
        """``(t1, t2, Delta)`` at pump angle ``phi``."""
        d = self.delta0 * np.cos(phi)
        return self.t0 + d, self.t0 - d, self.Delta0 * np.sin(phi)


def rice_mele(p: RiceMeleParams, scales: Mapping[str, object] | None = None) -> DrivenModel:
    """Real-space Rice-Mele Hamiltonian with the pump angle ``phi`` as control.

    Hoppings ``t1 = t0 + delta0 cos(phi)`` (intracell) and
    ``t2 = t0 - delta0 cos(phi)`` (intercell, wrapping around for periodic
    boundaries); on-site ``+Delta/2`` on A and ``-Delta/2`` on B with
    ``Delta = Delta0 sin(phi)``. ``scales`` may rescale ``"t1"``, ``"t2"`` or
    ``"onsite"`` per bond/cell.
    """
    N = p.n_cells
    n = 2 * N
    periodic = p.boundary == "periodic"
    n_inter = N if periodic else N - 1
    s1 = _bond_scale(scales, "t1", N)
    s2 = _bond_scale(scales, "t2", n_inter)
    so = _bond_scale(scales, "onsite", N)
    a = 2 * np.arange(N)
    M1 = np.zeros((n, n), dtype=complex)
    M1[a, a + 1] = s1
    M1[a + 1, a] = s1
    bi = 2 * np.arange(n_inter) + 1
    ai = (bi + 1) % n
    M2 = np.zeros((n, n), dtype=complex)
    M2[bi, ai] = s2
    M2[ai, bi] = s2
    D = np.zeros((n, n), dtype=complex)
    D[a, a] = 0.5 * so
    D[a + 1, a + 1] = -0.5 * so

    def build(phi):
        t1, t2, delta = p.hoppings(phi)
        return t1 * M1 + t2 * M2 + delta * D

    return DrivenModel(
        dim=n,
        build=build,
        control_name="phi",
        static_params={"n_cells": N, "t0": p.t0, "delta0": p.delta0, "Delta0": p.Delta0},
        boundary=p.boundary,
        name="rice-mele",
    )
