"""Bloch-space invariants of the Rice-Mele pump cycle.

Bloch convention: periodic gauge with the intercell phase on ``t2``,

    h(k, phi) = [[Delta/2,             t1 + t2 exp(-ik)],
                 [t1 + t2 exp(+ik),   -Delta/2        ]].

Polarization is the Wilson-loop phase ``P = -arg prod_k <u_k|u_{k+1}> / (2 pi)``
of the lower band. The Chern number is the lattice field-strength sum over
the (k, phi) torus, oriented so that it equals the winding of ``P(phi)``:
both give ``sgn(t0 delta0 Delta0)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GapClosureError, NumericalError, ValidationError
from .models import RiceMeleParams

GAP_TOL = 1e-8
INTEGER_TOL = 1e-3


@dataclass(frozen=True)
class BlochGrid:
    """Uniform periodic grid, ``k`` on ``[-pi, pi)`` and ``phi`` on ``[0, 2 pi)``."""

    n_k: int = 64
    n_phi: int = 64
    band_index: int = 0

    def __post_init__(self):
        if self.n_k < 3 or self.n_phi < 3:
            raise ValidationError(f"grid needs at least 3 points per direction, got {self.n_k}x{self.n_phi}")
        if self.band_index not in (0, 1):
            raise ValidationError("band_index must be 0 (lower) or 1 (upper)")

    @property
    def k_values(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n_k) / self.n_k

    @property
    def phi_values(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi


def _blocks(p: RiceMeleParams, k, phi):
    k, phi = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(phi, dtype=float))
    t1, t2, delta = p.hoppings(phi)
    off = t1 + t2 * np.exp(-1j * k)
    h = np.empty(k.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = 0.5 * delta
    h[..., 1, 1] = -0.5 * delta
    h[..., 0, 1] = off
    h[..., 1, 0] = np.conj(off)
    return h


def bloch_hamiltonian(p: RiceMeleParams, k: float, phi: float) -> np.ndarray:
    """The 2x2 Bloch matrix at momentum ``k`` and pump angle ``phi``."""
    return _blocks(p, k, phi)


def bloch_energies(p: RiceMeleParams, k, phi) -> np.ndarray:
    """Band energies ``-+sqrt(Delta^2/4 + |t1 + t2 e^{-ik}|^2)``, last axis ``(lower, upper)``."""
    k, phi = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(phi, dtype=float))
    t1, t2, delta = p.hoppings(phi)
    e = np.sqrt(0.25 * delta**2 + np.abs(t1 + t2 * np.exp(-1j * k)) ** 2)
    return np.stack([-e, e], axis=-1)


def gap_closes(p: RiceMeleParams) -> bool:
    """Whether the bulk gap vanishes somewhere on the cycle (iff ``t0 delta0 Delta0 = 0``)."""
    return p.t0 * p.delta0 * p.Delta0 == 0.0


def band_states(p: RiceMeleParams, grid: BlochGrid) -> np.ndarray:
    """Bloch states of ``grid.band_index`` on the grid, shape ``(n_phi, n_k, 2)``.

    The gauge makes the first component real and non-negative.

    Raises
    ------
    GapClosureError
        The band gap is below ``1e-8`` at a grid point, or closes on the cycle.
    """
    kk, pp = np.meshgrid(grid.k_values, grid.phi_values)
    _check_gap(p, kk, pp)
    _, v = np.linalg.eigh(_blocks(p, kk, pp))
    u = v[..., grid.band_index]
    return _gauge(u)


def _gauge(u):
    first = u[..., 0]
    mag = np.abs(first)
    phase = np.where(mag > 0, first / np.where(mag > 0, mag, 1.0), 1.0)
    return u / phase[..., None]


def _check_gap(p, k, phi):
    if gap_closes(p):
        raise GapClosureError(
            f"bulk gap closes on the pump cycle (t0*delta0*Delta0 = {p.t0 * p.delta0 * p.Delta0:g}); "
            "the Chern number is undefined"
        )
    e = bloch_energies(p, k, phi)
    g = float(np.min(e[..., 1] - e[..., 0]))
    if g < GAP_TOL:
        raise GapClosureError(f"bulk gap {g:.3e} below {GAP_TOL:g} on the sampling grid")
    return g


def _link(a, b):
    z = np.sum(a.conj() * b, axis=-1)
    mag = np.abs(z)
    if np.any(mag < 1e-14):
        raise NumericalError("vanishing overlap between neighbouring Bloch states; refine the grid")
    return z / mag


def curvature_from_states(u: np.ndarray) -> np.ndarray:
    """Lattice field strength on every plaquette, shape ``(n_phi, n_k)``.

    ``u[j, i]`` is the state at ``(phi_j, k_i)``; both directions wrap.
    """
    u1 = np.roll(u, -1, axis=1)        # k + dk
    u2 = np.roll(u, -1, axis=0)        # phi + dphi
    u12 = np.roll(u1, -1, axis=0)
    loop = _link(u, u1) * _link(u1, u12) * _link(u12, u2) * _link(u2, u)
    return np.angle(loop)


def chern_from_states(u: np.ndarray) -> int:
    """Integer Chern number of a sampled band; errors if the sum is not near an integer."""
    c = float(curvature_from_states(u).sum()) / (2 * np.pi)
    n = round(c)
    if abs(c - n) > INTEGER_TOL:
        raise NumericalError(f"plaquette sum {c:.6f} is not an integer; the grid is too coarse")
    return int(n)


def chern_number(p: RiceMeleParams, grid: BlochGrid | None = None) -> int:
    """First Chern number of the lower band over the (k, phi) torus."""
    grid = grid if grid is not None else BlochGrid()
    return chern_from_states(band_states(p, grid))


def curvature_field(p: RiceMeleParams, grid: BlochGrid | None = None):
    """``(k, phi, F)`` with ``F[j, i]`` the plaquette phase at ``(phi_j, k_i)``."""
    grid = grid if grid is not None else BlochGrid()
    return grid.k_values, grid.phi_values, curvature_from_states(band_states(p, grid))


def write_curvature_csv(p: RiceMeleParams, grid: BlochGrid, path_or_buffer, header: dict | None = None):
    """Long-format CSV ``k,phi,F`` for heatmaps."""
    k, phi, F = curvature_field(p, grid)
    lines = [f"# {key}: {val}" for key, val in (header or {}).items()]
    lines.append("k,phi,F")
    for j, ph in enumerate(phi):
        for i, kv in enumerate(k):
            lines.append(f"{kv:.17g},{ph:.17g},{F[j, i]:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)


def polarization_from_states(u: np.ndarray) -> float:
    """Wilson-loop polarization in ``[0, 1)`` of a closed k loop, ``u`` of shape ``(n_k, 2)``."""
    w = np.prod(_link(u, np.roll(u, -1, axis=0)))
    P = (-np.angle(w) / (2 * np.pi)) % 1.0
    return 0.0 if P == 1.0 else float(P)


def polarization(p: RiceMeleParams, phi: float, n_k: int = 64) -> float:
    """Polarization of the lower band at pump angle ``phi``, in units of the lattice constant."""
    grid = BlochGrid(n_k=n_k, n_phi=3)
    k = grid.k_values
    _check_gap(p, k, np.full_like(k, phi))
    _, v = np.linalg.eigh(_blocks(p, k, phi))
    return polarization_from_states(_gauge(v[..., 0]))


def winding(P: np.ndarray, *, max_jump: float = 0.5) -> float:
    """Unwrapped total change of a closed sequence of polarizations (mod-1 values).

    Raises
    ------
    NumericalError
        A minimal-image step reaches ``max_jump`` or the total is not an integer.
    """
    d = np.diff(np.asarray(P, dtype=float))
    d = (d + 0.5) % 1.0 - 0.5
    if np.any(np.abs(d) >= max_jump - 1e-9):
        j = int(np.argmax(np.abs(d)))
        raise NumericalError(
            f"polarization jumps by {d[j]:.3f} between samples {j} and {j + 1}; refine the phi grid"
        )
    total = float(d.sum())
    if abs(total - round(total)) > INTEGER_TOL:
        raise NumericalError(f"polarization winding {total:.6f} is not an integer; refine the grid")
    return total


def pumped_charge(p: RiceMeleParams, n_phi: int = 64, n_k: int = 64, direction: int = 1) -> float:
    """Charge pumped per cycle: the unwrapped winding of ``P(phi)``.

    ``direction=-1`` runs the cycle backwards.
    """
    if direction not in (1, -1):
        raise ValidationError("direction must be +1 or -1")
    if n_phi < 3:
        raise ValidationError("n_phi must be >= 3")
    if gap_closes(p):
        _check_gap(p, 0.0, 0.0)
    phis = 2 * np.pi * np.arange(n_phi + 1) / n_phi
    if direction == -1:
        phis = phis[::-1]
    P = np.array([polarization(p, ph, n_k) for ph in phis])
    return winding(P)


def pumped_charge_from_states(u: np.ndarray) -> float:
    """Winding of the polarization of sampled states ``u[phi, k]`` (phi wraps)."""
    P = np.array([polarization_from_states(row) for row in u])
    return winding(np.append(P, P[0]))
