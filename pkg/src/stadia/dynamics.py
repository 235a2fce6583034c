"""Time evolution along a schedule, fidelities and the adiabatic diagnostic.

The Schrodinger equation ``i dpsi/dt = H(R(t)) psi`` is integrated with the
classical four-stage Runge-Kutta scheme. Step boundaries include every knot of
the schedule, so each step lies inside one interpolation piece and the control
path is smooth across it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NormExplosion, ValidationError
from .models import DrivenModel
from .schedule import PairSelector, Schedule, pair_energies


@dataclass(frozen=True)
class Fidelity:
    """Overlap magnitude with and without division by the state norm."""

    normalized: float
    raw: float


def fidelity(psi, target) -> Fidelity:
    """``|<target|psi>| / ||psi||`` and the raw ``|<target|psi>|``.

    Raises
    ------
    ValidationError
        Zero state or target not normalized.
    """
    psi = np.asarray(psi, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if psi.shape != target.shape:
        raise ValidationError(f"shape mismatch {psi.shape} vs {target.shape}")
    n = float(np.linalg.norm(psi))
    if n == 0.0:
        raise ValidationError("fidelity undefined for the zero state")
    if abs(np.linalg.norm(target) - 1.0) > 1e-8:
        raise ValidationError("target state must be normalized")
    raw = float(abs(np.vdot(target, psi)))
    return Fidelity(min(raw / n, 1.0), raw)


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples of an evolution.

    ``states`` holds the unnormalized vectors as rows. Fidelity columns are NaN
    when no target was given and ``s_prime`` is NaN unless diagnostics were
    requested.
    """

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    fidelity_normalized: np.ndarray
    fidelity_raw: np.ndarray
    s_prime: np.ndarray
    n_steps: int

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_fidelity(self) -> Fidelity:
        return Fidelity(float(self.fidelity_normalized[-1]), float(self.fidelity_raw[-1]))

    @property
    def max_s_prime(self) -> float:
        sp = self.s_prime[np.isfinite(self.s_prime)]
        return float(sp.max()) if sp.size else math.nan

    def to_csv(self, path_or_buffer, header: dict | None = None):
        """Columns ``time, norm, fidelity_normalized, fidelity_raw, s_prime``."""
        lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
        lines.append("time,norm,fidelity_normalized,fidelity_raw,s_prime")
        for row in zip(self.times, self.norms, self.fidelity_normalized, self.fidelity_raw, self.s_prime):
            lines.append(",".join(format(float(x), ".17g") for x in row))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)


def step_grid(schedule: Schedule, n_steps: int) -> np.ndarray:
    """Time nodes containing every schedule knot, about ``n_steps`` intervals in total.

    Each knot interval receives ``max(1, ceil(n_steps * dt_i / T))`` equal steps.
    """
    knots = schedule.times
    T = schedule.total_time
    d = np.diff(knots)
    counts = np.maximum(1, np.ceil(n_steps * d / T - 1e-9).astype(int))
    pieces = [knots[:1]]
    for i, c in enumerate(counts):
        pieces.append(knots[i] + d[i] * (np.arange(1, c + 1) / c))
        pieces[-1][-1] = knots[i + 1]
    return np.concatenate(pieces)


def default_steps(model: DrivenModel, schedule: Schedule, h_norm: float = 0.05) -> int:
    """Steps keeping ``dt * ||H||_2 <= h_norm`` over a 17-point sample of the path."""
    Rs = np.atleast_1d(schedule(np.linspace(0.0, schedule.total_time, 17)))
    hmax = max(np.linalg.norm(model(R), 2) for R in Rs)
    return int(math.ceil(schedule.total_time * hmax / h_norm))


def _max_imag_energy(model: DrivenModel, Rs) -> float:
    return float(max(np.linalg.eigvals(model(R)).imag.max() for R in Rs))


def evolve(model: DrivenModel, schedule: Schedule, psi0, n_steps: int | None = None, *,
           target=None, n_record: int = 1001, diagnostics: PairSelector | None = None,
           use_exponent: bool = True, imag_sign: int = 1,
           norm_limit: float = 1e12) -> Trajectory:
    """Integrate the state from ``t = 0`` to ``T`` along ``schedule``.

    Parameters
    ----------
    model : DrivenModel
    schedule : Schedule
    psi0 : array_like
        Unit-norm initial state.
    n_steps : int, optional
        Number of RK4 steps; at least ten per schedule knot interval. The
        default also keeps ``dt * max ||H|| <= 0.05`` (estimated on a sample
        of the path), which holds the Hermitian norm drift below ``1e-8``.
    target : array_like, optional
        Normalized state for the fidelity series.
    n_record : int
        Approximate number of recorded samples (always includes both ends).
    diagnostics : PairSelector, optional
        If given, the adiabatic coefficient for this pair is evaluated at the
        recorded times (see :func:`adiabatic_diagnostics`).
    norm_limit : float
        Abort threshold for the state norm.

    Raises
    ------
    ValidationError
        Bad initial state or too few steps.
    NormExplosion
        ``||psi|| > norm_limit``; the message carries the largest ``Im E``
        seen along the visited path.
    """
    psi = np.array(psi0, dtype=complex)
    if psi.shape != (model.dim,):
        raise ValidationError(f"initial state has shape {psi.shape}, model dimension is {model.dim}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValidationError("initial state must have unit norm")
    min_steps = 10 * (len(schedule.times) - 1)
    if n_steps is None:
        n_steps = max(min_steps, default_steps(model, schedule))
    if n_steps < min_steps:
        raise ValidationError(
            f"n_steps={n_steps} below 10 per schedule interval ({min_steps} required)"
        )
    if target is not None:
        target = np.asarray(target, dtype=complex)
        if abs(np.linalg.norm(target) - 1.0) > 1e-8:
            raise ValidationError("target state must be normalized")

    nodes = step_grid(schedule, n_steps)
    n = len(nodes) - 1
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    R_nodes = schedule(nodes)
    R_mids = schedule(mids)
    rec_idx = np.unique(np.linspace(0, n, max(2, min(n_record, n + 1))).round().astype(int))
    rec_pos = {int(k): j for j, k in enumerate(rec_idx)}

    states = np.empty((len(rec_idx), model.dim), dtype=complex)
    states[0] = psi0
    H0 = model(R_nodes[0])
    for k in range(n):
        h = nodes[k + 1] - nodes[k]
        Hm = model(R_mids[k])
        H1 = model(R_nodes[k + 1])
        k1 = -1j * (H0 @ psi)
        k2 = -1j * (Hm @ (psi + 0.5 * h * k1))
        k3 = -1j * (Hm @ (psi + 0.5 * h * k2))
        k4 = -1j * (H1 @ (psi + h * k3))
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        H0 = H1
        nrm = np.linalg.norm(psi)
        if not np.isfinite(nrm) or nrm > norm_limit:
            visited = R_nodes[np.linspace(0, k + 1, min(k + 2, 64)).round().astype(int)]
            raise NormExplosion(
                f"state norm {nrm:.3e} exceeded {norm_limit:.1e} at t={nodes[k + 1]:.6g}; "
                f"max Im(E) along the path = {_max_imag_energy(model, visited):.6g}"
            )
        j = rec_pos.get(k + 1)
        if j is not None:
            states[j] = psi

    times = nodes[rec_idx]
    norms = np.linalg.norm(states, axis=1)
    if target is not None:
        raw = np.abs(states @ target.conj())
        fn = np.minimum(raw / norms, 1.0)
    else:
        raw = fn = np.full(len(times), math.nan)
    if diagnostics is not None:
        sp = adiabatic_diagnostics(model, schedule, diagnostics, times,
                                   use_exponent=use_exponent, imag_sign=imag_sign).values
    else:
        sp = np.full(len(times), math.nan)
    return Trajectory(times, states, norms, fn, raw, sp, n)


@dataclass(frozen=True)
class Diagnostics:
    """The adiabatic coefficient along a schedule.

    ``values`` is the full series and ``s_prime`` its maximum.
    """

    times: np.ndarray
    values: np.ndarray
    gap: np.ndarray

    @property
    def s_prime(self) -> float:
        return float(np.max(self.values))

    @property
    def argmax_time(self) -> float:
        return float(self.times[int(np.argmax(self.values))])


def adiabatic_diagnostics(model: DrivenModel, schedule: Schedule, pair: PairSelector, t_grid,
                          *, use_exponent: bool = True, imag_sign: int = 1) -> Diagnostics:
    """Evaluate ``|<l_a|dH/dt|r_b>| / |dE|^2 * exp(integral Im dE dt)`` for the tracked pair.

    The transition element enters through the gauge-invariant combination
    ``sqrt(|<l_a|dH|r_b> <l_b|dH|r_a>|)``, which reduces to the plain modulus
    for Hermitian models and removes the free rescaling of biorthogonal
    pairs. ``dH/dt = dH/dR * dR/dt`` with a centered difference in R.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) < 0):
        raise ValidationError("t_grid must be a non-empty ascending 1-d array")
    R = np.atleast_1d(schedule(t))
    Rdot = np.atleast_1d(schedule.rate(t))
    systems, labels = pair_energies(model, R, pair)
    vals = np.empty(t.size)
    gap = np.empty(t.size, dtype=complex)
    for i, (es, (a, b)) in enumerate(zip(systems, labels)):
        dH = model.derivative(R[i])
        lo, up = a, b
        v_ab = es.left_vectors[:, lo].conj() @ dH @ es.right_vectors[:, up]
        v_ba = es.left_vectors[:, up].conj() @ dH @ es.right_vectors[:, lo]
        dE = es.values[up] - es.values[lo]
        gap[i] = dE
        vals[i] = math.sqrt(abs(v_ab * v_ba)) * abs(Rdot[i]) / abs(dE) ** 2
    if use_exponent and t.size > 1:
        A = cumulative_trapezoid(imag_sign * gap.imag, t, initial=0.0)
        vals = vals * np.exp(A)
    return Diagnostics(t, vals, gap)
