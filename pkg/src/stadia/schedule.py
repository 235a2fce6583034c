"""Gap profiles and the partial-spectrum shortcut schedule.

The shortcut moves the control at speed

    dR/dt = s |dE| sqrt(|dE|^2 - dE_min^2) / |d|dE|/dR| * exp(A(t)),
    A(t)  = integral_0^t Im(dE) dtau,

where ``dE`` is the complex splitting of one tracked level pair. It is
integrated in reciprocal form, ``dt/dR``, over a fixed R grid. Substituting
``u = exp(A)`` turns the accumulator into the quadrature
``du/dR = Im(dE) * b(R) / s`` with ``b = |d|dE|/dR| / (|dE| sqrt(|dE|^2 - dE_min^2))``,
and then ``dt/dR = b / (s u)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import AccumulatorOverflow, DegeneracyError, NumericalError, ValidationError
from .models import DrivenModel
from .spectral import EigenSystem, biorthogonalize, eig_dense, track_levels

SINGULAR_EPS = 1e-12
MAX_EXPONENT = 700.0
CONSTANT_TOL = 1e-12


# ---------------------------------------------------------------------------
# level-pair selection


class PairSelector:
    """Chooses the two levels ``(lower, upper)`` whose splitting is tracked.

    The splitting is ``E[upper] - E[lower]``.
    """

    tracked = False
    description = "pair"

    def pick(self, es: EigenSystem) -> tuple[int, int]:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.description})"


class ZeroModePair(PairSelector):
    """The level closest to zero energy and its nearest neighbour in the complex plane.

    Chirally paired neighbours ``+E``/``-E`` tie in distance; the one with the
    larger real part (then larger imaginary part) is taken.
    """

    description = "zero-mode vs nearest bulk"

    def __init__(self, tie_tol: float = 1e-9):
        self.tie_tol = tie_tol

    def pick(self, es):
        E = es.values
        z = int(np.argmin(np.abs(E)))
        d = np.abs(E - E[z])
        d[z] = np.inf
        dmin = d.min()
        cand = np.nonzero(d <= dmin + self.tie_tol * (1.0 + dmin))[0]
        best = max(cand, key=lambda j: (round(E[j].real, 12), round(E[j].imag, 12)))
        return z, int(best)


class BandEdgePair(PairSelector):
    """Highest occupied and lowest unoccupied level at a fixed filling."""

    def __init__(self, n_occupied: int):
        self.n_occupied = int(n_occupied)
        self.description = f"band edge at filling {self.n_occupied}"

    def pick(self, es):
        if not 0 < self.n_occupied < es.dim:
            raise ValidationError(f"filling {self.n_occupied} invalid for dimension {es.dim}")
        return self.n_occupied - 1, self.n_occupied


class TrackedPair(PairSelector):
    """Two levels labelled by their sorted index at the first point, followed by overlap."""

    tracked = True

    def __init__(self, lower: int, upper: int):
        self.lower, self.upper = int(lower), int(upper)
        self.description = f"tracked levels {self.lower}, {self.upper}"

    def pick(self, es):
        return self.lower, self.upper


def pair_energies(model: DrivenModel, Rs: Sequence[float], pair: PairSelector):
    """Eigensystems and the selected pair's energies along ``Rs``.

    Returns
    -------
    systems : list of EigenSystem
        Biorthogonalized (relabelled by tracking for :class:`TrackedPair`).
    labels : ndarray of int, shape (m, 2)
        ``(lower, upper)`` index at each point.
    """
    systems = [biorthogonalize(eig_dense(model(R)), strict=False) for R in Rs]
    if pair.tracked:
        tracked = track_levels(list(zip(Rs, systems)), labels=[pair.lower, pair.upper])
        systems = [es for _, es in tracked]
    labels = np.array([pair.pick(es) for es in systems], dtype=int)
    return systems, labels


# ---------------------------------------------------------------------------
# gap profile


@dataclass(frozen=True)
class GapMinimum:
    """Parabolic fit ``|dE|^2 ~ value^2 + curvature (R - location)^2`` at a grid minimum."""

    index: int
    location: float
    value: float
    curvature: float


@dataclass(frozen=True)
class GapProfile:
    """Complex splitting of a tracked level pair sampled on an ascending R grid.

    Attributes
    ----------
    grid : ndarray
        Ascending control values.
    gap : ndarray of complex
        ``E_upper - E_lower`` at each grid point.
    gap_min : float
        Minimum of ``|gap|`` over the grid.
    dgap_dR : ndarray
        Centered finite differences of ``|gap|`` (one-sided at the ends).
    pair : tuple of int
        ``(lower, upper)`` labels at the first grid point.
    lipschitz : float
        Bound ``L`` with ``|gap[m+1] - gap[m]| <= L (R[m+1] - R[m])``.
    minima : tuple of GapMinimum
        Refined local minima of ``|gap|``.
    pair_switches : int
        Steps where the selected level was not the best overlap match of the
        previous point's selection (zero for smoothly followed pairs).
    """

    grid: np.ndarray
    gap: np.ndarray
    gap_min: float
    dgap_dR: np.ndarray
    pair: tuple
    lipschitz: float
    minima: tuple = ()
    pair_switches: int = 0
    control_name: str = "R"

    @property
    def abs_gap(self) -> np.ndarray:
        return np.abs(self.gap)

    @property
    def R_min(self) -> float:
        """Grid location of the minimal gap."""
        return float(self.grid[int(np.argmin(self.abs_gap))])

    @property
    def gap_min_fit(self) -> float:
        """Smallest refined minimum (at most ``gap_min``)."""
        if not self.minima:
            return self.gap_min
        return min(self.gap_min, min(m.value for m in self.minima))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.dgap_dR == 0.0))

    @property
    def hermitian_like(self) -> bool:
        return bool(np.all(self.gap.imag == 0.0))


def _gap_slope(grid, g):
    # a gap flat to round-off counts as exactly constant
    if g.max() - g.min() <= CONSTANT_TOL * g.max():
        return np.zeros_like(g)
    return np.gradient(g, grid)


def _refine_minima(grid, g):
    """Parabolic refinement of every local minimum of ``g`` on the grid."""
    out = []
    n = len(g)
    g2 = g * g
    for i in range(n):
        left = g[i - 1] if i > 0 else np.inf
        right = g[i + 1] if i < n - 1 else np.inf
        if not (g[i] <= left and g[i] <= right) or (g[i] == left and i > 0):
            continue
        j = min(max(i, 1), n - 2)
        x = grid[j - 1:j + 2]
        y = g2[j - 1:j + 2]
        c2, c1, c0 = np.polyfit(x - grid[j], y, 2)
        if c2 > 0:
            xv = -c1 / (2 * c2)
            if abs(xv) <= (grid[1] - grid[0]) * 1.5:
                val2 = c0 - c1 * c1 / (4 * c2)
                val = math.sqrt(max(val2, 0.0)) if val2 > 0 else 0.0
                out.append(GapMinimum(i, float(grid[j] + xv), min(val, float(g[i])), float(c2)))
                continue
        out.append(GapMinimum(i, float(grid[i]), float(g[i]), max(float(c2), 0.0)))
    return tuple(out)


def gap_profile(model: DrivenModel, R_start: float, R_end: float, grid_size: int = 2001,
                pair: PairSelector | None = None, *, workers: int = 1) -> GapProfile:
    """Sample the tracked splitting ``dE(R)`` on a uniform grid.

    Parameters
    ----------
    model : DrivenModel
    R_start, R_end : float
        Sweep interval, ``R_start < R_end``.
    grid_size : int
        At least 64 points.
    pair : PairSelector
        Defaults to :class:`ZeroModePair`.
    workers : int
        Threads used for the independent eigensolves.

    Raises
    ------
    DegeneracyError
        The tracked pair becomes degenerate (``|dE| < 1e-10``).
    TrackingError
        Propagated from :func:`track_levels` for tracked pairs.
    """
    if grid_size < 64:
        raise ValidationError(f"grid_size must be >= 64, got {grid_size}")
    if not (np.isfinite(R_start) and np.isfinite(R_end)) or not R_start < R_end:
        raise ValidationError(f"need finite R_start < R_end, got {R_start}, {R_end}")
    pair = pair if pair is not None else ZeroModePair()
    grid = np.linspace(R_start, R_end, grid_size)

    if workers > 1 and not pair.tracked:
        from concurrent.futures import ThreadPoolExecutor

        def one(R):
            return biorthogonalize(eig_dense(model(R)), strict=False)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            systems = list(pool.map(one, grid))
        labels = np.array([pair.pick(es) for es in systems], dtype=int)
    else:
        systems, labels = pair_energies(model, grid, pair)

    idx = np.arange(grid_size)
    E = np.array([es.values for es in systems])
    gap = E[idx, labels[:, 1]] - E[idx, labels[:, 0]]
    g = np.abs(gap)
    k = int(np.argmin(g))
    if g[k] < 1e-10:
        raise DegeneracyError(
            f"tracked pair degenerate at {model.control_name}={grid[k]:.6g} (|dE|={g[k]:.3e}); "
            "the shortcut schedule is undefined",
            pair=tuple(labels[k]), separation=float(g[k]),
        )

    switches = 0
    if not pair.tracked:
        for m in range(grid_size - 1):
            a, b = systems[m], systems[m + 1]
            for col in (0, 1):
                i, j = labels[m, col], labels[m + 1, col]
                row = np.abs(a.left_vectors[:, i].conj() @ b.right_vectors)
                if int(np.argmax(row)) != j:
                    switches += 1

    h = np.diff(grid)
    return GapProfile(
        grid=grid,
        gap=gap,
        gap_min=float(g[k]),
        dgap_dR=_gap_slope(grid, g),
        pair=tuple(int(x) for x in labels[0]),
        lipschitz=float(np.max(np.abs(np.diff(gap)) / h)),
        minima=_refine_minima(grid, g),
        pair_switches=switches,
        control_name=model.control_name,
    )


def profile_from_arrays(grid, gap, pair=(0, 1), control_name="R") -> GapProfile:
    """Build a :class:`GapProfile` from precomputed splittings (analytic models, tests)."""
    grid = np.asarray(grid, dtype=float)
    gap = np.asarray(gap, dtype=complex)
    if grid.ndim != 1 or grid.shape != gap.shape or len(grid) < 2:
        raise ValidationError("grid and gap must be matching 1-d arrays")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly ascending")
    g = np.abs(gap)
    if g.min() < 1e-10:
        raise DegeneracyError("profile contains a degenerate point", separation=float(g.min()))
    return GapProfile(
        grid=grid, gap=gap, gap_min=float(g.min()), dgap_dR=_gap_slope(grid, g),
        pair=tuple(pair), lipschitz=float(np.max(np.abs(np.diff(gap)) / np.diff(grid))),
        minima=_refine_minima(grid, g), control_name=control_name,
    )


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """Tabulated, monotone control path ``R(t)`` on ``[0, T]``.

    ``s`` is ``None`` for linear ramps. ``zero_cost`` marks the linear fallback
    returned for profiles whose gap never varies.
    """

    times: np.ndarray
    values: np.ndarray
    s: float | None
    kind: str
    zero_cost: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    @property
    def R_start(self) -> float:
        return float(self.values[0])

    @property
    def R_end(self) -> float:
        return float(self.values[-1])

    @cached_property
    def _interp(self):
        return PchipInterpolator(self.times, self.values, extrapolate=True)

    @cached_property
    def _rate(self):
        return self._interp.derivative()

    def __call__(self, t):
        out = self._interp(np.clip(t, 0.0, self.total_time))
        return float(out) if np.ndim(out) == 0 else out

    def rate(self, t):
        """``dR/dt`` of the interpolated path."""
        out = self._rate(np.clip(t, 0.0, self.total_time))
        return float(out) if np.ndim(out) == 0 else out

    def header(self) -> dict:
        h = {"kind": self.kind, "s": "linear" if self.s is None else repr(float(self.s)),
             "total_time": repr(self.total_time), "grid_size": str(len(self.times)),
             "zero_cost": str(self.zero_cost).lower()}
        h.update({k: str(v) for k, v in self.meta.items()})
        return h


def linear(R_start: float, R_end: float, T: float, n_steps: int = 1001) -> Schedule:
    """Uniform ramp ``R(t) = R_start + (R_end - R_start) t / T`` tabulated at ``n_steps`` points."""
    if not np.isfinite(T) or T <= 0:
        raise ValidationError(f"total time must be positive, got {T}")
    if n_steps < 2:
        raise ValidationError(f"n_steps must be >= 2, got {n_steps}")
    times = np.linspace(0.0, T, n_steps)
    times[-1] = T
    values = R_start + (R_end - R_start) * (times / T)
    values[-1] = R_end
    return Schedule(times, values, None, "linear")


def _speed_integrand(profile: GapProfile, m: float):
    """``b(R) = |d|dE|/dR| / (|dE| sqrt(|dE|^2 - m^2))`` with minima regularized."""
    grid = profile.grid
    g = profile.abs_gap
    gp = np.abs(profile.dgap_dR)
    d2 = g * g - m * m
    with np.errstate(divide="ignore", invalid="ignore"):
        b = gp / (g * np.sqrt(np.maximum(d2, 0.0)))
    h = grid[1] - grid[0]
    regular = np.isfinite(b)
    for mn in profile.minima:
        if mn.curvature <= 0:
            continue
        # points near a minimum use the fitted parabola instead of finite differences
        if mn.value * mn.value - m * m > max(mn.curvature * h * h, SINGULAR_EPS * m * m):
            continue
        lo, hi = max(mn.index - 2, 0), min(mn.index + 2, len(grid) - 1)
        for i in range(lo, hi + 1):
            x = grid[i] - mn.location
            gm2 = mn.value * mn.value + mn.curvature * x * x
            excess = gm2 - m * m
            if excess <= SINGULAR_EPS * m * m:
                b[i] = math.sqrt(mn.curvature) / gm2
            else:
                b[i] = mn.curvature * abs(x) / (gm2 * math.sqrt(excess))
            regular[i] = True
    if not np.all(regular):
        # isolated 0/0 points outside any fitted minimum: the integrand's limit is 0
        b[~regular] = 0.0
    return b


def synthesize(profile: GapProfile, s: float, direction: int = 1, *, use_exponent: bool = True,
               imag_sign: int = 1, fallback_time: float = 1.0) -> Schedule:
    """Shortcut schedule with adiabatic coefficient ``s`` over the profile's R range.

    Parameters
    ----------
    profile : GapProfile
    s : float
        Positive adiabatic coefficient; ``T`` scales as ``1/s`` when the
        splitting is real.
    direction : {+1, -1}
        Sweep from the first to the last grid point, or back.
    use_exponent : bool
        Include the ``exp(integral Im dE dt)`` factor.
    imag_sign : {+1, -1}
        Sign applied to ``Im(dE)`` inside the exponent.
    fallback_time : float
        Duration of the linear schedule returned when the gap is constant.

    Raises
    ------
    ValidationError
        ``s <= 0`` or bad direction.
    AccumulatorOverflow
        ``|A| > 700`` or the accumulator collapses.
    """
    if not np.isfinite(s) or s <= 0:
        raise ValidationError(f"s must be positive, got {s}")
    if direction not in (1, -1) or imag_sign not in (1, -1):
        raise ValidationError("direction and imag_sign must be +1 or -1")
    if profile.is_constant:
        fb = linear(profile.grid[0], profile.grid[-1], fallback_time, len(profile.grid))
        if direction == -1:
            fb = linear(profile.grid[-1], profile.grid[0], fallback_time, len(profile.grid))
        return Schedule(fb.times, fb.values, float(s), "linear", zero_cost=True,
                        meta={"fallback": "constant gap"})
    grid = profile.grid
    m = profile.gap_min_fit
    b = _speed_integrand(profile, m)
    im = imag_sign * profile.gap.imag
    if direction == -1:
        grid, b, im = grid[::-1], b[::-1], im[::-1]
    dR = np.abs(np.diff(grid))

    if use_exponent and np.any(im != 0):
        u = 1.0 + np.concatenate(([0.0], np.cumsum(0.5 * (im[1:] * b[1:] + im[:-1] * b[:-1]) * dR))) / s
        bad = np.nonzero(u <= math.exp(-MAX_EXPONENT))[0]
        if bad.size:
            raise AccumulatorOverflow(
                f"imaginary-gap accumulator collapses near {profile.control_name}={grid[bad[0]]:.6g}"
            )
        A = np.log(u)
        if np.abs(A).max() > MAX_EXPONENT:
            k = int(np.argmax(np.abs(A) > MAX_EXPONENT))
            raise AccumulatorOverflow(
                f"imaginary-gap exponent exceeds {MAX_EXPONENT} near {profile.control_name}={grid[k]:.6g}"
            )
    else:
        u = np.ones_like(b)
    f = b / (s * u)
    dt = 0.5 * (f[1:] + f[:-1]) * dR
    if not np.all(np.isfinite(dt)):
        raise NumericalError("non-finite schedule increment")

    if np.all(dt == 0.0):
        fb = linear(grid[0], grid[-1], fallback_time, len(grid))
        return Schedule(fb.times, fb.values, float(s), "linear", zero_cost=True,
                        meta={"fallback": "stationary gap"})

    times = np.concatenate(([0.0], np.cumsum(dt)))
    values = grid.copy()
    keep = np.concatenate(([True], dt > 0.0))
    if not keep.all():
        # zero-duration runs are instantaneous jumps; keep the far end of each run
        keep_idx = np.nonzero(keep)[0]
        drop_target = np.nonzero(~keep)[0]
        for j in drop_target:
            prev = keep_idx[keep_idx < j].max()
            values[prev] = values[j] if prev > 0 else values[prev]
        times, values = times[keep], values[keep]
        values[-1] = grid[-1]
    return Schedule(times, values, float(s), "shortcut",
                    meta={"direction": direction, "exponent": bool(use_exponent),
                          "imag_sign": imag_sign, "gap_min": repr(m)})


def shortcut_time(profile: GapProfile, s: float, **kwargs) -> float:
    """Total duration of :func:`synthesize` at coefficient ``s``."""
    sched = synthesize(profile, s, **kwargs)
    return 0.0 if sched.zero_cost else sched.total_time


def calibrate(profile: GapProfile, T_target: float, *, rtol: float = 1e-6, **kwargs):
    """Find ``s`` whose shortcut schedule lasts ``T_target``.

    Brackets the root of the decreasing map ``s -> T(s)`` by doubling and
    refines it with Brent's method.

    Returns
    -------
    s : float
    schedule : Schedule
    """
    if not np.isfinite(T_target) or T_target <= 0:
        raise ValidationError(f"T_target must be positive, got {T_target}")
    T1 = shortcut_time(profile, 1.0, **kwargs)
    if T1 == 0.0:
        raise NumericalError(
            "gap is constant over the sweep: the shortcut costs zero time, so no s reaches "
            f"T_target={T_target}; the minimal achievable time is 0 (use a linear schedule)"
        )

    def f(x):
        # log-time mismatch at s = exp(x); overflow means "too long"
        try:
            return math.log(shortcut_time(profile, math.exp(x), **kwargs) / T_target)
        except AccumulatorOverflow:
            return math.inf

    lo = hi = math.log(T1 / T_target)
    for _ in range(200):
        f_lo = f(lo)
        if f_lo >= 0:
            break
        lo -= math.log(2.0)
    else:
        raise NumericalError(f"T_target={T_target} exceeds the longest achievable shortcut time")
    for _ in range(200):
        f_hi = f(hi)
        if f_hi <= 0:
            break
        hi += math.log(2.0)
    else:
        raise NumericalError(f"T_target={T_target} is below the shortest achievable shortcut time")
    if f_lo == 0.0 or lo == hi:
        x = lo
    elif f_hi == 0.0:
        x = hi
    else:
        x = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    s = math.exp(x)
    sched = synthesize(profile, s, **kwargs)
    if abs(sched.total_time - T_target) > rtol * T_target:
        raise NumericalError(
            f"calibration missed: T={sched.total_time!r} for target {T_target!r}"
        )
    return s, sched


def strict_coefficient(profile: GapProfile, schedule: Schedule, t=None, *, use_exponent: bool = True,
                       imag_sign: int = 1) -> np.ndarray:
    """The stricter adiabatic coefficient evaluated along ``schedule``.

    ``|d_t |dE|| / (|dE| sqrt(|dE|^2 - dE_min^2)) * exp(A)``, written as
    ``b(R) |dR/dt| exp(A)`` with the same regularized ``b`` the synthesis
    uses, so gap minima give their finite limit. Evaluated at the schedule
    knots unless ``t`` is given.
    """
    t = schedule.times if t is None else np.asarray(t, dtype=float)
    R = np.atleast_1d(schedule(t))
    b = np.interp(R, profile.grid, _speed_integrand(profile, profile.gap_min_fit))
    im = imag_sign * np.interp(R, profile.grid, profile.gap.imag)
    A = cumulative_trapezoid(im, t, initial=0.0) if use_exponent and t.size > 1 else np.zeros_like(t)
    return b * np.abs(np.atleast_1d(schedule.rate(t))) * np.exp(A)


# ---------------------------------------------------------------------------
# CSV


def _format(x) -> str:
    return format(float(x), ".17g")


def write_schedule_csv(schedule: Schedule, path_or_buffer, header: dict | None = None):
    """Two-column ``time,R`` CSV with ``#`` comment lines for metadata."""
    lines = []
    meta = dict(header or {})
    meta.update(schedule.header())
    for k, v in meta.items():
        lines.append(f"# {k}: {v}")
    lines.append("time,R")
    for t, R in zip(schedule.times, schedule.values):
        lines.append(f"{_format(t)},{_format(R)}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)


def read_schedule_csv(path_or_buffer) -> Schedule:
    """Inverse of :func:`write_schedule_csv`."""
    if hasattr(path_or_buffer, "read"):
        text = path_or_buffer.read()
    else:
        with open(path_or_buffer) as fh:
            text = fh.read()
    meta = {}
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line == "time,R":
            continue
        else:
            t, R = line.split(",")
            rows.append((float(t), float(R)))
    arr = np.array(rows, dtype=float)
    s_txt = meta.get("s", "linear")
    s = None if s_txt == "linear" else float(s_txt)
    base = {"kind", "s", "total_time", "grid_size", "zero_cost"}
    return Schedule(arr[:, 0], arr[:, 1], s, meta.get("kind", "shortcut"),
                    zero_cost=meta.get("zero_cost", "false") == "true",
                    meta={k: v for k, v in meta.items() if k not in base})
