"""Command-line scenario runner.

Subcommands ``ssh-transfer``, ``pump``, ``schedule``, ``spectrum`` and
``sweep`` read an INI configuration (sections and keys listed in
:data:`FIELDS`), apply ``--set section.key=value`` overrides and the common
flags, and write CSV tables plus a ``summary.json`` into the output directory.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import evolve
from .errors import NumericalError, StadiaError, ValidationError
from .models import (RiceMeleParams, SshParams, critical_t1, edge_target, nh_ssh, rice_mele,
                     zero_mode_index)
from .schedule import (BandEdgePair, GapProfile, Schedule, ZeroModePair, calibrate, gap_profile,
                       linear, synthesize, write_schedule_csv)
from .spectral import eig_dense
from .topology import BlochGrid, chern_number, pumped_charge, write_curvature_csv

log = logging.getLogger("stadia")

EXIT_OK, EXIT_FAILURE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3

SUBCOMMANDS = ("ssh-transfer", "pump", "schedule", "spectrum", "sweep")
SSH_TERMS = ("t1", "t2", "gamma")
PUMP_TERMS = ("t1", "t2", "onsite")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        t = str(text).strip()
        return None if t.lower() in ("", "none", "auto") else conv(t)
    return parse


def _floats(text):
    parts = [x for x in str(text).replace(";", ",").split(",") if x.strip()]
    return tuple(float(x) for x in parts)


# (section, key) -> (field, parser)
FIELDS = {
    ("scenario", "name"): ("scenario", str),
    ("scenario", "model"): ("model", str),
    ("scenario", "seed"): ("seed", int),
    ("scenario", "workers"): ("workers", _optional(int)),
    ("model", "n_cells"): ("n_cells", _optional(int)),
    ("model", "t2"): ("t2", float),
    ("model", "gamma"): ("gamma", float),
    ("model", "t1_start"): ("t1_start", float),
    ("model", "t1_end"): ("t1_end", float),
    ("model", "t0"): ("t0", float),
    ("model", "delta0"): ("delta0", float),
    ("model", "Delta0"): ("Delta0", float),
    ("schedule", "total_time"): ("total_time", _optional(float)),
    ("schedule", "shortcut"): ("shortcut", str),
    ("schedule", "s"): ("s", _optional(float)),
    ("schedule", "grid_size"): ("grid_size", int),
    ("schedule", "use_exponent"): ("use_exponent", _bool),
    ("schedule", "imag_sign"): ("imag_sign", int),
    ("evolution", "steps"): ("steps", _optional(int)),
    ("evolution", "n_record"): ("n_record", int),
    ("evolution", "target"): ("target", str),
    ("evolution", "diagnostics"): ("diagnostics", _bool),
    ("perturbation", "kind"): ("perturbation", str),
    ("perturbation", "magnitude"): ("magnitude", float),
    ("perturbation", "term"): ("term", str),
    ("sweep", "axis"): ("axis", str),
    ("sweep", "grid"): ("grid", _floats),
    ("topology", "n_k"): ("n_k", int),
    ("topology", "n_phi"): ("n_phi", int),
    ("spectrum", "points"): ("spectrum_points", int),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description.

    ``n_cells`` and ``total_time`` default per model (SSH: 20 cells, T = 125;
    pump: 10 cells, T = 6.8). ``magnitude`` is the signed offset ``eta`` for
    ``uniform-offset`` and the disorder width for ``random-disorder``.
    """

    scenario: str = "ssh-transfer"
    model: str = "ssh"
    seed: int = 0
    workers: int | None = None
    n_cells: int | None = None
    t2: float = 1.0
    gamma: float = 1.0 / 3.0
    t1_start: float = 0.0
    t1_end: float = 3.0
    t0: float = 1.0
    delta0: float = 0.6
    Delta0: float = 0.36
    total_time: float | None = None
    shortcut: str = "calibrated"
    s: float | None = None
    grid_size: int = 2001
    use_exponent: bool = True
    imag_sign: int = 1
    steps: int | None = None
    n_record: int = 1001
    target: str = "zero-mode"
    diagnostics: bool = True
    perturbation: str = "uniform-offset"
    magnitude: float = 0.0
    term: str = "t1"
    axis: str = "total_time"
    grid: tuple = ()
    n_k: int = 64
    n_phi: int = 64
    spectrum_points: int = 301

    def __post_init__(self):
        if self.scenario not in SUBCOMMANDS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SUBCOMMANDS)}")
        forced = {"ssh-transfer": "ssh", "pump": "pump"}.get(self.scenario)
        if forced:
            object.__setattr__(self, "model", forced)
        if self.model not in ("ssh", "pump"):
            raise ValidationError(f"model must be 'ssh' or 'pump', got {self.model!r}")
        if self.n_cells is None:
            object.__setattr__(self, "n_cells", 20 if self.model == "ssh" else 10)
        if self.total_time is None:
            object.__setattr__(self, "total_time", 125.0 if self.model == "ssh" else 6.8)
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        self._validate()

    def _validate(self):
        for f in ("t2", "gamma", "t1_start", "t1_end", "t0", "delta0", "Delta0", "total_time", "magnitude"):
            if not math.isfinite(getattr(self, f)):
                raise ValidationError(f"{f} must be finite")
        if self.n_cells < 2:
            raise ValidationError(f"n_cells must be >= 2, got {self.n_cells}")
        if self.total_time <= 0:
            raise ValidationError(f"total_time must be positive, got {self.total_time}")
        if self.model == "ssh" and not self.t1_start < self.t1_end:
            raise ValidationError("t1_start must be below t1_end")
        if self.shortcut not in ("calibrated", "fixed-s"):
            raise ValidationError("shortcut must be 'calibrated' or 'fixed-s'")
        if self.shortcut == "fixed-s" and (self.s is None or not self.s > 0):
            raise ValidationError("fixed-s shortcut needs a positive s")
        if self.grid_size < 64:
            raise ValidationError("grid_size must be >= 64")
        if self.imag_sign not in (1, -1):
            raise ValidationError("imag_sign must be +1 or -1")
        if self.steps is not None and self.steps < 1:
            raise ValidationError("steps must be positive")
        if self.n_record < 2:
            raise ValidationError("n_record must be >= 2")
        if self.target not in ("zero-mode", "site"):
            raise ValidationError("target must be 'zero-mode' or 'site'")
        if self.perturbation not in ("uniform-offset", "random-disorder"):
            raise ValidationError("perturbation kind must be 'uniform-offset' or 'random-disorder'")
        if self.perturbation == "uniform-offset" and abs(self.magnitude) > 0.5:
            raise ValidationError("uniform-offset magnitude must lie in [-0.5, 0.5]")
        if self.perturbation == "random-disorder" and not 0 <= self.magnitude <= 0.5:
            raise ValidationError("random-disorder magnitude must lie in [0, 0.5]")
        terms = SSH_TERMS if self.model == "ssh" else PUMP_TERMS
        if self.term not in terms:
            raise ValidationError(f"perturbed term must be one of {terms} for model {self.model!r}")
        if self.axis not in ("total_time", "perturbation"):
            raise ValidationError("sweep axis must be 'total_time' or 'perturbation'")
        if self.scenario == "sweep":
            if not self.grid:
                raise ValidationError("sweep grid must be non-empty")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValidationError("sweep grid must be strictly ascending")
            if self.axis == "total_time" and min(self.grid) <= 0:
                raise ValidationError("total_time grid values must be positive")
            if self.axis == "perturbation":
                lim = (-0.5, 0.5) if self.perturbation == "uniform-offset" else (0.0, 0.5)
                if min(self.grid) < lim[0] or max(self.grid) > lim[1]:
                    raise ValidationError(f"perturbation grid must lie in [{lim[0]}, {lim[1]}]")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.n_k < 3 or self.n_phi < 3 or self.spectrum_points < 2:
            raise ValidationError("grid sizes too small")

    def echo(self) -> dict:
        """Field values as strings, in declaration order."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                v = repr(v)
            elif isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out[f.name] = str(v)
        return out


def load_config(path=None, overrides=(), **flags) -> ScenarioConfig:
    """Read an INI file, apply ``section.key=value`` overrides, then keyword flags."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        if not Path(path).is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse config {path}: {exc}") from exc
    pairs = [(s, k, v) for s in parser.sections() for k, v in parser.items(s)]
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ValidationError(f"override must look like section.key=value, got {item!r}")
        pairs.append((section, name, value.strip()))
    values = {}
    for section, key, raw in pairs:
        spec = FIELDS.get((section, key))
        if spec is None:
            raise ValidationError(f"unknown config key [{section}] {key}")
        name, conv = spec
        try:
            values[name] = conv(raw)
        except ValueError as exc:
            raise ValidationError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc
    values.update({k: v for k, v in flags.items() if v is not None})
    return ScenarioConfig(**values)


# ---------------------------------------------------------------------------
# model setup


def _perturbation_scales(cfg: ScenarioConfig, eta: float):
    if eta == 0.0:
        return None
    if cfg.perturbation == "uniform-offset":
        return {cfg.term: 1.0 + eta}
    n = cfg.n_cells - 1 if cfg.model == "ssh" else cfg.n_cells
    u = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, n)
    return {cfg.term: 1.0 + eta * u}


def build_model(cfg: ScenarioConfig, eta: float = 0.0):
    """Model for ``cfg``, with the configured perturbation of magnitude ``eta``."""
    scales = _perturbation_scales(cfg, eta)
    if cfg.model == "ssh":
        return nh_ssh(SshParams(cfg.n_cells, t2=cfg.t2, gamma=cfg.gamma), scales)
    return rice_mele(_rm_params(cfg), scales)


def _rm_params(cfg):
    return RiceMeleParams(cfg.n_cells, cfg.t0, cfg.delta0, cfg.Delta0)


def control_range(cfg):
    if cfg.model == "ssh":
        return cfg.t1_start, cfg.t1_end
    return 0.0, 2.0 * math.pi


def pair_selector(cfg):
    return ZeroModePair() if cfg.model == "ssh" else BandEdgePair(cfg.n_cells)


def design_profile(cfg: ScenarioConfig) -> GapProfile:
    """Gap profile of the unperturbed model; schedules are always designed on it."""
    a, b = control_range(cfg)
    workers = cfg.workers or 1
    return gap_profile(build_model(cfg), a, b, cfg.grid_size, pair_selector(cfg), workers=workers)


def make_schedules(cfg: ScenarioConfig, profile: GapProfile, T: float):
    """Linear and shortcut schedules over the control range, both lasting ``T``
    unless the shortcut uses a fixed ``s``."""
    a, b = control_range(cfg)
    if cfg.shortcut == "fixed-s":
        sc = synthesize(profile, cfg.s, use_exponent=cfg.use_exponent, imag_sign=cfg.imag_sign)
        T = sc.total_time
    else:
        _, sc = calibrate(profile, T, use_exponent=cfg.use_exponent, imag_sign=cfg.imag_sign)
    return {"linear": linear(a, b, T, cfg.grid_size), "shortcut": sc}


def states_for(cfg: ScenarioConfig, model):
    """Initial state and named targets for a (possibly perturbed) model."""
    a, b = control_range(cfg)
    if cfg.model == "ssh":
        p = SshParams(cfg.n_cells, t2=cfg.t2, gamma=cfg.gamma)
        es = eig_dense(model(b))
        mode = es.right_vectors[:, zero_mode_index(es.values)]
        targets = {"zero-mode": mode, "site": edge_target(p, "right")}
        return edge_target(p, "left"), targets
    n_occ = cfg.n_cells
    psi0 = eig_dense(model(a)).right_vectors[:, n_occ - 1]
    target = eig_dense(model(b)).right_vectors[:, n_occ - 1]
    return psi0, {"band": target}


def _primary_target(cfg):
    return cfg.target if cfg.model == "ssh" else "band"


def run_one(cfg: ScenarioConfig, model, schedule: Schedule, *, record: bool = True):
    """Evolve one schedule; returns (trajectory, result dict)."""
    psi0, targets = states_for(cfg, model)
    primary = _primary_target(cfg)
    traj = evolve(model, schedule, psi0, cfg.steps, target=targets[primary],
                  n_record=cfg.n_record if record else 2,
                  diagnostics=pair_selector(cfg) if cfg.diagnostics else None,
                  use_exponent=cfg.use_exponent, imag_sign=cfg.imag_sign)
    psi = traj.final_state
    nrm = float(np.linalg.norm(psi))
    res = {
        "total_time": schedule.total_time,
        "s": schedule.s,
        "steps": traj.n_steps,
        "fidelity_normalized": float(traj.fidelity_normalized[-1]),
        "fidelity_raw": float(traj.fidelity_raw[-1]),
        "final_norm": nrm,
        "max_s_prime": traj.max_s_prime if cfg.diagnostics else None,
    }
    for name, tgt in targets.items():
        if name == primary:
            continue
        raw = float(abs(np.vdot(tgt, psi)))
        res[f"{name.replace('-', '_')}_fidelity_normalized"] = min(raw / nrm, 1.0)
        res[f"{name.replace('-', '_')}_fidelity_raw"] = raw
    return traj, res


# ---------------------------------------------------------------------------
# output


def header(cfg: ScenarioConfig, extra: dict | None = None) -> dict:
    h = {"stadia_version": __version__, "seed": cfg.seed}
    h.update({f"config.{k}": v for k, v in cfg.echo().items()})
    h.update(extra or {})
    return h


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary(out: Path, cfg: ScenarioConfig, body: dict):
    doc = {"stadia_version": __version__, "scenario": cfg.scenario, "seed": cfg.seed,
           "config": cfg.echo()}
    doc.update(body)
    text = json.dumps(_json_clean(doc), indent=2, sort_keys=False, allow_nan=False)
    (out / "summary.json").write_text(text + "\n")


def _write_table(path: Path, head: dict, columns, rows):
    lines = [f"# {k}: {v}" for k, v in head.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _cell(x):
    if isinstance(x, str):
        return '"' + x.replace('"', '""') + '"' if ("," in x or '"' in x) else x
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def hopping_rows(cfg: ScenarioConfig, schedule: Schedule, n: int = 1001):
    """Hoppings along a schedule versus ``t/T`` and ``R``."""
    t = np.linspace(0.0, schedule.total_time, n)
    R = np.atleast_1d(schedule(t))
    if cfg.model == "ssh":
        cols = ["t_over_T", "t", "R", "H_plus", "H_minus"]
        rows = [(ti / schedule.total_time, ti, r, r + 0.5 * cfg.gamma, r - 0.5 * cfg.gamma)
                for ti, r in zip(t, R)]
    else:
        p = _rm_params(cfg)
        cols = ["t_over_T", "t", "R", "t1", "t2", "Delta"]
        rows = [(ti / schedule.total_time, ti, r, *p.hoppings(r)) for ti, r in zip(t, R)]
    return cols, rows


def _emit_run(out: Path, cfg, name, schedule, traj, model_cfg_head):
    write_schedule_csv(schedule, out / f"schedule_{name}.csv", header=model_cfg_head)
    traj.to_csv(out / f"trajectory_{name}.csv", header=model_cfg_head)
    cols, rows = hopping_rows(cfg, schedule)
    _write_table(out / f"hoppings_{name}.csv", model_cfg_head, cols, rows)


def _profile_summary(profile: GapProfile):
    return {"gap_min": profile.gap_min, "gap_min_fit": profile.gap_min_fit,
            "gap_min_location": profile.R_min, "control": profile.control_name,
            "pair": list(profile.pair), "grid_size": len(profile.grid)}


# ---------------------------------------------------------------------------
# scenarios


def run_transfer(cfg: ScenarioConfig, out: Path) -> dict:
    """Linear vs shortcut comparison at one total time (SSH transfer or pump)."""
    model = build_model(cfg, cfg.magnitude)
    profile = design_profile(cfg)
    scheds = make_schedules(cfg, profile, cfg.total_time)
    body = {"profile": _profile_summary(profile), "target": _primary_target(cfg),
            "perturbation": {"kind": cfg.perturbation, "term": cfg.term, "magnitude": cfg.magnitude}}
    if cfg.model == "ssh":
        body["critical_t1"] = critical_t1(cfg.t2, cfg.gamma)
    head = header(cfg)
    for name, sc in scheds.items():
        log.info("evolving %s schedule (T=%.6g)", name, sc.total_time)
        traj, res = run_one(cfg, model, sc)
        _emit_run(out, cfg, name, sc, traj, head)
        body[name] = res
    return body


def run_ssh_transfer(cfg: ScenarioConfig, out: Path) -> dict:
    return run_transfer(cfg, out)


def run_pump(cfg: ScenarioConfig, out: Path) -> dict:
    p = RiceMeleParams(cfg.n_cells, cfg.t0, cfg.delta0, cfg.Delta0)
    grid = BlochGrid(cfg.n_k, cfg.n_phi)
    c = chern_number(p, grid)
    q = pumped_charge(p, cfg.n_phi, cfg.n_k)
    write_curvature_csv(p, grid, out / "curvature.csv", header=header(cfg))
    body = {"chern_number": c, "pumped_charge": q}
    body.update(run_transfer(cfg, out))
    return body


def run_schedule(cfg: ScenarioConfig, out: Path) -> dict:
    profile = design_profile(cfg)
    scheds = make_schedules(cfg, profile, cfg.total_time)
    head = header(cfg)
    body = {"profile": _profile_summary(profile)}
    for name, sc in scheds.items():
        write_schedule_csv(sc, out / f"schedule_{name}.csv", header=head)
        cols, rows = hopping_rows(cfg, sc)
        _write_table(out / f"hoppings_{name}.csv", head, cols, rows)
        body[name] = {"total_time": sc.total_time, "s": sc.s, "knots": len(sc.times)}
    rows = [(R, g.real, g.imag, abs(g), d) for R, g, d in zip(profile.grid, profile.gap, profile.dgap_dR)]
    _write_table(out / "gap_profile.csv", head, ["R", "gap_re", "gap_im", "gap_abs", "dgap_dR"], rows)
    return body


def run_spectrum(cfg: ScenarioConfig, out: Path) -> dict:
    model = build_model(cfg, cfg.magnitude)
    a, b = control_range(cfg)
    grid = np.linspace(a, b, cfg.spectrum_points)
    rows = []
    max_imag = 0.0
    for R in grid:
        es = eig_dense(model(R))
        max_imag = max(max_imag, float(np.abs(es.values.imag).max()))
        for i, E in enumerate(es.values):
            rows.append((R, i, E.real, E.imag, abs(E)))
    _write_table(out / "spectrum.csv", header(cfg), ["R", "index", "re", "im", "abs"], rows)
    return {"control": model.control_name, "points": len(grid), "dim": model.dim, "max_abs_imag": max_imag}


def _sweep_point(args):
    cfg, profile, value = args
    T = value if cfg.axis == "total_time" else cfg.total_time
    eta = value if cfg.axis == "perturbation" else cfg.magnitude
    rows = []
    try:
        model = build_model(cfg, eta)
        scheds = make_schedules(cfg, profile, T)
    except StadiaError as exc:
        return [(value, kind, None, {}, f"{type(exc).__name__}: {exc}") for kind in ("linear", "shortcut")]
    for kind, sc in scheds.items():
        try:
            _, res = run_one(cfg, model, sc, record=False)
            rows.append((value, kind, sc, res, ""))
        except StadiaError as exc:
            rows.append((value, kind, sc, {}, f"{type(exc).__name__}: {exc}"))
    return rows


def default_workers() -> int:
    try:
        import psutil

        n = psutil.cpu_count(logical=False)
    except Exception:
        n = None
    return max(1, n or os.cpu_count() or 1)


def sweep_rows(cfg: ScenarioConfig, profile: GapProfile | None = None):
    """All sweep rows in axis order, two per grid value (linear first)."""
    profile = profile if profile is not None else design_profile(cfg)
    tasks = [(cfg, profile, v) for v in cfg.grid]
    workers = min(cfg.workers or default_workers(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


SWEEP_COLUMNS = ["axis_value", "schedule", "total_time", "s", "fidelity_normalized", "fidelity_raw",
                 "max_s_prime", "alt_fidelity_normalized", "alt_fidelity_raw", "error"]


def run_sweep(cfg: ScenarioConfig, out: Path) -> dict:
    profile = design_profile(cfg)
    rows = sweep_rows(cfg, profile)
    alt = {"ssh": "zero_mode" if cfg.target == "site" else "site", "pump": None}[cfg.model]
    table = []
    for value, kind, sc, res, err in rows:
        nan = math.nan
        table.append((
            value, kind,
            sc.total_time if sc is not None else nan,
            (sc.s if sc is not None and sc.s is not None else nan),
            res.get("fidelity_normalized", nan), res.get("fidelity_raw", nan),
            nan if res.get("max_s_prime") is None else res["max_s_prime"],
            res.get(f"{alt}_fidelity_normalized", nan) if alt else nan,
            res.get(f"{alt}_fidelity_raw", nan) if alt else nan,
            err,
        ))
    head = header(cfg, {"alt_target": alt or "none", "profile_gap_min": repr(profile.gap_min)})
    _write_table(out / "sweep.csv", head, SWEEP_COLUMNS, table)
    failures = sum(1 for r in table if r[-1])
    return {"axis": cfg.axis, "rows": len(table), "failed_rows": failures,
            "profile": _profile_summary(profile)}


RUNNERS = {
    "ssh-transfer": run_ssh_transfer,
    "pump": run_pump,
    "schedule": run_schedule,
    "spectrum": run_spectrum,
    "sweep": run_sweep,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stadia", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"stadia {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="random seed for disorder sweeps")
    common.add_argument("--workers", type=int, help="worker processes (default: physical cores)")
    common.add_argument("--steps", type=int, help="integrator steps per evolution")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "ssh-transfer": "edge-state transfer in the NH SSH chain, linear vs shortcut",
        "pump": "Rice-Mele pump: invariants and linear vs shortcut dynamics",
        "schedule": "synthesize and export schedules only",
        "spectrum": "eigenvalue table over the control range",
        "sweep": "fidelity over a total-time or perturbation grid",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name in ("schedule", "spectrum", "sweep"):
            sp.add_argument("--model", choices=("ssh", "pump"), help="model family")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        flags = dict(seed=args.seed, workers=args.workers, steps=args.steps,
                     model=getattr(args, "model", None))
        cfg = load_config(args.config, [f"scenario.name={args.command}", *args.overrides], **flags)
        cfg = replace(cfg, scenario=args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        body = RUNNERS[cfg.scenario](cfg, out)
        write_summary(out, cfg, body)
    except ValidationError as exc:
        print(f"stadia {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"stadia {args.command}: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StadiaError as exc:
        print(f"stadia {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(str(out / "summary.json"))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
