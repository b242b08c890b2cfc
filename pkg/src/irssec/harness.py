"""Seeded Monte-Carlo sweeps, baselines, and CSV reporting.

One experiment sweeps one solver family over a grid of operating points,
repeating every point over seeded channel realizations. Realization index
``i`` always draws its channels from ``SeedSequence((master_seed, i))``, so
results do not depend on execution order or worker count. Each run writes
two files: a detail CSV with one row per (grid point, realization, curve)
including wall-clock times, and an aggregate CSV of per-grid-point means
that is byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import ScenarioConfig, dbm_to_watt, generate_channels, rates
from .fullcsi import ao_full_csi
from .linalg import InputError
from .nocsi import actual_secrecy_rate, an_covariance, ao_power_min
from .robust import line_search_tau
from .subproblems import UncertaintyBounds, solve_beamformer_full
import dataclasses

MODES = ("full-csi", "robust", "no-csi")

# sweep variable each mode accepts: transmit power in dBm, error radius
# (raw, before noise normalization), or the Bob SNR target in dB
MODE_SWEEP_VARS = {"full-csi": "P_T", "robust": "eps", "no-csi": "T"}

DETAIL_COLUMNS = (
    "mode", "seed", "grid_value", "C_B", "C_E", "C_s", "power_used_W",
    "interference_W", "tau_opt", "P_S_W", "iterations", "wall_ms", "flags",
)

AGGREGATE_COLUMNS = (
    "mode", "grid_value", "count", "failures", "mean_C_B", "mean_C_E",
    "mean_C_s", "mean_power_used_W", "mean_interference_W", "mean_tau_opt",
    "mean_P_S_W", "mean_iterations",
)

_MEAN_FIELDS = (
    ("mean_C_B", "C_B"), ("mean_C_E", "C_E"), ("mean_C_s", "C_s"),
    ("mean_power_used_W", "power_used_W"),
    ("mean_interference_W", "interference_W"),
    ("mean_tau_opt", "tau_opt"), ("mean_P_S_W", "P_S_W"),
    ("mean_iterations", "iterations"),
)


@dataclass
class RunResult:
    """One solved design plus the scalars that go into a detail row."""

    mode: str
    w: np.ndarray
    s: np.ndarray
    C_B: float
    C_E: float
    C_s: float
    power: float                    # ||w||^2, watts
    interference: float             # interference at the protected receiver, watts
    tau_opt: Optional[float] = None     # certified eavesdropper power (robust)
    P_S: Optional[float] = None         # information-beam power (power-min)
    iterations: int = 0
    trace: list = field(default_factory=list)
    wall_ms: float = 0.0
    flags: tuple = ()
    failed: bool = False


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one sweep."""

    mode: str
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    grid: tuple = ()
    realizations: int = 50
    master_seed: int = 0
    baselines: bool = True          # full-csi only: add no-irs / random-phase rows
    random_phase_trials: int = 10
    out_dir: str = "."

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}; pick one of {MODES}")
        self.grid = tuple(float(g) for g in self.grid)
        if not self.grid:
            raise InputError("sweep grid must not be empty")
        if int(self.realizations) < 1:
            raise InputError("need at least one realization")
        self.realizations = int(self.realizations)
        if self.mode == "robust" and any(g < 0 for g in self.grid):
            raise InputError("error radii must be nonnegative")
        if int(self.random_phase_trials) < 1:
            raise InputError("random-phase baseline needs at least one trial")
        self.random_phase_trials = int(self.random_phase_trials)


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------

def strip_surface(ch):
    """Copy of the channels with every reflected link zeroed."""
    zn = np.zeros(ch.n, dtype=complex)
    zc = np.zeros((ch.n, ch.m), dtype=complex)
    return dataclasses.replace(
        ch, h_IB=zn.copy(), h_IE=zn.copy(), h_IP=zn.copy(),
        H_B=zc.copy(), H_E=zc.copy(), H_P=zc.copy(),
    )


def baseline_no_irs(ch, P_T, P_I):
    """Full-CSI design with the reflecting surface removed."""
    t0 = time.perf_counter()
    res = ao_full_csi(strip_surface(ch), P_T, P_I)
    wall = 1e3 * (time.perf_counter() - t0)
    return RunResult(
        mode="no-irs", w=res.w, s=res.s, C_B=res.C_B, C_E=res.C_E,
        C_s=res.C_s, power=res.power, interference=res.interference,
        iterations=res.iterations, trace=list(res.trace), wall_ms=wall,
        flags=res.flags, failed="infeasible" in res.flags,
    )


def baseline_random_phase(ch, P_T, P_I, trials, rng=None):
    """Best of `trials` random phase draws, beam optimized for each draw."""
    if trials < 1:
        raise InputError("need at least one random-phase trial")
    if rng is None:
        rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    best = None
    for _ in range(max(1, int(trials))):
        s = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, ch.n))
        design = solve_beamformer_full(ch, s, P_T, P_I)
        C_B, C_E, C_s, intf = rates(ch, design.w, s)
        if best is None or C_s > best[0]:
            best = (C_s, C_B, C_E, intf, design, s)
    C_s, C_B, C_E, intf, design, s = best
    wall = 1e3 * (time.perf_counter() - t0)
    return RunResult(
        mode="random-phase", w=design.w, s=s, C_B=C_B, C_E=C_E, C_s=C_s,
        power=float(np.linalg.norm(design.w) ** 2), interference=intf,
        iterations=int(trials), wall_ms=wall, flags=design.flags,
        failed=False,
    )


# --------------------------------------------------------------------------
# per-mode single-realization runners
# --------------------------------------------------------------------------

def _failure_result(mode, exc):
    return RunResult(
        mode=mode, w=np.zeros(0, dtype=complex), s=np.zeros(0, dtype=complex),
        C_B=math.nan, C_E=math.nan, C_s=math.nan, power=math.nan,
        interference=math.nan, flags=("infeasible", f"error:{type(exc).__name__}"),
        failed=True,
    )


def _run_full_csi(spec, ch, index):
    cfg = spec.scenario
    P_I = dbm_to_watt(cfg.P_I)
    out = []
    for P_T_dBm in spec.grid:
        P_T = dbm_to_watt(P_T_dBm)
        t0 = time.perf_counter()
        try:
            res = ao_full_csi(ch, P_T, P_I)
            run = RunResult(
                mode="full-csi", w=res.w, s=res.s, C_B=res.C_B, C_E=res.C_E,
                C_s=res.C_s, power=res.power, interference=res.interference,
                iterations=res.iterations, trace=list(res.trace),
                wall_ms=1e3 * (time.perf_counter() - t0), flags=res.flags,
                failed="infeasible" in res.flags,
            )
        except InputError as exc:
            run = _failure_result("full-csi", exc)
        curves = [run]
        if spec.baselines:
            try:
                curves.append(baseline_no_irs(ch, P_T, P_I))
            except InputError as exc:
                curves.append(_failure_result("no-irs", exc))
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.master_seed, index, 1)))
            try:
                curves.append(baseline_random_phase(
                    ch, P_T, P_I, spec.random_phase_trials, rng=rng))
            except InputError as exc:
                curves.append(_failure_result("random-phase", exc))
        out.append((P_T_dBm, curves))
    return out


def _run_robust(spec, ch, index):
    cfg = spec.scenario
    P_T, P_I = dbm_to_watt(cfg.P_T), dbm_to_watt(cfg.P_I)
    out = []
    for eps_raw in spec.grid:
        if eps_raw > 0:
            eps = UncertaintyBounds.from_raw(eps_raw, eps_raw, ch.sigma_E)
        else:
            eps = (0.0, 0.0)
        t0 = time.perf_counter()
        try:
            res = line_search_tau(ch, eps, P_T, P_I)
            run = RunResult(
                mode="robust", w=res.w, s=res.s,
                C_B=float(np.log2(1.0 + res.bob_power)),
                C_E=float(np.log2(1.0 + res.tau_opt)),
                C_s=res.C_s, power=res.power, interference=res.interference,
                tau_opt=res.tau_opt, iterations=len(res.samples),
                wall_ms=1e3 * (time.perf_counter() - t0), flags=res.flags,
                failed="infeasible" in res.flags,
            )
        except InputError as exc:
            run = _failure_result("robust", exc)
        out.append((eps_raw, [run]))
    return out


def _run_no_csi(spec, ch, index):
    cfg = spec.scenario
    P_T, P_I = dbm_to_watt(cfg.P_T), dbm_to_watt(cfg.P_I)
    out = []
    for T_dB in spec.grid:
        T = 10.0 ** (T_dB / 10.0)
        t0 = time.perf_counter()
        try:
            res = ao_power_min(ch, T, P_I)
            if not res.feasible or res.P_S > P_T:
                flags = tuple(dict.fromkeys(res.flags + ("infeasible",)))
                run = RunResult(
                    mode="no-csi", w=res.w, s=res.s, C_B=math.nan,
                    C_E=math.nan, C_s=math.nan, power=math.nan,
                    interference=math.nan, P_S=math.nan,
                    iterations=res.rounds, trace=list(res.trace),
                    wall_ms=1e3 * (time.perf_counter() - t0), flags=flags,
                    failed=True,
                )
            else:
                an = an_covariance(res.w, res.s, ch, P_T, res.P_S)
                C_s = actual_secrecy_rate(res.w, res.s, an, ch, T)
                C_B = float(np.log2(1.0 + T))
                g_P = ch.h_AP + res.s.conj() @ ch.H_P
                leak_P = float(np.real(g_P @ an.R_AN @ g_P.conj()))
                run = RunResult(
                    mode="no-csi", w=res.w, s=res.s, C_B=C_B, C_E=C_B - C_s,
                    C_s=C_s, power=res.P_S,
                    interference=res.interference + leak_P,
                    P_S=res.P_S, iterations=res.rounds, trace=list(res.trace),
                    wall_ms=1e3 * (time.perf_counter() - t0),
                    flags=res.flags + an.flags, failed=False,
                )
        except InputError as exc:
            run = _failure_result("no-csi", exc)
        out.append((T_dB, [run]))
    return out


_RUNNERS = {"full-csi": _run_full_csi, "robust": _run_robust,
            "no-csi": _run_no_csi}


def run_realization(spec, index):
    """Solve every grid point for realization `index`.

    Channels come from the per-realization stream SeedSequence((master_seed,
    index)); the random-phase baseline uses SeedSequence((master_seed, index,
    1)) so adding or removing baselines never shifts the channel draw.
    Returns [(grid_value, [RunResult, ...]), ...] in grid order.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence((spec.master_seed, index)))
    ch = generate_channels(spec.scenario, rng)
    return _RUNNERS[spec.mode](spec, ch, index)


# --------------------------------------------------------------------------
# CSV writing
# --------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".17g")
    return str(value)


def _detail_row(run, seed, grid_value):
    return {
        "mode": run.mode,
        "seed": str(seed),
        "grid_value": _fmt(float(grid_value)),
        "C_B": _fmt(run.C_B),
        "C_E": _fmt(run.C_E),
        "C_s": _fmt(run.C_s),
        "power_used_W": _fmt(run.power),
        "interference_W": _fmt(run.interference),
        "tau_opt": _fmt(run.tau_opt),
        "P_S_W": _fmt(run.P_S),
        "iterations": str(int(run.iterations)),
        "wall_ms": _fmt(run.wall_ms),
        "flags": ";".join(run.flags),
    }


def _aggregate_rows(spec, results):
    """Per-(curve, grid point) means in deterministic order.

    `results` maps realization index -> run_realization output. Means use
    ordered compensated summation over realization index and skip failed
    rows, so the emitted bytes depend only on the ExperimentSpec contents.
    """
    rows = []
    curve_modes = []
    for _, curves in results[min(results)]:
        for run in curves:
            if run.mode not in curve_modes:
                curve_modes.append(run.mode)
        break
    for g_idx, grid_value in enumerate(spec.grid):
        for mode in curve_modes:
            picked = []
            for index in sorted(results):
                _, curves = results[index][g_idx]
                picked.extend(r for r in curves if r.mode == mode)
            ok = [r for r in picked if not r.failed]
            row = {
                "mode": mode,
                "grid_value": _fmt(float(grid_value)),
                "count": str(len(picked)),
                "failures": str(len(picked) - len(ok)),
            }
            for out_name, attr in _MEAN_FIELDS:
                key = {"power_used_W": "power", "interference_W":
                       "interference", "tau_opt": "tau_opt", "P_S_W": "P_S",
                       }.get(attr, attr)
                vals = [getattr(r, key) for r in ok]
                vals = [float(v) for v in vals if v is not None]
                if not vals or any(math.isnan(v) for v in vals):
                    row[out_name] = ""
                else:
                    row[out_name] = _fmt(math.fsum(vals) / len(vals))
            rows.append(row)
    return rows


def run_experiment(spec, jobs=1):
    """Run the sweep and write `<mode>-detail.csv` / `<mode>-aggregate.csv`.

    Realizations may run on `jobs` worker threads; rows are merged in
    (grid point, realization, curve) order, so the aggregate file is
    byte-identical for every `jobs` value. Failed realizations are recorded
    with flags and the run continues. Returns (detail_path, aggregate_path,
    failure_count).
    """
    jobs = max(1, int(jobs))
    indices = list(range(spec.realizations))
    results = {}
    if jobs == 1:
        for index in indices:
            results[index] = run_realization(spec, index)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {index: pool.submit(run_realization, spec, index)
                       for index in indices}
            for index, fut in futures.items():
                results[index] = fut.result()

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detail_path = out_dir / f"{spec.mode}-detail.csv"
    aggregate_path = out_dir / f"{spec.mode}-aggregate.csv"

    failures = 0
    with open(detail_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DETAIL_COLUMNS)
        writer.writeheader()
        for g_idx, grid_value in enumerate(spec.grid):
            for index in sorted(results):
                _, curves = results[index][g_idx]
                for run in curves:
                    failures += bool(run.failed)
                    writer.writerow(_detail_row(run, index, grid_value))

    with open(aggregate_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        writer.writeheader()
        for row in _aggregate_rows(spec, results):
            writer.writerow(row)

    return detail_path, aggregate_path, failures


# --------------------------------------------------------------------------
# convergence traces
# --------------------------------------------------------------------------

def run_trace(mode, scenario, master_seed=0, index=0, tau=None, eps_raw=0.0,
              target_dB=30.0, out_dir="."):
    """Write one per-iteration objective CSV for a single realization.

    full-csi: secrecy rate at each accepted boundary. robust: Bob power
    trace of the alternating optimization at worst-case level `tau` (required).
    no-csi: information-beam power trace at SNR target `target_dB`.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; pick one of {MODES}")
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, index)))
    ch = generate_channels(scenario, rng)
    P_T, P_I = dbm_to_watt(scenario.P_T), dbm_to_watt(scenario.P_I)
    if mode == "full-csi":
        res = ao_full_csi(ch, P_T, P_I)
        values = [pt.C_s for pt in res.trace]
    elif mode == "robust":
        if tau is None:
            raise InputError("robust trace needs a worst-case level tau")
        from .robust import ao_robust
        if eps_raw > 0:
            eps = UncertaintyBounds.from_raw(eps_raw, eps_raw, ch.sigma_E)
        else:
            eps = (0.0, 0.0)
        res = ao_robust(float(tau), ch, eps, P_T, P_I)
        values = list(res.trace)
    else:
        res = ao_power_min(ch, 10.0 ** (float(target_dB) / 10.0), P_I)
        values = list(res.trace)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{mode}-trace.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "seed", "iteration", "objective"])
        for k, v in enumerate(values):
            writer.writerow([mode, str(index), str(k), _fmt(float(v))])
    return path
