"""Monte Carlo experiments: sweeps over power, IRS size, receiver count or geometry.

Seeding
-------
Everything random derives from ``root_seed`` through
``SeedSequence(root_seed, spawn_key=...)``:

* ``(0,)`` fixes the codebooks for the whole experiment;
* ``(1, t)`` drives trial ``t`` (channel phases / NLoS, noise, ALS start).

Trial streams are shared across sweep values, so neighbouring rows differ only
in the swept quantity.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .angles import AngleSet, GridSpec, full_angle_pipeline
from .config import ConfigError, DEFAULT_EXPERIMENT, build_estimator, build_scenario
from .crb import CrbReport, crb_report
from .geometry import ArrayGeometry, Pose, condition_number, direction_matrix_b
from .pose import LocSolverConfig, OrientSolverConfig, build_T, estimate_location, estimate_orientation
from .scene import (
    Scenario,
    dbm_to_watt,
    gain_magnitudes,
    los_channels,
    make_codebooks,
    simulate_tensor,
    synthesize_channels,
    true_angles,
    watt_to_dbm,
)


class SweepKind(str, enum.Enum):
    TX_POWER = "TxPower"
    IRS_SIZE = "IrsSize"
    NUM_RECEIVERS = "NumReceivers"
    CONDITION_NUMBER = "ConditionNumber"


class CaseMode(str, enum.Enum):
    CASE1 = "Case1"   # estimated location, estimated eta
    CASE2 = "Case2"   # estimated location, true eta
    CASE3 = "Case3"   # true location, estimated eta


SWEEP_COLUMN = {
    SweepKind.TX_POWER: "pt_dbm",
    SweepKind.IRS_SIZE: "irs_side",
    SweepKind.NUM_RECEIVERS: "num_rx",
    SweepKind.CONDITION_NUMBER: "kappa",
}


@dataclass
class Settings:
    grid: GridSpec = field(default_factory=GridSpec)
    als: dict = field(default_factory=lambda: {"als_max_iters": 200, "als_tol": 1e-8, "als_init": "svd",
                                                      "als_restarts": 4})
    loc: LocSolverConfig = field(default_factory=LocSolverConfig)
    orient: OrientSolverConfig = field(default_factory=OrientSolverConfig)


@dataclass
class Experiment:
    scenario: Scenario
    sweep: SweepKind = SweepKind.TX_POWER
    values: tuple = (0.0, 10.0, 20.0, 30.0, 40.0)
    trials: int = 100
    case_mode: CaseMode = CaseMode.CASE1
    root_seed: int = 2024
    outputs: Path | None = None
    name: str = "experiment"
    settings: Settings = field(default_factory=Settings)
    rx_pool: np.ndarray | None = None
    irs_locations: np.ndarray | None = None
    workers: int = 1
    config_hash: str = ""

    def __post_init__(self):
        self.sweep = SweepKind(self.sweep)
        self.case_mode = CaseMode(self.case_mode)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.sweep is SweepKind.CONDITION_NUMBER:
            if self.irs_locations is None or len(self.irs_locations) < 1:
                raise ValueError("a ConditionNumber sweep needs irs_locations")
            self.irs_locations = np.atleast_2d(np.asarray(self.irs_locations, dtype=float))
            self.values = tuple(range(len(self.irs_locations)))
        else:
            self.values = tuple(self.values)
            if len(self.values) < 1 or any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("sweep values must be strictly increasing")
        if self.rx_pool is not None:
            self.rx_pool = np.atleast_2d(np.asarray(self.rx_pool, dtype=float))


@dataclass
class TrialOutcome:
    angles: AngleSet
    pose: Pose            # estimate under the requested case
    truth_angles: AngleSet
    truth_pose: Pose
    poses: dict           # CaseMode -> Pose
    location: np.ndarray  # estimated location (cases 1 and 2)


@dataclass
class ResultRow:
    sweep_value: float
    labels: list
    mse_per_angle: np.ndarray
    crb_per_angle: np.ndarray
    mse_location: float
    crb_location: float
    mse_orientation: float
    crb_orientation: float
    trials_used: int
    mse_orientation_cases: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# seeds

def codebook_seed(root_seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(0,))


def trial_seed(root_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(1, trial))


# --------------------------------------------------------------------------
# single trial

def run_trial(scenario: Scenario, case_mode=CaseMode.CASE1, seed=0, codebooks=None,
              settings: Settings | None = None) -> TrialOutcome:
    """One channel/noise realisation through the full pipeline.

    All three cases are evaluated; ``pose`` holds the one named by ``case_mode``.
    """
    settings = settings or Settings()
    case_mode = CaseMode(case_mode)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_ch, s_noise, s_als = ss.spawn(3)
    if codebooks is None:
        codebooks = make_codebooks(scenario, ss.spawn(1)[0])
    ch = synthesize_channels(scenario, np.random.default_rng(s_ch))
    Y = simulate_tensor(scenario, codebooks, ch, np.random.default_rng(s_noise))
    est = full_angle_pipeline(Y, codebooks, scenario, settings.grid, s_als, **settings.als)
    truth = true_angles(scenario)
    p_true = scenario.true_pose.location
    p_hat = estimate_location(est, scenario, settings.loc).location
    inputs = {
        CaseMode.CASE1: (p_hat, est),
        CaseMode.CASE2: (p_hat, truth),
        CaseMode.CASE3: (p_true, est),
    }
    poses = {}
    for mode, (p, ang) in inputs.items():
        q = estimate_orientation(direction_matrix_b(p, scenario), build_T(ang), settings.orient).rotation
        poses[mode] = Pose(p, q)
    return TrialOutcome(est, poses[case_mode], truth, scenario.true_pose, poses, p_hat)


# --------------------------------------------------------------------------
# experiments

def scenario_for(exp: Experiment, index: int) -> Scenario:
    sc = exp.scenario
    v = exp.values[index]
    if exp.sweep is SweepKind.TX_POWER:
        return sc.replace(tx_power=dbm_to_watt(float(v)))
    if exp.sweep is SweepKind.IRS_SIZE:
        n = int(v)
        if n != v or n < 1:
            raise ValueError("IrsSize values are positive integers (elements per side)")
        return sc.replace(irs_array=ArrayGeometry(n, n, sc.irs_array.spacing, sc.irs_array.plane))
    if exp.sweep is SweepKind.NUM_RECEIVERS:
        pool = exp.rx_pool if exp.rx_pool is not None else sc.p_rx
        n = int(v)
        if n != v or not 1 <= n <= len(pool):
            raise ValueError(f"NumReceivers value {v} outside 1..{len(pool)}")
        return sc.replace(p_rx=pool[:n])
    loc = exp.irs_locations[index]
    return sc.replace(true_pose=Pose(loc, sc.true_pose.rotation))


def sweep_value(exp: Experiment, scenario: Scenario, index: int) -> float:
    if exp.sweep is SweepKind.CONDITION_NUMBER:
        return condition_number(direction_matrix_b(scenario.true_pose.location, scenario))
    return float(exp.values[index])


def scenario_crb(scenario: Scenario, codebooks) -> CrbReport:
    """Bound for the LoS model with path-loss gain magnitudes (phases do not matter)."""
    g, r = gain_magnitudes(scenario)
    return crb_report(scenario.true_pose, scenario, codebooks, los_channels(scenario, g, r))


def _trial_errors(args):
    scenario, case_mode, seed, codebooks, settings = args
    try:
        out = run_trial(scenario, case_mode, seed, codebooks, settings)
    except (ValueError, np.linalg.LinAlgError):
        return None
    d_ang = out.angles.as_vector() - out.truth_angles.as_vector()
    d_p = out.location - out.truth_pose.location
    q = out.truth_pose.rotation
    d_q = {m: float(np.sum((p.rotation - q) ** 2)) for m, p in out.poses.items()}
    return d_ang ** 2, float(d_p @ d_p), d_q


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_sweep_point(exp: Experiment, index: int) -> ResultRow:
    sc = scenario_for(exp, index)
    cb = make_codebooks(sc, codebook_seed(exp.root_seed))
    crb = scenario_crb(sc, cb)
    jobs = [(sc, exp.case_mode, trial_seed(exp.root_seed, t), cb, exp.settings) for t in range(exp.trials)]
    results = [r for r in _map(_trial_errors, jobs, exp.workers) if r is not None]
    n = len(results)
    if n:
        mse_ang = np.mean([r[0] for r in results], axis=0)
        mse_p = float(np.mean([r[1] for r in results]))
        cases = {m: float(np.mean([r[2][m] for r in results])) for m in CaseMode}
    else:
        mse_ang = np.full(4 * sc.K + 2, np.nan)
        mse_p = math.nan
        cases = {m: math.nan for m in CaseMode}
    return ResultRow(
        sweep_value=sweep_value(exp, sc, index),
        labels=AngleSet.labels(sc.K),
        mse_per_angle=mse_ang,
        crb_per_angle=crb.crb_per_angle,
        mse_location=mse_p,
        crb_location=crb.crb_location,
        mse_orientation=cases[exp.case_mode],
        crb_orientation=crb.crb_orientation,
        trials_used=n,
        mse_orientation_cases=cases,
    )


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.9g}"


def csv_text(exp: Experiment, rows: list) -> str:
    labels = max((r.labels for r in rows), key=len)
    header = [SWEEP_COLUMN[exp.sweep]]
    for lab in labels:
        header += [f"mse_{lab}", f"crb_{lab}"]
    header += ["mse_p", "crb_p", "mse_q", "crb_q", "mse_q_case1", "mse_q_case2", "mse_q_case3", "trials"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        lookup = dict(zip(r.labels, zip(r.mse_per_angle, r.crb_per_angle)))
        line = [_fmt(r.sweep_value)]
        for lab in labels:
            m, c = lookup.get(lab, (None, None))
            line += [_fmt(m), _fmt(c)]
        line += [_fmt(r.mse_location), _fmt(r.crb_location), _fmt(r.mse_orientation), _fmt(r.crb_orientation)]
        line += [_fmt(r.mse_orientation_cases[m]) for m in CaseMode]
        line.append(str(r.trials_used))
        w.writerow(line)
    return buf.getvalue()


def metadata(exp: Experiment) -> dict:
    sc = exp.scenario
    return {
        "tool": "irs6d",
        "version": __version__,
        "config_sha256": exp.config_hash,
        "root_seed": exp.root_seed,
        "trials": exp.trials,
        "trials_note": "desk-scale default is 100 trials per point",
        "sweep": exp.sweep.value,
        "values": [float(v) for v in exp.values],
        "case_mode": exp.case_mode.value,
        "rician_factor_db": sc.rician_factor_db if math.isfinite(sc.rician_factor_db) else "inf",
        "pt_dbm": watt_to_dbm(sc.tx_power) if sc.tx_power > 0 else None,
        "kernel_backend": kernels.BACKEND,
        "crb_model": "pure LoS, known complex gains",
    }


def run_experiment(exp: Experiment) -> list:
    """Run every sweep point; writes ``<name>.csv`` and ``<name>.meta.json`` if ``outputs`` is set."""
    rows = [run_sweep_point(exp, i) for i in range(len(exp.values))]
    if exp.sweep is SweepKind.CONDITION_NUMBER:
        rows.sort(key=lambda r: r.sweep_value)
    if exp.outputs is not None:
        out = Path(exp.outputs)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{exp.name}.csv").write_text(csv_text(exp, rows))
            (out / f"{exp.name}.meta.json").write_text(json.dumps(metadata(exp), indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write results under {out}: {exc.strerror}") from exc
    return rows


def experiment_from_config(doc: dict, name: str = "experiment", outputs=None, trials=None,
                           seed=None, pt_dbm=None) -> Experiment:
    """Build an :class:`Experiment` from parsed config sections and CLI overrides."""
    scen = dict(doc.get("scenario", {}))
    if pt_dbm is not None:
        scen["pt_dbm"] = pt_dbm
    scenario = build_scenario(scen)
    grid, als, loc, orient = build_estimator(doc.get("estimator", {}))
    e = {**DEFAULT_EXPERIMENT, **doc.get("experiment", {})}
    unknown = set(doc.get("experiment", {})) - set(DEFAULT_EXPERIMENT)
    if unknown:
        raise ConfigError(f"unknown key(s) in [experiment]: {', '.join(sorted(unknown))}")
    try:
        exp = Experiment(
            scenario=scenario,
            sweep=e["sweep"],
            values=tuple(e["values"]),
            trials=int(trials if trials is not None else e["trials"]),
            case_mode=e["case_mode"],
            root_seed=int(seed if seed is not None else e["root_seed"]),
            outputs=outputs,
            name=name,
            settings=Settings(grid, als, loc, orient),
            rx_pool=e["rx_pool"],
            irs_locations=e["irs_locations"],
            workers=int(e["workers"]) if e["workers"] != "auto" else (os.cpu_count() or 1),
            config_hash=doc.get("_sha256", ""),
        )
        for i in range(len(exp.values)):
            scenario_for(exp, i)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[experiment]: {exc}") from exc
    return exp
