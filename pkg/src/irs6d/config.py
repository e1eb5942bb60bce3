"""TOML experiment configuration.

Three sections are read: ``[scenario]``, ``[experiment]`` and the optional
``[estimator]``.  Every key has a default that reproduces the reference
deployment, so an empty file is a valid configuration.
"""
from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .angles import GridSpec
from .geometry import ArrayGeometry, Plane, Pose
from .pose import LocSolverConfig, OrientSolverConfig
from .scene import SPEED_OF_LIGHT, Scenario, dbm_to_watt


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


SCENARIO_KEYS = {
    "carrier_hz", "p_tx", "p_rx", "irs_location", "irs_euler_deg", "tx_array", "rx_array",
    "irs_array", "tx_spacing_wl", "rx_spacing_wl", "irs_spacing_wl", "pt_dbm", "noise_dbm",
    "path_loss_exponents", "rician_factor_db", "codebook_sizes", "search_half_width",
}
EXPERIMENT_KEYS = {"sweep", "values", "trials", "case_mode", "root_seed", "rx_pool",
                   "irs_locations", "workers"}
ESTIMATOR_KEYS = {"coarse_points", "refine_rounds", "refine_points", "shrink_factor",
                  "als_max_iters", "als_tol", "als_init", "als_restarts", "loc_max_iters", "loc_eps0",
                  "loc_damping", "orient_method", "orient_max_iters", "orient_grad_tol",
                  "orient_starts"}

DEFAULT_SCENARIO = {
    "carrier_hz": 28e9,
    "p_tx": [0.0, 0.0, 0.0],
    "p_rx": [[30.0, -25.0, 9.0], [22.0, 27.0, 0.0]],
    "irs_location": [5.0, 4.0, 10.0],
    "irs_euler_deg": [45.0, 30.0, 45.0],
    "tx_array": [8, 8],
    "rx_array": [8, 8],
    "irs_array": [8, 8],
    "tx_spacing_wl": 0.5,
    "rx_spacing_wl": 0.5,
    "irs_spacing_wl": 0.25,
    "pt_dbm": 30.0,
    "noise_dbm": -110.0,
    "path_loss_exponents": [2.0, 2.2],
    "rician_factor_db": 10.0,
    "codebook_sizes": [36, 36, 36],
    "search_half_width": 20.0,
}

DEFAULT_EXPERIMENT = {
    "sweep": "TxPower",
    "values": [0.0, 10.0, 20.0, 30.0, 40.0],
    "trials": 100,
    "case_mode": "Case1",
    "root_seed": 2024,
    "rx_pool": None,
    "irs_locations": None,
    "workers": 1,
}


def _check_keys(section, allowed, name):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")


def _float(v, key):
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return float("inf")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _vec(v, key, n=3):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a list of numbers") from None
    if a.shape != (n,):
        raise ConfigError(f"{key}: expected {n} numbers, got shape {a.shape}")
    return a


def _points(v, key):
    try:
        a = np.atleast_2d(np.asarray(v, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a list of 3-vectors") from None
    if a.ndim != 2 or a.shape[1] != 3:
        raise ConfigError(f"{key}: expected a list of 3-vectors")
    return a


def _dims(v, key):
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, int) and x > 0 for x in v)):
        raise ConfigError(f"{key}: expected two positive integers")
    return int(v[0]), int(v[1])


def build_scenario(section: dict) -> Scenario:
    _check_keys(section, SCENARIO_KEYS, "scenario")
    s = {**DEFAULT_SCENARIO, **section}
    lam = SPEED_OF_LIGHT / _float(s["carrier_hz"], "carrier_hz")
    loc = _vec(s["irs_location"], "irs_location")
    psi = np.deg2rad(_vec(s["irs_euler_deg"], "irs_euler_deg"))
    half = _float(s["search_half_width"], "search_half_width")
    sizes = s["codebook_sizes"]
    if not (isinstance(sizes, list) and len(sizes) == 3 and all(isinstance(x, int) and x > 0 for x in sizes)):
        raise ConfigError("codebook_sizes: expected three positive integers [D_TX, D_IRS, D_RX]")
    try:
        return Scenario(
            p_tx=_vec(s["p_tx"], "p_tx"),
            p_rx=_points(s["p_rx"], "p_rx"),
            true_pose=Pose.from_euler(loc, psi),
            tx_array=ArrayGeometry(*_dims(s["tx_array"], "tx_array"), _float(s["tx_spacing_wl"], "tx_spacing_wl") * lam, Plane.YZ),
            rx_array=ArrayGeometry(*_dims(s["rx_array"], "rx_array"), _float(s["rx_spacing_wl"], "rx_spacing_wl") * lam, Plane.YZ),
            irs_array=ArrayGeometry(*_dims(s["irs_array"], "irs_array"), _float(s["irs_spacing_wl"], "irs_spacing_wl") * lam, Plane.XY),
            wavelength=lam,
            tx_power=dbm_to_watt(_float(s["pt_dbm"], "pt_dbm")),
            noise_power=dbm_to_watt(_float(s["noise_dbm"], "noise_dbm")),
            path_loss_exponents=tuple(_vec(s["path_loss_exponents"], "path_loss_exponents", 2)),
            rician_factor_db=_float(s["rician_factor_db"], "rician_factor_db"),
            codebook_sizes=tuple(sizes),
            search_region=(loc - half, loc + half),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[scenario]: {exc}") from exc


def build_estimator(section: dict):
    """Returns ``(GridSpec, als_options, LocSolverConfig, OrientSolverConfig)``."""
    _check_keys(section, ESTIMATOR_KEYS, "estimator")
    e = section
    try:
        grid = GridSpec(
            coarse_points_per_dim=int(e.get("coarse_points", 64)),
            refine_rounds=int(e.get("refine_rounds", 3)),
            refine_points_per_dim=int(e.get("refine_points", 11)),
            shrink_factor=float(e.get("shrink_factor", 0.1)),
        )
        als = {
            "als_max_iters": int(e.get("als_max_iters", 200)),
            "als_tol": float(e.get("als_tol", 1e-8)),
            "als_init": str(e.get("als_init", "svd")),
            "als_restarts": int(e.get("als_restarts", 4)),
        }
        if als["als_init"] not in ("svd", "random"):
            raise ConfigError("als_init must be 'svd' or 'random'")
        if als["als_restarts"] < 0:
            raise ConfigError("als_restarts must be non-negative")
        loc = LocSolverConfig(
            max_iters=int(e.get("loc_max_iters", 100)),
            eps0=float(e.get("loc_eps0", 1e-10)),
            damping=float(e.get("loc_damping", 1e-9)),
        )
        orient = OrientSolverConfig(
            method=str(e.get("orient_method", "auto")).lower(),
            max_iters=int(e.get("orient_max_iters", 500)),
            grad_tol=float(e.get("orient_grad_tol", 1e-10)),
            starts=int(e.get("orient_starts", 5)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[estimator]: {exc}") from exc
    return grid, als, loc, orient


def load_config(path) -> dict:
    """Parse a TOML file; returns the raw sections plus its SHA-256."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(doc) - {"scenario", "experiment", "estimator"}
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(sorted(unknown))}")
    doc["_sha256"] = hashlib.sha256(raw).hexdigest()
    return doc
