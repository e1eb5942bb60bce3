"""Location and orientation estimation from extracted spatial frequencies.

Location comes from a damped Gauss-Newton fit of the TX/RX frequencies.
Orientation solves ``min ||B^T Q E - T||_F`` over SO(3) with ``E = [e1, e2]``,
either by Riemannian descent or, when ``B`` has full row rank, in closed form.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .angles import AngleSet
from .geometry import Pose, direction_matrix_b

E12 = np.eye(3)[:, :2]


class OrientMethod(str, enum.Enum):
    MANIFOLD = "manifold"
    KABSCH = "kabsch"
    AUTO = "auto"


@dataclass(frozen=True)
class LocSolverConfig:
    """``damping`` is relative: the added ridge is ``damping * trace(A A^T)``."""

    init: object = "centroid"
    max_iters: int = 100
    eps0: float = 1e-10
    damping: float = 1e-9

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")


@dataclass(frozen=True)
class OrientSolverConfig:
    method: OrientMethod = OrientMethod.AUTO
    max_iters: int = 500
    grad_tol: float = 1e-10
    armijo: tuple = (1e-4, 0.5, 1.0)
    starts: int = 5
    seed: int = 0
    tie_tol: float = 1e-15

    def __post_init__(self):
        object.__setattr__(self, "method", OrientMethod(self.method))
        c, beta, v0 = self.armijo
        if not (0 < c < 1 and 0 < beta < 1 and v0 > 0):
            raise ValueError("armijo needs c, backtrack in (0, 1) and v0 > 0")
        if self.max_iters < 1 or not self.grad_tol > 0 or self.starts < 1:
            raise ValueError("max_iters, grad_tol and starts must be positive")


# --------------------------------------------------------------------------
# location

def _unit_rows(d):
    n = np.linalg.norm(d, axis=1)
    if np.any(n == 0):
        raise ValueError("IRS location coincides with a TX or RX")
    return d / n[:, None], n


def _anchors(scenario):
    """TX then RX positions, and the matching 2d/lambda scales."""
    pts = np.vstack([scenario.p_tx, scenario.p_rx])
    c = np.empty(len(pts))
    c[0] = scenario.tx_array.freq_bound(scenario.wavelength)
    c[1:] = scenario.rx_array.freq_bound(scenario.wavelength)
    return pts, c


def zeta_model(p, scenario):
    """Model TX/RX frequencies at location ``p``: ``(zeta_e, zeta_a)``, each length K+1."""
    pts, c = _anchors(scenario)
    u, _ = _unit_rows(np.asarray(p, dtype=float)[None, :] - pts)
    return c * u[:, 2], c * u[:, 1]


def f_vec(p, e, p_k) -> np.ndarray:
    """Gradient of ``(p - p_k)^T e / ||p - p_k||`` with respect to ``p``."""
    d = np.asarray(p, dtype=float) - np.asarray(p_k, dtype=float)
    n = np.linalg.norm(d)
    if n == 0:
        raise ValueError("IRS location coincides with a TX or RX")
    return (n * n * e - (d @ e) * d) / n ** 3


def zeta_jacobian(p, scenario) -> np.ndarray:
    """``A(p)``: 3 x 2(K+1), columns ``[d zeta_e / dp ..., d zeta_a / dp ...]``."""
    pts, c = _anchors(scenario)
    e2, e3 = np.eye(3)[1], np.eye(3)[2]
    el = [ck * f_vec(p, e3, pk) for ck, pk in zip(c, pts)]
    az = [ck * f_vec(p, e2, pk) for ck, pk in zip(c, pts)]
    return np.column_stack(el + az)


def location_objective(p, angles: AngleSet, scenario) -> float:
    ze, za = zeta_model(p, scenario)
    return float(np.sum((angles.zeta_e - ze) ** 2) + np.sum((angles.zeta_a - za) ** 2))


@dataclass
class LocationResult:
    location: np.ndarray
    trace: list            # objective after each accepted iterate (index 0 = init)
    iterations: int
    clamped: bool


def gn_step(p, angles: AngleSet, scenario, damping: float) -> np.ndarray:
    """One undamped-or-damped Gauss-Newton increment ``(A A^T + mu I)^-1 A Delta``."""
    ze, za = zeta_model(p, scenario)
    delta = np.concatenate([angles.zeta_e - ze, angles.zeta_a - za])
    A = zeta_jacobian(p, scenario)
    N = A @ A.T
    mu = damping * np.trace(N)
    if mu == 0.0 and np.linalg.matrix_rank(N) < 3:
        raise np.linalg.LinAlgError("singular normal matrix; use a positive damping")
    return np.linalg.solve(N + mu * np.eye(3), A @ delta)


def estimate_location(angles: AngleSet, scenario, cfg: LocSolverConfig = LocSolverConfig()) -> LocationResult:
    lo, hi = scenario.search_region
    if isinstance(cfg.init, str):
        if cfg.init != "centroid":
            raise ValueError(f"unknown init {cfg.init!r}")
        p = (lo + hi) / 2.0
    else:
        p = np.asarray(cfg.init, dtype=float).reshape(3).copy()
    f = location_objective(p, angles, scenario)
    trace = [f]
    it = 0
    for it in range(1, cfg.max_iters + 1):
        step = gn_step(p, angles, scenario, cfg.damping)
        # halve until the objective does not increase
        for _ in range(30):
            cand = p + step
            try:
                fc = location_objective(cand, angles, scenario)
            except ValueError:
                fc = np.inf
            if fc <= f:
                break
            step = step / 2.0
        else:
            break
        p, f = cand, fc
        trace.append(f)
        if np.linalg.norm(step) < cfg.eps0:
            break
    clipped = np.clip(p, lo, hi)
    return LocationResult(clipped, trace, it, bool(np.any(clipped != p)))


# --------------------------------------------------------------------------
# orientation

def build_T(angles: AngleSet) -> np.ndarray:
    return np.column_stack([angles.eta_a, angles.eta_e])


def orientation_objective(Q, B, T) -> float:
    r = B.T @ Q @ E12 - T
    return float(np.sum(r * r))


def kabsch_objective(Q, B, T) -> float:
    """``||Q E - (B^T)^+ T||_F^2``, the objective the closed form minimises."""
    r = Q @ E12 - np.linalg.pinv(B.T) @ T
    return float(np.sum(r * r))


def euclidean_gradient(Q, B, T) -> np.ndarray:
    return 2.0 * B @ B.T @ Q @ E12 @ E12.T - 2.0 * B @ T @ E12.T


def tangent_projection(X, U) -> np.ndarray:
    return X @ (X.T @ U - U.T @ X) / 2.0


def retraction(X, U) -> np.ndarray:
    """``(X + U)(I + U^T U)^(-1/2)``."""
    w, P = np.linalg.eigh(np.eye(3) + U.T @ U)
    return (X + U) @ (P / np.sqrt(w)) @ P.T


@dataclass
class OrientationResult:
    rotation: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    grad_norm: float = 0.0
    method: str = ""


def _descend(Q, B, T, cfg: OrientSolverConfig) -> OrientationResult:
    c, beta, v0 = cfg.armijo
    f = orientation_objective(Q, B, T)
    trace = [f]
    gn = np.inf
    for _ in range(cfg.max_iters):
        xi = tangent_projection(Q, euclidean_gradient(Q, B, T))
        gn = float(np.linalg.norm(xi))
        if gn < cfg.grad_tol:
            break
        v = v0
        while True:
            cand = retraction(Q, -v * xi)
            fc = orientation_objective(cand, B, T)
            if fc <= f - c * v * gn * gn or v < 1e-20:
                break
            v *= beta
        if fc > f:
            break
        Q, f = cand, fc
        trace.append(f)
    return OrientationResult(Q, f, trace, gn, "manifold")


def estimate_orientation_manifold(B_hat, T_hat, cfg: OrientSolverConfig = OrientSolverConfig(),
                                  init=None) -> OrientationResult:
    """Multi-start Riemannian descent; the identity plus seeded random starts.

    A later start replaces the incumbent only when its objective is lower by
    more than ``cfg.tie_tol``, so exact ties go to the earliest start.  With
    two receivers the data admit two exact solutions, so the tie rule matters.
    ``init`` replaces the start list with a single given rotation.
    """
    B = np.asarray(B_hat, dtype=float)
    T = np.asarray(T_hat, dtype=float)
    if B.shape[1] < 2:
        raise ValueError("orientation needs at least two receivers")
    if init is not None:
        starts = [np.asarray(init, dtype=float)]
    else:
        starts = [np.eye(3)]
        if cfg.starts > 1:
            starts += list(Rotation.random(cfg.starts - 1, random_state=cfg.seed).as_matrix())
    best = None
    for Q0 in starts:
        res = _descend(Q0, B, T, cfg)
        if best is None or res.objective < best.objective - cfg.tie_tol:
            best = res
    return best


def estimate_orientation_kabsch(B_hat, T_hat) -> OrientationResult:
    B = np.asarray(B_hat, dtype=float)
    T = np.asarray(T_hat, dtype=float)
    s = np.linalg.svd(B, compute_uv=False)
    if B.shape[0] != 3 or len(s) < 3 or not s[-1] > 1e-8 * s[0]:
        raise ValueError("B does not have full row rank; use the manifold method")
    M = np.linalg.pinv(B.T) @ T
    A = E12 @ M.T
    U, _, Vt = np.linalg.svd(A)
    V = Vt.T
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(V @ U.T))])
    Q = V @ D @ U.T
    return OrientationResult(Q, orientation_objective(Q, B, T), method="kabsch")


def has_full_row_rank(B) -> bool:
    s = np.linalg.svd(np.asarray(B, dtype=float), compute_uv=False)
    return len(s) == 3 and bool(s[-1] > 1e-8 * s[0])


def estimate_orientation(B_hat, T_hat, cfg: OrientSolverConfig = OrientSolverConfig()) -> OrientationResult:
    method = cfg.method
    if method is OrientMethod.AUTO:
        method = OrientMethod.KABSCH if has_full_row_rank(B_hat) else OrientMethod.MANIFOLD
    if method is OrientMethod.KABSCH:
        return estimate_orientation_kabsch(B_hat, T_hat)
    return estimate_orientation_manifold(B_hat, T_hat, cfg)


@dataclass
class PoseEstimate:
    pose: Pose
    location: LocationResult | None
    orientation: OrientationResult


def estimate_pose(angles: AngleSet, scenario, loc_cfg: LocSolverConfig = LocSolverConfig(),
                  orient_cfg: OrientSolverConfig = OrientSolverConfig(), location=None) -> PoseEstimate:
    """Location first, then orientation from ``B(p_hat)`` and ``T_hat``.

    Passing ``location`` skips the location step and uses it as ``p_hat``.
    """
    if angles.K < 2:
        raise ValueError("pose estimation needs at least two receivers")
    if location is None:
        loc = estimate_location(angles, scenario, loc_cfg)
        p_hat = loc.location
    else:
        loc = None
        p_hat = np.asarray(location, dtype=float).reshape(3)
    B = direction_matrix_b(p_hat, scenario)
    ori = estimate_orientation(B, build_T(angles), orient_cfg)
    return PoseEstimate(Pose(p_hat, ori.rotation), loc, ori)
