"""Oracle suites shared by the ``validate`` subcommand and the test-suite.

Each suite returns a :class:`SuiteResult` with pass/fail counts and the worst
observed error.  Relative Jacobian errors are ``max|J - J_fd| / max|J_fd|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .crb import (
    fim_gamma,
    fim_gamma_oracle,
    fim_s_oracle,
    gamma_from_pose,
    jacobian_gamma_s,
    jacobian_q_s,
    lemma1_bound,
    lemma1_relative_error,
)
from .geometry import (
    ArrayGeometry,
    Plane,
    Pose,
    cascaded_freqs,
    cascaded_freqs_geometric,
    global_to_local,
    is_rotation,
    local_to_global,
    rotation_from_euler,
)
from .pose import (
    OrientSolverConfig,
    estimate_orientation_kabsch,
    estimate_orientation_manifold,
    kabsch_objective,
    zeta_jacobian,
    zeta_model,
)
from .scene import default_scenario, make_codebooks, synthesize_channels
from .tensor import cp_als_rank1, outer3

SUITES = ("geometry", "jacobians", "fim", "als", "kabsch", "lemma1")


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    worst: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def record(self, ok: bool, err: float = 0.0):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
        self.worst = max(self.worst, float(err))

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{self.name:10s} {status}  passed={self.passed} failed={self.failed} worst={self.worst:.3e}"


def central_diff(fun, x, h):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b) -> float:
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a)))


def random_pose(rng, scenario, min_dist: float = 2.0) -> Pose:
    """Random pose in the search box, kept away from every node."""
    lo, hi = scenario.search_region
    nodes = np.vstack([scenario.p_tx, scenario.p_rx])
    while True:
        p = rng.uniform(lo, hi)
        if np.min(np.linalg.norm(nodes - p, axis=1)) > min_dist:
            break
    psi = rng.uniform(-np.pi, np.pi, 3)
    psi[1] = rng.uniform(-np.pi / 2, np.pi / 2)
    return Pose.from_euler(p, psi)


def random_scene(rng, K=None):
    """Scenario with random node positions and IRS pose."""
    base = default_scenario(rician_factor_db=float("inf"))
    K = K or int(rng.integers(2, 5))
    while True:
        p_tx = rng.uniform(-30, 30, 3)
        p_rx = rng.uniform(-50, 50, (K, 3))
        loc = rng.uniform(-20, 20, 3)
        nodes = np.vstack([p_tx, p_rx])
        if np.min(np.linalg.norm(nodes - loc, axis=1)) > 1.0:
            break
    psi = rng.uniform(-np.pi, np.pi, 3)
    return base.replace(p_tx=p_tx, p_rx=p_rx, true_pose=Pose.from_euler(loc, psi),
                        search_region=(loc - 20, loc + 20))


# --------------------------------------------------------------------------
# suites

def suite_geometry(n: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("geometry")
    for _ in range(n):
        Q = rotation_from_euler(rng.uniform(-np.pi, np.pi, 3))
        err = max(np.linalg.norm(Q @ Q.T - np.eye(3)), abs(np.linalg.det(Q) - 1))
        res.record(is_rotation(Q, 1e-12), err)
        sc = random_scene(rng)
        x = rng.normal(size=3) * 30
        back = local_to_global(global_to_local(x, sc.true_pose), sc.true_pose)
        res.record(np.allclose(back, x, atol=1e-12 * max(1.0, np.abs(x).max())), np.abs(back - x).max())
        k = int(rng.integers(sc.K))
        a = cascaded_freqs(sc.true_pose, sc, k)
        b = cascaded_freqs_geometric(sc.true_pose, sc, k)
        d = max(abs(a.elev - b.elev), abs(a.azim - b.azim))
        bound = 4 * sc.irs_array.spacing / sc.wavelength
        res.record(d < 1e-10 and max(abs(a.elev), abs(a.azim)) <= bound + 1e-12, d)
    return res


def suite_jacobians(n: int = 100, seed: int = 1, tol: float = 1e-6) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("jacobians")
    sc = default_scenario(rician_factor_db=float("inf"))
    for _ in range(n):
        pose = random_pose(rng, sc)
        s0 = np.concatenate([pose.location, pose.euler])
        h = 1e-6

        def gam(s):
            return gamma_from_pose(Pose.from_euler(s[:3], s[3:]), sc).as_vector()

        e = rel_err(jacobian_gamma_s(pose, sc), central_diff(gam, s0, h))
        res.record(e < tol, e)

        def vecq(s):
            return rotation_from_euler(s[3:]).ravel(order="F")

        e = rel_err(jacobian_q_s(pose), central_diff(vecq, s0, h))
        res.record(e < tol, e)

        def zeta(p):
            ze, za = zeta_model(p, sc)
            return np.concatenate([ze, za])

        e = rel_err(zeta_jacobian(pose.location, sc).T, central_diff(zeta, pose.location, h))
        res.record(e < tol, e)
    return res


def small_instance(seed: int = 0, K: int = 2):
    """D = 4 codebooks, 2x2 arrays everywhere, pure LoS."""
    base = default_scenario(rician_factor_db=float("inf"))
    lam = base.wavelength
    p_rx = np.array([[30.0, -25.0, 9.0], [22.0, 27.0, 0.0], [-46.0, 6.0, 10.0]])[:K]
    sc = base.replace(
        p_rx=p_rx,
        tx_array=ArrayGeometry(2, 2, lam / 2, Plane.YZ),
        rx_array=ArrayGeometry(2, 2, lam / 2, Plane.YZ),
        irs_array=ArrayGeometry(2, 2, lam / 4, Plane.XY),
        codebook_sizes=(4, 4, 4),
    )
    ss = np.random.SeedSequence(seed).spawn(2)
    return sc, make_codebooks(sc, ss[0]), synthesize_channels(sc, ss[1])


def suite_fim(seed: int = 0, tol: float = 1e-6) -> SuiteResult:
    res = SuiteResult("fim")
    sc, cb, ch = small_instance(seed)
    g = gamma_from_pose(sc.true_pose, sc)
    A = fim_gamma(g, sc, cb, ch)
    O = fim_gamma_oracle(g, sc, cb, ch)
    e = float(np.linalg.norm(A - O) / np.linalg.norm(O))
    res.record(e < tol, e)
    e = float(np.linalg.norm(A - A.T) / np.linalg.norm(A))
    res.record(e < 1e-10, e)
    w = np.linalg.eigvalsh((A + A.T) / 2)
    res.record(w.min() >= -1e-9 * w.max(), max(0.0, -w.min() / w.max()))
    J = jacobian_gamma_s(sc.true_pose, sc)
    Is = fim_s_oracle(sc.true_pose, sc, cb, ch)
    e = float(np.linalg.norm(J.T @ A @ J - Is) / np.linalg.norm(Is))
    res.record(e < tol, e)
    return res


def suite_als(n: int = 100, seed: int = 2, shape=(12, 10, 8), snr_db: float = 0.0) -> SuiteResult:
    """Per-sweep objective must never increase; noiseless rank-1 must fit exactly."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("als")
    for t in range(n):
        f = [rng.normal(size=d) + 1j * rng.normal(size=d) for d in shape]
        Y0 = outer3(*f)
        noise = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        noise *= np.linalg.norm(Y0) / np.linalg.norm(noise) * 10 ** (-snr_db / 20)
        fit = cp_als_rank1(Y0 + noise, max_iters=200, tol=1e-12, seed=t)
        obj = fit.objective
        rise = float(np.max(np.diff(obj) / obj[:-1])) if obj.size > 1 else 0.0
        res.record(rise <= 1e-12, max(rise, 0.0))
        clean = cp_als_rank1(Y0, seed=t)
        res.record(clean.residual < 1e-8, clean.residual)
    return res


def random_rotations(n: int, seed: int) -> np.ndarray:
    return Rotation.random(n, random_state=seed).as_matrix()


def suite_kabsch(n: int = 200, seed: int = 3, n_random: int = 10 ** 6, tol: float = 1e-9) -> SuiteResult:
    """Closed form vs. manifold descent and vs. brute force over random rotations.

    Both comparisons use the closed form's own objective ``||Q E - (B^T)^+ T||^2``.
    """
    rng = np.random.default_rng(seed)
    res = SuiteResult("kabsch")
    R = random_rotations(n_random, seed).reshape(n_random, 9)
    E = np.eye(3)[:, :2]
    for _ in range(n):
        K = int(rng.integers(3, 7))
        B = rng.normal(size=(3, K))
        Q = rotation_from_euler(rng.uniform(-np.pi, np.pi, 3))
        T = B.T @ Q @ E + 0.1 * rng.normal(size=(K, 2))
        k = estimate_orientation_kabsch(B, T).rotation
        fk = kabsch_objective(k, B, T)
        m = estimate_orientation_manifold(B, T, OrientSolverConfig(seed=int(rng.integers(1 << 30)))).rotation
        fm = kabsch_objective(m, B, T)
        M = np.linalg.pinv(B.T) @ T
        X = (M @ E.T).ravel()
        brute = float(np.sum(M * M) + 2.0 - 2.0 * np.max(R @ X))
        gap = max(fk - fm, fk - brute)
        res.record(fk <= fm + tol and fk <= brute + tol and is_rotation(k, 1e-10), max(gap, 0.0))
    return res


def suite_lemma1(n: int = 1000, seed: int = 4) -> SuiteResult:
    """Random well-posed perturbations; the observed error must respect the bound."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("lemma1")
    done = 0
    while done < n:
        B = rng.normal(size=(3, 3))
        t = rng.normal(size=3)
        eps = 10 ** rng.uniform(-6, -1)
        dB = eps * rng.normal(size=(3, 3))
        dt = eps * rng.normal(size=3)
        try:
            bound = lemma1_bound(B, dB, t, dt)
        except ValueError:
            continue
        err = lemma1_relative_error(B, dB, t, dt)
        res.record(err <= bound * (1 + 1e-12), err / bound)
        done += 1
    return res


def run_suite(name: str, quick: bool = False) -> SuiteResult:
    if name == "geometry":
        return suite_geometry(100 if quick else 1000)
    if name == "jacobians":
        return suite_jacobians(20 if quick else 100)
    if name == "fim":
        return suite_fim()
    if name == "als":
        return suite_als(20 if quick else 100)
    if name == "kabsch":
        return suite_kabsch(20 if quick else 200, n_random=10 ** 5 if quick else 10 ** 6)
    if name == "lemma1":
        return suite_lemma1(100 if quick else 1000)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
