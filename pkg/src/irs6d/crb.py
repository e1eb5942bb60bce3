"""Fisher information, Cramer-Rao bounds and orientation sensitivity.

The parameter vector over angles is ``Gamma = [zeta_a (K+1), zeta_e (K+1),
eta_a (K), eta_e (K)]`` and over the pose ``s = [p (3), psi_z, psi_y, psi_x]``.
Complex path gains are treated as known.  Noise is circular complex Gaussian
with variance ``noise_power`` per tensor entry.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .angles import AngleSet
from .geometry import (
    Pose,
    cascaded_freqs,
    direction_matrix_b,
    rotation_derivatives,
    rotation_from_euler,
    upa_steering,
)
from .pose import f_vec, zeta_jacobian, zeta_model

__all__ = [
    "unfolding_index_maps",
    "correlation_matrix",
    "fim_gamma",
    "fim_gamma_oracle",
    "fim_s_oracle",
    "gamma_from_pose",
    "jacobian_gamma_s",
    "jacobian_q_s",
    "FisherInfo",
    "CrbReport",
    "crb_report",
    "lemma1_bound",
    "lemma1_relative_error",
    "localization_to_B_perturbation",
    "exact_B_perturbation",
]


# --------------------------------------------------------------------------
# unfolding bookkeeping

def unfolding_index_maps(shape):
    """0-based positions of entry ``(i, j, q)`` in ``vec`` of each unfolding.

    ``vec`` stacks the rows of the unfolded matrix, so for shape
    ``(D_RX, D_TX, D_IRS)``::

        M1 = j + q D_TX + i D_TX D_IRS
        M2 = i + q D_RX + j D_RX D_IRS
        M3 = i + j D_RX + q D_RX D_TX
    """
    d_r, d_t, d_i = shape
    i, j, q = np.meshgrid(np.arange(d_r), np.arange(d_t), np.arange(d_i), indexing="ij")
    m1 = j + q * d_t + i * d_t * d_i
    m2 = i + q * d_r + j * d_r * d_i
    m3 = i + j * d_r + q * d_r * d_t
    return m1, m2, m3


def correlation_matrix(mode_a: int, mode_b: int, shape) -> sparse.csr_matrix:
    """Normalised cross-correlation ``E[n_(a) n_(b)^H] / sigma^2`` of two unfoldings."""
    maps = unfolding_index_maps(shape)
    ra, rb = maps[mode_a - 1].ravel(), maps[mode_b - 1].ravel()
    n = ra.size
    return sparse.csr_matrix((np.ones(n), (ra, rb)), shape=(n, n))


# --------------------------------------------------------------------------
# factor vectors and their derivatives

def _ramps(geom):
    """Per-element index along the azimuth (outer) and elevation (inner) axes."""
    n1, n2 = geom.n_first, geom.n_second
    return np.repeat(np.arange(n1), n2).astype(float), np.tile(np.arange(n2), n1).astype(float)


def _factors(gamma: AngleSet, scenario, codebooks, alpha):
    """Per-receiver factors and their derivatives w.r.t. (azim, elev).

    Returns ``a_t, (da_t_az, da_t_el)`` and per-receiver lists for the RX and
    IRS factors.
    """
    K = scenario.K
    tx, rx, irs = scenario.tx_array, scenario.rx_array, scenario.irs_array
    sp = np.sqrt(scenario.tx_power)
    ra_t, re_t = _ramps(tx)
    ra_r, re_r = _ramps(rx)
    ra_i, re_i = _ramps(irs)
    a = upa_steering(tx.n_first, tx.n_second, gamma.zeta_a[0], gamma.zeta_e[0])
    Ft = codebooks.F.T
    at = Ft @ a.conj()
    dat = (Ft @ (-1j * np.pi * ra_t * a.conj()), Ft @ (-1j * np.pi * re_t * a.conj()))
    ar, dar, ai, dai = [], [], [], []
    for k in range(K):
        Wh = codebooks.W[k].conj().T
        a = upa_steering(rx.n_first, rx.n_second, gamma.zeta_a[k + 1], gamma.zeta_e[k + 1])
        ar.append(Wh @ a)
        dar.append((Wh @ (1j * np.pi * ra_r * a), Wh @ (1j * np.pi * re_r * a)))
        Vh = sp * alpha[k] * codebooks.V.conj().T
        a = upa_steering(irs.n_first, irs.n_second, gamma.eta_a[k], gamma.eta_e[k])
        ai.append(Vh @ a)
        dai.append((Vh @ (1j * np.pi * ra_i * a), Vh @ (1j * np.pi * re_i * a)))
    return at, dat, ar, dar, ai, dai


def fim_gamma(gamma: AngleSet, scenario, codebooks, channels) -> np.ndarray:
    """FIM over Gamma assembled from mode-wise unfolding derivatives.

    For a parameter acting on the factor of mode ``m``, the derivative of
    ``vec(Y_(m))`` is ``kron(d a_m, other factors in Khatri-Rao order)``.
    Cross terms between modes ``a`` and ``b`` need ``u_a^H C_ab u_b`` where
    ``C_ab`` has unit entries at ``(M_a(i,j,q), M_b(i,j,q))``; that sum is
    evaluated by gathering both vectors through the index maps.
    """
    K = scenario.K
    n = 4 * K + 2
    alpha = np.asarray(channels.alpha)
    at, dat, ar, dar, ai, dai = _factors(gamma, scenario, codebooks, alpha)
    shape = (codebooks.W.shape[2], codebooks.F.shape[1], codebooks.V.shape[1])
    maps = unfolding_index_maps(shape)
    gather = [m.ravel() for m in maps]
    fim = np.zeros((n, n))
    for k in range(K):
        # (parameter index, mode, vec of the derivative of that mode's unfolding)
        terms = [
            (0, 2, np.kron(dat[0], np.kron(ai[k], ar[k]))),
            (K + 1, 2, np.kron(dat[1], np.kron(ai[k], ar[k]))),
            (k + 1, 1, np.kron(dar[k][0], np.kron(ai[k], at))),
            (K + 2 + k, 1, np.kron(dar[k][1], np.kron(ai[k], at))),
            (2 * K + 2 + k, 3, np.kron(dai[k][0], np.kron(at, ar[k]))),
            (3 * K + 2 + k, 3, np.kron(dai[k][1], np.kron(at, ar[k]))),
        ]
        idx = [t[0] for t in terms]
        U = np.stack([u[gather[m - 1]] for _, m, u in terms])
        fim[np.ix_(idx, idx)] += np.real(U.conj() @ U.T)
    return 2.0 / scenario.noise_power * fim


def mean_tensor(gamma_vec, scenario, codebooks, alpha) -> np.ndarray:
    """Noise-free tensors rebuilt directly from steering vectors and the codebooks."""
    K = scenario.K
    g = AngleSet.from_vector(gamma_vec, K)
    tx, rx, irs = scenario.tx_array, scenario.rx_array, scenario.irs_array
    a_t = upa_steering(tx.n_first, tx.n_second, g.zeta_a[0], g.zeta_e[0])
    out = []
    for k in range(K):
        a_r = upa_steering(rx.n_first, rx.n_second, g.zeta_a[k + 1], g.zeta_e[k + 1])
        a_i = upa_steering(irs.n_first, irs.n_second, g.eta_a[k], g.eta_e[k])
        R = np.outer(a_r, np.ones(irs.size))
        G = alpha[k] * np.outer(a_i, a_t.conj())
        # diag(v_q^H) applied between R and G
        y = np.einsum("ri,iq,it,tj->rjq", codebooks.W[k].conj().T @ R, codebooks.V.conj(), G, codebooks.F)
        out.append(np.sqrt(scenario.tx_power) * y)
    return np.stack(out)


def _fd_jacobian(fun, x, h):
    """Fourth-order central differences, one column per coordinate of ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        d = (-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12 * h)
        cols.append(np.ravel(d))
    return np.stack(cols, axis=1)


def fim_gamma_oracle(gamma: AngleSet, scenario, codebooks, channels, h: float = 1e-4) -> np.ndarray:
    """``(2 / sigma^2) Re{dmu^H dmu}`` with ``dmu`` from finite differences of the mean."""
    alpha = np.asarray(channels.alpha)
    J = _fd_jacobian(lambda g: mean_tensor(g, scenario, codebooks, alpha), gamma.as_vector(), h)
    return 2.0 / scenario.noise_power * np.real(J.conj().T @ J)


def fim_s_oracle(pose: Pose, scenario, codebooks, channels, h: float = 1e-5) -> np.ndarray:
    """Direct FIM over ``s`` from finite differences of ``mu(Gamma(s))``."""
    alpha = np.asarray(channels.alpha)

    def mu(s):
        g = gamma_from_pose(Pose.from_euler(s[:3], s[3:]), scenario)
        return mean_tensor(g.as_vector(), scenario, codebooks, alpha)

    s0 = np.concatenate([pose.location, pose.euler])
    J = _fd_jacobian(mu, s0, h)
    return 2.0 / scenario.noise_power * np.real(J.conj().T @ J)


# --------------------------------------------------------------------------
# Jacobians

def gamma_from_pose(pose: Pose, scenario) -> AngleSet:
    ze, za = zeta_model(pose.location, scenario)
    eta = [cascaded_freqs(pose, scenario, k) for k in range(scenario.K)]
    return AngleSet(za, ze, [e.azim for e in eta], [e.elev for e in eta])


def jacobian_gamma_s(pose: Pose, scenario) -> np.ndarray:
    """``d Gamma / d s``, shape ``(4K+2, 6)``."""
    K = scenario.K
    p, Q = pose.location, pose.rotation
    J = np.zeros((4 * K + 2, 6))
    A = zeta_jacobian(p, scenario)              # [elev cols | azim cols]
    J[:K + 1, :3] = A[:, K + 1:].T
    J[K + 1:2 * K + 2, :3] = A[:, :K + 1].T
    c = 2.0 * scenario.irs_array.spacing / scenario.wavelength
    B = direction_matrix_b(p, scenario)
    dQ = rotation_derivatives(pose.euler)
    eye = np.eye(3)
    for k in range(K):
        # Jacobian of b_k: projector terms of both unit vectors
        Jb = np.column_stack([
            c * (f_vec(p, eye[m], scenario.p_tx) + f_vec(p, eye[m], scenario.p_rx[k]))
            for m in range(3)
        ]).T
        for row, e in ((2 * K + 2 + k, eye[0]), (3 * K + 2 + k, eye[1])):
            J[row, :3] = Jb.T @ (Q @ e)
            J[row, 3:] = [e @ dQ[i].T @ B[:, k] for i in range(3)]
    return J


def jacobian_q_s(pose: Pose) -> np.ndarray:
    """``d vec(Q) / d s`` with column-major ``vec``; shape ``(9, 6)``."""
    dQ = rotation_derivatives(pose.euler)
    J = np.zeros((9, 6))
    for i in range(3):
        J[:, 3 + i] = dQ[i].ravel(order="F")
    return J


# --------------------------------------------------------------------------
# bounds

@dataclass
class FisherInfo:
    fim_gamma: np.ndarray
    fim_s: np.ndarray


@dataclass
class CrbReport:
    crb_per_angle: np.ndarray
    crb_location: float
    crb_orientation: float
    degenerate: bool
    fisher: FisherInfo


def _inverse(M, what):
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        warnings.warn(f"{what} is numerically singular; using the pseudo-inverse", RuntimeWarning)
        return np.linalg.pinv(M, rcond=1e-12, hermitian=True), True
    return np.linalg.inv(M), False


def crb_report(pose: Pose, scenario, codebooks, channels) -> CrbReport:
    gamma = gamma_from_pose(pose, scenario)
    I_g = fim_gamma(gamma, scenario, codebooks, channels)
    J = jacobian_gamma_s(pose, scenario)
    I_s = J.T @ I_g @ J
    I_s = (I_s + I_s.T) / 2.0
    inv_g, deg_g = _inverse(I_g, "I(Gamma)")
    inv_s, deg_s = _inverse(I_s, "I(s)")
    Jq = jacobian_q_s(pose)
    return CrbReport(
        crb_per_angle=np.clip(np.diag(inv_g), 0.0, None),
        crb_location=max(float(np.trace(inv_s[:3, :3])), 0.0),
        crb_orientation=max(float(np.trace(Jq @ inv_s @ Jq.T)), 0.0),
        degenerate=deg_g or deg_s,
        fisher=FisherInfo(I_g, I_s),
    )


def lemma1_bound(B, dB, t, dt) -> float:
    """Upper bound on ``||q_hat - q|| / ||q||`` for ``q = (B^T)^-1 t`` (K = 3)."""
    B = np.asarray(B, dtype=float)
    dB = np.asarray(dB, dtype=float)
    if B.shape != (3, 3) or dB.shape != (3, 3):
        raise ValueError("the bound is stated for three receivers (3 x 3 B)")
    nB = np.linalg.norm(B, 2)
    nBinv = np.linalg.norm(np.linalg.inv(B), 2)
    if not nBinv * np.linalg.norm(dB, 2) < 1.0:
        raise ValueError("precondition ||(B^T)^-1|| ||dB|| < 1 violated")
    kappa = nB * nBinv
    rb = np.linalg.norm(dB, 2) / nB
    rt = np.linalg.norm(dt) / np.linalg.norm(t)
    return float(kappa / (1.0 - kappa * rb) * (rb + rt))


def lemma1_relative_error(B, dB, t, dt) -> float:
    """Actual relative error of the perturbed solve (the quantity the bound covers)."""
    B = np.asarray(B, dtype=float)
    q = np.linalg.solve(B.T, t)
    q_hat = np.linalg.solve((B + dB).T, np.asarray(t) + np.asarray(dt))
    return float(np.linalg.norm(q_hat - q) / np.linalg.norm(q))


def _unscaled_b(p, scenario):
    u_in = p - scenario.p_tx
    u_in = u_in / np.linalg.norm(u_in)
    out = scenario.p_rx - p
    out = out / np.linalg.norm(out, axis=1)[:, None]
    return (u_in[None, :] - out).T


def localization_to_B_perturbation(dp, p_hat, scenario):
    """Small-error approximation ``||dB|| ~ ||dp|| ||r||``.

    Returns ``(dB_norm, r)`` with ``r_k = 1/||p_hat - p_TX|| + 1/||p_RX,k - p_hat||``.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    r = 1.0 / np.linalg.norm(p_hat - scenario.p_tx) + 1.0 / np.linalg.norm(scenario.p_rx - p_hat, axis=1)
    return float(np.linalg.norm(dp) * np.linalg.norm(r)), r


def exact_B_perturbation(dp, p_hat, scenario, scaled: bool = False) -> np.ndarray:
    """``B(p_hat + dp) - B(p_hat)``; unscaled unit-vector form unless ``scaled``."""
    p_hat = np.asarray(p_hat, dtype=float)
    dp = np.asarray(dp, dtype=float)
    if scaled:
        return direction_matrix_b(p_hat + dp, scenario) - direction_matrix_b(p_hat, scenario)
    return _unscaled_b(p_hat + dp, scenario) - _unscaled_b(p_hat, scenario)


def pose_from_s(s) -> Pose:
    s = np.asarray(s, dtype=float)
    return Pose(s[:3], rotation_from_euler(s[3:]))
