"""Scenario description, codebooks, channel synthesis and received tensors."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ArrayGeometry,
    Plane,
    Pose,
    SpatialFreqPair,
    cascaded_freqs_geometric,
    direction_angles,
    global_to_local,
    spatial_freqs_xy,
    spatial_freqs_yz,
    steering_xy,
    steering_yz,
)

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


@dataclass(frozen=True)
class Scenario:
    """Ground truth and system parameters of one experiment.

    ``codebook_sizes`` is ``(D_TX, D_IRS, D_RX)``.  ``search_region`` is an
    axis-aligned box given as ``(lower_corner, upper_corner)``.
    """

    p_tx: np.ndarray
    p_rx: np.ndarray
    true_pose: Pose
    tx_array: ArrayGeometry
    rx_array: ArrayGeometry
    irs_array: ArrayGeometry
    wavelength: float
    tx_power: float
    noise_power: float
    path_loss_exponents: tuple = (2.0, 2.2)
    rician_factor_db: float = float("inf")
    codebook_sizes: tuple = (36, 36, 36)
    search_region: tuple = field(default=None)

    def __post_init__(self):
        p_tx = np.asarray(self.p_tx, dtype=float).reshape(3)
        p_rx = np.atleast_2d(np.asarray(self.p_rx, dtype=float))
        if p_rx.shape[1] != 3 or p_rx.shape[0] < 1:
            raise ValueError("p_rx must be a K x 3 array with K >= 1")
        object.__setattr__(self, "p_tx", p_tx)
        object.__setattr__(self, "p_rx", p_rx)
        if self.tx_array.plane is not Plane.YZ or self.rx_array.plane is not Plane.YZ:
            raise ValueError("TX and RX arrays lie in the YZ plane")
        if self.irs_array.plane is not Plane.XY:
            raise ValueError("the IRS lies in its local XY plane")
        if not (self.tx_power >= 0 and self.noise_power > 0 and self.wavelength > 0):
            raise ValueError("powers and wavelength must be positive")
        sizes = tuple(int(d) for d in self.codebook_sizes)
        if len(sizes) != 3 or min(sizes) < 1:
            raise ValueError("codebook_sizes must hold three positive integers")
        object.__setattr__(self, "codebook_sizes", sizes)
        object.__setattr__(self, "path_loss_exponents",
                           tuple(float(e) for e in self.path_loss_exponents))
        loc = self.true_pose.location
        region = self.search_region
        if region is None:
            region = (loc - 20.0, loc + 20.0)
        lo = np.asarray(region[0], dtype=float).reshape(3)
        hi = np.asarray(region[1], dtype=float).reshape(3)
        if np.any(lo > hi):
            raise ValueError("search region lower corner exceeds upper corner")
        object.__setattr__(self, "search_region", (lo, hi))
        if np.any(loc < lo) or np.any(loc > hi):
            raise ValueError("true IRS location lies outside the search region")
        nodes = np.vstack([p_tx, p_rx, loc])
        dist = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
        if np.any(dist[np.triu_indices(len(nodes), 1)] == 0):
            raise ValueError("node positions must be pairwise distinct")

    @property
    def K(self) -> int:
        return self.p_rx.shape[0]

    @property
    def d_tx(self) -> int:
        return self.codebook_sizes[0]

    @property
    def d_irs(self) -> int:
        return self.codebook_sizes[1]

    @property
    def d_rx(self) -> int:
        return self.codebook_sizes[2]

    @property
    def rician_factor(self) -> float:
        return 10.0 ** (self.rician_factor_db / 10.0)

    def replace(self, **changes) -> "Scenario":
        if "true_pose" in changes and "search_region" not in changes:
            # keep a box of the same half-widths centred on the new location
            lo, hi = self.search_region
            half = (hi - lo) / 2.0
            loc = changes["true_pose"].location
            changes["search_region"] = (loc - half, loc + half)
        return dataclasses.replace(self, **changes)


def default_scenario(**overrides) -> Scenario:
    """The reference deployment used throughout the evaluation section.

    28 GHz carrier, 8x8 arrays everywhere, half-wavelength TX/RX spacing,
    quarter-wavelength IRS spacing, 36 codewords per node, two receivers,
    Rician factor 10 dB and noise power -110 dBm.
    """
    lam = SPEED_OF_LIGHT / 28e9
    pose = Pose.from_euler([5.0, 4.0, 10.0], [np.pi / 4, np.pi / 6, np.pi / 4])
    kw = dict(
        p_tx=np.zeros(3),
        p_rx=np.array([[30.0, -25.0, 9.0], [22.0, 27.0, 0.0]]),
        true_pose=pose,
        tx_array=ArrayGeometry(8, 8, lam / 2, Plane.YZ),
        rx_array=ArrayGeometry(8, 8, lam / 2, Plane.YZ),
        irs_array=ArrayGeometry(8, 8, lam / 4, Plane.XY),
        wavelength=lam,
        tx_power=dbm_to_watt(30.0),
        noise_power=dbm_to_watt(-110.0),
        path_loss_exponents=(2.0, 2.2),
        rician_factor_db=10.0,
        codebook_sizes=(36, 36, 36),
        search_region=(pose.location - 20.0, pose.location + 20.0),
    )
    kw.update(overrides)
    return Scenario(**kw)


# --------------------------------------------------------------------------
# ground-truth frequencies

def tx_freqs(scenario: Scenario, location=None) -> SpatialFreqPair:
    p = scenario.true_pose.location if location is None else np.asarray(location, float)
    ang = direction_angles(p - scenario.p_tx)
    return spatial_freqs_yz(ang, scenario.tx_array.spacing, scenario.wavelength)


def rx_freqs(scenario: Scenario, k: int, location=None) -> SpatialFreqPair:
    p = scenario.true_pose.location if location is None else np.asarray(location, float)
    ang = direction_angles(p - scenario.p_rx[k])
    return spatial_freqs_yz(ang, scenario.rx_array.spacing, scenario.wavelength)


def irs_arrival_freqs(scenario: Scenario) -> SpatialFreqPair:
    pose = scenario.true_pose
    q_a = pose.rotation.T @ (pose.location - scenario.p_tx)
    return spatial_freqs_xy(direction_angles(q_a), scenario.irs_array.spacing, scenario.wavelength)


def irs_departure_freqs(scenario: Scenario, k: int) -> SpatialFreqPair:
    q_d = global_to_local(scenario.p_rx[k], scenario.true_pose)
    return spatial_freqs_xy(direction_angles(q_d), scenario.irs_array.spacing, scenario.wavelength)


def true_angles(scenario: Scenario):
    """Ground-truth :class:`~irs6d.angles.AngleSet` of the scenario."""
    from .angles import AngleSet

    z0 = tx_freqs(scenario)
    zk = [rx_freqs(scenario, k) for k in range(scenario.K)]
    eta = [cascaded_freqs_geometric(scenario.true_pose, scenario, k) for k in range(scenario.K)]
    return AngleSet(
        zeta_a=np.array([z0.azim] + [z.azim for z in zk]),
        zeta_e=np.array([z0.elev] + [z.elev for z in zk]),
        eta_a=np.array([e.azim for e in eta]),
        eta_e=np.array([e.elev for e in eta]),
    )


# --------------------------------------------------------------------------
# codebooks and channels

@dataclass
class Codebooks:
    W: np.ndarray  # (K, N_r, D_RX)
    F: np.ndarray  # (N_t, D_TX)
    V: np.ndarray  # (M, D_IRS)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_phases(rng, shape) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=shape))


def make_codebooks(scenario: Scenario, seed) -> Codebooks:
    """Random-phase codebooks; deterministic in ``seed``."""
    rng = _rng(seed)
    n_t, n_r, m = scenario.tx_array.size, scenario.rx_array.size, scenario.irs_array.size
    F = random_phases(rng, (n_t, scenario.d_tx)) / np.sqrt(n_t)
    V = random_phases(rng, (m, scenario.d_irs))
    W = random_phases(rng, (scenario.K, n_r, scenario.d_rx)) / np.sqrt(n_r)
    return Codebooks(W=W, F=F, V=V)


def path_gain(distance: float, exponent: float, wavelength: float) -> float:
    """Power gain ``(lambda / 4 pi)^2 d^-exponent``."""
    return (wavelength / (4.0 * np.pi)) ** 2 * distance ** (-exponent)


@dataclass
class ChannelPair:
    G: np.ndarray        # (M, N_t)
    R: np.ndarray        # (K, N_r, M)
    alpha_g: complex
    alpha_r: np.ndarray  # (K,)

    @property
    def alpha(self) -> np.ndarray:
        """End-to-end gains ``alpha_G * alpha_r_k``."""
        return self.alpha_g * self.alpha_r


def crandn(rng, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician_mix(rng, h_los: np.ndarray, kappa: float) -> np.ndarray:
    if np.isinf(kappa):
        return h_los
    # NLoS scaled so that E||H_nlos||_F^2 == ||H_los||_F^2
    scale = np.linalg.norm(h_los) / np.sqrt(h_los.size)
    h_nlos = scale * crandn(rng, h_los.shape)
    return np.sqrt(kappa / (kappa + 1.0)) * h_los + np.sqrt(1.0 / (kappa + 1.0)) * h_nlos


def los_channels(scenario: Scenario, alpha_g: complex, alpha_r) -> ChannelPair:
    a_t = steering_yz(scenario.tx_array, tx_freqs(scenario))
    a_ia = steering_xy(scenario.irs_array, irs_arrival_freqs(scenario))
    G = alpha_g * np.outer(a_ia, a_t.conj())
    R = np.empty((scenario.K, scenario.rx_array.size, scenario.irs_array.size), dtype=complex)
    for k in range(scenario.K):
        a_r = steering_yz(scenario.rx_array, rx_freqs(scenario, k))
        a_id = steering_xy(scenario.irs_array, irs_departure_freqs(scenario, k))
        R[k] = alpha_r[k] * np.outer(a_r, a_id.conj())
    return ChannelPair(G=G, R=R, alpha_g=complex(alpha_g), alpha_r=np.asarray(alpha_r, dtype=complex))


def gain_magnitudes(scenario: Scenario):
    """Amplitudes ``|alpha_G|`` and ``|alpha_r_k|`` from the path-loss model."""
    loc = scenario.true_pose.location
    e_g, e_r = scenario.path_loss_exponents
    lam = scenario.wavelength
    g = np.sqrt(path_gain(np.linalg.norm(loc - scenario.p_tx), e_g, lam))
    r = np.array([np.sqrt(path_gain(np.linalg.norm(rx - loc), e_r, lam)) for rx in scenario.p_rx])
    return g, r


def synthesize_channels(scenario: Scenario, seed) -> ChannelPair:
    """LoS (optionally Rician) TX-IRS and IRS-RX channels with random gain phases."""
    rng = _rng(seed)
    mag_g, mag_r = gain_magnitudes(scenario)
    alpha_g = mag_g * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    alpha_r = mag_r * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=scenario.K))
    ch = los_channels(scenario, alpha_g, alpha_r)
    kappa = scenario.rician_factor
    if not np.isinf(kappa):
        ch.G = _rician_mix(rng, ch.G, kappa)
        ch.R = np.stack([_rician_mix(rng, ch.R[k], kappa) for k in range(scenario.K)])
    return ch


def noiseless_tensors(scenario: Scenario, codebooks: Codebooks, channels: ChannelPair) -> np.ndarray:
    """Noise-free received tensors, shape ``(K, D_RX, D_TX, D_IRS)``."""
    K = scenario.K
    if codebooks.W.shape[0] != K or channels.R.shape[0] != K:
        raise ValueError("receiver count mismatch between scenario, codebooks and channels")
    if channels.G.shape != (codebooks.V.shape[0], codebooks.F.shape[0]):
        raise ValueError("TX-IRS channel does not match the TX/IRS codebook dimensions")
    if channels.R.shape[1:] != (codebooks.W.shape[1], codebooks.V.shape[0]):
        raise ValueError("IRS-RX channel does not match the RX/IRS codebook dimensions")
    gf = channels.G @ codebooks.F                      # (M, D_TX)
    vc = codebooks.V.conj()                            # diag(v_q^H) on the IRS
    out = np.empty((K, codebooks.W.shape[2], codebooks.F.shape[1], codebooks.V.shape[1]), dtype=complex)
    for k in range(K):
        wr = codebooks.W[k].conj().T @ channels.R[k]   # (D_RX, M)
        out[k] = np.einsum("im,mq,mj->ijq", wr, vc, gf, optimize=True)
    return np.sqrt(scenario.tx_power) * out


def simulate_tensor(scenario: Scenario, codebooks: Codebooks, channels: ChannelPair, seed) -> np.ndarray:
    """Received tensors with combined-domain noise of variance ``noise_power``.

    Returns an array of shape ``(K, D_RX, D_TX, D_IRS)``; slice ``[k]`` is
    receiver ``k``'s tensor.
    """
    rng = _rng(seed)
    y = noiseless_tensors(scenario, codebooks, channels)
    return y + np.sqrt(scenario.noise_power) * crandn(rng, y.shape)
