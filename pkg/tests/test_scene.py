import numpy as np
import pytest

from irs6d.geometry import ArrayGeometry, Plane, Pose, steering_xy, steering_yz
from irs6d.scene import (
    dbm_to_watt,
    default_scenario,
    gain_magnitudes,
    irs_arrival_freqs,
    irs_departure_freqs,
    make_codebooks,
    noiseless_tensors,
    path_gain,
    rx_freqs,
    simulate_tensor,
    synthesize_channels,
    true_angles,
    tx_freqs,
    watt_to_dbm,
)
from irs6d.geometry import cascaded_freqs
from irs6d.tensor import cp_als_rank1

INF = float("inf")


def test_power_conversions():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(-110.0) == pytest.approx(1e-14)
    assert watt_to_dbm(dbm_to_watt(17.3)) == pytest.approx(17.3)


def test_scenario_validation():
    sc = default_scenario()
    with pytest.raises(ValueError):
        sc.replace(p_rx=np.array([[0.0, 0.0, 0.0]]))          # RX on top of TX
    with pytest.raises(ValueError):
        sc.replace(search_region=(np.zeros(3), np.ones(3)))    # truth outside the box
    with pytest.raises(ValueError):
        sc.replace(codebook_sizes=(0, 4, 4))
    with pytest.raises(ValueError):
        sc.replace(irs_array=ArrayGeometry(2, 2, 0.001, Plane.YZ))


def test_replace_recentres_box():
    sc = default_scenario()
    moved = sc.replace(true_pose=Pose([-5.0, -10.0, 4.0], sc.true_pose.rotation))
    lo, hi = moved.search_region
    np.testing.assert_allclose((lo + hi) / 2, [-5, -10, 4])
    np.testing.assert_allclose(hi - lo, 40)


def test_codebook_single_column_modulus():
    sc = default_scenario(tx_array=ArrayGeometry(2, 2, 0.005, Plane.YZ), codebook_sizes=(1, 4, 4))
    cb = make_codebooks(sc, 0)
    assert cb.F.shape == (4, 1)
    np.testing.assert_allclose(np.abs(cb.F), 0.5)


def test_codebooks_deterministic_and_sized():
    sc = default_scenario()
    a, b = make_codebooks(sc, 7), make_codebooks(sc, 7)
    for x, y in zip((a.W, a.F, a.V), (b.W, b.F, b.V)):
        assert np.array_equal(x, y)
    assert a.F.shape == (64, 36) and a.V.shape == (64, 36) and a.W.shape == (2, 64, 36)
    np.testing.assert_allclose(np.linalg.norm(a.W, axis=1), 1.0)
    np.testing.assert_allclose(np.abs(a.V), 1.0)


def test_los_channel_rank_one_and_energy():
    sc = default_scenario(rician_factor_db=INF)
    ch = synthesize_channels(sc, 3)
    s = np.linalg.svd(ch.G, compute_uv=False)
    assert s[1] < 1e-12 * s[0]
    m, n = ch.G.shape
    assert np.linalg.norm(ch.G) ** 2 == pytest.approx(abs(ch.alpha_g) ** 2 * m * n, rel=1e-12)


def test_los_channels_use_true_steering():
    sc = default_scenario(rician_factor_db=INF)
    ch = synthesize_channels(sc, 3)
    a_t = steering_yz(sc.tx_array, tx_freqs(sc))
    a_i = steering_xy(sc.irs_array, irs_arrival_freqs(sc))
    np.testing.assert_allclose(ch.G, ch.alpha_g * np.outer(a_i, a_t.conj()), atol=1e-20)
    a_r = steering_yz(sc.rx_array, rx_freqs(sc, 1))
    a_d = steering_xy(sc.irs_array, irs_departure_freqs(sc, 1))
    np.testing.assert_allclose(ch.R[1], ch.alpha_r[1] * np.outer(a_r, a_d.conj()), atol=1e-20)


def test_path_gain_doubling_distance():
    lam = 0.01
    assert path_gain(10.0, 2.0, lam) / path_gain(20.0, 2.0, lam) == pytest.approx(4.0)
    sc = default_scenario()
    g, r = gain_magnitudes(sc)
    d = np.linalg.norm(sc.true_pose.location)
    assert g ** 2 == pytest.approx((sc.wavelength / (4 * np.pi)) ** 2 / d ** 2)


def test_rician_power_ratio():
    """LoS share of the total channel power converges to kappa / (kappa + 1)."""
    lam = default_scenario().wavelength
    sc = default_scenario(
        tx_array=ArrayGeometry(2, 2, lam / 2, Plane.YZ),
        rx_array=ArrayGeometry(2, 2, lam / 2, Plane.YZ),
        irs_array=ArrayGeometry(2, 2, lam / 4, Plane.XY),
        codebook_sizes=(4, 4, 4),
    )
    kappa = sc.rician_factor
    rng = np.random.default_rng(11)
    los_pow, tot = 0.0, 0.0
    for _ in range(10_000):
        ch = synthesize_channels(sc, rng)
        los_pow += abs(ch.alpha_g) ** 2 * ch.G.size * kappa / (kappa + 1)
        tot += np.linalg.norm(ch.G) ** 2
    assert los_pow / tot == pytest.approx(kappa / (kappa + 1), rel=0.02)


def test_noiseless_tensor_rank_one(los_link):
    sc, cb, ch = los_link
    Y = noiseless_tensors(sc, cb, ch)
    for k in range(sc.K):
        fit = cp_als_rank1(Y[k], tol=1e-14, init="svd")
        assert fit.residual < 1e-10


def test_tensor_entry_factored_form(los_link):
    sc, cb, ch = los_link
    Y = noiseless_tensors(sc, cb, ch)
    k = 1
    a_r = steering_yz(sc.rx_array, rx_freqs(sc, k))
    a_t = steering_yz(sc.tx_array, tx_freqs(sc))
    a_i = steering_xy(sc.irs_array, cascaded_freqs(sc.true_pose, sc, k))
    amp = np.sqrt(sc.tx_power) * ch.alpha[k]
    rng = np.random.default_rng(0)
    for i, j, q in rng.integers(0, 36, size=(20, 3)):
        ref = amp * (cb.W[k][:, i].conj() @ a_r) * (a_t.conj() @ cb.F[:, j]) * (cb.V[:, q].conj() @ a_i)
        assert abs(Y[k, i, j, q] - ref) <= 1e-10 * abs(ref)


def test_zero_power_is_pure_noise():
    sc = default_scenario(tx_power=0.0, codebook_sizes=(40, 32, 40))
    cb = make_codebooks(sc, 0)
    ch = synthesize_channels(sc, 0)
    Y = simulate_tensor(sc, cb, ch, 5)
    assert Y.size >= 100_000
    assert np.mean(np.abs(Y) ** 2) == pytest.approx(sc.noise_power, rel=0.05)


def test_simulation_reproducible(los_link):
    sc, cb, ch = los_link
    assert np.array_equal(simulate_tensor(sc, cb, ch, 9), simulate_tensor(sc, cb, ch, 9))
    assert not np.array_equal(simulate_tensor(sc, cb, ch, 9), simulate_tensor(sc, cb, ch, 10))


def test_true_angles_layout():
    sc = default_scenario()
    g = true_angles(sc)
    assert g.zeta_a.size == 3 and g.eta_e.size == 2
    assert g.zeta_e[0] == pytest.approx(10 / np.sqrt(141))
    assert np.all(np.abs(g.eta_a) <= 1) and np.all(np.abs(g.eta_e) <= 1)
