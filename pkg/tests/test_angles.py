import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs6d.angles import (
    AngleSet,
    GridSpec,
    correlation,
    estimate_irs_freqs,
    estimate_rx_freqs,
    estimate_tx_freqs,
    full_angle_pipeline,
    grid_search,
)
from irs6d.geometry import SpatialFreqPair, steering_xy, steering_yz
from irs6d.scene import make_codebooks, noiseless_tensors, simulate_tensor, synthesize_channels, true_angles

TRUE = SpatialFreqPair(0.3141, -0.4422)
scalars = st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False)


@pytest.fixture
def cb(los):
    return make_codebooks(los, 0)


def _rx_factor(sc, cb, f):
    return cb.W[0].conj().T @ steering_yz(sc.rx_array, f)


def _tx_factor(sc, cb, f):
    return cb.F.T @ steering_yz(sc.tx_array, f).conj()


def _irs_factor(sc, cb, f):
    return cb.V.conj().T @ steering_xy(sc.irs_array, f)


CASES = [
    ("rx", _rx_factor, lambda a, sc, cb, g, **kw: estimate_rx_freqs(a, cb.W[0], sc.rx_array, sc.wavelength, g, **kw)),
    ("tx", _tx_factor, lambda a, sc, cb, g, **kw: estimate_tx_freqs(a, cb.F, sc.tx_array, sc.wavelength, g, **kw)),
    ("irs", _irs_factor, lambda a, sc, cb, g, **kw: estimate_irs_freqs(a, cb.V, sc.irs_array, sc.wavelength, g, **kw)),
]


@pytest.mark.parametrize("name,factor,extract", CASES, ids=[c[0] for c in CASES])
def test_construct_then_recover(name, factor, extract, los, cb):
    grid = GridSpec()
    a = factor(los, cb, TRUE)
    f = extract(a, los, cb, grid)
    pitch = grid.final_pitch(2.0)
    assert abs(f.elev - TRUE.elev) <= pitch and abs(f.azim - TRUE.azim) <= pitch


@pytest.mark.parametrize("name,factor,extract", CASES, ids=[c[0] for c in CASES])
def test_truth_on_grid_is_not_beaten(name, factor, extract, los, cb):
    grid = GridSpec()
    on = np.linspace(-1, 1, grid.coarse_points_per_dim)
    truth = SpatialFreqPair(on[40], on[21])
    a = factor(los, cb, truth)
    res = extract(a, los, cb, grid, full=True)
    assert res.value >= res.coarse_value - 1e-12
    # the correlation at the truth is the Cauchy-Schwarz maximum, 1
    assert res.value >= 1 - 1e-12


@pytest.mark.parametrize("name,factor,extract", CASES, ids=[c[0] for c in CASES])
@given(c=scalars)
def test_gauge_invariance(name, factor, extract, los, cb, c):
    a = factor(los, cb, TRUE)
    rng = np.random.default_rng(0)
    a = a + 0.3 * np.linalg.norm(a) / np.sqrt(a.size) * (rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size))
    grid = GridSpec(refine_rounds=1)
    assert extract(c * a, los, cb, grid) == extract(a, los, cb, grid)


@given(st.integers(0, 2 ** 32 - 1))
def test_refinement_dominates_coarse(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    wh = rng.standard_normal((6, 16)) + 1j * rng.standard_normal((6, 16))
    res = grid_search(g, wh, 4, 4, ((-1, 1), (-1, 1)), GridSpec(coarse_points_per_dim=16))
    assert res.value >= res.coarse_value
    assert res.value == pytest.approx(correlation(g, wh, 4, 4, res.freqs), rel=1e-12)


def test_fine_pitch_consistency(los, cb):
    grid = GridSpec(refine_rounds=5)
    assert grid.final_pitch(2.0) <= 1e-5
    for factor, extract in ((c[1], c[2]) for c in CASES):
        f = extract(factor(los, cb, TRUE), los, cb, grid)
        assert abs(f.elev - TRUE.elev) <= 1e-5 and abs(f.azim - TRUE.azim) <= 1e-5


def test_ties_break_to_smallest_elevation():
    # a constant objective: every grid point ties
    g = np.ones(1, dtype=complex)
    wh = np.ones((1, 1), dtype=complex)
    res = grid_search(g, wh, 1, 1, ((-1, 1), (-1, 1)), GridSpec(coarse_points_per_dim=8, refine_rounds=0))
    assert res.freqs == (-1.0, -1.0)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(coarse_points_per_dim=2)
    with pytest.raises(ValueError):
        GridSpec(shrink_factor=1.5)
    with pytest.raises(ValueError):
        GridSpec(refine_points_per_dim=1)


def test_extractor_shape_errors(los, cb):
    with pytest.raises(ValueError):
        estimate_rx_freqs(np.ones(5), cb.W[0], los.rx_array, los.wavelength)
    with pytest.raises(ValueError):
        estimate_rx_freqs(np.zeros(36), cb.W[0], los.rx_array, los.wavelength)


def test_angle_set_round_trip():
    g = np.arange(10.0)
    s = AngleSet.from_vector(g, 2)
    assert np.array_equal(s.as_vector(), g)
    assert AngleSet.labels(2)[:3] == ["zeta0a", "zeta1a", "zeta2a"]
    assert len(AngleSet.labels(3)) == 14
    with pytest.raises(ValueError):
        AngleSet.from_vector(g, 3)


def test_pipeline_noiseless_within_pitch(los, cb):
    sc = los.replace(noise_power=1e-60)
    ch = synthesize_channels(sc, 1)
    Y = simulate_tensor(sc, cb, ch, 2)
    grid = GridSpec()
    est = full_angle_pipeline(Y, cb, sc, grid, seed=3)
    truth = true_angles(sc)
    # zeta / eta live on intervals of width 2 here (half-wavelength TX/RX, quarter-wavelength IRS)
    err = np.abs(est.as_vector() - truth.as_vector())
    assert np.all(err <= grid.final_pitch(2.0))


def test_pipeline_single_receiver(los):
    sc = los.replace(p_rx=los.p_rx[:1], noise_power=1e-60)
    cb = make_codebooks(sc, 0)
    ch = synthesize_channels(sc, 1)
    Y = noiseless_tensors(sc, cb, ch)
    out = full_angle_pipeline(Y, cb, sc, seed=0, full=True)
    assert out.angles.K == 1
    assert out.angles.zeta_a[0] == out.zeta0_per_rx[0].azim
    assert out.angles.zeta_e[0] == out.zeta0_per_rx[0].elev


def test_pipeline_random_init_option(los, cb):
    sc = los.replace(noise_power=1e-60)
    Y = noiseless_tensors(sc, cb, synthesize_channels(sc, 1))
    a = full_angle_pipeline(Y, cb, sc, seed=np.random.SeedSequence(4), als_init="random")
    b = full_angle_pipeline(Y, cb, sc, seed=np.random.SeedSequence(4), als_init="random")
    assert np.array_equal(a.as_vector(), b.as_vector())
    assert np.max(np.abs(a.as_vector() - true_angles(sc).as_vector())) <= GridSpec().final_pitch(2.0)
