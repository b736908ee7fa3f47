import numpy as np
import pytest
from numpy.testing import assert_allclose

from kerrsim import calibrate
from kerrsim.errors import CalibrationError


def lorentzian(freq, E, F, G):
    return 1.0 - G / (1j * (freq - F) + E)


def make_trace(n=801, A=1.0, B=0.0, C=0.0, D=0.0, E=1.0e6, F=5.172e9,
               G=0.9e6, noise=0.0, seed=0):
    freq = np.linspace(F - 8e6, F + 8e6, n)
    fc = 0.5 * (freq[0] + freq[-1])
    env = (A + B * (freq - fc)) * np.exp(C + D * (freq - fc))
    s21 = env * lorentzian(freq, E, F, G)
    if noise:
        rng = np.random.default_rng(seed)
        s21 = s21 + noise * (rng.standard_normal(n)
                             + 1j * rng.standard_normal(n))
    return freq, s21


def test_fit_recovers_lorentzian_nuisance():
    freq, s21 = make_trace()
    bl = calibrate.fit_baseline(freq, s21)
    assert bl.E == pytest.approx(1.0e6, rel=0.005)
    assert bl.F == pytest.approx(5.172e9, abs=0.005 * 1e6)
    assert abs(bl.G - 0.9e6) < 0.005 * 0.9e6


def test_fit_recovers_phase_slope():
    freq, s21 = make_trace(D=3e-9)
    bl = calibrate.fit_baseline(freq, s21)
    assert bl.D == pytest.approx(3e-9, rel=0.01)
    assert bl.residual_rms < 1e-8


def test_fit_noise_free_residual():
    freq, s21 = make_trace()
    bl = calibrate.fit_baseline(freq, s21)
    assert bl.residual_rms < 1e-10


def test_fit_with_rich_baseline_round_trip():
    freq, s21 = make_trace(A=1.3, B=2e-11, C=-0.2, D=-2e-9, noise=1e-4,
                           seed=3)
    bl = calibrate.fit_baseline(freq, s21)
    ds = calibrate.RawDataset(powers_dbm=[-135.0], freqs_hz=[freq], s21=[s21])
    corrected = calibrate.apply_baseline(ds, bl)
    _, s_corr = corrected.trace(-135.0)
    # corrected low-power trace is a bare Lorentzian up to the noise floor
    assert np.max(np.abs(s_corr - lorentzian(freq, bl.E, bl.F, bl.G))) < 6e-4


def test_fit_on_calibrated_data_is_identityish():
    # A e^C and B/A vs D are degenerate pairs; the identifiable statement is
    # that the fitted envelope is unity across the band
    freq, s21 = make_trace()
    bl = calibrate.fit_baseline(freq, s21)
    assert np.max(np.abs(bl.envelope(freq) - 1.0)) < 1e-6
    assert bl.A == pytest.approx(1.0, abs=1e-2)
    assert abs(bl.C) < 1e-2


def dataset_two_powers():
    f1, s1 = make_trace()
    f2, s2 = make_trace(G=1.2e6)
    return calibrate.RawDataset(powers_dbm=[-135.0, -125.0],
                                freqs_hz=[f1, f2], s21=[s1, s2])


def test_apply_identity_baseline_bitwise():
    ds = dataset_two_powers()
    out = calibrate.apply_baseline(ds, calibrate.Baseline.identity())
    for (fa, sa), (fb, sb) in zip(zip(ds.freqs_hz, ds.s21),
                                  zip(out.freqs_hz, out.s21)):
        assert np.array_equal(fa, fb)
        assert np.array_equal(sa, sb)


def test_apply_scalar_baseline_halves():
    ds = dataset_two_powers()
    bl = calibrate.Baseline(A=2.0, B=0.0, C=0.0, D=0.0, E=1.0, F=0.0, G=0.0)
    out = calibrate.apply_baseline(ds, bl)
    assert_allclose(out.s21[0], ds.s21[0] / 2.0)


def test_apply_rejects_zero_crossing():
    ds = dataset_two_powers()
    fc = 0.5 * (ds.freqs_hz[0][0] + ds.freqs_hz[0][-1])
    bl = calibrate.Baseline(A=0.0, B=1e-20, C=0.0, D=0.0, E=1.0, F=0.0, G=0.0,
                            f_center=fc)
    with pytest.raises(CalibrationError):
        calibrate.apply_baseline(ds, bl)


def test_decimate_block_one_is_identity():
    ds = dataset_two_powers()
    out = calibrate.decimate(ds, 1)
    assert np.array_equal(out.s21[0], ds.s21[0])


def test_decimate_5000_to_500():
    freq = np.linspace(0.0, 1.0, 5000)
    s21 = np.exp(1j * freq)
    ds = calibrate.RawDataset(powers_dbm=[-130.0], freqs_hz=[freq], s21=[s21])
    out = calibrate.decimate(ds, 10)
    assert out.freqs_hz[0].size == 500
    assert out.s21[0][0] == pytest.approx(s21[:10].mean(), rel=1e-14)


def test_decimate_constant_trace_unchanged():
    freq = np.linspace(0.0, 1.0, 57)  # trailing partial block of 7
    s21 = np.full(57, 0.3 - 0.4j)
    ds = calibrate.RawDataset(powers_dbm=[-130.0], freqs_hz=[freq], s21=[s21])
    out = calibrate.decimate(ds, 10)
    assert out.freqs_hz[0].size == 6
    assert_allclose(out.s21[0], 0.3 - 0.4j)


def test_decimate_commutes_with_flat_baseline():
    ds = dataset_two_powers()
    bl = calibrate.Baseline(A=1.7, B=0.0, C=0.1, D=0.0, E=1.0, F=0.0, G=0.0)
    a = calibrate.decimate(calibrate.apply_baseline(ds, bl), 10)
    b = calibrate.apply_baseline(calibrate.decimate(ds, 10), bl)
    for sa, sb in zip(a.s21, b.s21):
        assert np.max(np.abs(sa - sb)) < 1e-15


def test_decimate_nearly_commutes_with_smooth_baseline():
    # the commutator is O(block^2 h^2 (baseline curvature))
    ds = dataset_two_powers()
    fc = 0.5 * (ds.freqs_hz[0][0] + ds.freqs_hz[0][-1])
    bl = calibrate.Baseline(A=1.0, B=5e-12, C=0.0, D=2e-10, E=1.0, F=0.0,
                            G=0.0, f_center=fc)
    a = calibrate.decimate(calibrate.apply_baseline(ds, bl), 10)
    b = calibrate.apply_baseline(calibrate.decimate(ds, 10), bl)
    for sa, sb in zip(a.s21, b.s21):
        assert np.max(np.abs(sa - sb)) < 1e-6


def test_dataset_round_trip_csv_json(tmp_path):
    ds = dataset_two_powers()
    calibrate.write_dataset_csv(ds, tmp_path / "d.csv")
    back = calibrate.read_dataset_csv(tmp_path / "d.csv")
    assert back.powers_dbm == ds.powers_dbm
    for sa, sb in zip(ds.s21, back.s21):
        assert np.max(np.abs(sa - sb)) < 1e-15
    calibrate.write_dataset_json(ds, tmp_path / "d.json")
    back2 = calibrate.read_dataset_json(tmp_path / "d.json")
    for sa, sb in zip(ds.s21, back2.s21):
        assert np.max(np.abs(sa - sb)) < 1e-15


def test_baseline_json_round_trip(tmp_path):
    freq, s21 = make_trace(A=1.1, D=1e-9)
    bl = calibrate.fit_baseline(freq, s21)
    back = calibrate.Baseline.from_json(bl.to_json())
    assert back.A == bl.A and back.G == bl.G and back.f_center == bl.f_center


def test_dataset_validation():
    with pytest.raises(ValueError):
        calibrate.RawDataset(powers_dbm=[-130.0],
                             freqs_hz=[np.array([2.0, 1.0])],
                             s21=[np.array([1.0, 1.0], dtype=complex)])
    with pytest.raises(ValueError):
        calibrate.RawDataset(powers_dbm=[-130.0],
                             freqs_hz=[np.array([1.0, 2.0])],
                             s21=[np.array([1.0], dtype=complex)])
