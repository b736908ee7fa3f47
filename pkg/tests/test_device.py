import math

import numpy as np
import pytest

from kerrsim import device
from kerrsim.constants import TWO_PI, dbm_to_watt


ELEMS = device.CircuitElements(L=2.93e-9, C=288e-15, L_J=0.341e-9)


def test_quantize_golden_values():
    omega_r, K = device.quantize(ELEMS)
    assert K == pytest.approx(TWO_PI * 76e3, rel=0.01)
    assert omega_r == pytest.approx(TWO_PI * 5.17e9, rel=0.005)


def test_quantize_vanishing_junction():
    _, K = device.quantize(device.CircuitElements(L=2.93e-9, C=288e-15,
                                                  L_J=1e-18))
    assert K < 1e-10


def test_quantize_no_series_inductor():
    omega_r, _ = device.quantize(device.CircuitElements(L=0.0, C=288e-15,
                                                        L_J=0.341e-9))
    oracle = 1.0 / math.sqrt(0.341e-9 * 288e-15)
    assert omega_r == pytest.approx(oracle, rel=1e-12)
    assert omega_r == pytest.approx(TWO_PI * 16.06e9, rel=1e-3)


def test_quantize_monotone_in_junction_inductance():
    ks = [device.quantize(device.CircuitElements(L=2.93e-9, C=288e-15,
                                                 L_J=lj))[1]
          for lj in np.linspace(0.1e-9, 1.0e-9, 12)]
    assert all(b > a for a, b in zip(ks, ks[1:]))


def test_elements_reject_nonpositive():
    with pytest.raises(ValueError):
        device.CircuitElements(L=1e-9, C=-1e-15, L_J=1e-10)
    with pytest.raises(ValueError):
        device.CircuitElements(L=1e-9, C=1e-15, L_J=0.0)


def test_thermal_occupation_cold():
    n = device.thermal_occupation(TWO_PI * 5.172e9, 0.020)
    assert n == pytest.approx(4e-6, rel=0.20)


def test_thermal_occupation_ln2_point():
    # hbar omega = k_B T ln 2  ->  exp = 2  ->  n_th = 1
    from kerrsim.constants import HBAR, K_B
    T = 0.1
    omega = K_B * T * math.log(2.0) / HBAR
    assert device.thermal_occupation(omega, T) == pytest.approx(1.0, rel=1e-12)


def test_thermal_occupation_300mK():
    # direct formula evaluation (frozen oracle value)
    from kerrsim.constants import HBAR, K_B
    n = device.thermal_occupation(TWO_PI * 5.172e9, 0.300)
    oracle = 1.0 / (math.exp(HBAR * TWO_PI * 5.172e9 / (K_B * 0.300)) - 1.0)
    assert n == pytest.approx(oracle, rel=1e-12)
    assert n == pytest.approx(0.7767957, rel=1e-6)


def test_thermal_occupation_monotone_to_zero():
    omega = TWO_PI * 5.172e9
    temps = [0.3, 0.1, 0.05, 0.02, 0.01]
    ns = [device.thermal_occupation(omega, t) for t in temps]
    assert all(b < a for a, b in zip(ns, ns[1:]))
    assert ns[-1] < 1e-10


def test_thermal_occupation_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        device.thermal_occupation(TWO_PI * 5e9, 0.0)


def paper_params():
    return device.CircuitParams(omega_r=TWO_PI * 5.172e9,
                                kappa_int=TWO_PI * 189e3,
                                kappa_ext=TWO_PI * 2.12e6,
                                K=TWO_PI * 76e3)


def test_drive_strength_at_marquee_power():
    params = paper_params()
    spec = device.DriveSpec.at_device(-122.0, params.omega_r)
    eps = device.drive_strength(spec, params)
    # direct formula oracle
    oracle = math.sqrt(params.kappa_ext * dbm_to_watt(-122.0)
                       / (2.0 * 1.054571817e-34 * params.omega_r))
    assert eps == pytest.approx(oracle, rel=1e-12)
    assert eps == pytest.approx(3.50e7, rel=1e-2)
    assert 2 * eps / params.kappa == pytest.approx(4.83, abs=5e-3)


def test_drive_strength_vanishes_at_no_power():
    params = paper_params()
    spec = device.DriveSpec.at_device(-math.inf, params.omega_r)
    assert device.drive_strength(spec, params) == 0.0


def test_drive_strength_attenuation_equivalence():
    params = paper_params()
    via_line = device.DriveSpec(power_dbm_at_source=0.0, attenuation_db=118.3,
                                omega_d=params.omega_r)
    at_device = device.DriveSpec.at_device(-118.3, params.omega_r)
    assert device.drive_strength(via_line, params) == pytest.approx(
        device.drive_strength(at_device, params), rel=1e-14)


def test_drive_strength_sqrt_power_scaling():
    params = paper_params()
    e1 = device.drive_strength(device.DriveSpec.at_device(-125.0, 0.0), params)
    # doubling linear power = +10 log10(2) dB
    e2 = device.drive_strength(
        device.DriveSpec.at_device(-125.0 + 10 * math.log10(2.0), 0.0), params)
    assert e2 == pytest.approx(math.sqrt(2.0) * e1, rel=1e-12)


def test_kappa_derived_not_stored():
    params = paper_params()
    assert params.kappa == params.kappa_int + params.kappa_ext


def test_params_validation():
    with pytest.raises(ValueError):
        device.CircuitParams(omega_r=-1.0, kappa_int=0.0, kappa_ext=1.0, K=0.0)
    with pytest.raises(ValueError):
        device.CircuitParams(omega_r=1.0, kappa_int=0.0, kappa_ext=1.0, K=0.0,
                             n_th=-0.5)
    with pytest.raises(ValueError):
        device.DriveSpec(power_dbm_at_source=0.0, attenuation_db=-1.0,
                         omega_d=1.0)


def test_config_direct_form():
    cfg = {"omega_r_GHz": 5.172, "kappa_int_kHz": 189.0,
           "kappa_ext_MHz": 2.12, "K_kHz": 76.0, "n_th": 0.0}
    params = device.params_from_config(cfg)
    assert isinstance(params, device.CircuitParams)
    assert params.omega_r == pytest.approx(TWO_PI * 5.172e9)
    assert params.K == pytest.approx(TWO_PI * 76e3)


def test_config_element_form():
    cfg = {"L_nH": 2.93, "C_fF": 288.0, "LJ_nH": 0.341}
    elems = device.params_from_config(cfg)
    assert isinstance(elems, device.CircuitElements)
    assert elems.L == pytest.approx(2.93e-9)


def test_config_rejects_mixed_and_unknown():
    with pytest.raises(ValueError):
        device.params_from_config({"L_nH": 2.93, "omega_r_GHz": 5.172})
    with pytest.raises(ValueError):
        device.params_from_config({"L_nH": 2.93, "C_fF": 288.0})
    with pytest.raises(ValueError):
        device.params_from_config({"bogus": 1.0})
