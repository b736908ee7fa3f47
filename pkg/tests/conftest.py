"""Shared fixtures: device parameters and cached steady states.

The heavy objects (Lindblad steady states at the headline powers, the
synthetic dataset for the fitting tests) are session-scoped so the module
tests and the acceptance suite share one computation.
"""

import numpy as np
import pytest

from kerrsim import device, fitkit, fock, lindblad, perturbative
from kerrsim.constants import TWO_PI

# fitted device values used throughout: resonance 5.172 GHz, internal /
# external damping 189 kHz / 2.12 MHz, anharmonicity 76 kHz, cold bath
PARAMS = device.CircuitParams(
    omega_r=TWO_PI * 5.172e9,
    kappa_int=TWO_PI * 189e3,
    kappa_ext=TWO_PI * 2.12e6,
    K=TWO_PI * 76e3,
    n_th=0.0,
)

ATTENUATION_DB = 118.3


@pytest.fixture(scope="session")
def params():
    return PARAMS


def eps_at(power_dbm_device: float, params=PARAMS) -> float:
    return device.drive_strength(
        device.DriveSpec.at_device(power_dbm_device, 0.0), params)


def _refine_extremum(xs, ys, minimize):
    ys = np.asarray(ys)
    i = int(np.argmin(ys) if minimize else np.argmax(ys))
    i = min(max(i, 1), len(xs) - 2)
    den = ys[i + 1] - 2.0 * ys[i] + ys[i - 1]
    good = den > 0 if minimize else den < 0
    if not good:
        return float(xs[i])
    return float(xs[i] + 0.5 * (xs[i + 1] - xs[i]) * (ys[i - 1] - ys[i + 1]) / den)


def dip_steady_state(power_dbm_device: float, params=PARAMS, objective="amp"):
    """Steady state at the refined optimal detuning for one device power.

    objective="amp": maximize |<a>|; objective="s21": minimize |S21|.
    Returns (rho, liouvillian, epsilon, dim, delta_star).
    """
    eps = eps_at(power_dbm_device, params)
    dim = fock.adequate_dim(2.0 * eps / params.kappa)
    y = perturbative.amplitude_cardano(params, eps)
    a_op = fock.destroy(dim)
    deltas = params.K * y * y + np.linspace(-0.35, 0.35, 15) * params.kappa

    def value(d):
        liouv = lindblad.build(params, delta_q=float(d), epsilon=eps, dim=dim,
                               check_dim=False)
        amp = fock.expect(a_op, lindblad.steady_state(liouv))
        if objective == "amp":
            return abs(amp)
        return abs(1.0 - params.kappa_ext * amp / (2.0 * eps))

    vals = [value(d) for d in deltas]
    dstar = _refine_extremum(deltas, vals, minimize=(objective == "s21"))
    liouv = lindblad.build(params, delta_q=dstar, epsilon=eps, dim=dim,
                           check_dim=False)
    return lindblad.steady_state(liouv), liouv, eps, dim, dstar


@pytest.fixture(scope="session")
def state_122_ampmax():
    return dip_steady_state(-122.0, objective="amp")


@pytest.fixture(scope="session")
def state_122_s21min():
    return dip_steady_state(-122.0, objective="s21")


@pytest.fixture(scope="session")
def state_1242_s21min():
    return dip_steady_state(-124.2, objective="s21")


def dip_frequency_grid(power_dbm_device: float, params=PARAMS, n=161,
                       span_kappa=1.2) -> np.ndarray:
    """omega_d grid centered on the expected dip for one power."""
    eps = eps_at(power_dbm_device, params)
    y = perturbative.amplitude_cardano(params, eps)
    center = params.omega_r - params.K - params.K * y * y
    half = span_kappa * params.kappa
    return np.linspace(center - half, center + half, n)


@pytest.fixture(scope="session")
def synthetic_3power():
    """Noisy quantum-backend dataset: device powers -135/-125/-122 dBm,
    100 points each, source powers carry the line attenuation."""
    powers_device = [-135.0, -125.0, -122.0]
    grids = [dip_frequency_grid(p, n=100) / TWO_PI for p in powers_device]
    powers_source = [p + ATTENUATION_DB for p in powers_device]
    return fitkit.synthesize(PARAMS, powers_source, ATTENUATION_DB, grids,
                             noise_sigma=0.002, seed=7)


@pytest.fixture(scope="session")
def classical_nl_fit(synthetic_3power):
    """Two-parameter (gamma, K) classical fit to the quantum synthetic data."""
    problem = fitkit.classical_nl_problem(synthetic_3power, PARAMS,
                                          ATTENUATION_DB)
    return fitkit.fit(problem, max_evals=900, line_tol=1e-5)


@pytest.fixture(scope="session")
def quantum_round_trip():
    """Noiseless five-parameter quantum-model recovery from offset initials."""
    powers = (-137.0, -130.0)
    grids = [dip_frequency_grid(p, n=60) / TWO_PI for p in powers]
    ds = fitkit.synthesize(PARAMS, [p + ATTENUATION_DB for p in powers],
                           ATTENUATION_DB, grids, noise_sigma=0.0, seed=2)
    truth = {"omega_r": PARAMS.omega_r, "kappa_int": PARAMS.kappa_int,
             "kappa_ext": PARAMS.kappa_ext, "K": PARAMS.K,
             "attenuation_db": ATTENUATION_DB}
    initial = dict(truth)
    initial["omega_r"] += 0.15 * PARAMS.kappa_ext
    initial["kappa_int"] *= 1.04
    initial["kappa_ext"] *= 0.97
    initial["K"] *= 1.06
    initial["attenuation_db"] += 0.25
    problem = fitkit.quantum_problem(ds, initial)
    result = fitkit.fit(problem, tol=1e-10, max_evals=1400, line_tol=2e-5)
    n_points = sum(len(s) for s in ds.s21)
    return result, truth, n_points
