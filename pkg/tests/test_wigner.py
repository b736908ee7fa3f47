import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import factorial, genlaguerre

from kerrsim import device, fock, lindblad, wigner
from kerrsim.constants import TWO_PI
from kerrsim.errors import GridError

from conftest import PARAMS, eps_at


def laguerre_oracle(rho, X, P):
    """Independent closed-form transform, term by term in |m><n|."""

    def wmn(m, n):
        r2 = X**2 + P**2
        pref = np.exp(-r2) / np.pi
        if m >= n:
            L = genlaguerre(n, m - n)(2 * r2)
            return (pref * (-1.0) ** n
                    * (math.sqrt(2.0) * (X - 1j * P)) ** (m - n)
                    * math.sqrt(factorial(n) / factorial(m)) * L)
        return np.conjugate(wmn(n, m))

    W = np.zeros(X.shape, dtype=complex)
    for m in range(rho.shape[0]):
        for n in range(rho.shape[0]):
            if abs(rho[m, n]) > 0:
                W += rho[m, n] * wmn(m, n)
    return W.real


def center_of_mass(f):
    X, P = f.grid.meshes()
    return (wigner._integrate(X * f.W, f.grid)
            + 1j * wigner._integrate(P * f.W, f.grid)) / math.sqrt(2.0)


def test_vacuum_gaussian():
    grid = wigner.PhaseSpaceGrid.for_amplitude(0.0, n=121)
    f = wigner.wigner_grid(fock.ket_to_dm(fock.fock_ket(8, 0)), grid)
    assert f.W[60, 60] == pytest.approx(1.0 / math.pi, abs=1e-4)
    assert f.norm() == pytest.approx(1.0, abs=1e-4)
    # quadrature spread 1/sqrt(2)
    X, _ = grid.meshes()
    var = wigner._integrate(X**2 * f.W, f.grid)
    assert var == pytest.approx(0.5, abs=1e-6)


def test_coherent_displaced_gaussian():
    alpha = 2.0
    grid = wigner.PhaseSpaceGrid.for_amplitude(alpha, n=121)
    f = wigner.wigner_grid(fock.ket_to_dm(fock.coherent_ket(40, alpha)), grid)
    X, P = grid.meshes()
    exact = np.exp(-(X - math.sqrt(2) * alpha) ** 2 - P**2) / math.pi
    assert np.max(np.abs(f.W - exact)) < 1e-12
    assert center_of_mass(f) == pytest.approx(alpha, abs=1e-3)


def test_single_photon_negativity():
    grid = wigner.PhaseSpaceGrid.for_amplitude(0.0, n=101)
    rho = fock.ket_to_dm(fock.fock_ket(8, 1))
    f = wigner.wigner_grid(rho, grid)
    assert f.W[50, 50] == pytest.approx(-1.0 / math.pi, abs=1e-4)
    X, P = grid.meshes()
    assert np.max(np.abs(f.W - laguerre_oracle(rho, X, P))) < 1e-12
    assert f.W.min() >= -1.0 / math.pi - 1e-6


def test_mixed_state_against_laguerre_oracle():
    # off-diagonal rich state: superposition of two coherent amplitudes
    psi = fock.coherent_ket(36, 1.8) + fock.coherent_ket(36, -1.2 + 0.9j)
    psi /= np.linalg.norm(psi)
    rho = fock.ket_to_dm(psi)
    grid = wigner.PhaseSpaceGrid.for_amplitude(2.0, n=81)
    f = wigner.wigner_grid(rho, grid)
    X, P = grid.meshes()
    assert np.max(np.abs(f.W - laguerre_oracle(rho, X, P))) < 1e-11
    assert f.norm() == pytest.approx(1.0, abs=1e-4)
    assert abs(center_of_mass(f)
               - fock.expect(fock.destroy(36), rho)) < 1e-3


def test_grid_error_when_support_uncovered():
    rho = fock.ket_to_dm(fock.coherent_ket(40, 2.5))
    grid = wigner.PhaseSpaceGrid(x=np.linspace(-3, 3, 61),
                                 p=np.linspace(-3, 3, 61))
    with pytest.raises(GridError) as exc:
        wigner.wigner_grid(rho, grid)
    assert exc.value.suggested_bounds is not None


def test_rotational_covariance():
    # rotating the state rotates W; pointwise evaluation makes this exact
    rho = fock.ket_to_dm(fock.coherent_ket(30, 1.4))
    theta = 0.6
    rot = fock.rotate_dm(rho, theta)
    xs = np.array([1.1, 0.3, -0.7])
    ps = np.array([0.2, -0.5, 0.9])
    w_rot = wigner.weyl_symbol_points(rot, xs, ps)
    # a -> a e^{i theta} maps the point (x, p) back by -theta
    c, s = math.cos(-theta), math.sin(-theta)
    w_orig = wigner.weyl_symbol_points(rho, c * xs - s * ps, s * xs + c * ps)
    assert_allclose(w_rot, w_orig, atol=1e-13)


def undriven(K=0.0, n_th=0.0):
    return device.CircuitParams(omega_r=PARAMS.omega_r,
                                kappa_int=PARAMS.kappa_int,
                                kappa_ext=PARAMS.kappa_ext, K=K, n_th=n_th)


def test_vacuum_environmental_current_balances():
    p = undriven()
    grid = wigner.PhaseSpaceGrid.for_amplitude(0.0, n=301)
    f = wigner.currents(wigner.wigner_grid(fock.ket_to_dm(fock.fock_ket(8, 0)),
                                           grid), p, delta=0.0, epsilon=0.0)
    env = f.currents["damping"] + f.currents["diffusion"]
    assert np.max(np.hypot(env[0], env[1])) < 1e-6 * p.kappa


def test_vacuum_continuity_absolute():
    p = undriven()
    liouv = lindblad.build(p, delta_q=0.0, epsilon=0.0, dim=8, check_dim=False)
    grid = wigner.PhaseSpaceGrid(x=np.linspace(-4.5, 4.5, 1151),
                                 p=np.linspace(-4.5, 4.5, 1151))
    f = wigner.currents(wigner.wigner_grid(fock.ket_to_dm(fock.fock_ket(8, 0)),
                                           grid), p, delta=0.0, epsilon=0.0)
    lhs, rhs = wigner.continuity_parts(f, liouv)
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * p.kappa / math.pi


def test_drive_current_linearity():
    rho = fock.ket_to_dm(fock.coherent_ket(25, 1.0))
    grid = wigner.PhaseSpaceGrid.for_amplitude(1.0, n=61)
    f = wigner.wigner_grid(rho, grid)
    p = undriven()
    e1, e2 = 0.4 * p.kappa, 1.1 * p.kappa
    j1 = wigner.currents(f, p, delta=0.0, epsilon=e1).currents["drive"]
    j2 = wigner.currents(f, p, delta=0.0, epsilon=e2).currents["drive"]
    j12 = wigner.currents(f, p, delta=0.0, epsilon=e1 + e2).currents["drive"]
    # one float rounding per product: exact to a few ulp of the local value
    assert np.max(np.abs(j12 - (j1 + j2))) < 1e-14 * np.max(np.abs(j12))


def test_coherent_driven_continuity_and_convergence():
    # transient state under a K=0 driven generator: 4th-order residual fall
    p = undriven()
    eps = 0.8 * p.kappa
    delta = 0.4 * p.kappa
    rho = fock.ket_to_dm(fock.coherent_ket(30, 1.0))
    liouv = lindblad.build(p, delta_q=delta, epsilon=eps, dim=30,
                           check_dim=False)
    ratios = []
    for n in (201, 401):
        grid = wigner.PhaseSpaceGrid.for_amplitude(2.0, n=n)
        f = wigner.currents(wigner.wigner_grid(rho, grid), p, delta=delta,
                            epsilon=eps)
        ratios.append(wigner.continuity_residual(f, liouv))
    assert ratios[0] < 1e-3
    assert ratios[0] / ratios[1] > 8.0  # ~16x for a 4th-order scheme


def test_coherent_steady_balance():
    # resonantly driven K=0 steady state: drive, damping and diffusion cancel
    p = undriven()
    eps = eps_at(-126.0, p)
    alpha = 2 * eps / p.kappa
    dim = fock.adequate_dim(alpha)
    rho = fock.ket_to_dm(fock.coherent_ket(dim, alpha))
    grid = wigner.PhaseSpaceGrid.for_amplitude(alpha, n=201)
    f = wigner.currents(wigner.wigner_grid(rho, grid), p, delta=0.0,
                        epsilon=eps)
    total = sum(f.currents.values())
    div = wigner.divergence(f)
    scale = p.kappa * np.max(np.abs(f.W))
    assert np.max(np.abs(div)) < 1e-3 * scale
    ints = wigner.current_integrals(f)
    assert ints["env_abs"] == pytest.approx(math.sqrt(2) * eps, rel=1e-4)
    assert ints["drive_abs"] == pytest.approx(math.sqrt(2) * eps, rel=1e-4)
    assert ints["drive_proj_env"] == pytest.approx(math.sqrt(2) * eps, rel=1e-4)


def test_kerr_deform_identity_limits():
    al = 3.0
    rho0 = fock.ket_to_dm(fock.coherent_ket(fock.adequate_dim(al), al))
    rho = wigner.kerr_deform(al, PARAMS, 22.5751, 1e-30)
    assert np.max(np.abs(rho - rho0)) < 1e-10
    with pytest.raises(ValueError):
        wigner.kerr_deform(al, PARAMS, 22.5751, 0.0)


def test_kerr_deform_conserves_photons_any_state():
    al = 2.4
    dim = fock.adequate_dim(al)
    rho = wigner.kerr_deform(al, PARAMS, 22.5751, 1.0 / (45 * PARAMS.K),
                             dim=dim)
    n_op = fock.create(dim) @ fock.destroy(dim)
    n0 = al * al * (1.0 - fock.coherent_ket(dim, al)[-1].real ** 2)
    n_before = fock.expect(n_op, fock.ket_to_dm(fock.coherent_ket(dim, al))).real
    n_after = fock.expect(n_op, rho).real
    assert abs(n_after - n_before) / n_before < 1e-9


def test_kerr_deform_weak_kerr_is_rotation():
    # K -> 0 at fixed lambda K: pure rotation, |<a>| untouched
    al = 2.0
    lam_k = 22.5751 * PARAMS.K
    weak = device.CircuitParams(omega_r=PARAMS.omega_r,
                                kappa_int=PARAMS.kappa_int,
                                kappa_ext=PARAMS.kappa_ext, K=PARAMS.K * 1e-9)
    rho = wigner.kerr_deform(al, weak, lam_k / weak.K, 1.0 / (45 * PARAMS.K))
    dim = rho.shape[0]
    amp = fock.expect(fock.destroy(dim), rho)
    assert abs(abs(amp) - al) < 1e-10


def test_squeeze_scan_coherent_flat():
    rho = fock.ket_to_dm(fock.coherent_ket(40, 2.3))
    thetas = np.linspace(-math.pi / 2, math.pi / 2, 121, endpoint=False)
    _, du_min, curve = wigner.squeeze_scan(rho, thetas)
    assert np.max(np.abs(curve - 1.0)) < 1e-6
    assert du_min == pytest.approx(1.0, abs=1e-6)


def test_squeeze_scan_rejects_partial_span():
    rho = fock.ket_to_dm(fock.coherent_ket(20, 1.0))
    with pytest.raises(ValueError):
        wigner.squeeze_scan(rho, np.linspace(-0.5, 0.5, 50))


def test_squeezed_thermal_mixture_unsqueezed():
    rho = fock.thermal_density(25, 0.4)
    thetas = np.linspace(-math.pi / 2, math.pi / 2, 121, endpoint=False)
    _, du_min, _ = wigner.squeeze_scan(rho, thetas)
    assert du_min == pytest.approx(math.sqrt(1 + 2 * 0.4), rel=1e-6)


def test_normalization_across_states(state_122_ampmax):
    rho, _, eps, _, _ = state_122_ampmax
    grid = wigner.PhaseSpaceGrid.for_amplitude(2 * eps / PARAMS.kappa, n=201)
    f = wigner.wigner_grid(rho, grid)
    assert f.norm() == pytest.approx(1.0, abs=1e-4)
    assert abs(center_of_mass(f)
               - fock.expect(fock.destroy(rho.shape[0]), rho)) < 1e-3
