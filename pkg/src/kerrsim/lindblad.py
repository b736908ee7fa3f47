"""Rotating-frame Liouvillian: build, steady state, propagation, phase statistics.

The generator encodes

    drho/dt = -i[Delta_q n - (K/2) ad ad a a + i eps (ad - a), rho]
              + kappa (n_th+1) D(a) rho + kappa n_th D(ad) rho

with D(L) rho = L rho Ld - {Ld L, rho}/2, vectorized column-major
(vec(A X B) = (B^T kron A) vec(X)). ``Delta_q`` is the quantum-frame detuning
omega_r - K - omega_d. The superoperator is the only sparse object in the
package; density matrices stay dense.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import fock
from .device import CircuitParams
from .errors import IntegrationError, SolverError, TruncationError, UndefinedPhaseError

__all__ = [
    "Liouvillian",
    "build",
    "steady_state",
    "evolve",
    "EvolutionRecord",
    "phase_operator",
    "phase_variance",
]


def _spre(op: np.ndarray) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(sp.identity(n, format="csr"), sp.csr_matrix(op), format="csr")


def _spost(op: np.ndarray) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(sp.csr_matrix(op).T, sp.identity(n, format="csr"), format="csr")


def _dissipator(op: np.ndarray) -> sp.csr_matrix:
    opd = op.conj().T
    opdop = opd @ op
    return (
        sp.kron(sp.csr_matrix(op).conj(), sp.csr_matrix(op), format="csr")
        - 0.5 * (_spre(opdop) + _spost(opdop))
    )


@dataclass
class Liouvillian:
    """Sparse superoperator (rad/s) plus the parameters that built it."""

    dim: int
    matrix: sp.csr_matrix
    params: CircuitParams
    delta_q: float
    epsilon: float
    hamiltonian_part: sp.csr_matrix = field(repr=False, default=None)
    drive_dissipation_part: sp.csr_matrix = field(repr=False, default=None)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """drho/dt for a dense density matrix."""
        return unvec(self.matrix @ vec(rho), self.dim)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape((dim, dim), order="F")


def _hamiltonian(params: CircuitParams, delta_q: float, epsilon: float,
                 dim: int) -> np.ndarray:
    a = fock.destroy(dim)
    ad = a.conj().T
    n = ad @ a
    return delta_q * n - 0.5 * params.K * (ad @ ad @ a @ a) \
        + 1j * epsilon * (ad - a)


def build(params: CircuitParams, delta_q: float, epsilon: float, dim: int,
          check_dim: bool = True) -> Liouvillian:
    """Assemble the rotating-frame Liouvillian at one drive point.

    ``dim`` must satisfy the coherent-amplitude adequacy heuristic for the
    expected amplitude 2 eps / kappa unless ``check_dim`` is disabled.
    """
    if check_dim:
        fock.check_adequacy(dim, 2.0 * epsilon / params.kappa)
    a = fock.destroy(dim)
    ham = _hamiltonian(params, delta_q, epsilon, dim)
    l_ham = -1j * (_spre(ham) - _spost(ham))
    l_env = params.kappa * (params.n_th + 1.0) * _dissipator(a)
    if params.n_th > 0:
        l_env = l_env + params.kappa * params.n_th * _dissipator(a.conj().T)
    drive = -1j * (_spre(1j * epsilon * (a.conj().T - a))
                   - _spost(1j * epsilon * (a.conj().T - a)))
    kerr_ham = ham - 1j * epsilon * (a.conj().T - a)
    l_kerr = -1j * (_spre(kerr_ham) - _spost(kerr_ham))
    matrix = (l_ham + l_env).tocsr()
    return Liouvillian(
        dim=dim,
        matrix=matrix,
        params=params,
        delta_q=delta_q,
        epsilon=epsilon,
        hamiltonian_part=l_kerr.tocsr(),
        drive_dissipation_part=(drive + l_env).tocsr(),
    )


class LiouvillianFamily:
    """Liouvillians across a detuning sweep at fixed drive and damping.

    The generator is affine in the detuning, L(delta) = L0 + delta * S with
    S = -i(spre(n) - spost(n)); assembling members this way avoids rebuilding
    the Kerr and dissipator blocks at every frequency point.
    """

    def __init__(self, params: CircuitParams, epsilon: float, dim: int):
        base = build(params, delta_q=0.0, epsilon=epsilon, dim=dim,
                     check_dim=False)
        n = fock.number(dim)
        self._shift = (-1j * (_spre(n) - _spost(n))).tocsr()
        self._base = base
        self.params = params
        self.epsilon = epsilon
        self.dim = dim

    def at(self, delta_q: float) -> Liouvillian:
        b = self._base
        return Liouvillian(
            dim=self.dim,
            matrix=(b.matrix + delta_q * self._shift).tocsr(),
            params=self.params,
            delta_q=delta_q,
            epsilon=self.epsilon,
            hamiltonian_part=(b.hamiltonian_part
                              + delta_q * self._shift).tocsr(),
            drive_dissipation_part=b.drive_dissipation_part,
        )


def steady_state(liouv: Liouvillian, strict: bool = False,
                 residual_tol: float = 1e-10,
                 cutoff_population_tol: float = 1e-7) -> np.ndarray:
    """Steady-state density matrix of the Liouvillian.

    One row of the vectorized generator is replaced by the trace functional
    and the pinned system solved by sparse LU (deterministic, residual under
    direct control), with iterative refinement until
    ||L vec(rho)||_inf < residual_tol * kappa. Falls back to a
    smallest-magnitude eigenvector solve if the pinned system is singular.

    In strict mode a population above ``cutoff_population_tol`` on the top
    Fock level escalates from a truncation warning to an error.
    """
    dim = liouv.dim
    kappa = liouv.params.kappa
    n2 = dim * dim
    # work in units of kappa so the pinned row and the generator share a scale
    lmat = (liouv.matrix / kappa).tolil()
    trace_row = np.zeros(n2)
    trace_row[np.arange(dim) * (dim + 1)] = 1.0
    lmat[0, :] = trace_row
    lmat = lmat.tocsc()
    rhs = np.zeros(n2, dtype=complex)
    rhs[0] = 1.0
    try:
        lu = spla.splu(lmat)
        x = lu.solve(rhs)
        for _ in range(3):
            r = rhs - lmat @ x
            if np.max(np.abs(r)) < 1e-14:
                break
            x = x + lu.solve(r)
    except RuntimeError as exc:  # singular factorization
        x = _steady_state_eigs(liouv, exc)

    rho = unvec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.max(np.abs(liouv.matrix @ vec(rho)))
    if residual > residual_tol * kappa:
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds "
            f"{residual_tol:.1e} * kappa = {residual_tol * kappa:.3e}",
            residual=residual,
        )
    top = rho[dim - 1, dim - 1].real
    if top > cutoff_population_tol:
        msg = (f"population {top:.2e} at the Fock cutoff exceeds "
               f"{cutoff_population_tol:.1e}; increase dim")
        if strict:
            raise TruncationError(msg, suggested_dim=dim + 8)
        warnings.warn(msg, stacklevel=2)
    return rho


def _steady_state_eigs(liouv: Liouvillian, exc: Exception) -> np.ndarray:
    try:
        w, v = spla.eigs(liouv.matrix / liouv.params.kappa, k=1, sigma=1e-12,
                         which="LM")
    except Exception:
        raise SolverError(f"pinned solve singular and eigen fallback failed: {exc}")
    return v[:, 0]


@dataclass
class EvolutionRecord:
    """Observables along a Lindblad propagation.

    ``rate_split[name]`` holds, per time, the pair
    (d/dt under the detuning+Kerr commutator, d/dt under drive+dissipation)
    for name in {"amp_abs", "photon", "phase_var"}.
    """

    times: np.ndarray
    amp: np.ndarray
    photon: np.ndarray
    phase_var: np.ndarray
    rate_split: dict


def evolve(liouv: Liouvillian, rho0: np.ndarray, times: np.ndarray,
           rtol: float = 1e-8, atol: float = 1e-10) -> EvolutionRecord:
    """Propagate vec(rho) with adaptive explicit Runge-Kutta stepping.

    Records <a>, <n>, the phase spread, and the per-term rate decomposition
    evaluated on each rho(t) snapshot (both generators applied to the same
    state, not operator splitting of the integrator).
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing from 0")
    dim = liouv.dim
    a = fock.destroy(dim)
    nop = (a.conj().T @ a)
    mat = liouv.matrix

    def rhs(t, y):
        return mat @ y

    sol = solve_ivp(rhs, (0.0, times[-1]), vec(rho0.astype(complex)),
                    t_eval=times, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"propagation failed: {sol.message}",
                               t_last=sol.t[-1] if sol.t.size else 0.0)

    n_t = times.size
    amp = np.empty(n_t, dtype=complex)
    photon = np.empty(n_t)
    phase_var = np.empty(n_t)
    split = {k: np.empty((n_t, 2)) for k in ("amp_abs", "photon", "phase_var")}
    for i in range(n_t):
        rho = unvec(sol.y[:, i], dim)
        rho = 0.5 * (rho + rho.conj().T)
        amp[i] = fock.expect(a, rho)
        photon[i] = fock.expect(nop, rho).real
        phi_op = phase_operator(dim, center=np.angle(amp[i]))
        phase_var[i] = _phase_spread(rho, phi_op)
        for j, gen in enumerate((liouv.hamiltonian_part,
                                 liouv.drive_dissipation_part)):
            sigma = unvec(gen @ vec(rho), dim)
            dadt = fock.expect(a, sigma)
            split["amp_abs"][i, j] = (
                (np.conj(dadt) * amp[i] + np.conj(amp[i]) * dadt).real
                / (2.0 * abs(amp[i])) if abs(amp[i]) > 0 else 0.0
            )
            split["photon"][i, j] = fock.expect(nop, sigma).real
            split["phase_var"][i, j] = _phase_spread_rate(rho, sigma, phi_op,
                                                          phase_var[i])
    return EvolutionRecord(times=times, amp=amp, photon=photon,
                           phase_var=phase_var, rate_split=split)


def phase_operator(dim: int, center: float = 0.0) -> np.ndarray:
    """Truncated phase operator from ``dim`` phase states.

    Phase states |theta_m> = dim^-1/2 sum_n e^{i n theta_m} |n> on the window
    [center-pi, center+pi); the operator is sum_m theta_m |theta_m><theta_m|.
    Phase-spread magnitudes depend on this construction; the window is
    centered on the state's mean phase by the callers below.
    """
    theta0 = center - math.pi
    thetas = theta0 + 2.0 * math.pi * np.arange(dim) / dim
    n = np.arange(dim)
    # columns are the phase states
    states = np.exp(1j * np.outer(n, thetas)) / math.sqrt(dim)
    return (states * thetas) @ states.conj().T


def _phase_spread(rho: np.ndarray, phi_op: np.ndarray) -> float:
    m1 = fock.expect(phi_op, rho).real
    m2 = fock.expect(phi_op @ phi_op, rho).real
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def _phase_spread_rate(rho: np.ndarray, sigma: np.ndarray, phi_op: np.ndarray,
                       spread: float) -> float:
    if spread <= 0:
        return 0.0
    m1 = fock.expect(phi_op, rho).real
    d1 = fock.expect(phi_op, sigma).real
    d2 = fock.expect(phi_op @ phi_op, sigma).real
    return (d2 - 2.0 * m1 * d1) / (2.0 * spread)


def phase_variance(rho: np.ndarray) -> float:
    """Phase spread sqrt(<phi^2> - <phi>^2), window centered on arg<a>.

    Raises :class:`UndefinedPhaseError` for vacuum-dominated states
    (<n> < 1e-6), where no phase window is meaningful.
    """
    dim = rho.shape[0]
    a = fock.destroy(dim)
    nbar = fock.expect(a.conj().T @ a, rho).real
    if nbar < 1e-6:
        raise UndefinedPhaseError(
            f"phase undefined for vacuum-dominated state (<n> = {nbar:.2e})"
        )
    amp = fock.expect(a, rho)
    phi_op = phase_operator(dim, center=float(np.angle(amp)))
    return _phase_spread(rho, phi_op)
