"""Classical steady-state amplitude with optional amplitude-squared damping.

The steady state obeys (i Delta - i K |a|^2 + (kappa + gamma |a|^2)/2) a = eps.
Multiplying by the conjugate turns it into a cubic in u = |a|^2,

    (gamma^2/4 + K^2) u^3 + (gamma kappa / 2 - 2 Delta K) u^2
        + (kappa^2/4 + Delta^2) u = eps^2,

solved through the eigenvalues of the companion matrix. ``Delta`` here is the
classical detuning (physical resonance minus drive); the mapping from the
shared parameter bundle happens in :mod:`kerrsim.response`.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .device import CircuitParams, DriveSpec, drive_strength

__all__ = [
    "ClassicalSolution",
    "classical_resonance",
    "amplitude_roots",
    "s21_amplitudes",
    "s21_trace",
    "bifurcation_power",
    "perturbative_peak",
]

# companion-matrix eigenvalues carry rounding noise; calibrated against the
# analytic K=0 case
_REAL_ROOT_TOL = 1e-9


@dataclass
class ClassicalSolution:
    """Real steady-state amplitudes (one per real root of the cubic)."""

    amplitudes: list
    multistable: bool

    @property
    def intensities(self):
        return [abs(a) ** 2 for a in self.amplitudes]


def _cubic_real_roots(c3: float, c2: float, c1: float, c0: float) -> np.ndarray:
    """Nonnegative real roots of c3 u^3 + c2 u^2 + c1 u + c0 = 0."""
    if c3 == 0.0:
        if c2 == 0.0:
            roots = np.array([-c0 / c1]) if c1 != 0.0 else np.array([])
        else:
            roots = np.roots([c2, c1, c0])
    else:
        # companion matrix of the monic cubic
        b2, b1, b0 = c2 / c3, c1 / c3, c0 / c3
        comp = np.array([[0.0, 0.0, -b0],
                         [1.0, 0.0, -b1],
                         [0.0, 1.0, -b2]])
        roots = np.linalg.eigvals(comp)
    real = roots[np.abs(roots.imag) < _REAL_ROOT_TOL * np.maximum(1.0, np.abs(roots.real))]
    real = real.real
    return np.sort(real[real >= 0.0])


def amplitude_roots(params: CircuitParams, gamma_nl: float, delta_c: float,
                    epsilon: float) -> ClassicalSolution:
    """All physical steady-state amplitudes at one classical detuning.

    Each returned complex amplitude a = |a| e^{i phi} satisfies the steady-
    state identity exactly; the phase comes from the complex identity itself
    rather than the principal arctan branch, which avoids pi-jumps at large
    detuning.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    kappa = params.kappa
    K = params.K
    if epsilon == 0.0:
        return ClassicalSolution(amplitudes=[0j], multistable=False)
    us = _cubic_real_roots(
        0.25 * gamma_nl**2 + K**2,
        0.5 * gamma_nl * kappa - 2.0 * delta_c * K,
        0.25 * kappa**2 + delta_c**2,
        -(epsilon**2),
    )
    amps = []
    for u in us:
        denom = 1j * (delta_c - K * u) + 0.5 * (kappa + gamma_nl * u)
        amps.append(epsilon / denom)
    return ClassicalSolution(amplitudes=amps, multistable=len(amps) > 1)


def _select_continuous(solutions, previous_u):
    """Root whose intensity is closest to the previously selected one."""
    us = solutions.intensities
    if previous_u is None:
        idx = int(np.argmin(us))
    else:
        idx = int(np.argmin([abs(u - previous_u) for u in us]))
    return solutions.amplitudes[idx], us[idx]


def s21_amplitudes(params: CircuitParams, gamma_nl: float, epsilon: float,
                   delta_c_grid: np.ndarray) -> np.ndarray:
    """S21 = 1 - kappa_ext a / (2 eps) across a classical detuning grid.

    In a multistable region the root continuously connected to the low-power
    branch is followed, sweeping upward in drive frequency (downward in
    detuning); the scan therefore runs from the largest detuning down.
    """
    delta_c_grid = np.asarray(delta_c_grid, dtype=float)
    if delta_c_grid.size == 0:
        raise ValueError("detuning grid must be nonempty")
    if epsilon == 0.0:
        return np.ones_like(delta_c_grid, dtype=complex)
    order = np.argsort(delta_c_grid)[::-1]  # upward in omega_d
    s21 = np.empty(delta_c_grid.size, dtype=complex)
    prev_u = None
    for i in order:
        sol = amplitude_roots(params, gamma_nl, delta_c_grid[i], epsilon)
        a, prev_u = _select_continuous(sol, prev_u)
        s21[i] = 1.0 - params.kappa_ext * a / (2.0 * epsilon)
    return s21


def classical_resonance(params: CircuitParams) -> float:
    """Physical (observed low-power) resonance of the classical model.

    The shared parameter bundle stores the bare quantum omega_r; the classical
    equation is written around the physical resonance omega_r - K.
    """
    return params.omega_r - params.K


def s21_trace(params: CircuitParams, gamma_nl: float, epsilon: float,
              omega_d_grid: np.ndarray):
    """Classical S21 sweep over drive frequencies (returns a SweepTrace).

    Detuning mapping: Delta_c = (omega_r - K) - omega_d.
    """
    from .response import SweepTrace  # deferred: response builds on this module

    omega_d_grid = np.asarray(omega_d_grid, dtype=float)
    deltas = classical_resonance(params) - omega_d_grid
    s21 = s21_amplitudes(params, gamma_nl, epsilon, deltas)
    backend = "classical" if gamma_nl == 0.0 else "classical_nl"
    return SweepTrace(power_dbm=float("nan"), omega_d=omega_d_grid, s21=s21,
                      backend=backend)


def bifurcation_power(params: CircuitParams, omega_d_grid: np.ndarray,
                      power_grid_dbm: np.ndarray,
                      attenuation_db: float = 0.0) -> float | None:
    """Lowest device power whose frequency grid yields more than one real root.

    The scan uses gamma = 0 (the bare Kerr cubic) per the bifurcation
    definition. Returns None when every power in the grid is single-valued at
    every grid frequency ("none in range").
    """
    deltas = classical_resonance(params) - np.asarray(omega_d_grid, dtype=float)
    for p in np.sort(np.asarray(power_grid_dbm, dtype=float)):
        eps = drive_strength(
            DriveSpec(power_dbm_at_source=float(p), attenuation_db=attenuation_db,
                      omega_d=0.0),
            params,
        )
        for delta in deltas:
            if amplitude_roots(params, 0.0, float(delta), eps).multistable:
                return float(p)
    return None


def perturbative_peak(params: CircuitParams, gamma_nl: float,
                      epsilon: float) -> tuple[float, float]:
    """Detuning and amplitude of the response peak, to leading order.

    Valid when K, gamma and the detuning act perturbatively on the resonantly
    driven amplitude alpha = 2 eps / kappa: the peak sits at Delta = K alpha^2
    with |a| = alpha (1 - alpha^2 gamma / kappa).
    """
    alpha = 2.0 * epsilon / params.kappa
    if params.K * alpha**2 > params.kappa / 5.0:
        warnings.warn(
            f"K alpha^2 = {params.K * alpha ** 2:.3e} is not small against "
            f"kappa = {params.kappa:.3e}; leading-order peak is unreliable",
            stacklevel=2,
        )
    delta_at_max = params.K * alpha**2
    amp_at_max = alpha * (1.0 - alpha**2 * gamma_nl / params.kappa)
    return delta_at_max, amp_at_max
