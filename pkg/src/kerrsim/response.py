"""Transmission layer: S21 sweeps from any backend, dip extraction.

S21 = 1 - kappa_ext <a> / (2 eps); the factor 2 reflects that only half of
the signal emitted by the side-coupled oscillator travels toward the
receiver. Backends and their detuning conventions:

    quantum       Lindblad steady state,      Delta_q = omega_r - K - omega_d
    classical     bare Kerr cubic (gamma=0),  Delta_c = (omega_r - K) - omega_d
    classical_nl  Kerr cubic + gamma |a|^2,   Delta_c  as above
    perturbative  cubic with the noise-closure gamma and the thermally
                  shifted detuning (omega_r - K - 2 K n_th) - omega_d

The classical resonance is the physical (observed) one, omega_r - K for the
shared parameter bundle, so every backend describes the same device.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import classical, fock, lindblad, perturbative
from .device import CircuitParams, DriveSpec, drive_strength
from .errors import BracketingError

__all__ = [
    "BACKENDS",
    "SweepTrace",
    "DipSummary",
    "sweep",
    "extract_min",
    "kappa_int_effective",
    "delta_min_check",
    "trace_to_rows",
]

BACKENDS = ("quantum", "classical", "classical_nl", "perturbative")


@dataclass
class SweepTrace:
    """One frequency sweep at fixed drive power."""

    power_dbm: float  # at device
    omega_d: np.ndarray
    s21: np.ndarray
    backend: str


@dataclass
class DipSummary:
    """Refined transmission minimum and the damping it implies."""

    min_abs_s21: float
    omega_min: float
    kappa_int_eff: float


def _quantum_amplitudes(params: CircuitParams, epsilon: float,
                        omega_d: np.ndarray, dim: int | None, strict: bool,
                        threads: int) -> np.ndarray:
    if dim is None:
        dim = fock.adequate_dim(2.0 * epsilon / params.kappa)
    a_op = fock.destroy(dim)
    deltas = params.omega_r - params.K - omega_d
    family = lindblad.LiouvillianFamily(params, epsilon, dim)

    def solve(delta_q):
        rho = lindblad.steady_state(family.at(float(delta_q)), strict=strict)
        return fock.expect(a_op, rho)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            amps = list(pool.map(solve, deltas))
    else:
        amps = [solve(d) for d in deltas]
    return np.array(amps, dtype=complex)


def sweep(backend: str, params: CircuitParams, drive: DriveSpec,
          gamma_nl: float | None = None, dim: int | None = None,
          strict: bool = False, threads: int = 1) -> SweepTrace:
    """S21 trace for one drive power over the frequencies in ``drive``.

    ``gamma_nl`` is required for the classical_nl backend; the perturbative
    backend derives it from the parameters. ``dim`` overrides the adequacy
    default for the quantum backend.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; pick one of {BACKENDS}")
    omega_d = np.atleast_1d(np.asarray(drive.omega_d, dtype=float))
    epsilon = drive_strength(drive, params)
    if epsilon == 0.0:
        s21 = np.ones_like(omega_d, dtype=complex)
    elif backend == "quantum":
        amps = _quantum_amplitudes(params, epsilon, omega_d, dim, strict, threads)
        s21 = 1.0 - params.kappa_ext * amps / (2.0 * epsilon)
    else:
        if backend == "classical":
            gamma = 0.0
            deltas = classical.classical_resonance(params) - omega_d
        elif backend == "classical_nl":
            if gamma_nl is None:
                raise ValueError("classical_nl backend requires gamma_nl")
            gamma = gamma_nl
            deltas = classical.classical_resonance(params) - omega_d
        else:  # perturbative
            gamma = perturbative.gamma_nl(params)
            deltas = (params.omega_r - params.K
                      - 2.0 * params.K * params.n_th) - omega_d
        s21 = classical.s21_amplitudes(params, gamma, epsilon, deltas)
    return SweepTrace(power_dbm=drive.power_dbm_at_device, omega_d=omega_d,
                      s21=s21, backend=backend)


def _parabolic_min(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Grid argmin refined by a 3-point parabola; raises at the grid edge."""
    i = int(np.argmin(y))
    if i == 0 or i == y.size - 1:
        raise BracketingError(
            f"minimum at grid edge (index {i}); widen the frequency span"
        )
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y2 - 2.0 * y1 + y0
    if denom <= 0:
        return float(x[i]), float(y1)
    h = 0.5 * (x[i + 1] - x[i - 1])
    shift = 0.5 * (y0 - y2) / denom
    xmin = x[i] + shift * h
    ymin = y1 - 0.125 * (y0 - y2) ** 2 / denom
    return float(xmin), float(ymin)


def kappa_int_effective(min_abs_s21: float, kappa_ext: float) -> float:
    """Invert Min|S21| = 1 - kappa_ext/(kappa_ext + kappa_int) for kappa_int."""
    m = min_abs_s21
    if not 0.0 <= m < 1.0:
        raise ValueError(f"min |S21| = {m} outside [0, 1)")
    return kappa_ext * m / (1.0 - m)


def extract_min(trace: SweepTrace, params: CircuitParams) -> DipSummary:
    """Dip frequency and depth, with the effective internal damping.

    Needs at least 5 points bracketing the minimum; refined by a 3-point
    parabola on |S21| (deterministic and grid-insensitive at our
    resolutions).
    """
    if trace.omega_d.size < 5:
        raise BracketingError("need at least 5 points to bracket a minimum")
    omega_min, min_abs = _parabolic_min(trace.omega_d, np.abs(trace.s21))
    return DipSummary(
        min_abs_s21=min_abs,
        omega_min=omega_min,
        kappa_int_eff=kappa_int_effective(min_abs, params.kappa_ext),
    )


def delta_min_check(traces: list[SweepTrace], params: CircuitParams) -> list[dict]:
    """Tabulate the measured dip detuning against K alpha^2 per power.

    Detunings are quoted in the classical convention,
    Delta_min = (omega_r - K) - omega_min.
    """
    rows = []
    for trace in traces:
        summary = extract_min(trace, params)
        eps = drive_strength(
            DriveSpec.at_device(trace.power_dbm, trace.omega_d), params
        )
        alpha = 2.0 * eps / params.kappa
        rows.append({
            "power_dbm": trace.power_dbm,
            "omega_min": summary.omega_min,
            "delta_min": classical.classical_resonance(params) - summary.omega_min,
            "k_alpha_sq": params.K * alpha**2,
        })
    return rows


def trace_to_rows(trace: SweepTrace) -> list[tuple]:
    """Rows (power_dbm, freq_Hz, re_s21, im_s21, abs_s21) for CSV export."""
    from .constants import TWO_PI

    return [
        (trace.power_dbm, float(w) / TWO_PI, s.real, s.imag, abs(s))
        for w, s in zip(trace.omega_d, trace.s21)
    ]
