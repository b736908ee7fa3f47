"""Noise-closure analytics for the driven Kerr oscillator.

Quantum and thermal fluctuations around the mean field close into an
effective amplitude-squared damping gamma = (4 K^2 / kappa)(n_th + 1/2);
the +1/2 is the vacuum (commutator) contribution and acts exactly like half
a thermal quantum. The closures below are valid for K << kappa and
n_th << |<a>|^2, near the amplitude-maximizing detuning.
"""

import math
import warnings
from dataclasses import dataclass

from .device import CircuitParams

__all__ = [
    "NoiseMoments",
    "gamma_nl",
    "noise_moments",
    "amplitude_cardano",
    "leading_order",
]


@dataclass
class NoiseMoments:
    """Second moments of the deviation from the mean field.

    ``dd`` is <d'd> (excess photon number), ``d2`` is <d^2> (anomalous
    correlator, sets the squeezing axis).
    """

    dd: float
    d2: complex


def gamma_nl(params: CircuitParams) -> float:
    """Emergent nonlinear damping coefficient (rad/s).

    gamma = (4 K^2 / kappa)(n_th + 1/2) = (2 K^2 / kappa)(<[a, ad]> + 2 n_th)
    with <[a, ad]> = 1.
    """
    return 4.0 * params.K**2 / params.kappa * (params.n_th + 0.5)


def _warn_regime(params: CircuitParams, amp_sq: float) -> None:
    if params.K * amp_sq > params.kappa / 5.0:
        warnings.warn(
            f"K |a|^2 = {params.K * amp_sq:.3e} not small against kappa; "
            "closure accuracy degrades",
            stacklevel=3,
        )
    if params.n_th > amp_sq / 10.0 and amp_sq > 0:
        warnings.warn(
            f"n_th = {params.n_th:.3e} not small against |a|^2 = {amp_sq:.3e}",
            stacklevel=3,
        )


def noise_moments(params: CircuitParams, amp: complex) -> NoiseMoments:
    """Steady-state deviation moments at mean-field amplitude ``amp``."""
    u = abs(amp) ** 2
    _warn_regime(params, u)
    K, kappa, n_th = params.K, params.kappa, params.n_th
    ku = K * u / kappa
    dd = n_th + 4.0 * ku**2 * (n_th + 0.5)
    d2 = (n_th + 0.5) * (2j * ku - 4.0 * ku**2)
    return NoiseMoments(dd=dd, d2=d2)


def amplitude_cardano(params: CircuitParams, epsilon: float) -> float:
    """Closed-form |<a>| at the amplitude-maximizing detuning.

    Solves b y^3 + y = alpha with b = (4 K^2 / kappa^2)(n_th + 1/2) and
    alpha = 2 eps / kappa via Cardano's formula; real cube roots are taken
    with sign so the expression stays real for every b > 0. The b -> 0 limit
    returns alpha.
    """
    alpha = 2.0 * epsilon / params.kappa
    b = 4.0 * params.K**2 / params.kappa**2 * (params.n_th + 0.5)
    if b == 0.0:
        return alpha
    rad = alpha**2 / (4.0 * b**2) + 1.0 / (27.0 * b**3)
    if rad < 0.0:
        raise ValueError("Cardano discriminant negative; outside the closure regime")
    s = math.sqrt(rad)
    half = alpha / (2.0 * b)
    return _cbrt(half + s) + _cbrt(half - s)


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def leading_order(params: CircuitParams, epsilon: float) -> tuple[float, float, float]:
    """Leading-order amplitude, sqrt photon number, and peak detuning.

    Returns (amp, sqrt_photon, delta_at_max):
        amp        = alpha (1 - (4 K^2 alpha^2 / kappa^2)(n_th + 1/2))
        sqrt_photon= alpha (1 + n_th / (2 alpha^2)
                             - (2 K^2 alpha^2 / kappa^2)(n_th + 1/2))
        delta_at_max = K (alpha^2 + 2 n_th)
    The photon-number reduction is half the amplitude reduction: the lost
    signal splits evenly between dephasing and actual energy loss.
    """
    alpha = 2.0 * epsilon / params.kappa
    _warn_regime(params, alpha**2)
    K, kappa, n_th = params.K, params.kappa, params.n_th
    amp = alpha * (1.0 - 4.0 * (K**2 * alpha**2 / kappa**2) * (n_th + 0.5))
    sqrt_photon = alpha * (
        1.0 + (n_th / (2.0 * alpha**2) if alpha > 0 else 0.0)
        - 2.0 * (K**2 * alpha**2 / kappa**2) * (n_th + 0.5)
    )
    delta_at_max = K * (alpha**2 + 2.0 * n_th)
    return amp, sqrt_photon, delta_at_max
