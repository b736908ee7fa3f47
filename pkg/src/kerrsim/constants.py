"""Physical constants (CODATA 2018, exact SI values) and unit helpers.

All internal frequencies and rates in this package are angular (rad/s).
Configuration files and reports use tagged ordinary-frequency units
(Hz/kHz/MHz/GHz); conversion happens only at the boundaries.
"""

import math

HBAR = 1.054571817e-34  # J s  (h / 2pi, h exact)
K_B = 1.380649e-23      # J / K  (exact)
E_CHARGE = 1.602176634e-19  # C  (exact)

TWO_PI = 2.0 * math.pi


def dbm_to_watt(p_dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    """Convert a power in watts to dBm."""
    if p_watt <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watt) + 30.0
