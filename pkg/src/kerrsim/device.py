"""Physical-parameter layer.

Black-box quantization of the series LC + junction circuit, thermal
occupation of the bath, and drive-strength / power-unit conversions.
All returned frequencies and rates are angular (rad/s).
"""

import math
from dataclasses import dataclass

from .constants import E_CHARGE, HBAR, K_B, TWO_PI, dbm_to_watt

__all__ = [
    "CircuitElements",
    "CircuitParams",
    "DriveSpec",
    "quantize",
    "thermal_occupation",
    "drive_strength",
    "params_from_config",
]


@dataclass(frozen=True)
class CircuitElements:
    """Lumped elements: inductance L, capacitance C, Josephson inductance L_J (SI).

    L may be zero (no series inductor); C and L_J must be positive.
    """

    L: float
    C: float
    L_J: float

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("circuit element L must be >= 0")
        for name in ("C", "L_J"):
            if getattr(self, name) <= 0:
                raise ValueError(f"circuit element {name} must be positive")


@dataclass(frozen=True)
class CircuitParams:
    """Oscillator parameters in angular units (rad/s), plus bath occupation.

    ``omega_r`` is the bare (quantum-model) resonance; the physically observed
    low-power resonance sits at ``omega_r - K``.
    """

    omega_r: float
    kappa_int: float
    kappa_ext: float
    K: float
    n_th: float = 0.0

    def __post_init__(self):
        if self.omega_r <= 0:
            raise ValueError("omega_r must be positive")
        if self.kappa_int < 0 or self.kappa_ext <= 0:
            raise ValueError("kappa_int must be >= 0 and kappa_ext > 0")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.n_th < 0:
            raise ValueError("n_th must be >= 0")

    @property
    def kappa(self) -> float:
        """Total linewidth kappa_int + kappa_ext (derived, never stored)."""
        return self.kappa_int + self.kappa_ext


@dataclass(frozen=True)
class DriveSpec:
    """Drive tone: source power, line attenuation, drive frequency (rad/s).

    ``omega_d`` may be a scalar or an array (a frequency sweep).
    """

    power_dbm_at_source: float
    attenuation_db: float
    omega_d: object

    def __post_init__(self):
        if self.attenuation_db < 0:
            raise ValueError("attenuation_db must be >= 0")

    @property
    def power_dbm_at_device(self) -> float:
        return self.power_dbm_at_source - self.attenuation_db

    @classmethod
    def at_device(cls, power_dbm: float, omega_d) -> "DriveSpec":
        """Spec with the stated power applied directly at the device."""
        return cls(power_dbm_at_source=power_dbm, attenuation_db=0.0, omega_d=omega_d)


def quantize(elems: CircuitElements) -> tuple[float, float]:
    """Resonance frequency and anharmonicity from the lumped elements.

    omega_r = 1/sqrt((L+L_J) C);  hbar K = (e^2 / 2C) (L_J/(L+L_J))^3.
    Returns (omega_r, K) in rad/s.
    """
    lt = elems.L + elems.L_J
    omega_r = 1.0 / math.sqrt(lt * elems.C)
    K = (E_CHARGE**2 / (2.0 * elems.C)) * (elems.L_J / lt) ** 3 / HBAR
    return omega_r, K


def thermal_occupation(omega_r: float, T: float) -> float:
    """Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return 1.0 / math.expm1(HBAR * omega_r / (K_B * T))


def drive_strength(spec: DriveSpec, params: CircuitParams) -> float:
    """Drive amplitude epsilon = sqrt(kappa_ext P_in / (2 hbar omega_r)) in rad/s.

    P_in is the power reaching the device; the factor 2 accounts for only one
    of the two feedline propagation directions carrying the drive.
    """
    p_in = dbm_to_watt(spec.power_dbm_at_device)
    return math.sqrt(params.kappa_ext * p_in / (2.0 * HBAR * params.omega_r))


_UNIT_SCALE = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}

# The two accepted parameter-config forms; exactly one must be present.
ELEMENT_KEYS = frozenset({"L_nH", "C_fF", "LJ_nH"})
DIRECT_KEYS = frozenset({"omega_r_GHz", "kappa_int_kHz", "kappa_ext_MHz", "K_kHz"})


def params_from_config(cfg: dict):
    """Parse the parameter section of a config into a device description.

    Accepts exactly one of two forms: circuit elements
    {"L_nH", "C_fF", "LJ_nH"} -> :class:`CircuitElements` (sufficient for
    quantization only), or direct parameters
    {"omega_r_GHz", "kappa_int_kHz", "kappa_ext_MHz", "K_kHz", "n_th"}
    -> :class:`CircuitParams`. Ordinary frequencies in the config are
    converted to angular rad/s here, at the boundary.
    """
    keys = set(cfg) - {"n_th"}
    has_elems = bool(keys & ELEMENT_KEYS)
    has_direct = bool(keys & DIRECT_KEYS)
    if has_elems and has_direct:
        raise ValueError("give either circuit elements or direct parameters, not both")
    if has_elems:
        if keys != ELEMENT_KEYS:
            raise ValueError(f"element form requires exactly {sorted(ELEMENT_KEYS)}")
        return CircuitElements(
            L=cfg["L_nH"] * 1e-9, C=cfg["C_fF"] * 1e-15, L_J=cfg["LJ_nH"] * 1e-9
        )
    if has_direct:
        if keys != DIRECT_KEYS:
            raise ValueError(f"direct form requires exactly {sorted(DIRECT_KEYS)}")
        return CircuitParams(
            omega_r=TWO_PI * cfg["omega_r_GHz"] * 1e9,
            kappa_int=TWO_PI * cfg["kappa_int_kHz"] * 1e3,
            kappa_ext=TWO_PI * cfg["kappa_ext_MHz"] * 1e6,
            K=TWO_PI * cfg["K_kHz"] * 1e3,
            n_th=float(cfg.get("n_th", 0.0)),
        )
    raise ValueError("config matches neither the element nor the direct form")
