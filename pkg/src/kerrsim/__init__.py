"""Driven-dissipative Kerr oscillator toolkit.

Three independent routes to the oscillator's steady-state response — full
Lindblad solves, the classical cubic with optional nonlinear damping, and
noise-closure perturbative analytics — plus phase-space (Wigner current)
analysis and a transmission calibration/fitting pipeline.
"""

__version__ = "0.1.0"

from .device import CircuitElements, CircuitParams, DriveSpec  # noqa: F401
