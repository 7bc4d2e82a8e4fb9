"""Charge, energy and heat fluxes of a harmonically driven resonant level.

Units: hbar = e = Gamma = 1, so h = 2 pi and the resistance quantum
``R_Q = h / 2e^2 = pi``.
"""

__version__ = "0.1.0"

from .errors import (
    AlphaTooLarge,
    ConfigError,
    DegenerateFit,
    DrivenLevelError,
    InvalidParams,
    InvariantViolation,
    PathMismatch,
    QuadratureFailure,
    TruncationUnconverged,
)
from .model import (
    H_PLANCK,
    R_Q,
    EnergyGrid,
    ModelParams,
    fermi,
    frozen_dos,
    frozen_green,
    level_energy,
)
from .quadrature import QuadratureConfig
from .green import (
    FloquetHarmonics,
    TruncationPolicy,
    green_oracle,
    green_time_derivative,
    green_time_energy,
    harmonics,
    occupation_nd,
)
from .flux import (
    FluxTrace,
    charge_current,
    energy_flux_contact,
    energy_flux_dot_level,
    energy_flux_reservoir,
    heat_flux,
    heat_flux_tilde,
    power_source,
    trace_period,
)
from .scattering import FloquetSMatrix, build_smatrix, energy_flux_scattering, unitarity_defect
from .adiabatic import AdiabaticReport, adiabatic_report, joule_fit, r_tilde
