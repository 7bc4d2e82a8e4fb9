"""Energy-integration configuration and the closed-form Fermi-weighted resolvent.

Every energy integral in the flux formulas is of the type
``int f(eps) R(eps) d eps`` where ``R`` is a finite sum of simple poles
``1/(eps - z)`` in the lower half plane (the Bessel-series Green function
and its time derivative).  For such integrands the energy integral is
available in closed form:

* ``T = 0``:  ``int_{-L}^{mu} d eps / (eps - z) = log(mu - z) - log(-L - z)``
* ``T > 0``:  summing the Matsubara poles of ``f`` gives
  ``psi(1/2 + (mu - z) / (2 pi i T))`` up to a ``z``-independent constant.

``occupied_resolvent`` returns these with the constant fixed so that the
``T -> 0`` limit is continuous and the divergent ``-log L - i pi`` part is
shared by all poles.  Whenever the pole residues sum to zero that part
cancels exactly and the result is the wide-band value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .model import THERMAL_WINDOW, EnergyGrid, ModelParams

METHODS = ("closed", "quadrature")


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and integration choices shared by the flux engine.

    ``method="closed"`` evaluates energy integrals analytically (default);
    ``method="quadrature"`` integrates the wide-band integrands on an
    :class:`EnergyGrid` cut at ``-cutoff`` plus a mapped tail rule.
    ``engine_tol`` is the relative tolerance that trace invariants are
    checked against.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    cutoff: float | None = None
    window_policy: str = "auto"
    method: str = "closed"
    order: int = 16
    spectral_tol: float = 1e-13
    engine_tol: float = 1e-8

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.spectral_tol > 0 and self.engine_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.window_policy != "auto":
            raise ValueError("only window_policy='auto' is implemented")
        if self.order < 4:
            raise ValueError("Gauss-Legendre order must be >= 4")

    def band_cutoff(self, p: ModelParams) -> float:
        if self.cutoff is None:
            return p.band_cutoff
        needed = 10.0 * max(abs(p.epsilon0) + p.v_ac, abs(p.mu), p.gamma)
        if self.cutoff <= needed:
            raise ValueError(f"cutoff {self.cutoff} is below the model requirement {needed}")
        return float(self.cutoff)


def occupied_resolvent(z, p: ModelParams, cutoff: float | None = None):
    """Regularised ``int f(eps) / (eps - z) d eps`` for ``Im z < 0``.

    Without ``cutoff`` the value omits the common divergent constant
    ``-(log L + i pi)``.  With ``cutoff=D`` it is the genuine integral over
    ``[-D, inf)``, which lets callers measure the part of the band below the
    cutoff exactly.
    """
    z = np.asarray(z, dtype=complex)
    if p.temperature == 0.0:
        val = np.log(p.mu - z)
    else:
        two_pi_t = 2.0 * math.pi * p.temperature
        val = digamma(0.5 + (p.mu - z) / (1j * two_pi_t)) + math.log(two_pi_t) + 0.5j * math.pi
    if cutoff is not None:
        val = val - np.log(-cutoff - z)
    return val


def occupied_upper(p: ModelParams) -> float:
    """Upper end of the occupied window: ``mu`` at ``T=0``, ``mu + 40 T`` otherwise."""
    if p.temperature == 0.0:
        return p.mu
    return min(p.mu + THERMAL_WINDOW * p.temperature, p.band_cutoff)


def occupied_grid(p: ModelParams, cfg: QuadratureConfig, n_max: int = 0) -> EnergyGrid:
    """Grid over ``[-D, upper]`` for Fermi-weighted integrals."""
    D = cfg.band_cutoff(p)
    params = p if D == p.band_cutoff else p.replace(band_cutoff=D)
    return EnergyGrid.build(params, lower=-D, upper=occupied_upper(p), n_max=n_max, order=cfg.order)


def lower_tail_rule(cutoff: float, order: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_{-inf}^{-cutoff}`` via ``eps = -cutoff/u``.

    Exact for integrands decaying like ``1/eps^2`` up to the polynomial
    order of the rule in ``u``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (x + 1.0)
    return -cutoff / u, 0.5 * w * cutoff / u**2


def halfline_rule(p: ModelParams, cfg: QuadratureConfig, upper: float | None = None, n_max: int = 0):
    """Nodes/weights for ``int_{-inf}^{upper}``: graded panels down to ``-D`` plus the mapped tail."""
    D = cfg.band_cutoff(p)
    params = p if D == p.band_cutoff else p.replace(band_cutoff=D)
    up = occupied_upper(p) if upper is None else float(upper)
    grid = EnergyGrid.build(params, lower=-D, upper=up, n_max=n_max, order=cfg.order)
    tn, tw = lower_tail_rule(D)
    return np.concatenate([tn, grid.nodes]), np.concatenate([tw, grid.weights])
