"""Slow-driving expansion of the fluxes in powers of the drive frequency.

Every term is an energy integral of ``df/deps`` against combinations of the
frozen density of states ``rho(t, eps) = Gamma / ((eps - eps_d)^2 + Gamma^2/4)``
and the drive derivatives.  With ``y = eps - eps_d(t)`` the two time
derivatives that appear are

    d/dt [rho^2 deps_d/dt]     = (4 y / Gamma) rho^3 eps_d'^2 + rho^2 eps_d''
    d/dt [rho^2 y deps_d/dt]   = (4 y^2 / Gamma) rho^3 eps_d'^2 - rho^2 eps_d'^2 + rho^2 y eps_d''

At ``T = 0`` the derivative of the Fermi function is ``-delta(eps - mu)`` and
each term is evaluated at ``eps = mu`` in closed form.  At finite
temperature the integrals run over ``mu +- 40 T`` with composite
Gauss-Legendre rules at two orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit, QuadratureFailure
from .model import (
    E_CHARGE,
    H_PLANCK,
    R_Q,
    THERMAL_WINDOW,
    EnergyGrid,
    ModelParams,
    fermi_derivative,
    level_acceleration,
    level_energy,
    level_velocity,
)
from .quadrature import QuadratureConfig

#: Points with ``|I_C^(1)|`` below this fraction of its maximum are left out of ``r_tilde``.
MASK_FRACTION = 1e-6


def _kernels(t, eps, p: ModelParams):
    """Frozen-DOS building blocks at times ``t`` (column) and energies ``eps`` (row)."""
    t = np.asarray(t, dtype=float)[..., None]
    y = np.asarray(eps, dtype=float) - level_energy(t, p)
    rho = p.gamma / (y * y + 0.25 * p.gamma**2)
    v = level_velocity(t, p)
    a = level_acceleration(t, p)
    d_rho2v = (4.0 * y / p.gamma) * rho**3 * v * v + rho**2 * a
    d_rho2yv = (4.0 * y * y / p.gamma) * rho**3 * v * v - rho**2 * v * v + rho**2 * y * a
    return {"y": y, "rho": rho, "v": v, "d_rho2v": d_rho2v, "d_rho2yv": d_rho2yv}


# integrands g(eps) of  int d eps/h  df/deps  g(eps)
_TERMS = {
    "ic1": lambda k, e, mu: -E_CHARGE * k["rho"] * k["v"],
    "ic2": lambda k, e, mu: 0.5 * E_CHARGE * k["d_rho2v"],
    "q1": lambda k, e, mu: (mu - e) * k["rho"] * k["v"],
    "q2": lambda k, e, mu: -0.5 * ((mu - e) * k["d_rho2v"] + (k["rho"] * k["v"]) ** 2),
    "wt1": lambda k, e, mu: 2.0 * k["rho"] * k["y"] * k["v"],
    "wt2": lambda k, e, mu: -k["d_rho2yv"],
    "we1": lambda k, e, mu: -e * k["rho"] * k["v"],
    "we2": lambda k, e, mu: 0.5 * (e * k["d_rho2v"] - (k["rho"] * k["v"]) ** 2),
    "p_lowfreq": lambda k, e, mu: -0.5 * k["v"] * k["rho"] ** 2 * k["v"],
}


def _thermal_grid(p: ModelParams, order: int) -> EnergyGrid:
    width = THERMAL_WINDOW * p.temperature
    panel = 0.5 * min(p.temperature, p.gamma)
    n = max(2, int(math.ceil(2.0 * width / panel)))
    return EnergyGrid.from_edges(np.linspace(p.mu - width, p.mu + width, n + 1), order=order)


def _term(name: str, t, p: ModelParams, cfg: QuadratureConfig | None = None):
    cfg = cfg or QuadratureConfig()
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if name == "q1" and p.temperature == 0.0:
        out = np.zeros(t_arr.shape)
    elif p.temperature == 0.0:
        # -df/deps = delta(eps - mu)
        k = _kernels(t_arr, p.mu, p)
        out = -_TERMS[name](k, p.mu, p.mu)[..., 0] / H_PLANCK
    else:
        results = []
        for order in (cfg.order, cfg.order + 8):
            grid = _thermal_grid(p, order)
            k = _kernels(t_arr, grid.nodes, p)
            vals = _TERMS[name](k, grid.nodes, p.mu) * fermi_derivative(grid.nodes, p)
            results.append(grid.integrate(vals) / H_PLANCK)
        err = float(np.max(np.abs(results[1] - results[0])))
        scale = float(np.max(np.abs(results[1])))
        if err > cfg.abs_tol + cfg.rel_tol * scale:
            raise QuadratureFailure(f"{name}: thermal quadrature estimate {err:.3e}")
        out = results[1]
    return float(out[0]) if scalar else out.reshape(np.shape(t))


def ic1(t, p, cfg=None):
    """First-order charge current; at ``T=0`` it is ``rho(t, mu) deps_d/dt / h``."""
    return _term("ic1", t, p, cfg)


def ic2(t, p, cfg=None):
    return _term("ic2", t, p, cfg)


def q1(t, p, cfg=None):
    """First-order heat flux; identically zero at ``T=0``."""
    return _term("q1", t, p, cfg)


def q2(t, p, cfg=None):
    """Second-order heat flux; at ``T=0`` equal to ``[rho(t, mu) deps_d/dt]^2 / 2h = R_q ic1^2``."""
    return _term("q2", t, p, cfg)


def wt1(t, p, cfg=None):
    return _term("wt1", t, p, cfg)


def wt2(t, p, cfg=None):
    return _term("wt2", t, p, cfg)


def we1(t, p, cfg=None):
    return _term("we1", t, p, cfg)


def we2(t, p, cfg=None):
    return _term("we2", t, p, cfg)


def p_lowfreq(t, p, cfg=None):
    """Drive power to second order, ``-(deps_d/dt / 2) int d eps/h df/deps rho^2 deps_d/dt``."""
    return _term("p_lowfreq", t, p, cfg)


@dataclass(frozen=True)
class JouleFit:
    slope: float
    intercept: float
    max_residual: float
    relative_deviation: float  # |slope - R_q| / R_q


def joule_fit(q_dot, i_c) -> JouleFit:
    """Least-squares line ``Q_dot = slope * I_C^2 + intercept`` over the samples."""
    q_dot = np.asarray(q_dot, dtype=float)
    x = np.asarray(i_c, dtype=float) ** 2
    if x.size < 2 or np.ptp(x) == 0.0:
        raise DegenerateFit("charge current has no spread over the period; the slope is undefined")
    slope, intercept = np.polyfit(x, q_dot, 1)
    resid = q_dot - (slope * x + intercept)
    return JouleFit(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.max(np.abs(resid))),
        relative_deviation=abs(float(slope) - R_Q) / R_Q,
    )


def r_tilde(q_tilde_dot, ic1_values, fraction: float = MASK_FRACTION):
    """``Q~_dot / (I_C^(1))^2`` with points near the drive extrema masked.

    Returns ``(values, valid)``; masked entries hold 0 and ``valid`` is False
    there, so callers can write them as gaps.
    """
    q = np.asarray(q_tilde_dot, dtype=float)
    i1 = np.asarray(ic1_values, dtype=float)
    top = float(np.max(np.abs(i1))) if i1.size else 0.0
    valid = np.abs(i1) >= fraction * top if top > 0 else np.zeros(i1.shape, dtype=bool)
    values = np.zeros(q.shape)
    values[valid] = q[valid] / i1[valid] ** 2
    return values, valid


def pointwise_joule_deviation(q_dot, i_c, min_fraction: float = 0.1) -> float:
    """``max |Q_dot / (R_q I_C^2) - 1|`` over samples with ``|I_C| > min_fraction * max|I_C|``."""
    q = np.asarray(q_dot, dtype=float)
    i = np.asarray(i_c, dtype=float)
    keep = np.abs(i) > min_fraction * np.max(np.abs(i))
    return float(np.max(np.abs(q[keep] / (R_Q * i[keep] ** 2) - 1.0)))


@dataclass
class AdiabaticReport:
    params: ModelParams
    times: np.ndarray
    ic1: np.ndarray
    ic2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    wt1: np.ndarray
    wt2: np.ndarray
    we1: np.ndarray
    we2: np.ndarray
    p_lowfreq: np.ndarray
    r_fit: float
    r_tilde: np.ndarray
    r_tilde_valid: np.ndarray
    fit: JouleFit | None = None
    exact: dict = field(default_factory=dict, repr=False)

    COLUMNS = ("ic1", "ic2", "q1", "q2", "wt1", "wt2", "we1", "we2", "p_lowfreq")


def adiabatic_report(
    p: ModelParams,
    cfg: QuadratureConfig | None = None,
    n_times: int = 256,
    trace=None,
) -> AdiabaticReport:
    """Expansion terms on the period grid plus the Joule fit of the exact fluxes.

    ``trace`` is a :class:`~driven_level.flux.FluxTrace` on the same grid;
    it is computed when omitted.  The fit uses the exact ``Q_dot`` and
    ``I_C``; ``r_tilde`` divides the exact ``Q~_dot`` by ``(I_C^(1))^2``.
    """
    cfg = cfg or QuadratureConfig()
    if trace is None:
        from .flux import trace_period

        trace = trace_period(p, cfg, n_times=n_times)
    times = trace.times
    terms = {name: _term(name, times, p, cfg) for name in _TERMS}
    fit = joule_fit(trace.q_dot, trace.i_c)
    rt, valid = r_tilde(trace.q_tilde_dot, terms["ic1"])
    return AdiabaticReport(
        params=p,
        times=times,
        r_fit=fit.slope,
        r_tilde=rt,
        r_tilde_valid=valid,
        fit=fit,
        exact={"i_c": trace.i_c, "q_dot": trace.q_dot, "q_tilde_dot": trace.q_tilde_dot, "w_t": trace.w_t},
        **terms,
    )


__all__ = [
    "AdiabaticReport",
    "JouleFit",
    "adiabatic_report",
    "ic1",
    "ic2",
    "joule_fit",
    "p_lowfreq",
    "pointwise_joule_deviation",
    "q1",
    "q2",
    "r_tilde",
    "we1",
    "we2",
    "wt1",
    "wt2",
]
