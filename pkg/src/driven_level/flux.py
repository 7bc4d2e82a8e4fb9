"""Time-resolved charge, energy and heat fluxes of the driven level.

Sign conventions: ``I_C`` is the charge current into the reservoir
(``-dn_d/dt``), ``W_C`` the energy flux into the reservoir, ``W_T`` the
flux associated with the contact, ``W_D = -eps_d I_C`` the one associated
with the level and ``P = n_d deps_d/dt`` the power of the drive.  The three
energy fluxes satisfy ``W_C + W_T + W_D = 0``.

Two heat fluxes are provided:

* ``heat_flux = W_C + W_T/2 - mu I_C`` (half the contact flux counted with the reservoir)
* ``heat_flux_tilde = W_C - mu I_C``

``path="time"`` (default) uses the exact time-domain Green function,
either through closed-form energy integrals (``cfg.method="closed"``) or
explicit energy quadrature (``cfg.method="quadrature"``).
``path="harmonic"`` sums Floquet harmonics (moderate drive ratios only).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, PathMismatch
from .floquet_flux import harmonic_fluxes
from .green import (
    DEFAULT_POLICY,
    TruncationPolicy,
    checked_halfline_integral,
    green_time_derivative,
    green_time_energy,
    harmonics,
    occupation_nd,
)
from .model import E_CHARGE, H_PLANCK, ModelParams, fermi, level_energy, level_velocity
from .period import period_solution
from .quadrature import QuadratureConfig
from .scattering import build_smatrix, energy_flux_scattering

PATHS = ("time", "harmonic")

#: Drive ratios up to this use the scattering matrix for ``W_E`` in traces.
SCATTERING_MAX_ALPHA = 200.0


def _cfg(cfg):
    return cfg or QuadratureConfig()


def _shape(values, t):
    return float(values) if np.ndim(t) == 0 else np.asarray(values).reshape(np.shape(t))


def _pointwise(func, t):
    flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    return _shape(np.array([func(float(x)) for x in flat]), t)


def _check_paths(name, a, b, cfg: QuadratureConfig):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))), cfg.abs_tol)
    err = float(np.max(np.abs(a - b)))
    if err > cfg.engine_tol * scale + cfg.abs_tol:
        raise PathMismatch(f"{name}: time and harmonic paths differ by {err:.3e} (scale {scale:.3e})")


# --- quadrature route -----------------------------------------------------


def _current_quadrature(t: float, p: ModelParams, pol, cfg) -> float:
    def integrand(e):
        g = green_time_energy(t, e, p, pol)
        dg = green_time_derivative(t, e, p, pol)
        return fermi(e, p) * 2.0 * np.real(np.conj(g) * dg)

    return -p.gamma / (2.0 * math.pi) * checked_halfline_integral(integrand, p, cfg) * E_CHARGE


def _contact_quadrature(t: float, p: ModelParams, pol, cfg) -> float:
    def integrand(e):
        return fermi(e, p) * np.real(green_time_derivative(t, e, p, pol))

    return 2.0 * p.gamma / H_PLANCK * checked_halfline_integral(integrand, p, cfg)


# --- public flux operations -----------------------------------------------


def occupation(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """Level occupation ``n_d(t)`` (spectral periodic solution or energy quadrature per ``cfg.method``)."""
    cfg = _cfg(cfg)
    method = "spectral" if cfg.method == "closed" else "quadrature"
    return occupation_nd(t, p, pol, cfg, method=method)


def charge_current(
    t,
    p: ModelParams,
    cfg: QuadratureConfig | None = None,
    pol: TruncationPolicy | None = None,
    path: str = "time",
    cross_check: bool = False,
):
    """Charge current ``I_C(t) = -e dn_d/dt`` flowing into the reservoir."""
    cfg = _cfg(cfg)
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}")
    if path == "harmonic":
        values = harmonic_fluxes(harmonics(p, pol), cfg).series("i_c", t)
    elif cfg.method == "closed":
        values = period_solution(p, pol, cfg).charge_current(t)
    else:
        values = _pointwise(lambda x: _current_quadrature(x, p, pol, cfg), t)
    if cross_check:
        other = "harmonic" if path == "time" else "time"
        _check_paths("I_C", values, charge_current(t, p, cfg, pol, path=other), cfg)
    return values


def energy_flux_contact(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """Contact energy flux ``W_T(t) = 2 Re int d eps/h Gamma f dG/dt``; zero on average."""
    cfg = _cfg(cfg)
    if cfg.method == "closed":
        return period_solution(p, pol, cfg).contact_flux(t)
    return _pointwise(lambda x: _contact_quadrature(x, p, pol, cfg), t)


def energy_flux_dot_level(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """``W_D(t) = -eps_d(t) I_C(t) / e``."""
    return _shape(-level_energy(t, p) * np.asarray(charge_current(t, p, cfg, pol)) / E_CHARGE, t)


def energy_flux_reservoir(
    t,
    p: ModelParams,
    cfg: QuadratureConfig | None = None,
    pol: TruncationPolicy | None = None,
    path: str = "time",
    cross_check: bool = False,
):
    """Energy flux into the reservoir.

    On the time path it is ``-W_T - W_D``; the harmonic path evaluates the
    Floquet sum directly and so tests the balance independently.
    """
    cfg = _cfg(cfg)
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}")
    if path == "harmonic":
        values = harmonic_fluxes(harmonics(p, pol), cfg).series("w_c", t)
    else:
        w_t = np.asarray(energy_flux_contact(t, p, cfg, pol))
        w_d = np.asarray(energy_flux_dot_level(t, p, cfg, pol))
        values = _shape(-w_t - w_d, t)
    if cross_check:
        other = "harmonic" if path == "time" else "time"
        _check_paths("W_C", values, energy_flux_reservoir(t, p, cfg, pol, path=other), cfg)
    return values


def power_source(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """Power delivered by the drive, ``n_d(t) deps_d/dt``."""
    return _shape(np.asarray(occupation(t, p, cfg, pol)) * level_velocity(t, p), t)


def heat_flux(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """``W_C + W_T/2 - mu I_C / e``."""
    i_c = np.asarray(charge_current(t, p, cfg, pol))
    w_t = np.asarray(energy_flux_contact(t, p, cfg, pol))
    w_c = -w_t + level_energy(t, p) * i_c / E_CHARGE
    return _shape(w_c + 0.5 * w_t - p.mu * i_c / E_CHARGE, t)


def heat_flux_tilde(t, p: ModelParams, cfg: QuadratureConfig | None = None, pol: TruncationPolicy | None = None):
    """``W_C - mu I_C / e``; can turn negative during the cycle."""
    i_c = np.asarray(charge_current(t, p, cfg, pol))
    w_t = np.asarray(energy_flux_contact(t, p, cfg, pol))
    w_c = -w_t + level_energy(t, p) * i_c / E_CHARGE
    return _shape(w_c - p.mu * i_c / E_CHARGE, t)


# --- period traces --------------------------------------------------------


SERIES = ("i_c", "w_c", "w_t", "w_d", "w_e", "power", "q_dot", "q_tilde_dot", "n_d")


@dataclass
class FluxTrace:
    """All fluxes sampled on ``times = j T_drive / n`` for ``j = 0..n-1``.

    ``averages`` are exact period averages (taken from the Fourier
    representation, not from the ``n`` samples); ``tails`` estimate the
    contribution of the band below the cutoff ``-D``; ``w_e_source`` is
    ``"scattering"`` when ``w_e`` comes from the Floquet S matrix and
    ``"identity"`` when it is ``W_C + W_T/2``.
    """

    params: ModelParams
    times: np.ndarray
    i_c: np.ndarray
    w_c: np.ndarray
    w_t: np.ndarray
    w_d: np.ndarray
    w_e: np.ndarray
    power: np.ndarray
    q_dot: np.ndarray
    q_tilde_dot: np.ndarray
    n_d: np.ndarray
    residual_conservation: np.ndarray
    residual_reactance: np.ndarray
    averages: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)
    w_e_source: str = "identity"
    tolerance: float = 1e-8

    @property
    def t_over_period(self) -> np.ndarray:
        return self.times / self.params.period

    def checks(self, reactance_tol: float = 1e-6) -> dict:
        """Residuals of every trace invariant with the bound each must meet."""
        tol = self.tolerance
        a = self.averages
        max_wd = float(np.max(np.abs(self.w_d)))
        max_wt = float(np.max(np.abs(self.w_t)))
        max_we = float(np.max(np.abs(self.w_e)))
        max_ic = float(np.max(np.abs(self.i_c)))
        p_scale = max(abs(a["power"]), 1e-300)
        out = {
            "conservation": (float(np.max(np.abs(self.residual_conservation))), tol * max_wd),
            "reactance": (float(np.max(np.abs(self.residual_reactance))), reactance_tol * max_we),
            "mean_w_t": (abs(a["w_t"]), tol * max_wt),
            "mean_i_c": (abs(a["i_c"]), tol * max_ic),
            "mean_q_dot_vs_power": (abs(a["q_dot"] - a["power"]), tol * p_scale),
            "mean_q_dot_vs_q_tilde_dot": (abs(a["q_dot"] - a["q_tilde_dot"]), tol * p_scale),
        }
        return {k: {"residual": r, "bound": b, "pass": bool(r <= b)} for k, (r, b) in out.items()}

    def validate(self, reactance_tol: float = 1e-6) -> None:
        """Raise :class:`InvariantViolation` listing every failed check."""
        failed = {k: v for k, v in self.checks(reactance_tol).items() if not v["pass"]}
        if failed:
            detail = ", ".join(f"{k}: {v['residual']:.3e} > {v['bound']:.3e}" for k, v in failed.items())
            raise InvariantViolation(f"trace invariants violated ({detail})")


def _chunks(t: np.ndarray, threads: int):
    k = max(1, min(threads, t.size))
    return np.array_split(t, k)


def _evaluate(func, t: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1:
        return np.asarray(func(t))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(func, _chunks(t, threads)))
    return np.concatenate([np.atleast_1d(x) for x in parts])


def trace_period(
    p: ModelParams,
    cfg: QuadratureConfig | None = None,
    n_times: int = 256,
    pol: TruncationPolicy | None = None,
    w_e_path: str = "auto",
    threads: int = 1,
    validate: bool = True,
) -> FluxTrace:
    """Sample every flux over one period and attach residuals, averages and tails.

    ``w_e_path``: ``"scattering"`` forces the Floquet S matrix, ``"identity"``
    uses ``W_C + W_T/2``, ``"auto"`` picks the S matrix when the drive ratio
    is at most ``SCATTERING_MAX_ALPHA``.
    """
    if n_times < 16:
        raise ValueError("n_times must be >= 16")
    if w_e_path not in ("auto", "scattering", "identity"):
        raise ValueError(f"unknown w_e_path {w_e_path!r}")
    cfg = _cfg(cfg)
    pol = pol or DEFAULT_POLICY
    times = p.period * np.arange(n_times) / n_times
    sol = period_solution(p, pol, cfg)

    i_c = _evaluate(lambda x: charge_current(x, p, cfg, pol), times, threads)
    w_t = _evaluate(lambda x: energy_flux_contact(x, p, cfg, pol), times, threads)
    n_d = _evaluate(lambda x: occupation(x, p, cfg, pol), times, threads)
    eps_d = level_energy(times, p)
    w_d = -eps_d * i_c / E_CHARGE
    w_c = -w_t - w_d
    power = n_d * level_velocity(times, p)
    q_dot = w_c + 0.5 * w_t - p.mu * i_c / E_CHARGE
    q_tilde_dot = w_c - p.mu * i_c / E_CHARGE

    use_s = w_e_path == "scattering" or (w_e_path == "auto" and p.alpha <= SCATTERING_MAX_ALPHA)
    mean_w_e = None
    if use_s:
        smat = build_smatrix(harmonics(p, pol, max_alpha=math.inf if w_e_path == "scattering" else SCATTERING_MAX_ALPHA))
        w_e = np.asarray(energy_flux_scattering(times, smat, cfg))
        mean_w_e = float(smat.energy_flux_components[smat.n_max].real)
    else:
        w_e = w_c + 0.5 * w_t

    # period averages from the spectral solution on a grid fine enough for products
    theta, n_f, i_f, wt_f = sol.fine_samples()
    t_f = theta / p.omega
    wd_f = -level_energy(t_f, p) * i_f / E_CHARGE
    wc_f = -wt_f - wd_f
    averages = {
        "i_c": float(np.mean(i_f)),
        "w_t": float(np.mean(wt_f)),
        "w_d": float(np.mean(wd_f)),
        "w_c": float(np.mean(wc_f)),
        "power": float(np.mean(n_f * level_velocity(t_f, p))),
        "q_dot": float(np.mean(wc_f + 0.5 * wt_f - p.mu * i_f / E_CHARGE)),
        "q_tilde_dot": float(np.mean(wc_f - p.mu * i_f / E_CHARGE)),
        "n_d": float(np.mean(n_f)),
    }
    averages["w_e"] = mean_w_e if mean_w_e is not None else float(np.mean(wc_f + 0.5 * wt_f))

    trace = FluxTrace(
        params=p,
        times=times,
        i_c=i_c,
        w_c=w_c,
        w_t=w_t,
        w_d=w_d,
        w_e=w_e,
        power=power,
        q_dot=q_dot,
        q_tilde_dot=q_tilde_dot,
        n_d=n_d,
        residual_conservation=w_c + w_t + w_d,
        residual_reactance=w_e - w_c - 0.5 * w_t,
        averages=averages,
        tails=dict(sol.tails),
        w_e_source="scattering" if use_s else "identity",
        tolerance=cfg.engine_tol,
    )
    if validate:
        trace.validate()
    return trace


__all__ = [
    "FluxTrace",
    "SERIES",
    "charge_current",
    "energy_flux_contact",
    "energy_flux_dot_level",
    "energy_flux_reservoir",
    "heat_flux",
    "heat_flux_tilde",
    "occupation",
    "power_source",
    "trace_period",
]
