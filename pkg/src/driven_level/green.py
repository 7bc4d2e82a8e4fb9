"""Retarded Green function of the harmonically driven level.

For a flat band the two-time retarded function is known exactly,

    G(t, t - tau) = -i exp(-i int_{t-tau}^{t} eps_d(s) ds - Gamma tau / 2),

and its Fourier transform over ``tau`` follows from the Jacobi-Anger
expansion of the phase:

    G(t, eps) = exp(-i a sin(W t)) sum_m J_m(a) exp(i m W t) / (eps - eps0 - m W + i Gamma/2)

with ``a = V_ac / (hbar W)``.  The single sum costs O(a) per point, which
is what makes a drive ratio of 1e4 tractable.  ``green_oracle`` evaluates
the defining ``tau`` integral by adaptive quadrature and is used only to
validate the series.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import integrate

from .bessel import bessel_j_table, default_order
from .errors import AlphaTooLarge, QuadratureFailure, TruncationUnconverged
from .model import HBAR, EnergyGrid, ModelParams, fermi, level_energy
from .quadrature import QuadratureConfig, halfline_rule, lower_tail_rule

_CHUNK = 2_000_000  # complex entries per temporary (points x orders)


@dataclass(frozen=True)
class TruncationPolicy:
    """Series cut-off: ``n_max = ceil(a + 8 a^(1/3) + 20)`` unless given explicitly."""

    tol: float = 1e-8
    n_max: int | None = None

    def __post_init__(self):
        if not 0.0 < self.tol <= 1e-6:
            raise ValueError("truncation tol must lie in (0, 1e-6]")
        if self.n_max is not None and self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    def order_for(self, p: ModelParams) -> int:
        return int(self.n_max) if self.n_max is not None else default_order(p.alpha)


DEFAULT_POLICY = TruncationPolicy()


def bessel_series(p: ModelParams, pol: TruncationPolicy | None = None):
    """Orders and Bessel weights of the series, after the ``sum J_m^2 = 1`` gate."""
    pol = pol or DEFAULT_POLICY
    n_max = pol.order_for(p)
    m, jm = bessel_j_table(p.alpha, n_max)
    defect = abs(1.0 - float(np.dot(jm, jm)))
    if defect > pol.tol:
        raise TruncationUnconverged(
            f"sum of J_m({p.alpha:g})^2 over |m|<={n_max} misses 1 by {defect:.3e} (tol {pol.tol:g})"
        )
    return m, jm


def _poles(m, p: ModelParams):
    return p.epsilon0 + m * HBAR * p.omega - 0.5j * p.gamma


def _series_sum(theta, eps, coeffs, m, poles):
    """``sum_m coeffs_m exp(i m theta) / (eps - pole_m)`` for flat arrays theta, eps."""
    out = np.empty(theta.shape, dtype=complex)
    step = max(1, _CHUNK // max(1, m.size))
    for start in range(0, theta.size, step):
        sl = slice(start, start + step)
        phase = np.exp(1j * np.outer(theta[sl], m))
        out[sl] = np.sum(coeffs * phase / (eps[sl, None] - poles), axis=1)
    return out


def green_time_energy(t, eps, p: ModelParams, pol: TruncationPolicy | None = None):
    """``G^r(t, eps)`` from the Bessel series; broadcasts ``t`` against ``eps``."""
    pol = pol or DEFAULT_POLICY
    m, jm = bessel_series(p, pol)
    t_b, e_b = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(eps, dtype=float))
    theta = p.omega * t_b.ravel()
    e_flat = e_b.ravel()
    poles = _poles(m, p)
    g = np.exp(-1j * p.alpha * np.sin(theta)) * _series_sum(theta, e_flat, jm, m, poles)

    # last retained orders relative to the partial sum
    edge = np.abs(jm[0]) / np.abs(e_flat - poles[0]) + np.abs(jm[-1]) / np.abs(e_flat - poles[-1])
    worst = float(np.max(edge / np.maximum(np.abs(g), 1e-300))) if g.size else 0.0
    if worst > pol.tol:
        raise TruncationUnconverged(f"last Bessel terms are {worst:.3e} of the sum (tol {pol.tol:g})")
    return g.reshape(t_b.shape)


def green_time_derivative(t, eps, p: ModelParams, pol: TruncationPolicy | None = None):
    """``d/dt G^r(t, eps)`` by differentiating the Bessel series term by term.

    Each weight ``a_m(t) = J_m exp(-i a sin W t + i m W t)`` has derivative
    ``i (m hbar W - V_ac cos W t) a_m``.  The result equals the equation of
    motion ``-i [1 - (eps - eps_d(t) + i Gamma/2) G(t, eps)]`` but keeps its
    ``1/eps^2`` decay at large ``|eps|``, where the bracket would cancel
    catastrophically for large drive ratios.
    """
    pol = pol or DEFAULT_POLICY
    m, jm = bessel_series(p, pol)
    t_b, e_b = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(eps, dtype=float))
    theta = p.omega * t_b.ravel()
    e_flat = e_b.ravel()
    poles = _poles(m, p)
    out = np.empty(theta.shape, dtype=complex)
    step = max(1, _CHUNK // max(1, m.size))
    for start in range(0, theta.size, step):
        sl = slice(start, start + step)
        rate = m[None, :] * HBAR * p.omega - p.v_ac * np.cos(theta[sl])[:, None]
        phase = np.exp(1j * (np.outer(theta[sl], m) - p.alpha * np.sin(theta[sl])[:, None]))
        out[sl] = 1j * np.sum(jm * rate * phase / (e_flat[sl, None] - poles), axis=1)
    return out.reshape(t_b.shape)


def green_eom_derivative(t, eps, p: ModelParams, pol: TruncationPolicy | None = None, g=None):
    """Equation-of-motion form ``-i [1 - (eps - eps_d(t) + i Gamma/2) G(t, eps)]``.

    ``i d_t G(t, t') = delta(t - t') + (eps_d(t) - i Gamma/2) G(t, t')``
    transforms to this expression.  Accurate near the resonance; used to
    cross-check :func:`green_time_derivative`.
    """
    if g is None:
        g = green_time_energy(t, eps, p, pol)
    x = np.asarray(eps, dtype=float) - level_energy(t, p) + 0.5j * p.gamma
    return -1j * (1.0 - x * g)


def _phase_integral(tau, t, p: ModelParams):
    """``int_{t-tau}^{t} eps_d(s) ds`` written without the sin-difference cancellation."""
    w = p.omega
    return p.epsilon0 * tau + (2.0 * p.v_ac / w) * np.cos(w * (t - 0.5 * tau)) * np.sin(0.5 * w * tau)


def green_oracle(t: float, eps: float, p: ModelParams, quad_tol: float = 1e-10) -> complex:
    """Independent ``G^r(t, eps)`` from adaptive quadrature over the time delay.

    Integrates ``-i exp(i eps tau - i Phi(tau) - Gamma tau/2)`` on
    ``[0, 2 ln(1/tol)/Gamma]``; beyond that the integrand is bounded by
    ``tol`` and its integral by ``2 tol / Gamma``.
    """
    if not 0.0 < quad_tol <= 1e-8:
        raise ValueError("quad_tol must lie in (0, 1e-8]")
    tau_max = 2.0 * math.log(1.0 / quad_tol) / p.gamma
    fastest = abs(eps) + abs(p.epsilon0) + p.v_ac + 1.0
    n_chunks = max(1, int(math.ceil(tau_max * fastest / (20.0 * math.pi))))
    edges = np.linspace(0.0, tau_max, n_chunks + 1)

    def integrand(tau, part):
        val = -1j * np.exp(1j * (eps * tau - _phase_integral(tau, t, p)) - 0.5 * p.gamma * tau)
        return val.real if part == 0 else val.imag

    total = 0.0 + 0.0j
    err = 0.0
    each = 0.25 * quad_tol / n_chunks
    for a, b in zip(edges[:-1], edges[1:]):
        re, e_re = integrate.quad(integrand, a, b, args=(0,), epsabs=each, epsrel=0.0, limit=200)
        im, e_im = integrate.quad(integrand, a, b, args=(1,), epsabs=each, epsrel=0.0, limit=200)
        total += re + 1j * im
        err += e_re + e_im
    if not err <= quad_tol:
        raise QuadratureFailure(f"tau quadrature error estimate {err:.3e} exceeds {quad_tol:g}")
    return complex(total)


@dataclass(frozen=True)
class FloquetHarmonics:
    """Fourier coefficients ``G(n, eps)`` of ``G^r(t, eps) = sum_n exp(-i n W t) G(n, eps)``.

    ``coeffs[n + n_max, j]`` holds ``G(n, grid.nodes[j])``.  ``bessel_order``
    is the truncation of the Bessel weights; ``n_max`` the number of
    retained harmonics, which may exceed it when the coefficient tail is
    still above tolerance.
    """

    params: ModelParams
    n_max: int
    grid: EnergyGrid
    coeffs: np.ndarray = field(repr=False)
    bessel_order: int = 0
    tol: float = 1e-8

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def at(self, eps, orders: Iterable[int] | None = None) -> np.ndarray:
        """``G(n, eps)`` for arbitrary energies; rows follow ``orders`` (default all table orders)."""
        orders = self.orders if orders is None else np.asarray(list(orders), dtype=int)
        eps = np.asarray(eps, dtype=float)
        table = _harmonic_table(self.params, self.bessel_order, orders, eps.ravel())
        return table.reshape(orders.shape + eps.shape)

    def reconstruct(self, t, eps=None) -> np.ndarray:
        """``sum_n exp(-i n W t) G(n, eps)``; on the grid unless ``eps`` is given."""
        table = self.coeffs if eps is None else self.at(eps)
        phase = np.exp(-1j * self.orders * self.params.omega * float(t))
        return phase @ table


def _harmonic_table(p: ModelParams, bessel_order: int, orders: np.ndarray, eps: np.ndarray) -> np.ndarray:
    m, jm = bessel_j_table(p.alpha, bessel_order)
    # J_{n+m}; zero outside the retained Bessel range
    idx = orders[:, None] + m[None, :]
    inside = np.abs(idx) <= bessel_order
    jn = np.where(inside, jm[np.clip(idx + bessel_order, 0, 2 * bessel_order)], 0.0)
    weights = jn * jm[None, :]
    keep = np.any(weights != 0.0, axis=0)
    weights, poles = weights[:, keep], _poles(m[keep], p)
    out = np.empty((orders.size, eps.size), dtype=complex)
    step = max(1, _CHUNK // max(1, poles.size))
    for start in range(0, eps.size, step):
        sl = slice(start, start + step)
        out[:, sl] = weights @ (1.0 / (eps[None, sl] - poles[:, None]))
    return out


def harmonics(
    p: ModelParams,
    pol: TruncationPolicy | None = None,
    grid: EnergyGrid | None = None,
    max_alpha: float = 200.0,
) -> FloquetHarmonics:
    """Tabulate ``G(n, eps) = sum_m J_{n+m}(a) J_m(a) / (eps - eps0 - m W + i Gamma/2)``.

    The harmonic double sum is meant for cross-checks at moderate ``a``;
    above ``max_alpha`` :class:`AlphaTooLarge` is raised (pass
    ``max_alpha=inf`` to force it).
    """
    pol = pol or DEFAULT_POLICY
    if p.alpha > max_alpha:
        raise AlphaTooLarge(f"drive ratio {p.alpha:g} exceeds {max_alpha:g}; use the time-domain path")
    bessel_series(p, pol)  # sum-rule gate
    order = pol.order_for(p)
    if grid is None:
        grid = EnergyGrid.sidebands(p, order)

    n_harm = order
    table = _harmonic_table(p, order, np.arange(-n_harm, n_harm + 1), grid.nodes)
    scale = float(np.max(np.abs(table[n_harm]))) or 1.0
    tail = float(np.max(np.abs(table[[0, -1]]))) / scale
    if tail > pol.tol:
        # every product J_{n+m} J_m vanishes beyond |n| = 2 * order
        n_harm = 2 * order
        table = _harmonic_table(p, order, np.arange(-n_harm, n_harm + 1), grid.nodes)
        tail = float(np.max(np.abs(table[[0, -1]]))) / scale
        if tail > pol.tol:
            raise TruncationUnconverged(f"harmonic tail {tail:.3e} above tol {pol.tol:g}")
    table.setflags(write=False)
    return FloquetHarmonics(params=p, n_max=n_harm, grid=grid, coeffs=table, bessel_order=order, tol=pol.tol)


def _rule_integral(func, nodes, weights):
    return np.sum(weights * func(nodes))


def occupation_nd(
    t,
    p: ModelParams,
    pol: TruncationPolicy | None = None,
    cfg: QuadratureConfig | None = None,
    method: str = "quadrature",
):
    """Level occupation ``n_d(t) = int d eps/(2 pi) f Gamma |G^r(t, eps)|^2``.

    ``method="quadrature"`` integrates on a graded grid down to ``-D`` and
    adds the band below the cutoff with a mapped tail rule.
    ``method="spectral"`` uses the periodic solution of
    ``dn/dt = -Gamma (n - s(t))`` built from closed-form energy integrals
    (see :mod:`driven_level.period`); it is the fast path for long traces.
    """
    cfg = cfg or QuadratureConfig()
    if method == "spectral":
        from .period import period_solution

        return period_solution(p, pol, cfg).occupation(t)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    values = np.array([_occupation_quadrature(float(tt), p, pol, cfg) for tt in t_arr])
    return values.reshape(np.shape(t)) if np.ndim(t) else float(values[0])


def _occupation_quadrature(t: float, p: ModelParams, pol, cfg: QuadratureConfig) -> float:
    def density(e):
        g = green_time_energy(t, e, p, pol)
        return fermi(e, p) * (g.real**2 + g.imag**2)

    value = checked_halfline_integral(density, p, cfg)
    n = p.gamma * value / (2.0 * math.pi)
    if not -1e-12 <= n <= 1.0 + 1e-12:
        raise QuadratureFailure(f"occupation {n} left [0, 1]")
    return n


def checked_halfline_integral(func, p: ModelParams, cfg: QuadratureConfig, upper: float | None = None):
    """``int_{-inf}^{upper} func`` on two Gauss orders; raises when they disagree."""
    results = []
    for order in (cfg.order, cfg.order + 8):
        nodes, weights = halfline_rule(p, dataclasses.replace(cfg, order=order), upper=upper)
        results.append(_rule_integral(func, nodes, weights))
    err = abs(results[1] - results[0])
    if err > cfg.abs_tol + cfg.rel_tol * abs(results[1]):
        raise QuadratureFailure(f"energy quadrature estimate {err:.3e} above tolerance")
    return results[1]


def lower_tail(func, cutoff: float):
    """``int_{-inf}^{-cutoff} func`` with the mapped Gauss rule."""
    nodes, weights = lower_tail_rule(cutoff)
    return np.sum(weights * func(nodes))


# --- golden records -------------------------------------------------------

GOLDEN_HEADER = "# t eps re_G im_G tolerance"


def write_golden(path, records, comment: str = "") -> None:
    """Write ``(t, eps, re, im, tol)`` records, one per line, 17 significant digits."""
    path = Path(path)
    lines = [GOLDEN_HEADER]
    if comment:
        lines.extend("# " + line for line in comment.splitlines())
    for t, e, re, im, tol in records:
        lines.append(" ".join(f"{v:.17g}" for v in (t, e, re, im, tol)))
    path.write_text("\n".join(lines) + "\n")


def read_golden(path) -> list[tuple[float, float, complex, float]]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        t, e, re, im, tol = (float(v) for v in line.split())
        out.append((t, e, complex(re, im), tol))
    return out


__all__ = [
    "TruncationPolicy",
    "FloquetHarmonics",
    "bessel_series",
    "green_time_energy",
    "green_time_derivative",
    "green_eom_derivative",
    "green_oracle",
    "harmonics",
    "occupation_nd",
    "write_golden",
    "read_golden",
]
