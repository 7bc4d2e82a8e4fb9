"""Charge current and reservoir energy flux from Floquet harmonics.

Both fluxes are written as Fourier series ``X(t) = sum_l exp(-i l W t) X_l``
whose components are energy integrals of products of harmonics
``G(k, eps)``.  With the substitution ``eps -> eps + n W`` every
Fermi-window term becomes

    int d eps [f(eps) - f(eps + n W)] (...)

which at ``T = 0`` is supported on ``n`` sideband cells below ``mu`` (or
above it for ``n < 0``).  The energy grid is therefore aligned with the
sideband ladder ``mu + k W`` so window edges fall on panel edges.  Pieces
that are not windowed decay like ``1/eps^2`` and are integrated on the
half line.

This is the cross-check path for moderate drive ratios; the periodic
solver in :mod:`driven_level.period` handles the slow-driving regime.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureFailure
from .green import FloquetHarmonics
from .model import H_PLANCK, HBAR, EnergyGrid, ModelParams, fermi
from .quadrature import QuadratureConfig, halfline_rule


def window_weights(grid: EnergyGrid, shift: float, p: ModelParams):
    """Indices and weights ``w_j [f(eps_j) - f(eps_j + shift)]`` restricted to the support."""
    diff = fermi(grid.nodes, p) - fermi(grid.nodes + shift, p)
    idx = np.nonzero(np.abs(diff) > 1e-300)[0]
    return idx, grid.weights[idx] * diff[idx]


def padded_table(h: FloquetHarmonics, eps, n_rows: int) -> np.ndarray:
    """``G(k, eps)`` for ``|k| <= n_rows``, zero outside the retained harmonics."""
    table = np.zeros((2 * n_rows + 1, np.size(eps)), dtype=complex)
    keep = min(n_rows, h.n_max)
    table[n_rows - keep : n_rows + keep + 1] = h.at(eps, range(-keep, keep + 1))
    return table


@dataclass(frozen=True)
class HarmonicFluxes:
    """Fourier components of ``I_C`` and ``W_C`` for ``|l| <= n_max``."""

    params: ModelParams
    n_max: int
    i_c: np.ndarray
    w_c: np.ndarray
    quadrature_error: float = 0.0

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def series(self, name: str, t) -> np.ndarray:
        coeffs = {"i_c": self.i_c, "w_c": self.w_c}[name]
        return fourier_series(coeffs, self.orders, t, self.params.omega)


def fourier_series(coeffs, orders, t, omega):
    """Real part of ``sum_l exp(-i l W t) c_l``."""
    theta = omega * np.asarray(t, dtype=float)
    values = np.real(np.exp(-1j * np.multiply.outer(theta, orders)) @ coeffs)
    return float(values) if np.ndim(t) == 0 else values


def _components(h: FloquetHarmonics, cfg: QuadratureConfig, order: int):
    p = h.params
    L = h.n_max
    w = HBAR * p.omega
    ls = np.arange(-L, L + 1)
    grid = EnergyGrid.sidebands(p, L, order=order)
    table = padded_table(h, grid.nodes, 2 * L)  # row k + 2L holds G(k)
    c = 2 * L

    a_i = np.zeros(ls.size, dtype=complex)
    a_w = np.zeros(ls.size, dtype=complex)
    b_i = np.zeros(ls.size, dtype=complex)
    b_w = np.zeros(ls.size, dtype=complex)

    for n in range(-L, L + 1):
        if n == 0:
            continue
        idx, wts = window_weights(grid, n * w, p)
        if idx.size == 0:
            continue
        x = grid.nodes[idx]
        # G(l+n) G*(n) at the same energy; eps -> eps + n W shifts the energy factor only
        weights = wts * np.conj(table[c + n, idx])
        rows = table[c + n + ls][:, idx]
        b_i += rows @ weights
        b_w += rows @ (weights * (x + n * w))

    for k, l in enumerate(ls):
        if l == 0:
            continue
        idx, wts = window_weights(grid, l * w, p)
        if idx.size == 0:
            continue
        x = grid.nodes[idx] + l * w
        g = h.at(x, [-l])[0] if abs(l) <= h.n_max else np.zeros(x.size)
        a_i[k] = np.sum(wts * 1j * np.conj(g))
        a_w[k] = np.sum(wts * 1j * np.conj(g) * x)

    # non-windowed pieces, both decaying like 1/eps^2
    nodes, weights = halfline_rule(p, dataclasses.replace(cfg, order=order), n_max=L)
    fw = weights * fermi(nodes, p)
    half = padded_table(h, nodes, 2 * L)
    corr = np.zeros(ls.size, dtype=complex)
    for n in range(-L, L + 1):
        corr += half[c + n + ls] @ (fw * np.conj(half[c + n]))
    b_w += 0.5 * ls * w * corr
    for k, l in enumerate(ls):
        if l == 0 or abs(l) > h.n_max:
            continue
        g = h.at(nodes + l * w, [-l])[0]
        a_w[k] += -l * w * np.sum(fw * 1j * np.conj(g))

    return -(a_i - b_i) / H_PLANCK, -(a_w - b_w) / H_PLANCK


def harmonic_fluxes(h: FloquetHarmonics, cfg: QuadratureConfig | None = None) -> HarmonicFluxes:
    """Fourier components of ``I_C`` and ``W_C``, integrated at two Gauss orders.

    Raises :class:`QuadratureFailure` when the two rules disagree beyond
    ``cfg.abs_tol + 10 cfg.rel_tol * scale``.
    """
    cfg = cfg or QuadratureConfig()
    i1, w1 = _components(h, cfg, cfg.order)
    i2, w2 = _components(h, cfg, cfg.order + 8)
    err = 0.0
    for lo, hi in ((i1, i2), (w1, w2)):
        scale = float(np.max(np.abs(hi))) if hi.size else 0.0
        e = float(np.max(np.abs(hi - lo))) if hi.size else 0.0
        if e > cfg.abs_tol + 10.0 * cfg.rel_tol * scale:
            raise QuadratureFailure(f"harmonic flux quadrature estimate {e:.3e} (scale {scale:.3e})")
        err = max(err, e)
    return HarmonicFluxes(params=h.params, n_max=h.n_max, i_c=i2, w_c=w2, quadrature_error=err)


__all__ = ["HarmonicFluxes", "harmonic_fluxes", "fourier_series", "window_weights", "padded_table"]
