"""Floquet scattering matrix of the driven level and the energy flux it carries.

The sideband amplitudes follow from the retarded harmonics through

    S(eps_m, eps_n) = delta_mn - i Gamma G(m - n, eps_n),   eps_n = eps + n hbar W,

so a table of ``S_k(eps) = delta_k0 - i Gamma G(k, eps)`` on one energy grid
holds every entry.  The energy flux into the reservoir in scattering
language is

    W_E(t) = sum_{n,q} exp(-i n W t) int d eps (2 eps + (2q + n) W) / (2h)
             S_q*(eps) S_{n+q}(eps) [f(eps) - f(eps + q W)].

The occupation difference is written with the order that makes the cycle
average equal to the absorbed power (positive); see the tests for the
check of ``W_E = W_C + W_T/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import TruncationUnconverged
from .floquet_flux import fourier_series, window_weights
from .green import FloquetHarmonics
from .model import H_PLANCK, HBAR, EnergyGrid, ModelParams
from .quadrature import QuadratureConfig


@dataclass(frozen=True)
class FloquetSMatrix:
    """Sideband amplitudes ``S_k(eps)`` for ``|k| <= n_max`` on ``grid``.

    ``amps[k + n_max, j] = S_k(grid.nodes[j])``.  Entries of the full matrix
    at other energies are produced on demand from the harmonics.
    """

    params: ModelParams
    n_max: int
    grid: EnergyGrid
    amps: np.ndarray = field(repr=False)
    harmonics: FloquetHarmonics = field(repr=False, default=None)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def element(self, m: int, n: int, eps) -> np.ndarray:
        """``S(eps_m, eps_n)`` with ``eps_k = eps + k hbar W``."""
        e_n = np.asarray(eps, dtype=float) + n * HBAR * self.params.omega
        k = m - n
        g = self.harmonics.at(e_n, [k])[0] if abs(k) <= self.harmonics.n_max else 0.0
        return (1.0 if m == n else 0.0) - 1j * self.params.gamma * g

    def matrix(self, eps: float, size: int | None = None) -> np.ndarray:
        """Square block ``S(eps_m, eps_n)`` for ``|m|, |n| <= size`` (default ``n_max``)."""
        size = self.n_max if size is None else int(size)
        idx = np.arange(-size, size + 1)
        w = HBAR * self.params.omega
        h = self.harmonics
        # column n needs G(m - n, eps + n W) for every row m
        span = min(2 * size, h.n_max)
        table = h.at(float(eps) + idx * w, range(-span, span + 1))  # (orders, columns)
        diff = idx[:, None] - idx[None, :]
        inside = np.abs(diff) <= span
        g = np.where(inside, table[np.clip(diff + span, 0, 2 * span), np.arange(idx.size)[None, :]], 0.0)
        return np.eye(idx.size) - 1j * self.params.gamma * g

    @cached_property
    def energy_flux_components(self) -> np.ndarray:
        """Fourier components ``W_E,n`` for ``|n| <= n_max``."""
        p = self.params
        L = self.n_max
        w = HBAR * p.omega
        ns = np.arange(-L, L + 1)
        padded = np.zeros((4 * L + 1, self.grid.nodes.size), dtype=complex)
        padded[L : 3 * L + 1] = self.amps
        c = 2 * L
        out = np.zeros(ns.size, dtype=complex)
        for q in range(-L, L + 1):
            if q == 0:
                continue
            idx, wts = window_weights(self.grid, q * w, p)
            if idx.size == 0:
                continue
            x = self.grid.nodes[idx]
            a = wts * np.conj(padded[c + q, idx]) / (2.0 * H_PLANCK)
            rows = padded[c + q + ns][:, idx]
            out += rows @ (2.0 * x * a) + (2 * q + ns) * w * (rows @ a)
        return out


def build_smatrix(h: FloquetHarmonics) -> FloquetSMatrix:
    """Scattering amplitudes on a sideband-aligned grid covering every window ``|q| <= n_max``."""
    p = h.params
    grid = EnergyGrid.sidebands(p, h.n_max)
    table = h.at(grid.nodes)
    amps = -1j * p.gamma * table
    amps[h.n_max] += 1.0
    if not np.all(np.isfinite(amps)):
        raise TruncationUnconverged("non-finite scattering amplitudes")
    amps.setflags(write=False)
    return FloquetSMatrix(params=p, n_max=h.n_max, grid=grid, amps=amps, harmonics=h)


def unitarity_defect(s: FloquetSMatrix, n_energies: int = 64) -> float:
    """``max |sum_n S*(eps_n, eps) S(eps_n, eps_m) - delta_0m|``.

    Checked for ``|m| <= n_max // 2`` so that every sideband coupled to the
    tested column lies inside the truncated matrix, at ``n_energies``
    energies spread over the grid.
    """
    nodes = s.grid.nodes
    pick = np.unique(np.linspace(0, nodes.size - 1, min(n_energies, nodes.size)).round().astype(int))
    half = s.n_max // 2
    worst = 0.0
    for eps in nodes[pick]:
        mat = s.matrix(eps)
        c = s.n_max
        cols = mat[:, c - half : c + half + 1]
        prod = np.conj(mat[:, c]) @ cols
        prod[half] -= 1.0
        worst = max(worst, float(np.max(np.abs(prod))))
    return worst


def energy_flux_scattering(t, s: FloquetSMatrix, cfg: QuadratureConfig | None = None):
    """``W_E(t)`` from the sideband amplitudes (real part of the Fourier series)."""
    return fourier_series(s.energy_flux_components, s.orders, t, s.params.omega)


__all__ = ["FloquetSMatrix", "build_smatrix", "unitarity_defect", "energy_flux_scattering"]
