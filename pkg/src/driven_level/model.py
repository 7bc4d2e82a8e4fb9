"""Physical scenario, unit system and frozen (instantaneous) ingredients.

Units are fixed once for the whole package: hbar = e = Gamma = 1, so that
Planck's constant is ``2*pi`` and the relaxation resistance quantum
``h / 2e^2`` equals ``pi``.  ``gamma`` is kept as an explicit field so the
formulas read naturally, but every reported value assumes it is the energy
unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParams

HBAR = 1.0
E_CHARGE = 1.0
H_PLANCK = 2.0 * math.pi * HBAR
R_Q = H_PLANCK / (2.0 * E_CHARGE**2)

#: Width of the Fermi window in units of T used whenever an integral is cut at finite temperature.
THERMAL_WINDOW = 40.0


@dataclass(frozen=True)
class ModelParams:
    """Harmonically driven resonant level coupled to a wide-band reservoir.

    Defaults reproduce the slow-driving scenario ``mu=0, eps0=-1.2, T=0,
    hbar*Omega=1e-3, V_ac=10``.
    """

    epsilon0: float = -1.2
    v_ac: float = 10.0
    omega: float = 1e-3
    gamma: float = 1.0
    mu: float = 0.0
    temperature: float = 0.0
    band_cutoff: float = 1000.0

    def __post_init__(self):
        for name in ("epsilon0", "v_ac", "omega", "gamma", "mu", "temperature", "band_cutoff"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParams(f"{name} must be a finite number, got {value!r}")
        if self.gamma <= 0:
            raise InvalidParams("gamma must be positive")
        if self.omega <= 0:
            raise InvalidParams("omega must be positive")
        if self.v_ac < 0:
            raise InvalidParams("v_ac must be non-negative (the drive phase is fixed by cos)")
        if self.temperature < 0:
            raise InvalidParams("temperature must be >= 0")
        needed = 10.0 * max(abs(self.epsilon0) + self.v_ac, abs(self.mu), self.gamma)
        if self.band_cutoff <= needed:
            raise InvalidParams(
                f"band_cutoff={self.band_cutoff} must exceed 10*max(|eps0|+V_ac, |mu|, gamma)={needed}"
            )

    @property
    def alpha(self) -> float:
        """Dimensionless drive strength ``V_ac / (hbar Omega)``."""
        return self.v_ac / (HBAR * self.omega)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def replace(self, **changes) -> "ModelParams":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)


def level_energy(t, p: ModelParams):
    """``eps_d(t) = eps0 + V_ac cos(Omega t)``."""
    return p.epsilon0 + p.v_ac * np.cos(p.omega * np.asarray(t, dtype=float))


def level_velocity(t, p: ModelParams):
    """Time derivative of the level energy."""
    return -p.v_ac * p.omega * np.sin(p.omega * np.asarray(t, dtype=float))


def level_acceleration(t, p: ModelParams):
    return -p.v_ac * p.omega**2 * np.cos(p.omega * np.asarray(t, dtype=float))


def fermi(eps, p: ModelParams):
    """Fermi-Dirac occupation; at ``T=0`` a step with the value 1/2 exactly at ``mu``."""
    eps = np.asarray(eps, dtype=float)
    if p.temperature == 0.0:
        return np.where(eps < p.mu, 1.0, np.where(eps > p.mu, 0.0, 0.5))
    # 0.5*(1 - tanh(x/2)) never overflows
    return 0.5 * (1.0 - np.tanh(0.5 * (eps - p.mu) / p.temperature))


def fermi_derivative(eps, p: ModelParams):
    """``df/deps`` for ``T > 0`` (the ``T = 0`` delta function is handled analytically by callers)."""
    if p.temperature == 0.0:
        raise ValueError("df/deps is a delta function at T=0; use the closed-form T=0 branches")
    x = 0.5 * (np.asarray(eps, dtype=float) - p.mu) / p.temperature
    return -0.25 / (p.temperature * np.cosh(np.clip(x, -350.0, 350.0)) ** 2)


def frozen_green(t, eps, p: ModelParams):
    """Instantaneous retarded Green function ``1 / (eps - eps_d(t) + i Gamma/2)``."""
    return 1.0 / (np.asarray(eps, dtype=float) - level_energy(t, p) + 0.5j * p.gamma)


def frozen_dos(t, eps, p: ModelParams):
    """Frozen local density of states ``Gamma |G_f|^2``.

    Written as ``Gamma / (x^2 + Gamma^2/4)`` so it is strictly positive and
    agrees with ``-2 Im G_f`` to rounding.
    """
    x = np.asarray(eps, dtype=float) - level_energy(t, p)
    return p.gamma / (x * x + 0.25 * p.gamma**2)


@dataclass(frozen=True)
class EnergyGrid:
    """Composite Gauss-Legendre rule on a set of panels.

    ``windows`` lists the ``(center, half_width)`` regions that were resolved
    with fine panels; ``edges`` are the panel boundaries, each panel carrying
    ``order`` nodes.
    """

    nodes: np.ndarray
    weights: np.ndarray
    windows: tuple = ()
    edges: np.ndarray = field(default=None, repr=False)
    order: int = 16

    @property
    def lower(self) -> float:
        return float(self.edges[0])

    @property
    def upper(self) -> float:
        return float(self.edges[-1])

    def integrate(self, values, axis=-1):
        """Apply the rule along ``axis`` of ``values`` sampled at ``nodes``."""
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    @classmethod
    def from_edges(cls, edges: Sequence[float], order: int = 16, windows=()) -> "EnergyGrid":
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("panel edges must be strictly increasing")
        x, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return cls(nodes=nodes, weights=weights, windows=tuple(windows), edges=edges, order=order)

    @classmethod
    def build(
        cls,
        p: ModelParams,
        lower: float | None = None,
        upper: float | None = None,
        n_max: int = 0,
        fine_width: float | None = None,
        growth: float = 1.5,
        order: int = 16,
    ) -> "EnergyGrid":
        """Graded grid over ``[lower, upper]`` (default ``[-D, D]``).

        Panels of width ``fine_width`` (default ``Gamma/2``) cover a window
        around ``mu`` of half-width ``max(40 T, hbar Omega n_max, Gamma)`` and
        the band swept by the level, ``eps0 +- (V_ac + 10 Gamma)``.  Outside
        the windows panel widths grow geometrically towards the cutoff.
        """
        D = p.band_cutoff
        lower = -D if lower is None else float(lower)
        upper = D if upper is None else float(upper)
        if not -D <= lower < upper <= D:
            raise ValueError(f"grid span [{lower}, {upper}] must lie inside [-D, D] = [{-D}, {D}]")
        h = 0.5 * p.gamma if fine_width is None else float(fine_width)
        windows = (
            (p.mu, max(THERMAL_WINDOW * p.temperature, HBAR * p.omega * n_max, p.gamma)),
            (p.epsilon0, p.v_ac + 10.0 * p.gamma),
        )
        fine = _merge_intervals(
            [(max(c - w, lower), min(c + w, upper)) for c, w in windows if c + w > lower and c - w < upper]
        )
        edges = [lower]
        cursor = lower
        for a, b in fine:
            if a > cursor:
                edges.extend(_graded_gap(cursor, a, h, growth, left_fine=cursor > lower, right_fine=True)[1:])
            n = max(1, int(math.ceil((b - a) / h)))
            edges.extend(np.linspace(a, b, n + 1)[1:])
            cursor = b
        if cursor < upper:
            edges.extend(_graded_gap(cursor, upper, h, growth, left_fine=cursor > lower or bool(fine), right_fine=False)[1:])
        return cls.from_edges(_dedupe(edges), order=order, windows=windows)

    @classmethod
    def sidebands(
        cls,
        p: ModelParams,
        n_cells: int,
        order: int = 16,
        subdivide: int | None = None,
    ) -> "EnergyGrid":
        """Grid of cells aligned to ``mu + k hbar Omega`` for ``|k| <= n_cells``.

        Every Fermi-window boundary ``mu - q hbar Omega`` then falls on a cell
        edge, so ``T = 0`` occupation differences are constant on each cell.
        At finite temperature the span is padded by ``40 T`` on both sides.
        ``subdivide`` splits each cell so that panels stay below ``Gamma/2``.
        """
        w = HBAR * p.omega
        pad = int(math.ceil(THERMAL_WINDOW * p.temperature / w)) if p.temperature > 0 else 0
        k = np.arange(-n_cells - pad, n_cells + pad + 1)
        cell_edges = p.mu + k * w
        if subdivide is None:
            subdivide = max(1, int(math.ceil(w / (0.5 * p.gamma))))
        if subdivide > 1:
            frac = np.linspace(0.0, 1.0, subdivide + 1)[:-1]
            cell_edges = np.concatenate([(cell_edges[:-1, None] + w * frac[None, :]).ravel(), cell_edges[-1:]])
        if cell_edges[0] < -p.band_cutoff or cell_edges[-1] > p.band_cutoff:
            raise ValueError("sideband grid exceeds the band cutoff; increase band_cutoff")
        return cls.from_edges(cell_edges, order=order, windows=((p.mu, (n_cells + pad) * w),))


def _merge_intervals(intervals):
    merged = []
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _grow(start, stop, h, growth):
    """Breakpoints from ``start`` towards ``stop`` with widths h, h*g, h*g^2, ..."""
    sign = 1.0 if stop > start else -1.0
    length = abs(stop - start)
    points = [start]
    pos, width = 0.0, h
    while pos + width < length:
        pos += width
        points.append(start + sign * pos)
        width *= growth
    if len(points) > 1 and length - pos < 0.5 * width / growth:
        points.pop()
    points.append(stop)
    return points


def _graded_gap(a, b, h, growth, left_fine, right_fine):
    if left_fine and right_fine:
        mid = 0.5 * (a + b)
        left = _grow(a, mid, h, growth)
        right = _grow(b, mid, h, growth)[::-1]
        return left[:-1] + right
    if left_fine:
        return _grow(a, b, h, growth)
    if right_fine:
        return _grow(b, a, h, growth)[::-1]
    n = max(1, int(math.ceil((b - a) / (h * growth**8))))
    return list(np.linspace(a, b, n + 1))


def _dedupe(edges):
    edges = np.asarray(edges, dtype=float)
    keep = np.concatenate([[True], np.diff(edges) > 1e-12 * max(1.0, np.max(np.abs(edges)))])
    return edges[keep]
