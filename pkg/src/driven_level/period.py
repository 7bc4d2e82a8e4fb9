"""Periodic steady state of the driven level from closed-form energy integrals.

With ``G(t, eps) = sum_m a_m(t) / (eps - z_m)`` and
``a_m(t) = J_m(a) exp(-i a sin W t + i m W t)``, the Fermi-weighted energy
integrals reduce to sums over the poles ``z_m``:

* ``s(t) = -(1/pi) Im int f G d eps = 1 - Im sum_m a_m F(z_m) / pi``
* ``W_T(t) = (Gamma/pi) Re sum_m da_m/dt F(z_m)``

where ``F`` is :func:`~driven_level.quadrature.occupied_resolvent` (the
divergent part cancels because ``sum a_m = 1`` and ``sum da_m/dt = 0``).
The equation of motion ``d|G|^2/dt = -2 Im G - Gamma |G|^2`` integrated
against ``f`` gives

    dn_d/dt = -Gamma (n_d - s(t)),        I_C = -dn_d/dt,

whose periodic solution is diagonal in Fourier space.  On a uniform phase
grid the pole sums are a single FFT of the folded coefficients, so a whole
period costs ``O(n_max + N log N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import QuadratureFailure
from .green import DEFAULT_POLICY, TruncationPolicy, _poles, bessel_series
from .model import HBAR, ModelParams, level_energy, level_velocity
from .quadrature import QuadratureConfig, occupied_resolvent

_MIN_POINTS = 64
_MAX_POINTS = 2**20
# relative spectral tails below this that no longer shrink are rounding noise
_FLOOR = 1e-8


def _folded(coeffs: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    """``sum_m c_m exp(2 pi i m j / n)`` for ``j = 0..n-1`` (exact for any ``n``)."""
    r = m % n
    folded = np.bincount(r, weights=coeffs.real, minlength=n) + 1j * np.bincount(r, weights=coeffs.imag, minlength=n)
    return n * np.fft.ifft(folded)


@dataclass(frozen=True)
class _PoleData:
    m: np.ndarray
    jm: np.ndarray
    resolvent: np.ndarray  # F(z_m), wide band
    resolvent_cut: np.ndarray  # restricted to [-D, inf)


@dataclass
class PeriodSolution:
    """Spectral representation of ``s``, ``n_d``, ``I_C`` and ``W_T`` over one period.

    Arrays with suffix ``_grid`` are sampled at ``theta_j = 2 pi j / N``;
    ``tails`` holds the part of each quantity contributed by the band below
    the cutoff ``-D`` (already included in the values).
    """

    params: ModelParams
    n_points: int
    s_grid: np.ndarray = field(repr=False)
    w_t_grid: np.ndarray = field(repr=False)
    s_hat: np.ndarray = field(repr=False)
    n_hat: np.ndarray = field(repr=False)
    i_hat: np.ndarray = field(repr=False)
    tails: dict = field(default_factory=dict)
    spectral_tail: float = 0.0
    _poles: _PoleData | None = field(default=None, repr=False)

    @property
    def theta_grid(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_points) / self.n_points

    @property
    def t_grid(self) -> np.ndarray:
        return self.theta_grid / self.params.omega

    @property
    def occupation_grid(self) -> np.ndarray:
        return np.fft.irfft(self.n_hat, n=self.n_points)

    @property
    def current_grid(self) -> np.ndarray:
        return np.fft.irfft(self.i_hat, n=self.n_points)

    def _evaluate(self, coeffs: np.ndarray, t) -> np.ndarray:
        theta = self.params.omega * np.asarray(t, dtype=float)
        k = np.arange(coeffs.size)
        weights = np.full(coeffs.size, 2.0)
        weights[0] = 1.0
        if self.n_points % 2 == 0:
            weights[-1] = 1.0
        flat = theta.ravel()
        out = np.empty(flat.size)
        step = max(1, 1_000_000 // coeffs.size)
        for start in range(0, flat.size, step):
            ph = np.exp(1j * np.outer(flat[start : start + step], k))
            out[start : start + step] = (ph @ (weights * coeffs)).real / self.n_points
        return out.reshape(theta.shape)

    def occupation(self, t):
        return _scalar_or_array(self._evaluate(self.n_hat, t), t)

    def charge_current(self, t):
        return _scalar_or_array(self._evaluate(self.i_hat, t), t)

    def source(self, t):
        return _scalar_or_array(self._evaluate(self.s_hat, t), t)

    def contact_flux(self, t):
        """``W_T(t)`` by direct pole sums at arbitrary times."""
        pd = self._poles
        theta = self.params.omega * np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        p = self.params
        out = np.empty(theta.size)
        step = max(1, 2_000_000 // pd.m.size)
        for start in range(0, theta.size, step):
            th = theta[start : start + step]
            ph = np.exp(1j * (np.outer(th, pd.m) - p.alpha * np.sin(th)[:, None]))
            s0 = ph @ (pd.jm * pd.resolvent)
            s1 = ph @ (pd.m * pd.jm * pd.resolvent)
            out[start : start + step] = _contact_from_sums(s0, s1, th, p)
        return _scalar_or_array(out.reshape(np.shape(t)), t)

    def fine_samples(self, factor: int = 2):
        """``theta, n_d, I_C, W_T`` on a grid ``factor`` times finer than the solve grid.

        Products of two resolved series have twice the bandwidth, so period
        averages of such products are taken on this grid to avoid aliasing.
        """
        n = factor * self.n_points
        theta, s0, s1 = _grid_sums(self._poles, self._poles.resolvent, n, self.params)
        w_t = _contact_from_sums(s0, s1, theta, self.params)
        scale = n / self.n_points
        return theta, scale * np.fft.irfft(self.n_hat, n=n), scale * np.fft.irfft(self.i_hat, n=n), w_t

    def mean(self, name: str) -> float:
        """Period average of ``occupation``, ``current``, ``source`` or ``contact``."""
        if name == "contact":
            return float(np.mean(self.w_t_grid))
        coeffs = {"occupation": self.n_hat, "current": self.i_hat, "source": self.s_hat}[name]
        return float(coeffs[0].real / self.n_points)


def _scalar_or_array(values, t):
    return float(values) if np.ndim(t) == 0 else values


def _contact_from_sums(s0, s1, theta, p: ModelParams):
    # sum_m da_m/dt F_m = i (W sum m a_m F_m - V cos(theta) sum a_m F_m)
    w = HBAR * p.omega
    return (p.gamma / math.pi) * np.real(1j * (w * s1 - p.v_ac * np.cos(theta) * s0))


def _grid_sums(pd: _PoleData, resolvent: np.ndarray, n: int, p: ModelParams):
    theta = 2.0 * math.pi * np.arange(n) / n
    phase = np.exp(-1j * p.alpha * np.sin(theta))
    s0 = phase * _folded(pd.jm * resolvent, pd.m, n)
    s1 = phase * _folded(pd.m * pd.jm * resolvent, pd.m, n)
    return theta, s0, s1


def _spectral_solve(s_grid: np.ndarray, p: ModelParams):
    n = s_grid.size
    s_hat = np.fft.rfft(s_grid)
    w = p.omega * np.arange(s_hat.size)
    n_hat = p.gamma * s_hat / (p.gamma + 1j * w)
    i_hat = -1j * w * n_hat
    if n % 2 == 0:
        i_hat[-1] = 0.0
    return s_hat, n_hat, i_hat


def _tail_ratio(hat: np.ndarray) -> float:
    ac = np.abs(hat[1:])
    if ac.size < 4 or ac.max() == 0.0:
        return 0.0
    return float(ac[ac.size // 2 :].max() / ac.max())


def _resolved(current, previous, tol: float) -> bool:
    """Each tail is below ``tol`` or has hit its rounding floor (stopped shrinking while small)."""
    for k, tail in enumerate(current):
        if tail <= tol:
            continue
        if previous is None or tail > _FLOOR or tail < 0.1 * previous[k]:
            return False
    return True


@lru_cache(maxsize=16)
def _period_solution(p: ModelParams, pol: TruncationPolicy, cfg: QuadratureConfig) -> PeriodSolution:
    m, jm = bessel_series(p, pol)
    z = _poles(m, p)
    D = cfg.band_cutoff(p)
    pd = _PoleData(m=m, jm=np.asarray(jm), resolvent=occupied_resolvent(z, p), resolvent_cut=occupied_resolvent(z, p, cutoff=D))

    n = _MIN_POINTS
    previous = None
    while True:
        theta, s0, s1 = _grid_sums(pd, pd.resolvent, n, p)
        s_grid = 1.0 - s0.imag / math.pi
        w_t = _contact_from_sums(s0, s1, theta, p)
        s_hat, n_hat, i_hat = _spectral_solve(s_grid, p)
        tails_now = (_tail_ratio(s_hat), _tail_ratio(np.fft.rfft(w_t)))
        if _resolved(tails_now, previous, cfg.spectral_tol):
            break
        previous = tails_now
        n *= 2
        if n > _MAX_POINTS:
            raise QuadratureFailure(f"period not resolved with {_MAX_POINTS} phase points (tails {tails_now})")
    worst = max(tails_now)

    # same solve with the band cut at -D measures what lies below the cutoff
    _, c0, c1 = _grid_sums(pd, pd.resolvent_cut, n, p)
    s_cut = -c0.imag / math.pi
    w_t_cut = _contact_from_sums(c0, c1, theta, p)
    _, n_cut_hat, i_cut_hat = _spectral_solve(s_cut, p)
    d_n = np.fft.irfft(n_hat - n_cut_hat, n=n)
    d_i = np.fft.irfft(i_hat - i_cut_hat, n=n)
    d_wt = w_t - w_t_cut
    eps_d = level_energy(theta / p.omega, p)
    d_wd = -eps_d * d_i
    tails = {
        "n_d": float(np.max(np.abs(d_n))),
        "i_c": float(np.max(np.abs(d_i))),
        "w_t": float(np.max(np.abs(d_wt))),
        "w_d": float(np.max(np.abs(d_wd))),
        "w_c": float(np.max(np.abs(d_wt + d_wd))),
        "w_e": float(np.max(np.abs(0.5 * d_wt + d_wd))),
        "power": float(np.max(np.abs(d_n * level_velocity(theta / p.omega, p)))),
    }
    tails["q_dot"] = float(np.max(np.abs(0.5 * d_wt + d_wd + p.mu * d_i)))
    tails["q_tilde_dot"] = float(np.max(np.abs(d_wt + d_wd + p.mu * d_i)))

    return PeriodSolution(
        params=p,
        n_points=n,
        s_grid=s_grid,
        w_t_grid=w_t,
        s_hat=s_hat,
        n_hat=n_hat,
        i_hat=i_hat,
        tails=tails,
        spectral_tail=worst,
        _poles=pd,
    )


def period_solution(
    p: ModelParams, pol: TruncationPolicy | None = None, cfg: QuadratureConfig | None = None
) -> PeriodSolution:
    """Cached periodic solution for ``(p, pol, cfg)``."""
    return _period_solution(p, pol or DEFAULT_POLICY, cfg or QuadratureConfig())
