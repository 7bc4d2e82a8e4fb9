import dataclasses

import numpy as np
import pytest

from driven_level.model import ModelParams
from driven_level.period import period_solution
from driven_level.quadrature import QuadratureConfig

FINITE_T = ModelParams(v_ac=1.0, omega=0.5, temperature=0.3, mu=0.4)


def test_grid_resolves_spectrum(slow, moderate):
    for p in (slow, moderate):
        sol = period_solution(p)
        assert sol.spectral_tail <= 1e-8
        assert sol.n_points >= 64 and sol.n_points & (sol.n_points - 1) == 0


def test_occupation_relaxes_to_source(moderate):
    sol = period_solution(moderate)
    t = sol.t_grid
    dn = -sol.charge_current(t)
    assert np.allclose(dn, -moderate.gamma * (sol.occupation(t) - sol.source(t)), atol=1e-10)


def test_mean_current_and_contact_flux_vanish(slow):
    sol = period_solution(slow)
    assert abs(sol.mean("current")) < 1e-12
    assert abs(sol.mean("contact")) < 1e-10


def test_interpolation_matches_grid(moderate):
    sol = period_solution(moderate)
    assert np.allclose(sol.occupation(sol.t_grid), sol.occupation_grid, atol=1e-14)
    assert np.allclose(sol.contact_flux(sol.t_grid[::7]), sol.w_t_grid[::7], atol=1e-12)


def test_upsampled_samples_consistent(moderate):
    sol = period_solution(moderate)
    theta, n, i, wt = sol.fine_samples(4)
    assert theta.size == 4 * sol.n_points
    assert np.allclose(n[::4], sol.occupation_grid, atol=1e-13)
    assert np.allclose(wt, sol.contact_flux(theta / moderate.omega), atol=1e-10)


@pytest.mark.parametrize("p", [ModelParams(v_ac=1.0, omega=0.5), ModelParams(), FINITE_T])
def test_cutoff_tail_estimate(p):
    """Moving the band edge from -D to -2D changes the fluxes by less than the estimated tail at D."""
    D = p.band_cutoff
    tails = [period_solution(p, cfg=QuadratureConfig(cutoff=c)).tails for c in (D, 2 * D)]
    for name in ("n_d", "i_c", "w_t"):
        assert tails[1][name] < tails[0][name]
        assert tails[0][name] - tails[1][name] <= tails[0][name]
    # the missing band weight is Gamma / (2 pi D) for the occupation
    assert tails[0]["n_d"] == pytest.approx(p.gamma / (2 * np.pi * D), rel=0.05)


def test_finite_temperature_matches_quadrature():
    sol = period_solution(FINITE_T)
    from driven_level.flux import charge_current, energy_flux_contact, occupation

    quad = QuadratureConfig(method="quadrature")
    t = np.array([0.0, 3.1, 7.7])
    assert np.allclose(sol.occupation(t), occupation(t, FINITE_T, quad), atol=1e-10)
    assert np.allclose(sol.charge_current(t), charge_current(t, FINITE_T, quad), atol=1e-10)
    assert np.allclose(sol.contact_flux(t), energy_flux_contact(t, FINITE_T, quad), atol=1e-9)


def test_solution_is_cached(moderate):
    assert period_solution(moderate) is period_solution(moderate)
    other = period_solution(dataclasses.replace(moderate, mu=0.1))
    assert other is not period_solution(moderate)
