import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest

from driven_level.adiabatic import ic1, ic2
from driven_level.errors import InvariantViolation, PathMismatch
from driven_level.flux import (
    charge_current,
    energy_flux_contact,
    energy_flux_dot_level,
    energy_flux_reservoir,
    heat_flux,
    heat_flux_tilde,
    occupation,
    power_source,
    trace_period,
)
from driven_level.model import R_Q, ModelParams
from driven_level.quadrature import QuadratureConfig

GOLDEN = Path(__file__).parent / "golden"


def test_undriven_fluxes_vanish():
    p = ModelParams(v_ac=0.0)
    t = np.linspace(0, p.period, 5)
    for func in (charge_current, energy_flux_contact, energy_flux_dot_level, energy_flux_reservoir, power_source, heat_flux):
        assert np.max(np.abs(func(t, p))) < 1e-12
    n = occupation(t, p)
    static = 0.5 + math.atan(-p.epsilon0 / (0.5 * p.gamma)) / math.pi
    assert np.allclose(n, static, atol=1e-10)


def test_trace_invariants(slow_trace, moderate_trace):
    for tr in (slow_trace, moderate_trace):
        checks = tr.checks()
        assert all(c["pass"] for c in checks.values()), checks
        assert np.allclose(tr.w_c, -tr.w_t - tr.w_d, rtol=0, atol=1e-15)


def test_mean_power_positive(slow_trace, moderate_trace):
    for tr in (slow_trace, moderate_trace):
        assert tr.averages["power"] > 0
        assert tr.averages["q_dot"] == pytest.approx(tr.averages["power"], rel=1e-8)


def test_slow_current_follows_expansion():
    """Residuals of the slow-driving expansion shrink like Omega (first order) and Omega^2 (second order)."""
    res1, res2 = [], []
    for omega in (1e-3, 5e-4):
        p = ModelParams(omega=omega)
        t = p.period * np.arange(512) / 512
        exact = charge_current(t, p)
        first = ic1(t, p)
        scale = np.max(np.abs(first))
        res1.append(np.max(np.abs(exact - first)) / scale)
        res2.append(np.max(np.abs(exact - first - ic2(t, p))) / scale)
    assert res1[0] < 0.05 and res2[0] < res1[0] / 4
    assert res1[0] / res1[1] == pytest.approx(2.0, rel=0.1)
    assert res2[0] / res2[1] == pytest.approx(4.0, rel=0.15)


def test_dot_level_flux_golden(slow):
    data = np.loadtxt(GOLDEN / "w_dot_level_slow.txt")
    t, w_d, tol = data.T
    assert np.all(np.abs(energy_flux_dot_level(t, slow) - w_d) <= tol)


def test_zero_chemical_potential_relations(moderate_trace):
    tr = moderate_trace
    assert tr.params.mu == 0.0
    assert np.array_equal(tr.q_tilde_dot, tr.w_c)
    assert np.allclose(tr.q_dot, tr.w_c + 0.5 * tr.w_t, atol=1e-16)
    # the scattering energy flux carries the same physics as the heat flux at mu = 0
    assert np.allclose(tr.w_e, tr.q_dot, atol=1e-8 * np.max(np.abs(tr.q_dot)))


def test_power_vanishes_at_turning_points(slow):
    t = np.array([0.0, math.pi / slow.omega])
    assert np.max(np.abs(power_source(t, slow))) < 1e-12


def test_heat_positivity(slow_trace):
    assert np.min(slow_trace.q_dot) >= -1e-10
    assert np.min(slow_trace.q_tilde_dot) < -1e-4
    assert slow_trace.averages["q_tilde_dot"] > 0


def test_pointwise_heat_functions(moderate, moderate_trace):
    t = moderate_trace.times[::32]
    assert np.allclose(heat_flux(t, moderate), moderate_trace.q_dot[::32], atol=1e-14)
    assert np.allclose(heat_flux_tilde(t, moderate), moderate_trace.q_tilde_dot[::32], atol=1e-14)


def test_harmonic_path_agrees(moderate):
    t = np.linspace(0, moderate.period, 11)
    i_h = charge_current(t, moderate, path="harmonic", cross_check=True)
    w_h = energy_flux_reservoir(t, moderate, path="harmonic", cross_check=True)
    assert np.allclose(i_h, charge_current(t, moderate), atol=1e-10)
    assert np.allclose(w_h, energy_flux_reservoir(t, moderate), atol=1e-10)


def test_path_mismatch_detected(moderate):
    strict = QuadratureConfig(abs_tol=1e-30, engine_tol=1e-30)
    with pytest.raises(PathMismatch):
        energy_flux_reservoir(np.array([0.3, 1.1]), moderate, strict, cross_check=True)


def test_unknown_path(moderate):
    with pytest.raises(ValueError):
        charge_current(0.0, moderate, path="other")
    with pytest.raises(ValueError):
        trace_period(moderate, n_times=8)


@pytest.mark.parametrize("p", [ModelParams(v_ac=1.0, omega=0.5), ModelParams()])
def test_quadrature_route_agrees(p):
    quad = QuadratureConfig(method="quadrature")
    t = p.period * np.array([0.1, 0.45, 0.8])
    i_closed = charge_current(t, p)
    w_closed = energy_flux_contact(t, p)
    assert np.allclose(charge_current(t, p, quad), i_closed, atol=1e-8 * np.max(np.abs(i_closed)) + 1e-12)
    assert np.allclose(energy_flux_contact(t, p, quad), w_closed, atol=1e-7 * np.max(np.abs(w_closed)) + 1e-12)


def test_validate_flags_broken_trace(moderate_trace):
    broken = dataclasses.replace(moderate_trace, residual_conservation=moderate_trace.residual_conservation + 1.0)
    assert not broken.checks()["conservation"]["pass"]
    with pytest.raises(InvariantViolation):
        broken.validate()


def test_threads_are_deterministic(moderate):
    a = trace_period(moderate, n_times=64, threads=1)
    b = trace_period(moderate, n_times=64, threads=3)
    for name in ("i_c", "w_t", "w_e", "n_d", "q_dot"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_w_e_paths(moderate):
    s = trace_period(moderate, n_times=64, w_e_path="scattering")
    i = trace_period(moderate, n_times=64, w_e_path="identity")
    assert (s.w_e_source, i.w_e_source) == ("scattering", "identity")
    assert np.allclose(s.w_e, i.w_e, atol=1e-8 * np.max(np.abs(i.w_e)))


def test_finite_temperature_trace():
    p = ModelParams(v_ac=1.0, omega=0.5, temperature=0.3, mu=0.4)
    tr = trace_period(p, n_times=64)
    assert tr.averages["q_dot"] == pytest.approx(tr.averages["power"], rel=1e-8)
    assert np.allclose(tr.q_tilde_dot, tr.w_c - p.mu * tr.i_c, atol=1e-16)


def test_joule_slope_near_quantum(slow_trace):
    slope = np.polyfit(slow_trace.i_c**2, slow_trace.q_dot, 1)[0]
    assert slope == pytest.approx(R_Q, rel=1e-3)
