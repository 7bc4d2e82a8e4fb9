import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driven_level import adiabatic as ad
from driven_level.errors import DegenerateFit
from driven_level.model import H_PLANCK, R_Q, ModelParams, frozen_dos, level_velocity

WARM = ModelParams(temperature=0.2, mu=0.3)


def grid(p, n=256):
    return p.period * np.arange(n) / n


def test_zero_temperature_closed_forms(slow):
    t = grid(slow)
    rho_v = frozen_dos(t, slow.mu, slow) * level_velocity(t, slow)
    assert np.allclose(ad.ic1(t, slow), rho_v / H_PLANCK, rtol=1e-13, atol=0)
    assert np.array_equal(ad.q1(t, slow), np.zeros_like(t))
    assert np.allclose(ad.q2(t, slow), R_Q * ad.ic1(t, slow) ** 2, rtol=1e-12, atol=0)
    assert np.allclose(ad.p_lowfreq(t, slow), ad.q2(t, slow), rtol=1e-12, atol=0)


def test_scalar_and_array(slow):
    t = grid(slow, 8)
    assert isinstance(ad.ic2(t[3], slow), float)
    assert ad.ic2(t[3], slow) == ad.ic2(t, slow)[3]


@pytest.mark.parametrize("p", [ModelParams(), WARM])
def test_period_averages(p):
    """Charge and the contact energy terms are total derivatives and average to zero."""
    t = grid(p, 1024)
    for name in ("ic1", "ic2", "wt1", "wt2"):
        vals = getattr(ad, name)(t, p)
        assert abs(np.mean(vals)) <= 1e-10 * np.max(np.abs(vals))


def test_second_order_power_balance():
    t = grid(WARM, 1024)
    p2 = np.mean(ad.p_lowfreq(t, WARM))
    assert p2 > 0
    assert np.mean(ad.q2(t, WARM)) == pytest.approx(p2, rel=1e-8)


def test_first_order_heat_at_finite_temperature():
    t = grid(WARM, 64)
    q = ad.q1(t, WARM)
    assert np.max(np.abs(q)) > 0
    assert abs(np.mean(q)) < 1e-10 * np.max(np.abs(q))


def test_low_temperature_limit(slow):
    t = grid(slow, 32)
    for name in ("ic1", "q2", "we2"):
        cold = getattr(ad, name)(t, slow)
        diffs = [np.max(np.abs(getattr(ad, name)(t, slow.replace(temperature=T)) - cold)) for T in (1e-3, 1e-4)]
        assert diffs[0] < 1e-4 * np.max(np.abs(cold))
        assert diffs[1] <= diffs[0] / 10


def test_second_order_heat_nonnegative(slow):
    assert np.min(ad.q2(grid(slow, 1024), slow)) >= 0


@pytest.mark.parametrize("p", [WARM, ModelParams(temperature=0.1, mu=-0.2)])
def test_energy_flux_terms_split(p):
    """At every order the energy flux term is the heat term plus mu times the charge term."""
    t = grid(p, 32)
    for k in ("1", "2"):
        lhs = getattr(ad, "we" + k)(t, p)
        rhs = getattr(ad, "q" + k)(t, p) + p.mu * getattr(ad, "ic" + k)(t, p)
        assert np.allclose(lhs, rhs, atol=1e-10 * np.max(np.abs(lhs)))


@settings(max_examples=30, deadline=None)
@given(slope=st.floats(0.1, 10), intercept=st.floats(-1, 1))
def test_joule_fit_recovers_line(slope, intercept):
    i = np.linspace(-1, 1, 50)
    fit = ad.joule_fit(slope * i**2 + intercept, i)
    assert fit.slope == pytest.approx(slope, rel=1e-9)
    assert fit.intercept == pytest.approx(intercept, abs=1e-9)


def test_joule_fit_ideal_and_degenerate():
    i = np.sin(np.linspace(0, 6, 40))
    fit = ad.joule_fit(R_Q * i**2, i)
    assert fit.relative_deviation < 1e-12 and fit.max_residual < 1e-12
    with pytest.raises(DegenerateFit):
        ad.joule_fit(np.ones(5), np.full(5, 0.3))
    with pytest.raises(DegenerateFit):
        ad.joule_fit([1.0], [1.0])


def test_r_tilde_masking():
    vals, valid = ad.r_tilde([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])
    assert valid.tolist() == [True, False, True]
    assert vals.tolist() == [1.0, 0.0, 0.75]


def test_report_on_slow_drive(slow, slow_trace):
    rep = ad.adiabatic_report(slow, n_times=256, trace=slow_trace)
    assert rep.fit.relative_deviation < 1e-3
    assert rep.r_fit == rep.fit.slope
    rt = rep.r_tilde[rep.r_tilde_valid]
    assert rt.min() < 0 < rt.max()
    assert np.max(np.abs(rt)) > 10 * np.median(np.abs(rt))
    for name in rep.COLUMNS:
        assert getattr(rep, name).shape == slow_trace.times.shape
    assert ad.pointwise_joule_deviation(slow_trace.q_dot, slow_trace.i_c) < 0.05
