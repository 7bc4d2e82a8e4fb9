import numpy as np
import pytest

from driven_level.green import TruncationPolicy, harmonics
from driven_level.model import HBAR, ModelParams
from driven_level.scattering import build_smatrix, energy_flux_scattering, unitarity_defect


@pytest.fixture(scope="module")
def smat(moderate):
    return build_smatrix(harmonics(moderate))


def test_static_amplitude_is_phase():
    p = ModelParams(v_ac=0.0, omega=0.5)
    s = build_smatrix(harmonics(p))
    assert np.allclose(np.abs(s.amps[s.n_max]), 1.0, atol=1e-14)
    assert np.max(np.abs(np.delete(s.amps, s.n_max, axis=0))) == 0.0


def test_unitarity(smat):
    assert unitarity_defect(smat) <= 1e-6


def test_unitarity_improves_with_truncation(moderate):
    defects = [unitarity_defect(build_smatrix(harmonics(moderate, TruncationPolicy(tol=tol)))) for tol in (1e-6, 1e-9, 1e-12)]
    assert defects[2] <= defects[1] <= defects[0]


def test_unitarity_narrow_level():
    p = ModelParams(epsilon0=0.3, v_ac=0.05, omega=0.02, gamma=0.01, band_cutoff=10.0)
    assert unitarity_defect(build_smatrix(harmonics(p))) <= 1e-6


def test_element_matches_matrix(smat):
    eps = 0.37
    mat = smat.matrix(eps, size=3)
    for m in range(-3, 4):
        for n in range(-3, 4):
            assert mat[m + 3, n + 3] == pytest.approx(smat.element(m, n, eps), abs=1e-15)


def test_element_on_grid(smat):
    e = smat.grid.nodes[::50]
    for k in (-2, 0, 3):
        assert np.allclose(smat.element(k, 0, e), smat.amps[k + smat.n_max, ::50], atol=1e-15)


@pytest.mark.parametrize(
    "p", [ModelParams(v_ac=1.0, omega=0.5), ModelParams(epsilon0=0.4, v_ac=2.0, omega=0.8, mu=0.3, temperature=0.2)]
)
def test_energy_flux_matches_reactance_identity(p):
    """W_E from the sideband amplitudes equals W_C + W_T / 2 computed from the level."""
    from driven_level.flux import energy_flux_contact, energy_flux_reservoir

    s = build_smatrix(harmonics(p))
    t = np.linspace(0, p.period, 17)
    w_e = energy_flux_scattering(t, s)
    identity = energy_flux_reservoir(t, p) + 0.5 * energy_flux_contact(t, p)
    assert np.max(np.abs(w_e - identity)) <= 1e-6 * np.max(np.abs(w_e))


def test_mean_energy_flux_is_absorbed_power(moderate, moderate_trace, smat):
    mean = smat.energy_flux_components[smat.n_max]
    assert abs(mean.imag) < 1e-15
    assert mean.real == pytest.approx(moderate_trace.averages["power"], rel=1e-8)


def test_inelastic_amplitudes_linear_in_drive():
    amps = []
    for v in (1e-3, 2e-3):
        s = build_smatrix(harmonics(ModelParams(v_ac=v, omega=0.5)))
        amps.append(s.amps[s.n_max + 1])
    ratio = np.abs(amps[1]) / np.abs(amps[0])
    assert np.allclose(ratio, 2.0, rtol=1e-3)


def test_sideband_spacing(smat):
    e = 0.2
    w = HBAR * smat.params.omega
    assert smat.element(2, 1, e) == pytest.approx(smat.element(1, 0, e + w), abs=1e-15)
