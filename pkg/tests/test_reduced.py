import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from cascade_qed.errors import ConfigError
from cascade_qed.model import ChainConfig, LinkPhases, SiteParams, build_generator
from cascade_qed.reduced import (
    ValidityWarning,
    adiabatic_field_reconstruction,
    build_reduced_generator,
    n3_eigenstructure,
    reduced_fiber_spectra,
    schur_reduced_generator,
    special_case_structure,
    transmission_factor,
    two_site_closed_form,
)
from cascade_qed.spectra import FrequencyGrid
from oracle_values import EXCHANGE, KAPPA_BAD, N3_EIGENFREQUENCY

pytestmark = pytest.mark.filterwarnings("ignore::cascade_qed.reduced.ValidityWarning")

coupling = st.builds(complex, st.floats(-60, 60), st.floats(-60, 60))


@settings(max_examples=40, deadline=None)
@given(
    st.lists(coupling, min_size=1, max_size=5),
    st.floats(50, 2000),
    st.floats(0, 20),
    st.floats(-300, 300),
)
def test_reduced_generator_is_schur_complement(g, kex, kin, delta):
    cfg = ChainConfig.homogeneous(5.0, g, kex, kin, delta)
    red = build_reduced_generator(cfg).matrix
    assert np.abs(red - schur_reduced_generator(cfg)).max() < 1e-10 * max(1.0, np.abs(red).max())


def test_two_site_elimination_symbolic():
    """Eliminate the stationary fields of the two-site amplitude equations with sympy."""
    g1, g2 = sp.symbols("g1 g2")
    g1c, g2c = sp.symbols("g1c g2c")
    k, kex, d, gam = sp.symbols("kappa kappa_ex Delta gamma", positive=True)
    x1, x2, a1, b1, a2, b2 = sp.symbols("x1 x2 a1 b1 a2 b2")
    z = k + sp.I * d
    sol = sp.solve(
        [
            -z * a1 - sp.I * g1c * x1,
            -z * b1 - sp.I * g1 * x1 - 2 * kex * b2,
            -z * a2 - sp.I * g2c * x2 - 2 * kex * a1,
            -z * b2 - sp.I * g2 * x2,
        ],
        [a1, b1, a2, b2],
    )
    dx1 = sp.expand(-gam / 2 * x1 - sp.I * g1 * sol[a1] - sp.I * g1c * sol[b1])
    coeff = sp.simplify(dx1.coeff(x2))
    assert sp.simplify(coeff - 2 * kex * g1c * g2 / z**2) == 0
    diag = sp.simplify(dx1.coeff(x1))
    assert sp.simplify(diag - (-gam / 2 - 2 * g1 * g1c / z)) == 0


def test_two_site_prefactor_is_kappa_not_two_kappa():
    # regression: the N-site coefficient must reduce to the two-site one
    cfg = ChainConfig.homogeneous(5.0, [50, 50], 500.0)
    m = build_reduced_generator(cfg).matrix
    assert m[0, 1] == pytest.approx(2 * 50 * 50 * 500.0 / 500.0**2)


def test_transmission_factor_without_loss():
    assert transmission_factor(3.0, 0.0, 1.5) == pytest.approx(-(3 - 1.5j) / (3 + 1.5j))
    assert abs(transmission_factor(3.0, 0.0, 1.5)) == pytest.approx(1.0)


@pytest.mark.parametrize("g1,g2,delta", [(50, 30j, 0.0), (40, 20 - 5j, 7.0), (50, 0, 0.0), (30, 45, -20.0)])
def test_closed_form_matches_matrix_exponential(g1, g2, delta):
    cf = two_site_closed_form(g1, g2, 500.0, delta, 5.0)
    m = build_reduced_generator(ChainConfig.homogeneous(5.0, [g1, g2], 500.0, delta=delta)).matrix
    t = np.array([0.05, 0.5, 2.0])
    exact = np.array([expm(m * ti)[:, 0] for ti in t])
    assert np.abs(exact[:, 0] - cf.xi1(t)).max() < 1e-12
    assert np.abs(exact[:, 1] - cf.xi2(t)).max() < 1e-12


def test_closed_form_sign_with_one_uncoupled_atom():
    # g2 = 0: atom 1 decays at the enhanced rate, not at gamma/2
    cf = two_site_closed_form(50.0, 0.0, 500.0, 0.0, 5.0)
    assert cf.xi1(1.0) == pytest.approx(np.exp(-2.5 - 10.0))


def test_closed_form_degenerate_branch():
    # |g1| = |g2| and p = 0 needs 2 kappa g1* g2 / (kappa + i delta) = 0, i.e. an uncoupled pair
    cf = two_site_closed_form(0.0, 0.0, 10.0, 0.0, 2.0)
    assert cf.degenerate
    assert cf.xi1(1.5) == pytest.approx(np.exp(-1.5))
    assert cf.xi2(1.5) == 0


def test_field_reconstruction_solves_stationary_equations():
    cfg = ChainConfig.homogeneous(5.0, [50, 20j, -30], 400.0, 0.5, 3.0)
    xi = np.array([0.3, -0.2j, 0.5 + 0.1j])
    alpha, beta = adiabatic_field_reconstruction(cfg, xi)
    x = np.zeros(9, dtype=complex)
    x[0::3], x[1::3], x[2::3] = xi, alpha, beta
    dx = build_generator(cfg).matrix @ x
    assert np.abs(dx[1::3]).max() < 1e-12 and np.abs(dx[2::3]).max() < 1e-12


@pytest.mark.parametrize("g", [[50] * 4, [50, 50j, 50, 50j, 50], [50, 50j], [50, 50j, 50, 50j]])
def test_special_case_reassembly(g):
    cfg = ChainConfig.homogeneous(5.0, g, 500.0)
    rep = special_case_structure(cfg)
    assert rep.kind in ("superradiant", "alternating") and rep.exact
    assert np.abs(rep.reassemble() - build_reduced_generator(cfg).matrix).max() < 1e-12
    assert np.allclose(rep.hamiltonian, rep.hamiltonian.conj().T)


def test_special_case_with_intrinsic_loss_is_marked_inexact():
    rep = special_case_structure(ChainConfig.homogeneous(5.0, [50, 50, 50], 500.0, 0.5))
    assert rep.kind == "superradiant" and not rep.exact and "intrinsic" in rep.note
    general = special_case_structure(ChainConfig.homogeneous(5.0, [50, 20], 500.0))
    assert general.kind == "general"
    assert np.abs(general.reassemble() - build_reduced_generator(ChainConfig.homogeneous(5.0, [50, 20], 500.0)).matrix).max() < 1e-12


def test_superradiant_rate():
    rep = special_case_structure(ChainConfig.homogeneous(5.0, [50, 50], 500.0))
    assert rep.jump_rates[0] == pytest.approx(4 * 2 * 2500 / 500.0)


def test_three_site_eigenstructure():
    cfg = ChainConfig.homogeneous(5.0, [50, 50j, 50], 500.0, 0.5)
    es = n3_eigenstructure(cfg)
    assert es.eigenvalues[0] == pytest.approx(N3_EIGENFREQUENCY)
    assert np.allclose(es.hamiltonian @ es.eigenvectors, es.eigenvectors * es.eigenvalues)
    assert np.allclose(es.eigenvectors.conj().T @ es.eigenvectors, np.eye(3))
    # atom 2 projects onto the two shifted states only, atom 1 onto all three
    assert np.allclose(np.abs(es.expansion(2)), [1 / np.sqrt(2), 1 / np.sqrt(2), 0])
    assert np.allclose(np.abs(es.expansion(1)), [0.5, 0.5, 1 / np.sqrt(2)])
    # with kappa_in = 0 the coherent part of the reduced generator is exactly this H
    lossless = ChainConfig.homogeneous(5.0, [50, 50j, 50], KAPPA_BAD)
    rep = special_case_structure(lossless)
    assert np.allclose(rep.hamiltonian, es.hamiltonian, atol=1e-12)


def test_exchange_strength():
    rep = special_case_structure(ChainConfig.homogeneous(5.0, [50, 50j, 50], KAPPA_BAD))
    assert abs(rep.hamiltonian[0, 1]) == pytest.approx(EXCHANGE)


def test_preconditions():
    with pytest.raises(ConfigError):
        build_reduced_generator(ChainConfig(5.0, (SiteParams(0, 500, 0, 50), SiteParams(0, 400, 0, 50))))
    with pytest.raises(ConfigError):
        build_reduced_generator(ChainConfig.homogeneous(5.0, [50, 50], 500.0, h=1.0))
    with pytest.raises(ConfigError):
        build_reduced_generator(
            ChainConfig(5.0, (SiteParams(0, 500, 0, 50),) * 2, (LinkPhases(0.1, 0),))
        )
    with pytest.raises(ConfigError):
        n3_eigenstructure(ChainConfig.homogeneous(5.0, [50, 50, 50], 500.0))


def test_validity_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", ValidityWarning)
        with pytest.raises(ValidityWarning):
            build_reduced_generator(ChainConfig.homogeneous(5.0, [50, 50], 5.0))


def test_reduced_spectra_normalization():
    cfg = ChainConfig.homogeneous(5.0, [50, 50j], 5000.0)
    ta, tb = reduced_fiber_spectra(cfg, 1, FrequencyGrid(-400, 400, 8001))
    w = np.linspace(-400, 400, 8001)
    # no collective enhancement at theta = pi/2: fiber fraction (4g^2/kappa)/(gamma + 4g^2/kappa)
    frac = np.trapezoid(ta + tb, w)
    assert frac == pytest.approx(2.0 / (5.0 + 2.0), rel=0.01)
