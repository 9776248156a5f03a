import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.linalg import expm

from cascade_qed.errors import ConfigError, InsufficientTailError, IntegrationError
from cascade_qed.evolve import _GL_U, _lagrange_weights, default_t_end, evolve, numerical_laplace
from cascade_qed.model import ChainConfig, Generator, build_generator, initial_state

TWO_SITE = ChainConfig.homogeneous(1.0, [2.0, 1.5j], 3.0, kappa_in=0.2, delta=0.5)


def test_matches_matrix_exponential():
    gen = build_generator(TWO_SITE)
    x0 = initial_state(TWO_SITE, 1)
    traj = evolve(gen, TWO_SITE, x0, t_end=4.0, tolerance=1e-12)
    for i in (5, len(traj.times) // 2, -1):
        exact = expm(gen.matrix * traj.times[i]) @ x0.amps
        assert np.abs(traj.states[i] - exact).max() < 1e-9


def test_conservation_and_channel_bookkeeping():
    gen = build_generator(TWO_SITE)
    traj = evolve(gen, TWO_SITE, initial_state(TWO_SITE, 2))
    assert np.abs(traj.conservation_defect()).max() < 1e-8
    assert traj.norm2[-1] < 1e-12
    assert traj.p_spon[-1] == pytest.approx(1.0, abs=1e-8)
    assert traj.fraction("side_atom_2")[-1] > traj.fraction("side_atom_1")[-1]


def test_subnormalized_start():
    gen = build_generator(TWO_SITE)
    traj = evolve(gen, TWO_SITE, 0.6 * initial_state(TWO_SITE, 1))
    assert traj.p_spon[-1] == pytest.approx(0.36, abs=1e-8)
    assert np.abs(traj.conservation_defect()).max() < 1e-8


def test_rejects_bad_input():
    gen = build_generator(TWO_SITE)
    with pytest.raises(ConfigError):
        evolve(gen, TWO_SITE, 2 * initial_state(TWO_SITE, 1))
    with pytest.raises(ConfigError):
        evolve(gen, TWO_SITE, initial_state(TWO_SITE, 1), t_end=-1.0)


def test_growing_mode_aborts_with_time():
    cfg = ChainConfig.homogeneous(0.0, [0.0], 0.0)
    gen = Generator(np.diag([400.0, -1, -1]).astype(complex))
    with pytest.raises(IntegrationError) as info:
        evolve(gen, cfg, initial_state(cfg, 1), t_end=10.0)
    assert 0 < info.value.t <= 10.0


def test_default_t_end_needs_decay():
    with pytest.raises(ConfigError):
        default_t_end(Generator(np.zeros((3, 3))))


@settings(max_examples=40, deadline=None)
@given(st.floats(-60, 60))
def test_lagrange_weights_match_quadrature(phi):
    w = _lagrange_weights(np.array([phi]))[0]
    # weight for the node-interpolant of exp(u): should integrate exp(i phi u + u)
    interp = np.exp(_GL_U)
    ref_re = quad(lambda u: np.cos(phi * u) * np.exp(u), -1, 1, limit=200)[0]
    ref_im = quad(lambda u: np.sin(phi * u) * np.exp(u), -1, 1, limit=200)[0]
    assert abs(w @ interp - (ref_re + 1j * ref_im)) < 1e-6


def test_numerical_laplace_single_exponential():
    # one decaying mode: transform is x0 / (-lambda - i omega)
    cfg = ChainConfig.homogeneous(2.0, [0.0], 1.0)
    gen = build_generator(cfg)
    traj = evolve(gen, cfg, initial_state(cfg, 1), tolerance=1e-12)
    w = np.linspace(-30, 30, 41)
    got = numerical_laplace(traj, w)[:, 0]
    assert np.abs(got - 1 / (1.0 - 1j * w)).max() < 1e-8
    assert numerical_laplace(traj, 0.0).shape == (3,)


def test_numerical_laplace_needs_tail():
    gen = build_generator(TWO_SITE)
    traj = evolve(gen, TWO_SITE, initial_state(TWO_SITE, 1), t_end=0.5)
    with pytest.raises(InsufficientTailError):
        numerical_laplace(traj, [0.0])
