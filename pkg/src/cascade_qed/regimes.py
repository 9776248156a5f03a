"""Strong-coupling analysis of a two-site chain.

Two amplitude bases make the strong-coupling physics transparent:

* the delocalized basis (X, Y, Z)+-, which splits the generator into two
  independent three-level blocks when both atoms couple with the same phase;
* the dressed basis (X+-, Y+-, V, W), in which a rotating-wave approximation
  gives local normal modes at +-sqrt(2) g coupled through the fiber at rate
  kappa/2 when the couplings differ in phase by pi/2.

Closed-form spectra built on these bases serve as oracles for the full solve.
The formulas assume no intrinsic loss, so ``kappa`` below is the fiber
coupling ``kappa_ex``.
"""

from __future__ import annotations

import warnings
from dataclasses import astuple, dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError
from .model import ChainConfig, Generator, OneQuantumState, initial_state
from .spectra import FrequencyGrid

SQ2 = np.sqrt(2.0)

# Rows: X+, X-, Y+, Y-, Z+, Z-; columns: xi1, alpha1, beta1, xi2, alpha2, beta2
DELOCALIZED = np.array(
    [
        [1 / SQ2, 0, 0, 1 / SQ2, 0, 0],
        [1 / SQ2, 0, 0, -1 / SQ2, 0, 0],
        [0, 0.5, 0.5, 0, 0.5, 0.5],
        [0, 0.5, 0.5, 0, -0.5, -0.5],
        [0, 0.5, -0.5, 0, -0.5, 0.5],
        [0, 0.5, -0.5, 0, 0.5, -0.5],
    ],
    dtype=complex,
)

# Rows: X+, X-, Y+, Y-, V, W
DRESSED = np.array(
    [
        [1 / SQ2, 0.5, 0.5, 0, 0, 0],
        [1 / SQ2, -0.5, -0.5, 0, 0, 0],
        [0, 0, 0, 1 / SQ2, -0.5j, 0.5j],
        [0, 0, 0, 1 / SQ2, 0.5j, -0.5j],
        [0, 1 / SQ2, -1 / SQ2, 0, 0, 0],
        [0, 0, 0, 0, 1 / SQ2, 1 / SQ2],
    ],
    dtype=complex,
)
DELOCALIZED_INV = np.linalg.inv(DELOCALIZED)
DRESSED_INV = np.linalg.inv(DRESSED)


@dataclass(frozen=True)
class DelocalizedAmplitudes:
    x_plus: complex
    x_minus: complex
    y_plus: complex
    y_minus: complex
    z_plus: complex
    z_minus: complex

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=complex)


@dataclass(frozen=True)
class DressedAmplitudes:
    x_plus: complex
    x_minus: complex
    y_plus: complex
    y_minus: complex
    v: complex
    w: complex

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=complex)


def _two_site_amps(state) -> np.ndarray:
    amps = state.amps if isinstance(state, OneQuantumState) else np.asarray(state, dtype=complex)
    if amps.size != 6:
        raise ConfigError(f"two-site transform needs 6 amplitudes, got {amps.size}")
    return amps


def delocalized_transform(state) -> DelocalizedAmplitudes:
    return DelocalizedAmplitudes(*(DELOCALIZED @ _two_site_amps(state)))


def delocalized_inverse(amps: DelocalizedAmplitudes) -> OneQuantumState:
    return OneQuantumState(DELOCALIZED_INV @ amps.as_array())


def dressed_transform(state) -> DressedAmplitudes:
    return DressedAmplitudes(*(DRESSED @ _two_site_amps(state)))


def dressed_inverse(amps: DressedAmplitudes) -> OneQuantumState:
    return OneQuantumState(DRESSED_INV @ amps.as_array())


def transformed_generator(generator: Generator, transform: np.ndarray) -> np.ndarray:
    """Generator acting on transformed amplitudes: ``T M T^{-1}``."""
    return transform @ generator.matrix @ np.linalg.inv(transform)


def _close(a, b, scale):
    return abs(a - b) <= 1e-9 * max(scale, 1e-300)


def _require_symmetric_pair(config: ChainConfig, what: str):
    if config.n_sites != 2:
        raise ConfigError(f"{what} needs exactly two sites, got {config.n_sites}")
    s1, s2 = config.sites
    link = config.links[0]
    scale = max(abs(s1.g), abs(s2.g), s1.kappa, 1.0)
    if not (
        _close(s1.kappa_ex, s2.kappa_ex, scale)
        and _close(s1.kappa_in, s2.kappa_in, scale)
        and s1.delta == 0 and s2.delta == 0
        and s1.h == 0 and s2.h == 0
        and link.phi_a == 0 and link.phi_b == 0
    ):
        raise ConfigError(
            f"{what} assumes identical sites with zero detuning, zero mode coupling and zero link phases"
        )
    return s1, s2


def fiber_dark_state(config: ChainConfig) -> OneQuantumState:
    """The one-quantum state that emits nothing into either fiber direction.

    Requires ``g_1 = g_2`` real; ``kappa`` is the total cavity decay rate.
    """
    s1, s2 = _require_symmetric_pair(config, "the fiber-dark state")
    g = s1.g
    if not (_close(s1.g, s2.g, abs(g)) and g.imag == 0):
        raise ConfigError("the fiber-dark state needs g_1 = g_2 real")
    g, kappa = g.real, s1.kappa
    norm = np.sqrt(2 * kappa**2 + 4 * g**2)
    amps = np.array([-1j * kappa, -g, g, -1j * kappa, g, -g], dtype=complex) / norm
    return OneQuantumState(amps)


def nearest_eigenvalue(generator: Generator, state: OneQuantumState) -> complex:
    """Eigenvalue whose eigenvector carries the largest share of ``state``."""
    ev, vecs = np.linalg.eig(generator.matrix)
    weights = np.abs(np.linalg.solve(vecs, state.amps)) * np.linalg.norm(vecs, axis=0)
    return complex(ev[np.argmax(weights)])


# --- rotating-wave model for g_1 = i g_2 -----------------------------------------


def _quadrature_g(config: ChainConfig) -> tuple[float, float]:
    s1, s2 = _require_symmetric_pair(config, "the dressed-state model")
    g1 = s1.g
    if not (g1.imag == 0 and _close(s2.g, -1j * g1, abs(g1))):
        raise ConfigError("the dressed-state model needs g_1 = i g_2 with g_1 real")
    return g1.real, s1.kappa_ex


def rwa_generator(config: ChainConfig) -> np.ndarray:
    """Generator of the dressed amplitudes (X+, X-, Y+, Y-, V, W) after the RWA."""
    g, kappa = _quadrature_g(config)
    if abs(g) < 10 * max(kappa, config.gamma_A):
        warnings.warn(
            f"rotating-wave model used outside |g| >> kappa, gamma_A (g={g}, kappa={kappa})",
            stacklevel=2,
        )
    damp = 0.5 * (config.gamma_A / 2 + kappa)
    a = np.zeros((6, 6), dtype=complex)
    for i, sign in ((0, 1), (1, -1)):
        x, y = i, 2 + i
        a[x, x] = a[y, y] = -(damp + sign * 1j * SQ2 * g)
        a[x, y] = a[y, x] = 0.5j * kappa
    a[4, 4] = a[5, 5] = -kappa
    a[4, 5] = kappa
    a[5, 4] = -kappa
    return a


def rwa_evolve(config: ChainConfig, t_grid, state0: OneQuantumState | None = None) -> np.ndarray:
    """Dressed amplitudes on ``t_grid`` under the RWA model; shape ``(len(t), 6)``."""
    a = rwa_generator(config)
    state0 = state0 if state0 is not None else initial_state(config, 1)
    d0 = DRESSED @ state0.amps
    return np.array([expm(a * t) @ d0 for t in np.asarray(t_grid, dtype=float)])


def _resolvent(a, x0, omegas):
    eye = np.eye(a.shape[0])
    return np.linalg.solve(-1j * omegas[:, None, None] * eye - a, np.broadcast_to(x0, (omegas.size, x0.size))[..., None])[..., 0]


def strong_coupling_spectrum_oracle(
    config: ChainConfig,
    grid: FrequencyGrid,
    variant: str = "equal-g",
    state0: OneQuantumState | None = None,
):
    """Fiber spectra from the strong-coupling closed forms.

    ``variant="equal-g"`` uses the two decoupled three-level blocks (exact
    when there is no intrinsic loss); ``variant="quadrature-g"`` uses the
    rotating-wave dressed-state model. Returns ``(fiber_a, fiber_b)``.
    """
    if variant not in ("equal-g", "quadrature-g"):
        raise ConfigError(f"unknown strong-coupling variant {variant!r}")
    s1, _ = _require_symmetric_pair(config, "the strong-coupling oracle")
    if s1.kappa_in > 0.02 * s1.kappa_ex:
        raise ConfigError(
            f"strong-coupling formulas neglect intrinsic loss; kappa_in={s1.kappa_in} "
            f"exceeds 2% of kappa_ex={s1.kappa_ex}"
        )
    state0 = state0 if state0 is not None else initial_state(config, 1)
    w = grid.values
    gamma = config.gamma_A

    if variant == "equal-g":
        g = s1.g
        if not (g.imag == 0 and _close(config.sites[1].g, g, abs(g))):
            raise ConfigError("equal-g variant needs g_1 = g_2 real")
        g, kappa = g.real, s1.kappa_ex
        d0 = DELOCALIZED @ state0.amps
        plus = np.array([[-gamma / 2, -1j * SQ2 * g, 0], [-1j * SQ2 * g, -2 * kappa, -kappa], [0, kappa, 0]])
        minus = np.array([[-gamma / 2, -1j * SQ2 * g, 0], [-1j * SQ2 * g, 0, kappa], [0, -kappa, -2 * kappa]])
        yp = _resolvent(plus, d0[[0, 2, 4]], w)[:, 1]
        lm = _resolvent(minus, d0[[1, 3, 5]], w)
        ym = lm[:, 1]
        # Z- is slaved to Y- when it starts empty
        zm = -kappa / (2 * kappa - 1j * w) * ym if d0[5] == 0 else lm[:, 2]
        ta = kappa / np.pi * np.abs(yp + zm) ** 2
        tb = kappa / np.pi * np.abs(yp - zm) ** 2
        return ta, tb

    g, kappa = _quadrature_g(config)
    amps = _resolvent(rwa_generator(config), DRESSED @ state0.amps, w)
    xp, xm, yp, ym, v, wv = amps.T
    ta = kappa / (4 * np.pi) * np.abs((xp + 1j * yp) - (xm + 1j * ym) + SQ2 * (wv + v)) ** 2
    tb = kappa / (4 * np.pi) * np.abs((xp - 1j * yp) - (xm - 1j * ym) + SQ2 * (wv + v)) ** 2
    return ta, tb


def detect_strong_variant(config: ChainConfig) -> str:
    """``"equal-g"`` or ``"quadrature-g"`` from the coupling phases of a two-site chain."""
    if config.n_sites != 2:
        raise ConfigError("strong-coupling oracle needs exactly two sites")
    g1, g2 = config.sites[0].g, config.sites[1].g
    scale = max(abs(g1), 1e-300)
    if _close(g1, g2, scale):
        return "equal-g"
    if _close(g2, -1j * g1, scale):
        return "quadrature-g"
    raise ConfigError("couplings match neither g_1 = g_2 nor g_1 = i g_2")
