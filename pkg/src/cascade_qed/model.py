"""Chain configuration and the one-quantum generator.

State vectors are ordered ``[xi_1, alpha_1, beta_1, xi_2, alpha_2, beta_2, ...]``:
atom amplitude, clockwise-mode amplitude and counterclockwise-mode amplitude
for each site. All frequencies are angular offsets from the atomic
transition (rotating frame) in one self-consistent unit; time is its
reciprocal.

Sites are 1-based wherever a user supplies an index and 0-based internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigError

XI, ALPHA, BETA = 0, 1, 2


def xi_index(k: int) -> int:
    return 3 * k + XI


def alpha_index(k: int) -> int:
    return 3 * k + ALPHA


def beta_index(k: int) -> int:
    return 3 * k + BETA


def _finite(name, value):
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SiteParams:
    """One atom plus microtoroid.

    ``delta`` is the cavity-atom detuning, ``kappa_ex`` the fiber coupling
    rate, ``kappa_in`` the intrinsic loss rate, ``g`` the atom-mode coupling
    and ``h`` the direct coupling between the two counter-propagating modes.
    """

    delta: float = 0.0
    kappa_ex: float = 0.0
    kappa_in: float = 0.0
    g: complex = 0.0
    h: complex = 0.0

    def __post_init__(self):
        for name in ("delta", "kappa_ex", "kappa_in", "g", "h"):
            _finite(name, getattr(self, name))
        if self.kappa_ex < 0 or self.kappa_in < 0:
            raise ConfigError(
                f"rates must be non-negative (kappa_ex={self.kappa_ex}, "
                f"kappa_in={self.kappa_in})"
            )
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "kappa_ex", float(self.kappa_ex))
        object.__setattr__(self, "kappa_in", float(self.kappa_in))
        object.__setattr__(self, "g", complex(self.g))
        object.__setattr__(self, "h", complex(self.h))

    @property
    def kappa(self) -> float:
        return self.kappa_ex + self.kappa_in


@dataclass(frozen=True)
class LinkPhases:
    """Propagation phases of one fiber segment (a: left to right, b: right to left)."""

    phi_a: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self):
        _finite("phi_a", self.phi_a)
        _finite("phi_b", self.phi_b)
        object.__setattr__(self, "phi_a", float(self.phi_a))
        object.__setattr__(self, "phi_b", float(self.phi_b))


@dataclass(frozen=True)
class ChainConfig:
    gamma_A: float
    sites: tuple[SiteParams, ...]
    links: tuple[LinkPhases, ...] = ()

    def __post_init__(self):
        _finite("gamma_A", self.gamma_A)
        if self.gamma_A < 0:
            raise ConfigError(f"gamma_A must be non-negative, got {self.gamma_A}")
        sites = tuple(self.sites)
        if len(sites) == 0:
            raise ConfigError("a chain needs at least one site")
        links = tuple(self.links)
        if not links and len(sites) > 1:
            links = tuple(LinkPhases() for _ in range(len(sites) - 1))
        if len(links) != len(sites) - 1:
            raise ConfigError(
                f"links has length {len(links)}, expected {len(sites) - 1} for {len(sites)} sites"
            )
        object.__setattr__(self, "gamma_A", float(self.gamma_A))
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "links", links)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 3 * len(self.sites)

    @classmethod
    def homogeneous(
        cls,
        gamma_A: float,
        g: Sequence[complex],
        kappa_ex: float,
        kappa_in: float = 0.0,
        delta: float = 0.0,
        h: complex = 0.0,
        phi_a: float = 0.0,
        phi_b: float = 0.0,
    ) -> "ChainConfig":
        """Identical sites apart from the couplings ``g``; equal link phases."""
        sites = tuple(SiteParams(delta, kappa_ex, kappa_in, gk, h) for gk in g)
        links = tuple(LinkPhases(phi_a, phi_b) for _ in range(len(sites) - 1))
        return cls(gamma_A, sites, links)

    def mirror(self) -> "ChainConfig":
        """Spatially reflected chain.

        Reversing the site order swaps the roles of the two propagation
        directions, so the modes a and b exchange labels. Conjugating g and h
        keeps the Hamiltonian form invariant under that relabelling.
        """
        sites = tuple(
            SiteParams(s.delta, s.kappa_ex, s.kappa_in, s.g.conjugate(), s.h.conjugate())
            for s in reversed(self.sites)
        )
        links = tuple(LinkPhases(l.phi_b, l.phi_a) for l in reversed(self.links))
        return ChainConfig(self.gamma_A, sites, links)


@dataclass(frozen=True, eq=False)
class OneQuantumState:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).ravel()
        if amps.size == 0 or amps.size % 3:
            raise ConfigError(f"amplitude vector length {amps.size} is not a multiple of 3")
        if not np.all(np.isfinite(amps)):
            raise ConfigError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def n_sites(self) -> int:
        return self.amps.size // 3

    @property
    def xi(self) -> np.ndarray:
        return self.amps[XI::3]

    @property
    def alpha(self) -> np.ndarray:
        return self.amps[ALPHA::3]

    @property
    def beta(self) -> np.ndarray:
        return self.amps[BETA::3]

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def __mul__(self, scalar):
        return OneQuantumState(self.amps * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Generator:
    """Matrix ``M`` of the no-jump evolution ``d(amps)/dt = M @ amps``.

    ``M = -i H`` with ``H`` the non-Hermitian Hamiltonian.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"generator must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    @property
    def max_real_eigenvalue(self) -> float:
        return float(self.eigenvalues.real.max())

    @property
    def least_damped_eigenvalue(self) -> complex:
        ev = self.eigenvalues
        return complex(ev[np.argmax(ev.real)])


@dataclass(frozen=True, eq=False)
class OutputCoefficients:
    """Coefficients of the mode amplitudes in the fiber output operators."""

    c_a: np.ndarray
    c_b: np.ndarray

    def fiber_a(self, amps: np.ndarray) -> np.ndarray:
        """Output amplitude ``sum_k c_a[k] alpha_k``; ``amps`` may carry leading axes."""
        return np.asarray(amps)[..., ALPHA::3] @ self.c_a

    def fiber_b(self, amps: np.ndarray) -> np.ndarray:
        return np.asarray(amps)[..., BETA::3] @ self.c_b


def cumulative_phases(config: ChainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Phase accumulated from site 0 to site k, for each direction's phase list."""
    phi_a = np.concatenate([[0.0], np.cumsum([l.phi_a for l in config.links])])
    phi_b = np.concatenate([[0.0], np.cumsum([l.phi_b for l in config.links])])
    return phi_a, phi_b


def output_coefficients(config: ChainConfig) -> OutputCoefficients:
    cum_a, cum_b = cumulative_phases(config)
    amp = np.sqrt(2.0 * np.array([s.kappa_ex for s in config.sites]))
    # a-direction phases are referenced to the first site, b-direction to the last
    c_a = np.exp(-1j * cum_a) * amp
    c_b = np.exp(-1j * (cum_b[-1] - cum_b)) * amp
    return OutputCoefficients(c_a, c_b)


def build_generator(config: ChainConfig) -> Generator:
    n = config.n_sites
    m = np.zeros((3 * n, 3 * n), dtype=complex)
    for k, s in enumerate(config.sites):
        x, a, b = xi_index(k), alpha_index(k), beta_index(k)
        g, gc, h = s.g, s.g.conjugate(), s.h
        m[x, x] = -config.gamma_A / 2
        m[x, a] = -1j * g
        m[x, b] = -1j * gc
        m[a, a] = -(s.kappa + 1j * s.delta)
        m[a, x] = -1j * gc
        m[a, b] = -1j * h
        m[b, b] = -(s.kappa + 1j * s.delta)
        m[b, x] = -1j * g
        m[b, a] = -1j * h.conjugate()
    # strictly downstream feeds: a runs 1 -> N, b runs N -> 1
    cum_a, cum_b = cumulative_phases(config)
    kex = np.array([s.kappa_ex for s in config.sites])
    for k in range(n):
        for j in range(k):
            rate = 2.0 * math.sqrt(kex[j] * kex[k])
            m[alpha_index(k), alpha_index(j)] = -rate * np.exp(1j * (cum_a[k] - cum_a[j]))
            m[beta_index(j), beta_index(k)] = -rate * np.exp(1j * (cum_b[k] - cum_b[j]))
    return Generator(m)


def initial_state(config: ChainConfig, excited_atom: int) -> OneQuantumState:
    """Atom ``excited_atom`` (1-based) excited, everything else empty."""
    if not 1 <= excited_atom <= config.n_sites:
        raise ConfigError(f"excited_atom must be in 1..{config.n_sites}, got {excited_atom}")
    amps = np.zeros(config.dim, dtype=complex)
    amps[xi_index(excited_atom - 1)] = 1.0
    return OneQuantumState(amps)


def mirror_state(state: OneQuantumState) -> OneQuantumState:
    """Amplitudes of ``state`` in the mirrored chain (see :meth:`ChainConfig.mirror`).

    Site order is reversed and the two mode amplitudes swap; with this map the
    mirrored generator is an exact permutation similarity of the original.
    """
    per_site = state.amps.reshape(-1, 3)[::-1]
    return OneQuantumState(per_site[:, [XI, BETA, ALPHA]].ravel())


CHANNELS_FIBER = ("fiber_a", "fiber_b")


def channel_names(n_sites: int) -> list[str]:
    return (
        list(CHANNELS_FIBER)
        + [f"side_atom_{k + 1}" for k in range(n_sites)]
        + [f"scatter_site_{k + 1}" for k in range(n_sites)]
    )


def channel_rates(config: ChainConfig, amps: np.ndarray, coeffs: OutputCoefficients | None = None):
    """Instantaneous emission rate into every channel.

    Returns an array whose last axis follows :func:`channel_names`; leading
    axes of ``amps`` are preserved. The rates sum to ``-d|amps|^2/dt``.
    """
    amps = np.asarray(amps)
    coeffs = coeffs or output_coefficients(config)
    kin = np.array([s.kappa_in for s in config.sites])
    xi, al, be = amps[..., XI::3], amps[..., ALPHA::3], amps[..., BETA::3]
    side = config.gamma_A * np.abs(xi) ** 2
    scatter = 2.0 * kin * (np.abs(al) ** 2 + np.abs(be) ** 2)
    fa = np.abs(coeffs.fiber_a(amps)) ** 2
    fb = np.abs(coeffs.fiber_b(amps)) ** 2
    return np.concatenate([fa[..., None], fb[..., None], side, scatter], axis=-1)
