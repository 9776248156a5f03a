"""Bad-cavity reduction: adiabatic elimination of the cavity modes.

When every cavity decays much faster than its atom couples to it, the mode
amplitudes follow the atoms instantaneously and the dynamics collapse onto the
N atomic amplitudes. The resulting generator has enhanced single-atom decay
on the diagonal and fiber-mediated exchange off the diagonal, where a photon
emitted by atom m reaches atom M after passing the intermediate cavities, each
contributing a transmission factor ``eta``.

The reduction here is exact for the adiabatic elimination: it equals the Schur
complement of the full generator with the field equations set stationary.
Intrinsic loss enters both the feed strength (``kappa_ex``) and the
transmission through each intermediate cavity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError
from .model import (
    ALPHA,
    BETA,
    XI,
    ChainConfig,
    OneQuantumState,
    build_generator,
    output_coefficients,
)
from .spectra import FrequencyGrid

BAD_CAVITY_RATIO = 3.0


class ValidityWarning(UserWarning):
    """A model is used outside the regime where its approximations hold."""


def check_homogeneous(config: ChainConfig) -> tuple[float, float, float]:
    """Return ``(kappa_ex, kappa_in, delta)`` shared by all sites or raise.

    The reduction needs identical cavities, no mode coupling and no link
    phases.
    """
    s0 = config.sites[0]
    for s in config.sites:
        if (s.kappa_ex, s.kappa_in, s.delta) != (s0.kappa_ex, s0.kappa_in, s0.delta):
            raise ConfigError("reduced model needs identical kappa_ex, kappa_in and delta at every site")
        if s.h != 0:
            raise ConfigError("reduced model needs zero mode coupling h")
    if any(l.phi_a != 0 or l.phi_b != 0 for l in config.links):
        raise ConfigError("reduced model needs zero link phases")
    if s0.kappa == 0:
        raise ConfigError("reduced model needs a nonzero cavity decay rate")
    return s0.kappa_ex, s0.kappa_in, s0.delta


def _warn_validity(kappa, g_max):
    if kappa < BAD_CAVITY_RATIO * g_max:
        warnings.warn(
            f"bad-cavity reduction used with kappa={kappa:.4g} not >> max|g|={g_max:.4g}",
            ValidityWarning,
            stacklevel=3,
        )


def transmission_factor(kappa_ex: float, kappa_in: float, delta: float) -> complex:
    """Amplitude transmission of a photon passing an empty cavity.

    Equals ``-(kappa - i delta)/(kappa + i delta)`` without intrinsic loss.
    """
    kappa = kappa_ex + kappa_in
    return (kappa_in - kappa_ex + 1j * delta) / (kappa + 1j * delta)


@dataclass(frozen=True, eq=False)
class ReducedGenerator:
    """Atom-only generator ``d xi/dt = matrix @ xi``."""

    matrix: np.ndarray
    config: ChainConfig

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    def evolve(self, t_grid, xi0) -> np.ndarray:
        """Atomic amplitudes on ``t_grid``; shape ``(len(t), N)``."""
        ev, vecs = np.linalg.eig(self.matrix)
        c = np.linalg.solve(vecs, np.asarray(xi0, dtype=complex))
        t = np.asarray(t_grid, dtype=float)
        return (np.exp(np.outer(t, ev)) * c) @ vecs.T


def build_reduced_generator(config: ChainConfig, warn: bool = True) -> ReducedGenerator:
    kex, kin, delta = check_homogeneous(config)
    kappa = kex + kin
    g = np.array([s.g for s in config.sites])
    if warn:
        _warn_validity(kappa, np.abs(g).max())
    z = kappa + 1j * delta
    eta = transmission_factor(kex, kin, delta)
    n = g.size
    m = np.diag(-config.gamma_A / 2 - 2 * np.abs(g) ** 2 / z).astype(complex)
    for hi in range(n):
        for lo in range(hi):
            m[hi, lo] = m[lo, hi] = 2 * g[hi] * g[lo].conjugate() * kex / z**2 * eta ** (hi - lo - 1)
    return ReducedGenerator(m, config)


def _blocks(config: ChainConfig):
    full = build_generator(config).matrix
    n = config.n_sites
    atoms = np.arange(n) * 3 + XI
    fields = np.concatenate([np.arange(n) * 3 + ALPHA, np.arange(n) * 3 + BETA])
    return full, atoms, fields


def schur_reduced_generator(config: ChainConfig) -> np.ndarray:
    """Adiabatic elimination done numerically: ``M_aa - M_af M_ff^{-1} M_fa``."""
    full, atoms, fields = _blocks(config)
    maa = full[np.ix_(atoms, atoms)]
    maf = full[np.ix_(atoms, fields)]
    mfa = full[np.ix_(fields, atoms)]
    mff = full[np.ix_(fields, fields)]
    return maa - maf @ np.linalg.solve(mff, mfa)


def adiabatic_field_reconstruction(config: ChainConfig, xi) -> tuple[np.ndarray, np.ndarray]:
    """Mode amplitudes slaved to atomic amplitudes ``xi`` (last axis = site).

    Solves the stationary field equations, which are lower triangular in the
    a-direction and upper triangular in the b-direction. Returns ``(alpha, beta)``
    with the shape of ``xi``.
    """
    check_homogeneous(config)
    xi = np.asarray(xi, dtype=complex)
    n = config.n_sites
    if xi.shape[-1] != n:
        raise ConfigError(f"xi has {xi.shape[-1]} sites, config has {n}")
    full = build_generator(config).matrix
    ia, ib, ix = np.arange(n) * 3 + ALPHA, np.arange(n) * 3 + BETA, np.arange(n) * 3 + XI
    rhs = xi.reshape(-1, n).T
    alpha = solve_triangular(full[np.ix_(ia, ia)], -full[np.ix_(ia, ix)] @ rhs, lower=True)
    beta = solve_triangular(full[np.ix_(ib, ib)], -full[np.ix_(ib, ix)] @ rhs, lower=False)
    return alpha.T.reshape(xi.shape), beta.T.reshape(xi.shape)


def _atomic_initial(config: ChainConfig, initial) -> np.ndarray:
    n = config.n_sites
    if isinstance(initial, OneQuantumState):
        if initial.n_sites != n:
            raise ConfigError(f"initial state has {initial.n_sites} sites, config has {n}")
        if np.any(initial.alpha != 0) or np.any(initial.beta != 0):
            raise ConfigError("reduced model starts from atomic amplitudes only; mode amplitudes must be zero")
        return np.array(initial.xi)
    if not 1 <= initial <= n:
        raise ConfigError(f"excited_atom must be in 1..{n}, got {initial}")
    x0 = np.zeros(n, dtype=complex)
    x0[initial - 1] = 1.0
    return x0


def reduced_amplitudes(config: ChainConfig, initial, omegas, warn: bool = True) -> np.ndarray:
    """Full ``3N`` amplitude transforms of the reduced model, shape ``(len(omegas), 3N)``.

    ``initial`` is a 1-based excited atom or a state with empty modes. The
    mode amplitudes are the adiabatically slaved fields.
    """
    red = build_reduced_generator(config, warn=warn)
    x0 = _atomic_initial(config, initial)
    n = config.n_sites
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    a = -1j * w[:, None, None] * np.eye(n) - red.matrix
    xi = np.linalg.solve(a, np.broadcast_to(x0, (w.size, n))[..., None])[..., 0]
    alpha, beta = adiabatic_field_reconstruction(config, xi)
    out = np.empty((w.size, 3 * n), dtype=complex)
    out[:, XI::3], out[:, ALPHA::3], out[:, BETA::3] = xi, alpha, beta
    return out


def reduced_fiber_spectra(config: ChainConfig, excited_atom: int, grid: FrequencyGrid):
    """Fiber spectra ``(T_a, T_b)`` of the reduced model with one atom initially excited."""
    amps = reduced_amplitudes(config, excited_atom, grid.values)
    coeffs = output_coefficients(config)
    ta = np.abs(coeffs.fiber_a(amps)) ** 2 / (2 * np.pi)
    tb = np.abs(coeffs.fiber_b(amps)) ** 2 / (2 * np.pi)
    return ta, tb


# --- two-site closed form --------------------------------------------------------


@dataclass(frozen=True)
class TwoSiteClosedForm:
    """Analytic solution of the two-site reduced model started from atom 1."""

    lambda_plus: complex
    lambda_minus: complex
    p: complex
    d: complex  # half the difference of the diagonal entries
    c: complex  # off-diagonal entry

    @property
    def degenerate(self) -> bool:
        return self.p == 0

    def _parts(self, t):
        t = np.asarray(t, dtype=float)
        ep, em = np.exp(self.lambda_plus * t), np.exp(self.lambda_minus * t)
        if self.degenerate:
            return ep, t * ep
        return 0.5 * (ep + em), (ep - em) / self.p

    def xi1(self, t):
        even, odd = self._parts(t)
        return even + self.d * odd

    def xi2(self, t):
        _, odd = self._parts(t)
        return self.c * odd


def two_site_closed_form(
    g1: complex, g2: complex, kappa: float, delta: float, gamma_A: float
) -> TwoSiteClosedForm:
    """Eigenvalues and amplitudes of the lossless two-site reduced model."""
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    _warn_validity(kappa, max(abs(g1), abs(g2)))
    z = kappa + 1j * delta
    s1, s2 = abs(g1) ** 2, abs(g2) ** 2
    p = 2 / z * np.sqrt(complex((s1 - s2) ** 2 + (2 * kappa * np.conj(g1) * g2 / z) ** 2))
    mean = -gamma_A / 2 - (s1 + s2) / z
    return TwoSiteClosedForm(
        lambda_plus=mean + p / 2,
        lambda_minus=mean - p / 2,
        p=p,
        d=-(s1 - s2) / z,
        c=2 * kappa * np.conj(g1) * g2 / z**2,
    )


# --- collective structure ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StructureReport:
    """Decomposition of the reduced generator into residual decay, collective
    jump operators and a coherent exchange Hamiltonian.

    ``reassemble()`` rebuilds the generator as
    ``-gamma_A/2 - (1/2) sum_j rate_j v_j v_j^+ - i H``. ``exact`` is true when
    the decomposition reproduces the reduced generator to machine precision;
    intrinsic loss or detuning spoils the pattern and leaves ``kind="general"``.
    """

    kind: str
    residual_rate: float
    jump_vectors: tuple[np.ndarray, ...]
    jump_rates: tuple[float, ...]
    hamiltonian: np.ndarray
    exact: bool
    note: str = ""

    def reassemble(self) -> np.ndarray:
        n = self.hamiltonian.shape[0]
        m = -self.residual_rate / 2 * np.eye(n) - 1j * self.hamiltonian
        for v, r in zip(self.jump_vectors, self.jump_rates):
            m = m - 0.5 * r * np.outer(v, v.conj())
        return m


def _pattern(g: np.ndarray) -> str:
    scale = np.abs(g).max()
    if scale == 0:
        return "general"
    tol = 1e-12 * scale
    if np.all(np.abs(g - g[0]) <= tol) and abs(g[0].imag) <= tol:
        return "superradiant"
    alt = np.array([g[0] if k % 2 == 0 else 1j * g[0] for k in range(g.size)])
    if abs(g[0].imag) <= tol and np.all(np.abs(g - alt) <= tol):
        return "alternating"
    return "general"


def special_case_structure(config: ChainConfig) -> StructureReport:
    """Classify a homogeneous chain at zero detuning.

    * all couplings equal and real: one collective jump ``sum_k (-1)^k sigma_k``
      at rate ``4 N g^2/kappa`` and no coherent exchange;
    * couplings alternating ``g, i g, g, ...``: two jumps on the odd and even
      sublattices and a nearest-neighbour exchange Hamiltonian.
    """
    red = build_reduced_generator(config, warn=False)
    kex, kin, delta = check_homogeneous(config)
    g = np.array([s.g for s in config.sites])
    n = g.size
    kind = _pattern(g) if delta == 0 else "general"
    gamma = config.gamma_A
    if kind == "general":
        # residual decay plus the full non-Hermitian remainder as a Hamiltonian
        rest = red.matrix + gamma / 2 * np.eye(n)
        return StructureReport("general", gamma, (), (), 1j * rest, True,
                               "no collective pattern; remainder kept as non-Hermitian H")
    kappa = kex + kin
    gr = g[0].real
    signs = np.array([(-1.0) ** k for k in range(n)])
    if kind == "superradiant":
        vecs = (signs / np.sqrt(n),)
        rates = (4 * n * gr**2 / kappa,)
        ham = np.zeros((n, n), dtype=complex)
    else:
        odd = np.where(np.arange(n) % 2 == 0, signs, 0.0)
        even = np.where(np.arange(n) % 2 == 1, signs, 0.0)
        vecs = tuple(v / np.linalg.norm(v) for v in (odd, even) if np.any(v))
        rates = tuple(4 * np.count_nonzero(v) * gr**2 / kappa for v in (odd, even) if np.any(v))
        ham = np.zeros((n, n), dtype=complex)
        for hi in range(n):
            for lo in range(hi - 1, -1, -2):
                # pairs on opposite sublattices; sign set by the downstream site
                ham[hi, lo] = ham[lo, hi] = (2 * gr**2 / kappa) * (-1.0 if hi % 2 else 1.0)
    report = StructureReport(kind, gamma, vecs, rates, ham, True)
    defect = np.abs(report.reassemble() - red.matrix).max()
    exact = bool(defect <= 1e-12 * max(1.0, np.abs(red.matrix).max()))
    note = "" if exact else (
        f"pattern holds only approximately (intrinsic loss gives transmission "
        f"{transmission_factor(kex, kin, delta):.6g}); reassembly defect {defect:.3g}"
    )
    return StructureReport(kind, gamma, vecs, rates, ham, exact, note)


@dataclass(frozen=True, eq=False)
class ThreeSiteEigenstructure:
    """Exchange eigenvalues (``e_plus, e_minus, e_zero``) and eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hamiltonian: np.ndarray

    def expansion(self, atom: int) -> np.ndarray:
        """Coefficients of single-atom excitation ``atom`` (1-based) on the eigenvectors."""
        if atom not in (1, 2, 3):
            raise ConfigError("atom must be 1, 2 or 3")
        return self.eigenvectors.conj().T[:, atom - 1]


def n3_eigenstructure(config: ChainConfig) -> ThreeSiteEigenstructure:
    """Coherent part of the three-site alternating chain ``g, i g, g``."""
    if config.n_sites != 3:
        raise ConfigError("three-site eigenstructure needs exactly three sites")
    _, _, delta = check_homogeneous(config)
    g = np.array([s.g for s in config.sites])
    if delta != 0 or _pattern(g) != "alternating":
        raise ConfigError("three-site eigenstructure needs g_1 = -i g_2 = g_3 real and zero detuning")
    scale = 2 * g[0].real ** 2 / config.sites[0].kappa
    ham = scale * np.array([[0, -1, 0], [-1, 0, 1], [0, 1, 0]], dtype=complex)
    r2 = np.sqrt(2.0)
    vecs = np.array([[1, -r2, -1], [1, r2, -1], [r2, 0, r2]], dtype=complex).T / 2
    return ThreeSiteEigenstructure(np.array([r2 * scale, -r2 * scale, 0.0]), vecs, ham)
