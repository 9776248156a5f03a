"""No-jump time evolution with channel-resolved emission bookkeeping.

With a single initial excitation, the first photodetection leaves the system in
its ground state, so the conditional (unnormalized) one-quantum state obeying
``dx/dt = M x`` together with the accumulated emission probability is an
exact description of the full master-equation dynamics.

The channel fractions are integrated alongside the amplitudes as extra ODE
components, so they are computed to the same order as the state itself and
``|x|^2 + P_spon = 1`` is a genuine accuracy check rather than an identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .errors import ConfigError, InsufficientTailError, IntegrationError
from .model import (
    ChainConfig,
    Generator,
    OneQuantumState,
    channel_names,
    channel_rates,
    output_coefficients,
)

DEFAULT_RTOL = 1e-10


@dataclass(eq=False)
class Trajectory:
    """Integrated no-jump evolution.

    ``states`` has shape ``(len(times), 3N)``; ``channel_fractions`` has shape
    ``(len(times), 2 + 2N)`` with columns named by ``channels``.
    """

    times: np.ndarray
    states: np.ndarray
    p_spon: np.ndarray
    channel_fractions: np.ndarray
    channels: list[str]
    generator: Generator
    dense: object = field(default=None, repr=False)
    _nodes: tuple | None = field(default=None, repr=False)

    @property
    def norm2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.states.conj(), self.states).real

    @property
    def final_state(self) -> OneQuantumState:
        return OneQuantumState(self.states[-1])

    def fraction(self, channel: str) -> np.ndarray:
        return self.channel_fractions[:, self.channels.index(channel)]

    def conservation_defect(self) -> np.ndarray:
        return self.norm2 + self.p_spon - self.norm2[0]


def default_t_end(generator: Generator) -> float:
    """40 times the slowest nonzero decay time of the generator."""
    rates = -generator.eigenvalues.real
    rates = rates[rates > 1e-14 * max(1.0, np.abs(generator.eigenvalues).max())]
    if rates.size == 0:
        raise ConfigError("generator has no decaying eigenmode; give t_end explicitly")
    return 40.0 / rates.min()


def evolve(
    generator: Generator,
    config: ChainConfig,
    state0: OneQuantumState,
    t_end: float | None = None,
    tolerance: float = DEFAULT_RTOL,
    atol: float | None = None,
) -> Trajectory:
    """Integrate ``dx/dt = M x`` from ``state0`` with an adaptive 8(5,3) Runge-Kutta pair.

    Parameters
    ----------
    generator, config
        Generator and the configuration it was built from (the latter supplies
        the channel rates).
    state0
        Initial amplitudes, norm at most one.
    t_end
        Final time; defaults to :func:`default_t_end`.
    tolerance
        Relative local error tolerance. The absolute tolerance defaults to
        ``tolerance / 100``.
    """
    if generator.dim != config.dim or state0.amps.size != config.dim:
        raise ConfigError("generator, config and state dimensions disagree")
    if state0.norm2 > 1.0 + 1e-12:
        raise ConfigError(f"initial state norm^2 {state0.norm2} exceeds 1")
    if tolerance <= 0:
        raise ConfigError("tolerance must be positive")
    if t_end is None:
        t_end = default_t_end(generator)
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    atol = tolerance * 1e-2 if atol is None else atol

    m = generator.matrix
    dim = config.dim
    coeffs = output_coefficients(config)
    names = channel_names(config.n_sites)

    def rhs(_t, y):
        x = y[:dim]
        return np.concatenate([m @ x, channel_rates(config, x, coeffs)])

    y0 = np.concatenate([state0.amps, np.zeros(len(names))]).astype(complex)
    # overflow is reported below as a non-finite state
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(
            rhs, (0.0, float(t_end)), y0, method="DOP853",
            rtol=tolerance, atol=atol, dense_output=True,
        )
    if sol.status != 0:
        raise IntegrationError(f"integration aborted: {sol.message}", float(sol.t[-1]))
    if not np.all(np.isfinite(sol.y)):
        bad = np.argmax(~np.all(np.isfinite(sol.y), axis=0))
        raise IntegrationError("non-finite state", float(sol.t[bad]))

    states = sol.y[:dim].T.copy()
    fractions = sol.y[dim:].real.T.copy()
    return Trajectory(
        times=sol.t.copy(),
        states=states,
        p_spon=fractions.sum(axis=1),
        channel_fractions=fractions,
        channels=names,
        generator=generator,
        dense=sol.sol,
    )


# --- Laplace transform of a stored trajectory --------------------------------

_NODES = 8
_GL_U, _ = leggauss(_NODES)
# monomial coefficients (in u on [-1, 1]) of the Lagrange basis on the nodes
_LAGRANGE = np.linalg.inv(np.vander(_GL_U, _NODES, increasing=True)).T
_RECURRENCE_LIMIT = 8.0
# (phi limit, number of Taylor terms) bands below the recurrence limit
_TAYLOR_BANDS = ((1.0, 20), (_RECURRENCE_LIMIT, 56))


def _taylor_table(terms):
    """Coefficients ``C[n, j]`` with ``W_j(phi) = sum_n phi^n C[n, j]`` (Lagrange weights)."""
    from math import factorial

    k = np.arange(terms + _NODES)
    mu = np.where(k % 2 == 0, 2.0 / (k + 1), 0.0)  # int_{-1}^{1} u^k du
    n = np.arange(terms)[:, None]
    m = np.arange(_NODES)[None, :]
    coef = np.array([1j**j / factorial(j) for j in range(terms)])[:, None]
    return (coef * mu[n + m]) @ _LAGRANGE.T


_TAYLOR = [(limit, terms, _taylor_table(terms)) for limit, terms in _TAYLOR_BANDS]


def _power_moments(phi: np.ndarray) -> np.ndarray:
    """``J_m(phi) = int_{-1}^{1} exp(i phi u) u^m du`` for ``m < _NODES``, by upward
    recurrence (stable for ``|phi|`` above the highest power)."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty(phi.shape + (_NODES,), dtype=complex)
    ep, em = np.exp(1j * phi), np.exp(-1j * phi)
    j = (ep - em) / (1j * phi)
    out[..., 0] = j
    for mm in range(1, _NODES):
        j = (ep - (-1) ** mm * em - mm * j) / (1j * phi)
        out[..., mm] = j
    return out


def _lagrange_weights(phi: np.ndarray) -> np.ndarray:
    """``int_{-1}^{1} exp(i phi u) l_j(u) du`` for the Lagrange basis ``l_j`` on the nodes.

    Taylor series in ``phi`` for small arguments (as real Vandermonde products,
    which keeps this cheap), recurrence-based moments otherwise.
    """
    phi = np.asarray(phi, dtype=float)
    flat = phi.ravel()
    out = np.empty((flat.size, _NODES), dtype=complex)
    aphi = np.abs(flat)
    lower = 0.0
    for limit, terms, table in _TAYLOR:
        sel = (aphi >= lower) & (aphi < limit) if lower else aphi < limit
        if sel.any():
            v = np.vander(flat[sel], terms, increasing=True)
            out[sel] = v @ table.real + 1j * (v @ table.imag)
        lower = limit
    big = aphi >= _RECURRENCE_LIMIT
    if big.any():
        out[big] = _power_moments(flat[big]) @ _LAGRANGE.T
    return out.reshape(phi.shape + (_NODES,))


def _trajectory_nodes(traj: Trajectory):
    """Dense-output samples at Gauss nodes of every step (cached on the trajectory)."""
    if traj._nodes is None:
        if traj.dense is None:
            raise InsufficientTailError("trajectory carries no dense output")
        ts = np.asarray(traj.dense.ts)
        t0, h = ts[:-1], np.diff(ts)
        dim = traj.generator.dim
        vals = np.empty((h.size, _NODES, dim), dtype=complex)
        x_nodes = (_GL_U + 1.0) / 2.0
        for i, interp in enumerate(traj.dense.interpolants):
            vals[i] = interp(t0[i] + h[i] * x_nodes)[:dim].T
        traj._nodes = (t0, h, vals)
    return traj._nodes


def numerical_laplace(
    trajectory: Trajectory,
    omega,
    tail_threshold: float = 1e-12,
    chunk: int = 64,
) -> np.ndarray:
    """``int_0^inf exp(i omega t) x(t) dt`` from a stored trajectory.

    Each integration step is integrated exactly against the integrator's
    degree-7 dense-output polynomial (a Filon-type rule, so large ``omega * h``
    is harmless). The remainder beyond the last time is completed analytically
    assuming the final state decays with the least-damped generator eigenvalue.

    Returns shape ``(3N,)`` for scalar ``omega`` and ``(len(omega), 3N)`` otherwise.
    """
    final_norm2 = trajectory.norm2[-1]
    if not final_norm2 < tail_threshold:
        raise InsufficientTailError(
            f"final norm^2 {final_norm2:.3g} is not below tail threshold {tail_threshold:.3g}; "
            "integrate further"
        )
    scalar = np.ndim(omega) == 0
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    if not np.all(np.isfinite(omegas)):
        raise ConfigError("omega must be finite")

    t0, h, vals = _trajectory_nodes(trajectory)
    t_last = trajectory.times[-1]
    x_last = trajectory.states[-1]
    lam = trajectory.generator.least_damped_eigenvalue

    flat = vals.reshape(-1, vals.shape[2])
    out = np.empty((omegas.size, vals.shape[2]), dtype=complex)
    for start in range(0, omegas.size, chunk):
        w = omegas[start:start + chunk]
        phi = 0.5 * w[:, None] * h[None, :]
        # weights of the Lagrange basis: (1/2) e^{i phi} sum_m L[j, m] J_m(phi)
        weights = 0.5 * np.exp(1j * phi)[..., None] * _lagrange_weights(phi)
        phase = np.exp(1j * w[:, None] * t0[None, :]) * h[None, :]
        body = (phase[..., None] * weights).reshape(w.size, -1) @ flat
        tail = np.exp(1j * w * t_last)[:, None] * x_last[None, :] / (-lam - 1j * w)[:, None]
        out[start:start + chunk] = body + tail
    return out[0] if scalar else out
