"""Self-consistency checks run by ``cascade-qed validate``.

Each check compares two routes to the same quantity (time domain against
frequency domain, a chain against its mirror image, the norm against the
emitted probability) so that it can fail independently of the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .evolve import evolve, numerical_laplace
from .model import ChainConfig, OneQuantumState, build_generator, mirror_state
from .spectra import (
    FrequencyGrid,
    fiber_spectra,
    fiber_spectra_from_amplitudes,
    integrate_wide,
    laplace_amplitudes,
    normalization_audit,
)

CONSERVATION_TOL = 1e-8
COMPLETENESS_TOL = 1e-3
CROSS_METHOD_TOL = 1e-6
CROSS_METHOD_FLOOR = 1e-9
MIRROR_TOL = 1e-10
# integrator tolerance needed for the time-domain transform to reach CROSS_METHOD_TOL
CROSS_METHOD_RTOL = 1e-12
CROSS_METHOD_POINTS = 401


@dataclass(frozen=True)
class InvariantResult:
    name: str
    value: float
    threshold: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.value:.3e} (limit {self.threshold:.1e})"
        return f"{text} {self.detail}".rstrip()


def decimate(grid: FrequencyGrid, points: int = CROSS_METHOD_POINTS) -> np.ndarray:
    """Evenly spaced subset of at most ``points`` grid frequencies, endpoints kept."""
    w = grid.values
    idx = np.unique(np.round(np.linspace(0, w.size - 1, min(points, w.size))).astype(int))
    return w[idx]


def cross_method_error(config, generator, trajectory, omegas) -> float:
    """Largest pointwise relative gap between resolvent and time-domain fiber spectra."""
    direct = fiber_spectra_from_amplitudes(config, laplace_amplitudes(generator, trajectory.states[0], omegas))
    timed = fiber_spectra_from_amplitudes(config, numerical_laplace(trajectory, omegas))
    worst = 0.0
    for ref, val in zip(direct, timed):
        mask = ref > CROSS_METHOD_FLOOR
        if mask.any():
            worst = max(worst, float(np.max(np.abs(val[mask] - ref[mask]) / ref[mask])))
    return worst


def mirror_error(config: ChainConfig, state0: OneQuantumState, grid: FrequencyGrid) -> float:
    """Gap between a chain's spectra and its mirror image's, relative to the peak."""
    ta, tb = fiber_spectra(config, build_generator(config), state0, grid)
    mirrored = config.mirror()
    ma, mb = fiber_spectra(mirrored, build_generator(mirrored), mirror_state(state0), grid)
    scale = max(ta.max(), tb.max(), 1e-300)
    return float(max(np.abs(ta - mb).max(), np.abs(tb - ma).max()) / scale)


def run_invariants(
    config: ChainConfig,
    state0: OneQuantumState,
    grid: FrequencyGrid,
    tolerance: float = CROSS_METHOD_RTOL,
    threads: int = 1,
) -> list[InvariantResult]:
    generator = build_generator(config)
    results = [
        InvariantResult(
            "stability", generator.max_real_eigenvalue, -np.finfo(float).tiny,
            "(largest eigenvalue real part must be negative)",
        )
    ]
    if not results[0].passed:
        return results

    traj = evolve(generator, config, state0, tolerance=tolerance)
    results.append(InvariantResult(
        "conservation", float(np.abs(traj.conservation_defect()).max()), CONSERVATION_TOL,
        "(max |norm^2 + P_spon - norm0^2|)",
    ))

    spectral, wide = integrate_wide(config, state0, generator, threads=threads)
    audit = normalization_audit(spectral, traj, COMPLETENESS_TOL)
    worst_channel = max(abs(d) for d in audit.channel_defects.values())
    results.append(InvariantResult(
        "completeness", max(audit.total_defect, worst_channel), COMPLETENESS_TOL,
        f"(spectral total {audit.spectral_total:.9f} on {wide.points} points)",
    ))

    try:
        err = cross_method_error(config, generator, traj, decimate(grid))
        detail = f"(resolvent vs time-domain transform, {min(grid.points, CROSS_METHOD_POINTS)} frequencies)"
    except NumericalError as exc:
        err, detail = float("inf"), f"({exc})"
    results.append(InvariantResult("cross_method", err, CROSS_METHOD_TOL, detail))

    results.append(InvariantResult(
        "mirror", mirror_error(config, state0, grid), MIRROR_TOL,
        "(fiber a vs mirrored fiber b, relative to peak)",
    ))
    return results
