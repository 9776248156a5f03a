"""Command-line front end: configuration files, figure presets and CSV output.

Usage::

    cascade-qed preset fig3-upper > fig3.json
    cascade-qed spectrum --config fig3.json --out fig3.csv
    cascade-qed preset fig5-atom2 | cascade-qed spectrum --config -
    cascade-qed compare --preset fig3-lower --oracle reduced
    cascade-qed validate --preset fig2-upper

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 failed validation.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalError
from .evolve import evolve
from .invariants import run_invariants
from .model import ChainConfig, LinkPhases, OneQuantumState, SiteParams, build_generator, initial_state
from .reduced import reduced_amplitudes
from .regimes import detect_strong_variant, strong_coupling_spectrum_oracle
from .spectra import (
    FrequencyGrid,
    compute_spectra,
    default_grid,
    peak_positions,
    spectrum_set_from_amplitudes,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4
CSV_VERSION = "cascade-qed v1"
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class InitialCondition:
    """Either a 1-based excited atom or an explicit amplitude vector."""

    atom: int | None = None
    amplitudes: tuple[complex, ...] | None = None

    def __post_init__(self):
        if (self.atom is None) == (self.amplitudes is None):
            raise ConfigError("initial: give exactly one of 'atom' or 'amplitudes'")

    def state(self, config: ChainConfig) -> OneQuantumState:
        if self.atom is not None:
            return initial_state(config, self.atom)
        if len(self.amplitudes) != config.dim:
            raise ConfigError(f"initial.amplitudes: expected {config.dim} entries (3 per site), got {len(self.amplitudes)}")
        state = OneQuantumState(np.array(self.amplitudes, dtype=complex))
        if state.norm2 > 1.0 + 1e-12:
            raise ConfigError(f"initial.amplitudes: norm^2 {state.norm2:.6g} exceeds 1")
        return state


@dataclass(frozen=True)
class RunSpec:
    config: ChainConfig
    initial: InitialCondition
    grid: FrequencyGrid | None = None
    tol: float | None = None
    threads: int = 1

    @property
    def resolved_grid(self) -> FrequencyGrid:
        return self.grid if self.grid is not None else default_grid(self.config)

    @property
    def state(self) -> OneQuantumState:
        return self.initial.state(self.config)


# --- JSON schema ------------------------------------------------------------------

_SITE_KEYS = {"delta", "kappa_ex", "kappa_in", "g", "h"}
_TOP_KEYS = {"gamma_A", "sites", "links", "initial", "grid"}


def _number(obj, key, path, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    return float(v)


def _complex(v, path) -> complex:
    if (
        not isinstance(v, list) or len(v) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in v)
    ):
        raise ConfigError(f"{path}: expected a complex number as [re, im], got {v!r}")
    return complex(v[0], v[1])


def _object(v, path) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"{path}: expected an object, got {type(v).__name__}")
    return v


def _no_extra(obj, allowed, path):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(extra)}")


def spec_from_dict(data) -> RunSpec:
    data = _object(data, "config")
    _no_extra(data, _TOP_KEYS, "config")
    gamma = _number(data, "gamma_A", "config")
    if gamma < 0:
        raise ConfigError(f"config.gamma_A: rate must be non-negative, got {gamma}")
    raw_sites = data.get("sites")
    if not isinstance(raw_sites, list) or not raw_sites:
        raise ConfigError("config.sites: expected a non-empty array")
    sites = []
    for k, raw in enumerate(raw_sites):
        path = f"sites[{k}]"
        raw = _object(raw, path)
        _no_extra(raw, _SITE_KEYS, path)
        vals = {key: _number(raw, key, path, 0.0) for key in ("delta", "kappa_ex", "kappa_in")}
        for key in ("kappa_ex", "kappa_in"):
            if vals[key] < 0:
                raise ConfigError(f"{path}.{key}: rate must be non-negative, got {vals[key]}")
        g = _complex(raw.get("g", [0, 0]), f"{path}.g")
        h = _complex(raw.get("h", [0, 0]), f"{path}.h")
        sites.append(SiteParams(vals["delta"], vals["kappa_ex"], vals["kappa_in"], g, h))
    raw_links = data.get("links", [])
    if not isinstance(raw_links, list):
        raise ConfigError("config.links: expected an array")
    if raw_links and len(raw_links) != len(sites) - 1:
        raise ConfigError(f"config.links: expected {len(sites) - 1} entries for {len(sites)} sites, got {len(raw_links)}")
    links = []
    for k, raw in enumerate(raw_links):
        path = f"links[{k}]"
        raw = _object(raw, path)
        _no_extra(raw, {"phi_a", "phi_b"}, path)
        links.append(LinkPhases(_number(raw, "phi_a", path, 0.0), _number(raw, "phi_b", path, 0.0)))
    config = ChainConfig(gamma, tuple(sites), tuple(links))

    raw_init = _object(data.get("initial", {"atom": 1}), "config.initial")
    _no_extra(raw_init, {"atom", "amplitudes"}, "initial")
    if "atom" in raw_init and "amplitudes" not in raw_init:
        atom = raw_init["atom"]
        if isinstance(atom, bool) or not isinstance(atom, int) or not 1 <= atom <= len(sites):
            raise ConfigError(f"initial.atom: expected an integer in 1..{len(sites)}, got {atom!r}")
        initial = InitialCondition(atom=atom)
    elif "amplitudes" in raw_init and "atom" not in raw_init:
        amps = raw_init["amplitudes"]
        if not isinstance(amps, list):
            raise ConfigError("initial.amplitudes: expected an array of [re, im] pairs")
        initial = InitialCondition(amplitudes=tuple(_complex(a, f"initial.amplitudes[{i}]") for i, a in enumerate(amps)))
    else:
        raise ConfigError("initial: give exactly one of 'atom' or 'amplitudes'")
    initial.state(config)

    grid = None
    if "grid" in data:
        raw = _object(data["grid"], "config.grid")
        _no_extra(raw, {"min", "max", "points"}, "grid")
        points = raw.get("points")
        if isinstance(points, bool) or not isinstance(points, int):
            raise ConfigError(f"grid.points: expected an integer, got {points!r}")
        grid = FrequencyGrid(_number(raw, "min", "grid"), _number(raw, "max", "grid"), points)
    return RunSpec(config, initial, grid)


def parse_config(source) -> RunSpec:
    """Read a JSON run specification from a path, ``"-"`` (stdin) or an open file."""
    if hasattr(source, "read"):
        text = source.read()
    elif str(source) == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return spec_from_dict(data)


def _pair(z: complex) -> list[float]:
    return [z.real, z.imag]


def spec_to_dict(spec: RunSpec) -> dict:
    cfg = spec.config
    out = {
        "gamma_A": cfg.gamma_A,
        "sites": [
            {"delta": s.delta, "kappa_ex": s.kappa_ex, "kappa_in": s.kappa_in, "g": _pair(s.g), "h": _pair(s.h)}
            for s in cfg.sites
        ],
        "links": [{"phi_a": l.phi_a, "phi_b": l.phi_b} for l in cfg.links],
    }
    if spec.initial.atom is not None:
        out["initial"] = {"atom": spec.initial.atom}
    else:
        out["initial"] = {"amplitudes": [_pair(complex(a)) for a in spec.initial.amplitudes]}
    if spec.grid is not None:
        out["grid"] = {"min": spec.grid.min, "max": spec.grid.max, "points": spec.grid.points}
    return out


# --- presets ----------------------------------------------------------------------


def _preset(g, kappa_ex, kappa_in, atom, grid=None) -> RunSpec:
    return RunSpec(ChainConfig.homogeneous(5.0, g, kappa_ex, kappa_in), InitialCondition(atom=atom), grid)


# Strong-coupling frames need a grid that resolves splittings of order kappa;
# the default (three times the largest coherent scale) would span thousands.
_STRONG_GRID = FrequencyGrid(-120.0, 120.0, 4001)

PRESETS: dict[str, RunSpec] = {
    "fig2-upper": _preset([50, 50], 5.0, 0.1, 1, _STRONG_GRID),
    "fig2-lower": _preset([50, -50j], 5.0, 0.1, 1, _STRONG_GRID),  # g_1 = i g_2
    "fig3-upper": _preset([50, 50], 500.0, 0.5, 1),
    "fig3-lower": _preset([50, 50j], 500.0, 0.5, 1),  # g_1 = -i g_2
    "fig4-atom1": _preset([50, 50, 50], 500.0, 0.5, 1),
    "fig4-atom2": _preset([50, 50, 50], 500.0, 0.5, 2),
    "fig5-atom1": _preset([50, 50j, 50], 500.0, 0.5, 1),  # g_1 = -i g_2 = g_3
    "fig5-atom2": _preset([50, 50j, 50], 500.0, 0.5, 2),
}


# --- CSV --------------------------------------------------------------------------


def write_csv(stream, command: str, columns: dict[str, np.ndarray]) -> None:
    stream.write(f"# {CSV_VERSION} {command}\n")
    stream.write(",".join(columns) + "\n")
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns.values()])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", newline="\n")
    stream.write(buf.getvalue())


def spectrum_columns(spectrum_set) -> dict[str, np.ndarray]:
    return {"omega": spectrum_set.omega, **{f"T_{k}": v for k, v in spectrum_set.columns().items()}}


def trajectory_columns(traj) -> dict[str, np.ndarray]:
    cols = {"t": traj.times}
    n = traj.states.shape[1] // 3
    for k in range(n):
        for j, name in enumerate(("xi", "alpha", "beta")):
            z = traj.states[:, 3 * k + j]
            cols[f"re_{name}_{k + 1}"] = z.real
            cols[f"im_{name}_{k + 1}"] = z.imag
    cols["norm2"] = traj.norm2
    cols["P_spon"] = traj.p_spon
    for i, name in enumerate(traj.channels):
        cols[f"P_{name}"] = traj.channel_fractions[:, i]
    return cols


# --- commands ---------------------------------------------------------------------


def _full_spectra(spec: RunSpec):
    return compute_spectra(spec.config, spec.state, spec.resolved_grid, threads=spec.threads)


def _oracle_fibers(spec: RunSpec, oracle: str):
    grid = spec.resolved_grid
    if oracle == "strong":
        variant = detect_strong_variant(spec.config)
        return variant, strong_coupling_spectrum_oracle(spec.config, grid, variant, spec.state)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        amps = reduced_amplitudes(spec.config, spec.state, grid.values)
    s = spectrum_set_from_amplitudes(spec.config, grid, amps)
    return "bad-cavity", (s.fiber_a, s.fiber_b)


def _fmt_peaks(omega, values) -> str:
    return "[" + ", ".join(f"{p:.4f}" for p in peak_positions(omega, values)) + "]"


def run_command(command: str, spec: RunSpec, out, log=None, oracle: str = "reduced") -> int:
    """Execute ``command`` for ``spec`` writing CSV to ``out``; returns an exit code.

    ``compare`` writes its discrepancy summary to ``log`` (default stderr).
    """
    log = log or sys.stderr
    if command == "spectrum":
        write_csv(out, command, spectrum_columns(_full_spectra(spec)))
        return EXIT_OK
    if command == "evolve":
        traj = evolve(build_generator(spec.config), spec.config, spec.state, tolerance=spec.tol or DEFAULT_TOL)
        write_csv(out, command, trajectory_columns(traj))
        return EXIT_OK
    if command == "reduced-spectrum":
        grid = spec.resolved_grid
        amps = reduced_amplitudes(spec.config, spec.state, grid.values)
        write_csv(out, command, spectrum_columns(spectrum_set_from_amplitudes(spec.config, grid, amps)))
        return EXIT_OK
    if command == "compare":
        full = _full_spectra(spec)
        label, (oa, ob) = _oracle_fibers(spec, oracle)
        w = full.omega
        write_csv(out, command, {
            "omega": w,
            "T_fiber_a": full.fiber_a,
            "T_fiber_b": full.fiber_b,
            "T_fiber_a_oracle": oa,
            "T_fiber_b_oracle": ob,
        })
        for name, ref, val in (("fiber_a", full.fiber_a, oa), ("fiber_b", full.fiber_b, ob)):
            sup = np.abs(ref - val).max()
            log.write(
                f"{name} ({label}): sup-norm {sup:.6g} ({sup / ref.max():.3%} of peak); "
                f"peaks full {_fmt_peaks(w, ref)} oracle {_fmt_peaks(w, val)}\n"
            )
        return EXIT_OK
    if command == "validate":
        results = run_invariants(spec.config, spec.state, spec.resolved_grid,
                                 tolerance=spec.tol or 1e-12, threads=spec.threads)
        for r in results:
            out.write(r.line() + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
    raise ConfigError(f"unknown command {command!r}")


def _parse_grid(text: str) -> FrequencyGrid:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--grid: expected min,max,points, got {text!r}")
    try:
        return FrequencyGrid(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"--grid: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON run specification ('-' for stdin)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named figure configuration")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--grid", help="frequency grid min,max,points (use --grid=-a,b,n for negative min)")
    common.add_argument("--tol", type=float, help="relative integrator tolerance")
    common.add_argument("--threads", type=int, default=1, help="worker threads for frequency sweeps")

    parser = argparse.ArgumentParser(prog="cascade-qed", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="full-model emission spectra")
    sub.add_parser("evolve", parents=[common], help="no-jump trajectory")
    sub.add_parser("reduced-spectrum", parents=[common], help="bad-cavity model spectra")
    cmp_ = sub.add_parser("compare", parents=[common], help="full model against an analytic oracle")
    cmp_.add_argument("--oracle", choices=("strong", "reduced"), default="reduced")
    sub.add_parser("validate", parents=[common], help="run the invariant suite")
    pre = sub.add_parser("preset", help="print a named configuration as JSON")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--emit-config", action="store_true", help="emit the JSON config (the default action)")
    pre.add_argument("--out", help="output path (default stdout)")
    return parser


def _load_spec(args) -> RunSpec:
    if args.preset:
        spec = PRESETS[args.preset]
    elif args.config:
        spec = parse_config(args.config)
    else:
        raise ConfigError("give --config or --preset")
    if args.grid:
        spec = replace(spec, grid=_parse_grid(args.grid))
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive")
        spec = replace(spec, tol=args.tol)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return replace(spec, threads=args.threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            text = json.dumps(spec_to_dict(PRESETS[args.name]), indent=2) + "\n"
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        spec = _load_spec(args)
        buf = io.StringIO()
        code = run_command(args.command, spec, buf, oracle=getattr(args, "oracle", "reduced"))
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
