#!/usr/bin/env python3
"""Write fiber and side-channel spectra for every figure preset.

One CSV per preset lands in the output directory together with a short
summary of the resolved peaks and line widths on stdout.

    python scripts/reproduce_figures.py --out results/figures
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cascade_qed.cli import PRESETS, spectrum_columns, write_csv
from cascade_qed.spectra import compute_spectra, fit_lorentzian, peak_positions


@dataclass
class FigureRun:
    out: Path = Path("results/figures")
    presets: list[str] = field(default_factory=lambda: sorted(PRESETS))
    threads: int = 1


def describe(spectra) -> str:
    parts = []
    for name in ("fiber_a", "fiber_b"):
        values = getattr(spectra, name)
        peaks = peak_positions(spectra.omega, values)
        text = f"{name}: peaks {np.round(peaks, 2).tolist()}"
        if len(peaks) == 1:
            text += f", HWHM {fit_lorentzian(spectra.omega, values)[2]:.2f}"
        parts.append(text)
    return "; ".join(parts)


def run(cfg: FigureRun) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name in cfg.presets:
        spec = PRESETS[name]
        spectra = compute_spectra(spec.config, spec.state, spec.resolved_grid, threads=cfg.threads)
        path = cfg.out / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            write_csv(fh, "spectrum", spectrum_columns(spectra))
        print(f"{name:12s} {describe(spectra)}  -> {path}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=FigureRun.out)
    parser.add_argument("--preset", action="append", choices=sorted(PRESETS), help="repeatable; default all")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    run(FigureRun(args.out, args.preset or sorted(PRESETS), args.threads))


if __name__ == "__main__":
    main()
