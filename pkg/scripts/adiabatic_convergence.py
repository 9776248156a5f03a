#!/usr/bin/env python3
"""Sweep kappa/g and measure how far the reduced (atoms-only) model sits from the full model.

For each coupling phase theta the second atom has g_2 = g e^{i theta}; the
discrepancy is the sup-norm gap of both fiber spectra divided by the full
model's peak. The table is written as CSV (stdout by default).
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from cascade_qed.model import ChainConfig, initial_state
from cascade_qed.reduced import ValidityWarning, reduced_fiber_spectra
from cascade_qed.spectra import compute_spectra, default_grid


@dataclass
class Sweep:
    g: float = 50.0
    gamma_A: float = 5.0
    kappa_in: float = 0.0
    ratios: tuple[float, ...] = (3, 5, 10, 30, 100, 300)
    thetas: tuple[float, ...] = (0.0, np.pi / 2)


def discrepancy(sweep: Sweep, theta: float, ratio: float) -> float:
    cfg = ChainConfig.homogeneous(
        sweep.gamma_A, [sweep.g, sweep.g * np.exp(1j * theta)], ratio * sweep.g, sweep.kappa_in
    )
    grid = default_grid(cfg)
    full = compute_spectra(cfg, initial_state(cfg, 1), grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        ra, rb = reduced_fiber_spectra(cfg, 1, grid)
    scale = max(full.fiber_a.max(), full.fiber_b.max())
    return max(np.abs(ra - full.fiber_a).max(), np.abs(rb - full.fiber_b).max()) / scale


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ratios", type=float, nargs="+", default=list(Sweep.ratios))
    parser.add_argument("--kappa-in", type=float, default=0.0)
    parser.add_argument("--out", type=argparse.FileType("w"), default=sys.stdout)
    args = parser.parse_args()
    sweep = Sweep(kappa_in=args.kappa_in, ratios=tuple(args.ratios))

    writer = csv.writer(args.out, lineterminator="\n")
    writer.writerow(["kappa_over_g", *(f"theta={t:.4f}" for t in sweep.thetas)])
    for r in sweep.ratios:
        writer.writerow([r, *(f"{discrepancy(sweep, t, r):.6e}" for t in sweep.thetas)])


if __name__ == "__main__":
    main()
