#!/usr/bin/env python3
"""Elliptic oracle errors and grid-differenced residuals under radial refinement."""
import argparse

import numpy as np

from artifact.ansatz import AngularData
from artifact.cli import DEFAULT_TERMS
from artifact.field_core import PolarGrid
from artifact.matter import build_sources, gaussian_matter
from artifact.solver import fixed_point, residuals
from artifact.verify import elliptic_oracles, identity_checks

KEYS = ("mcowen_l2", "mcowen_l2_plane", "mcowen_max", "poisson_m", "poisson_remainder",
        "momentum_A", "momentum_J")


def table(title, sizes, rows, keys):
    print(f"\n{title}")
    print(f"{'n_r':>6} " + " ".join(f"{k:>18}" for k in keys))
    for n in sizes:
        print(f"{n:>6} " + " ".join(f"{rows[n][k]:>18.3e}" for k in keys))
    for a, b in zip(sizes, sizes[1:]):
        gains = [rows[a][k] / rows[b][k] if rows[b][k] > 0 else np.inf for k in keys]
        print(f"{a}->{b:<4}" + " ".join(f"{x:>18.1f}" for x in gains))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--amplitude", type=float, default=0.05)
    args = ap.parse_args()

    orc = {n: elliptic_oracles(n, 32) for n in args.sizes}
    table("elliptic oracles", args.sizes, orc, KEYS)

    ident = {n: identity_checks(n, 64) for n in args.sizes}
    table("background identity (grid-differenced)", args.sizes, ident, ("background_identity_fd",))

    res = {}
    for n in args.sizes:
        g = PolarGrid(n, 64)
        src = build_sources(gaussian_matter(g, args.amplitude, DEFAULT_TERMS))
        sol = fixed_point(g, AngularData(), src)
        r = residuals(sol, src, discrete=True)
        res[n] = {"momentum": r["momentum"], "hamiltonian": r["hamiltonian"]}
    table(f"grid-differenced constraint residuals, a = {args.amplitude}", args.sizes, res,
          ("momentum", "hamiltonian"))


if __name__ == "__main__":
    main()
