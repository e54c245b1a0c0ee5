#!/usr/bin/env python3
"""Empirical contraction ratio of the solution map near the fixed point.

The ratio should shrink linearly in epsilon, which for the Gaussian
family means quadratically in the amplitude.
"""
import argparse

import numpy as np

from artifact.ansatz import AngularData
from artifact.cli import DEFAULT_TERMS, loglog_slope
from artifact.field_core import PolarGrid
from artifact.matter import build_sources, gaussian_matter
from artifact.solver import fixed_point, measure_contraction


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.0125, 0.025, 0.05, 0.1, 0.2])
    ap.add_argument("--nr", type=int, default=256)
    ap.add_argument("--ntheta", type=int, default=64)
    ap.add_argument("--pairs", type=int, default=3)
    args = ap.parse_args()

    g = PolarGrid(args.nr, args.ntheta)
    eps, ratios = [], []
    for a in sorted(args.amplitudes):
        src = build_sources(gaussian_matter(g, a, DEFAULT_TERMS))
        sol = fixed_point(g, AngularData(), src)
        m = measure_contraction(sol, src, n_pairs=args.pairs)
        iter_ratios = sol.contraction_ratios()
        eps.append(sol.epsilon)
        ratios.append(m["max"])
        print(f"a={a:<7g} eps={sol.epsilon:.4e} measured={m['max']:.3e} "
              f"iteration ratios={', '.join(f'{r:.2e}' for r in iter_ratios) or '-'}")
    print(f"slope vs eps       {loglog_slope(eps, ratios):.3f}")
    print(f"slope vs amplitude {loglog_slope(sorted(args.amplitudes), ratios):.3f}")
    r = np.array(ratios)
    print("factor per halving of a:", " ".join(f"{x:.2f}" for x in r[1:] / r[:-1]))


if __name__ == "__main__":
    main()
