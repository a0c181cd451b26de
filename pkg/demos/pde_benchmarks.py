"""Generate one input/solution pair for each benchmark and print its diagnostics.

Darcy reports the relative residual of the pressure solve, eikonal the
travel time at the centre and the number of sweep rounds, and the two
periodic problems the relative change in total mass. Fields are stored in
float32, so mass is conserved to single precision.
"""
import argparse

import numpy as np

from gola import pdedata as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=int, default=65)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    for tag in pd.PDE_TAGS:
        ds = pd.generate(tag, 1, grid_res=args.grid, seed=args.seed)
        f, u = ds.f[0].astype(np.float64), ds.u[0].astype(np.float64)
        line = f"{tag:20s} f in [{f.min():+.3f}, {f.max():+.3f}]  u in [{u.min():+.3f}, {u.max():+.3f}]"
        meta = ds.metadata["pairs"][0]
        if tag == "darcy":
            line += f"  solver residual {meta['residual']:.1e}"
        elif tag == "eikonal":
            c = args.grid // 2
            line += f"  centre travel time {u[c, c]:.3f} after {meta['rounds']} rounds"
        else:
            # the last grid row and column repeat the first on the torus
            mass_f, mass_u = f[:-1, :-1].sum(), u[:-1, :-1].sum()
            line += f"  relative mass change {abs(mass_u - mass_f) / abs(mass_f):.1e}"
        print(line)


if __name__ == "__main__":
    main()
