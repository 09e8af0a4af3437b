"""Unit balls of the stable norm for the example lattices, with ellipse residuals."""

import argparse
from pathlib import Path

from coarselab.stable_norm import (
    EllipseFitError,
    ellipse_residual,
    honeycomb,
    rect_grid,
    triangular_grid,
    unit_ball,
    unit_ball_csv,
    unit_grid,
)

LATTICES = {
    "unit_grid": unit_grid,
    "grid_1_2": lambda: rect_grid(1.0, 2.0),
    "triangular": triangular_grid,
    "honeycomb": honeycomb,
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dirs", type=int, default=16)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", type=Path, help="write one CSV per lattice here")
    args = p.parse_args()
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    print("lattice\tellipse_residual\tmax_err")
    for name, make in LATTICES.items():
        samples = unit_ball(make(), args.dirs, args.n, args.workers)
        try:
            resid = f"{ellipse_residual([s.point for s in samples]):.4f}"
        except EllipseFitError as exc:
            resid = f"fit failed ({exc})"
        print(f"{name}\t{resid}\t{max(s.err for s in samples):.4f}")
        if args.out_dir:
            (args.out_dir / f"{name}.csv").write_text(unit_ball_csv(samples))


if __name__ == "__main__":
    main()
