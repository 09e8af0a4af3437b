"""Perron entropy against the measured ball-growth and covering slopes."""

import argparse
from pathlib import Path

from coarselab.entropy import empirical_entropy, perron_entropy
from coarselab.metric_graph import load_graph

DATA = Path(__file__).resolve().parent.parent / "data" / "graphs"
PERIODIC = {"unit_grid", "grid_1_2", "triangular", "honeycomb"}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("graphs", nargs="*", type=Path, help="graph files (default: data/graphs)")
    p.add_argument("--r-min", type=float, default=5.0)
    p.add_argument("--r-max", type=float, default=15.0)
    args = p.parse_args()
    paths = args.graphs or sorted(q for q in DATA.glob("*.json") if q.stem not in PERIODIC)
    print("graph\th_perron\tball_slope\tcovering_slope")
    for path in paths:
        g = load_graph(path)
        h = perron_entropy(g).upper_rate
        ball = empirical_entropy(g, args.r_min, args.r_max).slope
        cov = empirical_entropy(g, args.r_min, args.r_max, source="covering_s1").slope
        print(f"{path.stem}\t{h:.6f}\t{ball:.6f}\t{cov:.6f}")


if __name__ == "__main__":
    main()
