"""Covering counts before and after seeded jitter almost-isometries of K4's tree."""

import argparse

from coarselab.ai_tools import JitterMap, counting_check
from coarselab.metric_graph import k4


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--c", type=float, default=0.4)
    p.add_argument("--maps", type=int, default=10)
    p.add_argument("--r-min", type=int, default=4)
    p.add_argument("--r-max", type=int, default=10)
    args = p.parse_args()
    print("seed\tr\tsource_count\ttarget_count\tcenters_cover")
    violations = 0
    for seed in range(args.maps):
        phi = JitterMap(args.c, seed)
        for r in range(args.r_min, args.r_max + 1):
            chk = counting_check(k4(), phi, r, args.c, seed=seed)
            violations += not chk.ok
            print(f"{seed}\t{r}\t{chk.source_count}\t{chk.target_count}\t{int(chk.pushed_centers_cover)}")
    print(f"# violations\t{violations}")


if __name__ == "__main__":
    main()
