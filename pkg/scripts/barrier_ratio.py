"""Share of model tail events that also satisfy every barrier, as V varies."""
import argparse
import math

from ldzeta import randmodel as rm
from ldzeta.params import toy_ladder


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--V", type=float, nargs="+", default=[2.0, 3.0, 4.0, 5.0, 6.0])
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=1010)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    lad = toy_ladder(alpha=args.alpha)
    path = rm.build_paths(lad, args.n, args.seed, workers=args.workers)
    print(f"{'V':>5} {'tail hits':>10} {'ratio':>8} {'se':>8}")
    for V in args.V:
        tail = rm.event_indicator("tail", path, lad, V)
        good = rm.event_indicator("barrier", path, lad, V)
        hits = int(tail.sum())
        if hits == 0:
            print(f"{V:5.2f} {0:10d}      n/a")
            continue
        r = good.sum() / hits
        print(f"{V:5.2f} {hits:10d} {r:8.4f} {math.sqrt(r * (1 - r) / hits):8.4f}")


if __name__ == "__main__":
    main()
