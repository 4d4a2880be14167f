"""KS distance of normalized log|zeta(1/2 + i tau)| from the standard normal across heights."""
import argparse
import json

from ldzeta.dirichlet import selberg_clt_distance


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=float, nargs="+", default=[1e3, 1e4, 1e5])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=66)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    rows = [selberg_clt_distance(T, args.n, args.seed, args.workers) for T in args.T]
    for r in rows:
        print(f"T={r['T']:.0e}  ks={r['ks']:.4f}  mean={r['mean']:+.4f}  std={r['std']:.4f}  v2={r['variance']:.4f}")
    print(json.dumps(rows))


if __name__ == "__main__":
    main()
