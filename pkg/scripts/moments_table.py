"""Monte Carlo moments of |zeta| on the critical line against C_k (log T)^{k^2}."""
import argparse

from ldzeta.dirichlet import moments_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=float, nargs="+", default=[1e4, 1e5])
    p.add_argument("--k", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=55)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    print(f"{'T':>8} {'k':>5} {'moment':>12} {'scale':>12} {'ratio':>8} {'se':>8}")
    for T in args.T:
        for k in args.k:
            r = moments_experiment(T, k, args.n, args.seed, args.workers)
            print(f"{T:8.0e} {k:5.2f} {r['moment']:12.5g} {r['scale']:12.5g} {r['ratio']:8.4f} {r['ratio_se']:8.4f}")


if __name__ == "__main__":
    main()
