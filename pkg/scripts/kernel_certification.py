"""Sandwich violations across Delta, plus the kernel tail requirements per family."""
import argparse
import json

from ldzeta.kernel import KernelSpec, certification_scan, tail_requirements


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--deltas", type=float, nargs="+", default=[2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6])
    p.add_argument("--a-exp", type=float, default=2.5)
    p.add_argument("--orders", type=int, nargs="+", default=[50, 100, 200])
    args = p.parse_args()
    spec = KernelSpec(a=args.a_exp)
    for row in certification_scan(spec, args.deltas):
        print(f"Delta={row['Delta']:.2f}  violations={row['violations']}  certified={row['certified']}")
    for order in args.orders:
        req = tail_requirements(KernelSpec(a=args.a_exp, family="ingham", order=order))
        print(f"ingham order={order}: near ok={req['near']['ok']} far ok={req['far']['ok']} "
              f"(log tail {req['far']['log_tail']:.1f} vs {req['far']['required']:.1f})")
    print(json.dumps(tail_requirements(spec)))


if __name__ == "__main__":
    main()
