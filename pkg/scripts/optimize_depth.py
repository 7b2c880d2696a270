"""Minimum theoretical expected depth, over the catalog and over the full enumeration."""

import argparse

from groverlab.catalog import DEFAULT_BACKEND, catalog
from groverlab.metrics import minimize_expected_depth
from groverlab.transpile import load_backend


def show(title, result, top):
    print(title)
    for s in result.ranking[:top]:
        print(f"  {s.name:<14} p={s.p_theo:.4f} depth={sum(s.depths):7.1f} E[d]={s.expected_depth:8.1f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="3,4")
    ap.add_argument("--max-oracles", type=int, default=2)
    ap.add_argument("--top", type=int, default=8)
    args = ap.parse_args()
    for n in (int(w) for w in args.widths.split(",")):
        backend = load_backend(DEFAULT_BACKEND[n])
        show(f"{n} qubits, catalog, {backend.name}",
             minimize_expected_depth(n, backend, 6, candidates=catalog(n)), args.top)
        show(f"{n} qubits, all plans with <= {args.max_oracles} oracles and <= 2 stages",
             minimize_expected_depth(n, backend, args.max_oracles, max_stages=2), args.top)


if __name__ == "__main__":
    main()
