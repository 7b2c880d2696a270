"""Degraded ratio versus CNOT count over a catalog, at several noise scales."""

import argparse
from pathlib import Path

from groverlab.harness import TrialProtocol, run_sweep
from groverlab.metrics import records_to_csv
from groverlab.noise import NoiseModel
from groverlab.transpile import load_backend


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--backend", default="vigo")
    ap.add_argument("--scales", default="0.5,1,2")
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--relaxation", action="store_true")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    backend = load_backend(args.backend)
    base = NoiseModel.from_backend(backend, relaxation=args.relaxation)
    proto = TrialProtocol(trials=args.trials, shots=args.shots, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in (float(v) for v in args.scales.split(",")):
        sweep = run_sweep(args.n, backend, base, proto, scales=(s,))
        path = out / f"sweep_{args.n}q_{backend.name}_x{s:g}.csv"
        path.write_text(records_to_csv(sweep.records))
        fit = sweep.fit
        print(f"scale {s:g}: spearman {sweep.rank_correlation:+.3f}", end="")
        if fit is not None:
            print(f", logistic a={fit.a:.4g} b={fit.b:.4g} c={fit.c:.4g} d={fit.d:.4g} r2={fit.r_squared:.3f}", end="")
        print(f" -> {path}")


if __name__ == "__main__":
    main()
