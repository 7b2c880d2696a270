"""Theoretical and simulated success tables for the 3-, 4- and 5-qubit catalogs.

Writes one CSV per width into --out and prints an aligned comparison that
includes the reference hardware values (for context only).
"""

import argparse
from pathlib import Path

from groverlab.catalog import DEFAULT_BACKEND, PUBLISHED_P_THEO, REFERENCE_HARDWARE_P, catalog
from groverlab.harness import TrialProtocol, run_plan
from groverlab.metrics import records_to_csv
from groverlab.noise import NoiseModel
from groverlab.transpile import load_backend


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="3,4,5")
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fixture", choices=("random", "paper"), default="paper")
    ap.add_argument("--relaxation", action="store_true")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    proto = TrialProtocol(trials=args.trials, shots=args.shots, seed=args.seed, fixture=args.fixture)
    for n in (int(w) for w in args.widths.split(",")):
        backend = load_backend(DEFAULT_BACKEND[n])
        model = NoiseModel.from_backend(backend, relaxation=args.relaxation)
        ref = REFERENCE_HARDWARE_P.get(backend.name, {})
        records = []
        print(f"\n{n} qubits on {backend.name}")
        print(f"{'circuit':<12}{'printed':>9}{'p_theo':>9}{'p_sim':>9}{'std':>8}{'depth':>9}{'E[d]':>9}{'hw':>8}")
        for name in catalog(n):
            rec, _ = run_plan(name, n, backend, model, proto)
            records.append(rec)
            depth = rec.depth + (rec.depth_stage2 or 0.0)
            print(f"{name:<12}{PUBLISHED_P_THEO[n][name]:>9.3f}{rec.p_theo:>9.4f}{rec.p_sim:>9.4f}"
                  f"{rec.p_sim_std:>8.4f}{depth:>9.1f}{rec.expected_depth_theo:>9.1f}{ref.get(name, float('nan')):>8.3f}")
        path = out / f"table_{n}q_{backend.name}.csv"
        path.write_text(records_to_csv(records))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
