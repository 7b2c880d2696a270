"""Command-line front end: theory, run, sweep, optimize, circuit."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .gates import Circuit
from .catalog import REFERENCE_HARDWARE_P, catalog
from .harness import TrialProtocol, run_plan, run_sweep, trials_to_csv
from .metrics import (
    classical_baseline,
    j_exp,
    j_max,
    minimize_expected_depth,
    records_to_csv,
)
from .noise import NoiseError, NoiseModel, load_noise
from .search import (
    PlanError,
    build_stage_circuit,
    check_target,
    closed_form_success,
    parse_plan,
    stage_success_probabilities,
)
from .transpile import (
    BackendFormatError,
    TranspileError,
    load_backend,
    logical_width,
    lower,
)


class UsageError(Exception):
    """Bad arguments detected after argparse (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _scales(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}") from None
    if not vals or any(v < 0 or not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("scales must be finite and non-negative")
    return vals


def _table(rows: list[list[str]], out) -> None:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        out.write("  ".join(c.rjust(w) if k else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths))).rstrip())
        out.write("\n")


def _f(v, digits: int = 4) -> str:
    if v is None:
        return "-"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.{digits}f}"


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------
# shared option groups


def _add_backend(p: argparse.ArgumentParser, default: str | None = "vigo") -> None:
    p.add_argument("--backend", default=default, help="builtin name or backend file (default: %(default)s)")


def _add_protocol(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=_positive_int, default=30)
    p.add_argument("--shots", type=_positive_int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixture", choices=("random", "paper"), default="random",
                   help="target source: seeded random or the tabulated fixture list")
    p.add_argument("--targets", help="comma-separated explicit targets (one per trial)")
    p.add_argument("--chained", action="store_true",
                   help="feed each stage's most frequent outcome into the next stage")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--noise", help="noise model file (default: backend-calibrated)")
    g.add_argument("--noiseless", action="store_true")
    p.add_argument("--relaxation", action="store_true", help="add T1/T2 relaxation to the default model")


def _protocol(args) -> TrialProtocol:
    targets = tuple(t.strip() for t in args.targets.split(",")) if args.targets else None
    trials = len(targets) if targets else args.trials
    try:
        return TrialProtocol(trials=trials, shots=args.shots, targets=targets,
                             fixture=args.fixture, seed=args.seed, chained=args.chained)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model(args, backend) -> NoiseModel:
    if args.noiseless:
        return NoiseModel.noiseless()
    if args.noise:
        model = load_noise(args.noise, backend)
        if args.relaxation:
            model.relaxation_enabled = True
        return model
    return NoiseModel.from_backend(backend, relaxation=args.relaxation)


def _check_fits(name: str, n: int, backend) -> None:
    plan = parse_plan(name, n)
    zeros = "0" * n
    for k in range(len(plan.stages)):
        circ = build_stage_circuit(plan, k, zeros, zeros[: len(plan.layout(k).determined)])
        need = logical_width(circ)
        if need > backend.num_qubits:
            raise UsageError(
                f"{plan.name} needs {need} qubits but backend {backend.name} has {backend.num_qubits}"
            )


# --------------------------------------------------------------------------
# subcommands


def cmd_theory(args, out) -> int:
    plan = parse_plan(args.plan, args.n)
    n = plan.n
    stages = stage_success_probabilities(plan)
    p = math.prod(stages) / 2**plan.guessed
    out.write(f"plan      {plan.name}\n")
    out.write(f"n         {n}\n")
    out.write(f"p_theo    {p:.4f}  ({p!r})\n")
    if len(stages) > 1 or plan.guessed:
        parts = " x ".join(f"{s:.4f}" for s in stages)
        guess = f" / 2^{plan.guessed}" if plan.guessed else ""
        out.write(f"stages    {parts}{guess}\n")
    out.write(f"oracles   {plan.num_oracles}\n")
    jm, je = j_max(n), j_exp(n)
    out.write(f"j_max     {jm}  (P = {closed_form_success(n, jm):.4f})\n")
    out.write(f"j_exp     {je}  (P = {closed_form_success(n, je):.4f})\n")
    out.write(f"classical {classical_baseline(n):.4f}  (one guess plus one oracle check)\n")
    return 0


def cmd_run(args, out) -> int:
    backend = load_backend(args.backend)
    plan = parse_plan(args.plan, args.n)
    _check_fits(plan.name, plan.n, backend)
    model = _model(args, backend)
    protocol = _protocol(args)
    record, results = run_plan(plan.name, plan.n, backend, model, protocol)
    if "-" in (args.csv, args.trials_csv):
        out = sys.stderr
    rows = [
        ["metric", "value"],
        ["plan", record.circuit_name],
        ["backend", record.backend],
        ["trials x shots", f"{record.trials} x {record.shots}"],
        ["p_theo", _f(record.p_theo)],
        ["p_sim", f"{_f(record.p_sim)} +/- {_f(record.p_sim_std)}"],
        ["selectivity", f"{_f(record.selectivity, 3)} +/- {_f(record.selectivity_std, 3)}"],
        ["degraded ratio", _f(record.degraded_ratio)],
        ["depth", _f(record.depth, 2) + ("" if record.depth_stage2 is None else f" + {_f(record.depth_stage2, 2)}")],
        ["cx count", str(record.cx_count)],
        ["expected depth (theo)", _f(record.expected_depth_theo, 2)],
        ["expected depth (sim)", _f(record.expected_depth_sim, 2)],
    ]
    _table(rows, out)
    out.write(f"classical baseline (one oracle): {classical_baseline(plan.n):.4f}\n")
    ref = REFERENCE_HARDWARE_P.get(backend.name, {}).get(record.circuit_name)
    if ref is not None:
        out.write(f"reference hardware value (not asserted): {ref}\n")
    _write(args.csv, records_to_csv([record]))
    _write(args.trials_csv, trials_to_csv(record.circuit_name, results))
    return 0


def cmd_sweep(args, out) -> int:
    backend = load_backend(args.backend)
    names = tuple(args.plans.split(",")) if args.plans else catalog(args.n)
    for name in names:
        _check_fits(name, args.n, backend)
    model = _model(args, backend)
    sweep = run_sweep(args.n, backend, model, _protocol(args), scales=args.scales, names=names)
    if args.csv == "-":
        out = sys.stderr
    rows = [["circuit", "scale", "cx", "p_theo", "p_sim", "std", "ratio"]]
    for rec, s in zip(sweep.records, sweep.scales):
        rows.append([rec.circuit_name, f"{s:g}", str(rec.cx_count), _f(rec.p_theo),
                     _f(rec.p_sim), _f(rec.p_sim_std), _f(rec.degraded_ratio)])
    _table(rows, out)
    out.write(f"spearman(cx, ratio) = {sweep.rank_correlation:.4f}\n")
    if sweep.fit is None:
        out.write("logistic fit: skipped (fewer than five rows or one distinct cx count)\n")
    else:
        f = sweep.fit
        out.write(f"logistic fit: a={f.a:.6g} b={f.b:.6g} c={f.c:.6g} d={f.d:.6g} "
                  f"r2={f.r_squared:.4f}\n")
    if args.csv:
        text = records_to_csv(sweep.records)
        lines = text.splitlines()
        lines[0] += ",noise_scale"
        for i, s in enumerate(sweep.scales, start=1):
            lines[i] += f",{s!r}"
        _write(args.csv, "\n".join(lines) + "\n")
    return 0


def cmd_optimize(args, out) -> int:
    backend = load_backend(args.backend)
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if not 1 <= args.max_oracles <= 6:
        raise UsageError("--max-oracles must be in 1..6")
    if args.stages not in (1, 2):
        raise UsageError("--stages must be 1 or 2")
    if args.stages == 2 and args.n < 3:
        raise UsageError("two stages need n >= 3")
    if args.stages == 2 and args.max_oracles < 2:
        raise UsageError("two stages need --max-oracles >= 2")
    result = minimize_expected_depth(args.n, backend, args.max_oracles, args.stages,
                                     force_global=args.force_global)
    rows = [["rank", "plan", "p_theo", "depth", "oracles", "expected depth"]]
    shown = result.ranking if args.top is None else result.ranking[: args.top]
    for i, s in enumerate(shown, start=1):
        rows.append([str(i), s.name, _f(s.p_theo), " + ".join(f"{d:.2f}" for d in s.depths),
                     str(s.num_oracles), _f(s.expected_depth, 2)])
    _table(rows, out)
    out.write(f"best: {result.best.name} (expected depth {result.best.expected_depth:.2f}, "
              f"{len(result.ranking)} plans)\n")
    return 0


def cmd_circuit(args, out) -> int:
    plan = parse_plan(args.plan, args.n)
    try:
        target = check_target(args.target or "0" * plan.n, plan.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0 <= args.stage < len(plan.stages):
        raise UsageError(f"--stage must be in 0..{len(plan.stages) - 1}")
    prior = target[: len(plan.layout(args.stage).determined)]
    circ = build_stage_circuit(plan, args.stage, target, prior)
    if args.lower:
        backend = load_backend(args.backend)
        if logical_width(circ) > backend.num_qubits:
            raise UsageError(f"circuit needs {logical_width(circ)} qubits; {backend.name} has {backend.num_qubits}")
        tc = lower(circ, backend)
        out.write(f"# backend {backend.name} depth {tc.depth} cx {tc.cx_count} layout {tc.layout}\n")
        out.write(Circuit(tc.num_physical, tc.ops).to_text())
    else:
        out.write(circ.to_text())
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="groverlab", description="Partial-diffusion Grover search experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("theory", help="theoretical success probability of a plan")
    t.add_argument("plan")
    t.add_argument("--n", type=int)
    t.set_defaults(func=cmd_theory)

    r = sub.add_parser("run", help="noisy trials of one plan")
    r.add_argument("plan")
    r.add_argument("--n", type=int)
    _add_backend(r)
    _add_protocol(r)
    r.add_argument("--csv", help="write the aggregate record as CSV ('-' for stdout)")
    r.add_argument("--trials-csv", help="write per-trial rows as CSV")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="degraded ratio over a catalog and noise scales")
    s.add_argument("--n", type=int, required=True)
    _add_backend(s)
    _add_protocol(s)
    s.add_argument("--scales", type=_scales, default=(1.0,), help="comma-separated CNOT-noise multipliers")
    s.add_argument("--plans", help="comma-separated plan names (default: the catalog for n)")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("optimize", help="minimum theoretical expected depth")
    o.add_argument("--n", type=int, required=True)
    _add_backend(o)
    o.add_argument("--max-oracles", type=int, default=2)
    o.add_argument("--stages", type=int, default=1)
    o.add_argument("--force-global", action="store_true", help="global diffusion only")
    o.add_argument("--top", type=_positive_int)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("circuit", help="print a stage circuit, abstract or lowered")
    c.add_argument("plan")
    c.add_argument("--n", type=int)
    c.add_argument("--target")
    c.add_argument("--stage", type=int, default=0)
    c.add_argument("--lower", action="store_true")
    _add_backend(c)
    c.set_defaults(func=cmd_circuit)
    return p


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        print(f"groverlab: error: {exc}", file=sys.stderr)
        return 2
    except (PlanError, BackendFormatError, NoiseError, FileNotFoundError) as exc:
        print(f"groverlab: error: {exc}", file=sys.stderr)
        return 2
    except (TranspileError, ValueError, KeyError, OSError) as exc:
        print(f"groverlab: runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
