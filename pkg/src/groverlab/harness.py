"""Trial protocol: random or fixture targets, noisy shots per stage, aggregate metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import catalog, fixture_targets
from .metrics import (
    ExperimentRecord,
    LogisticFit,
    expected_depth,
    fit_logistic,
    selectivity,
    spearman,
    stage_depths,
)
from .noise import NoiseModel, ShotHistogram, degraded_ratio, run_shots
from .search import SearchPlan, build_stage_circuit, parse_plan, plan_success_probability
from .transpile import Backend, lower


@dataclass
class TrialProtocol:
    trials: int = 30
    shots: int = 8192
    targets: tuple[str, ...] | None = None
    fixture: str = "random"  # "random" or "paper"
    seed: int = 0
    chained: bool = False

    def __post_init__(self):
        if self.trials < 1 or self.shots < 1:
            raise ValueError("trials and shots must be positive")
        if self.fixture not in ("random", "paper"):
            raise ValueError("fixture must be 'random' or 'paper'")
        if self.targets is not None:
            self.targets = tuple(self.targets)
            if len(self.targets) != self.trials:
                raise ValueError("explicit targets must number exactly `trials`")

    def resolve_targets(self, n: int) -> tuple[str, ...]:
        if self.targets is not None:
            bad = [t for t in self.targets if len(t) != n or set(t) - {"0", "1"}]
            if bad:
                raise ValueError(f"targets are not {n}-bit strings: {bad[:3]}")
            return self.targets
        if self.fixture == "paper":
            fixed = fixture_targets(n)
            if self.trials > len(fixed):
                raise ValueError(f"fixture has only {len(fixed)} targets for n={n}")
            return fixed[: self.trials]
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, n, 0xA5]))
        draws = rng.integers(0, 2**n, size=self.trials)
        return tuple(format(int(v), f"0{n}b") for v in draws)


@dataclass
class TrialResult:
    trial: int
    target: str
    p_sim: float
    selectivity: float
    stage_probabilities: tuple[float, ...]
    histograms: tuple[ShotHistogram, ...] = field(repr=False, default=())


TRIAL_COLUMNS = ("circuit_name", "trial", "target", "p_sim", "selectivity", "stage_probabilities")


def _stage_bits(plan: SearchPlan, index: int, target: str) -> str:
    lay = plan.layout(index)
    return target[lay.measured[0]: lay.measured[-1] + 1]


def run_trial(plan: SearchPlan, target: str, backend: Backend, model: NoiseModel,
              shots: int, seed_seq: np.random.SeedSequence, chained: bool = False) -> TrialResult:
    """One target, every stage.

    Product mode prepares each stage with the true earlier bits and
    multiplies stage success rates (times 1/2^g for guessed bits). Chained
    mode prepares each stage from the previous stage's most frequent
    outcome; once that disagrees with the target the remaining stages score
    zero.
    """
    stage_seeds = seed_seq.spawn(len(plan.stages))
    probs = []
    sels = []
    hists = []
    known = target[: plan.guessed]
    derailed = False
    for k, sseq in enumerate(stage_seeds):
        lay = plan.layout(k)
        prior = target[: len(lay.determined)] if not chained else known
        circ = build_stage_circuit(plan, k, target, prior)
        tc = lower(circ, backend)
        seed = int(sseq.generate_state(1)[0])
        hist = run_shots(tc, model, shots, seed, measured=lay.measured)
        want = _stage_bits(plan, k, target)
        hists.append(hist)
        sels.append(selectivity(hist, want))
        p = 0.0 if derailed else hist.probability(want)
        probs.append(p)
        if chained:
            found = hist.most_common()
            known += found
            derailed = derailed or found != want
    p_total = math.prod(probs) / 2**plan.guessed
    return TrialResult(0, target, p_total, min(sels), tuple(probs), tuple(hists))


def run_plan(name: str, n: int, backend: Backend, model: NoiseModel,
             protocol: TrialProtocol) -> tuple[ExperimentRecord, list[TrialResult]]:
    plan = parse_plan(name, n)
    targets = protocol.resolve_targets(n)
    seqs = np.random.SeedSequence([protocol.seed, n]).spawn(protocol.trials)
    results = []
    for i, (target, seq) in enumerate(zip(targets, seqs)):
        res = run_trial(plan, target, backend, model, protocol.shots, seq, protocol.chained)
        res.trial = i
        results.append(res)
    p_theo = plan_success_probability(plan)
    depths, cxs = stage_depths(plan, backend, targets=targets)
    ps = np.array([r.p_sim for r in results])
    sels = np.array([r.selectivity for r in results])
    finite = sels[np.isfinite(sels)]
    sel_mean = float(np.mean(sels)) if finite.size == sels.size else math.inf
    sel_std = float(np.std(sels)) if finite.size == sels.size else 0.0
    p_mean = float(ps.mean())
    record = ExperimentRecord(
        circuit_name=plan.name,
        n=n,
        backend=backend.name,
        p_theo=p_theo,
        p_sim=p_mean,
        p_sim_std=float(ps.std()),
        selectivity=sel_mean,
        selectivity_std=sel_std,
        depth=depths[0],
        depth_stage2=depths[1] if len(depths) > 1 else None,
        expected_depth_theo=expected_depth(depths, p_theo),
        expected_depth_sim=expected_depth(depths, p_mean) if p_mean > 0 else math.inf,
        cx_count=int(round(sum(cxs))),
        degraded_ratio=degraded_ratio(p_mean, p_theo),
        trials=protocol.trials,
        shots=protocol.shots,
    )
    return record, results


def trials_to_csv(name: str, results: list[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in results:
        w.writerow([name, r.trial, r.target, repr(r.p_sim), repr(r.selectivity),
                    " ".join(repr(p) for p in r.stage_probabilities)])
    return buf.getvalue()


@dataclass
class SweepResult:
    records: list[ExperimentRecord]
    scales: list[float]
    fit: LogisticFit | None
    rank_correlation: float


def run_sweep(n: int, backend: Backend, base: NoiseModel, protocol: TrialProtocol,
              scales=(1.0,), names=None) -> SweepResult:
    """Every catalog circuit at every noise scale; logistic fit of ratio vs CNOT count."""
    names = tuple(names) if names is not None else catalog(n)
    if not names:
        raise ValueError("empty catalog")
    records = []
    row_scales = []
    for s in scales:
        model = base.scaled(s)
        for name in names:
            rec, _ = run_plan(name, n, backend, model, protocol)
            records.append(rec)
            row_scales.append(float(s))
    xs = [r.cx_count for r in records]
    ys = [r.degraded_ratio for r in records]
    fit = None
    if len(records) >= 5 and len(set(xs)) >= 2:
        fit = fit_logistic(zip(xs, ys))
    rho = spearman(xs, ys) if len(set(ys)) > 1 else float("nan")
    return SweepResult(records, row_scales, fit, rho)
