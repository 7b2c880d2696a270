"""Selectivity, expected depth, iteration counts, plan optimization, logistic fit."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .noise import ShotHistogram
from .search import SearchPlan, build_stage_circuit, closed_form_success, parse_plan, plan_success_probability
from .transpile import Backend, lower


# --------------------------------------------------------------------------
# scalar metrics


def selectivity(hist: ShotHistogram, target_bits: str) -> float:
    """P(target) / max P(non-target); +inf when every count is on target.

    Outcomes that never occurred count as probability zero, so a histogram
    covering only part of the register still compares against its observed
    non-target outcomes.
    """
    if hist.shots <= 0 or not hist.counts:
        raise ValueError("empty histogram")
    others = [c for k, c in hist.counts.items() if k != target_bits]
    top = max(others, default=0)
    hit = hist.counts.get(target_bits, 0)
    if top == 0:
        return math.inf
    return hit / top


def selectivity_from_probs(probs, target_index: int) -> float:
    probs = np.asarray(probs, dtype=float)
    rest = np.delete(probs, target_index)
    top = rest.max() if rest.size else 0.0
    return math.inf if top == 0 else float(probs[target_index] / top)


def expected_depth(depths, p_total: float) -> float:
    if p_total <= 0:
        raise ValueError("success probability must be positive")
    if isinstance(depths, (int, float)):
        depths = [depths]
    return float(sum(depths)) / p_total


def j_max(n: int) -> int:
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.floor(math.pi * math.sqrt(2**n) / 4)


def j_exp(n: int) -> int:
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.floor(0.583 * math.sqrt(2**n))


def oracle_efficiency_argmin(n: int, limit: int | None = None) -> int:
    """argmin over j >= 1 of j / P(n, j), by direct scan."""
    limit = limit if limit is not None else 2 * j_max(n) + 2
    return min(range(1, limit + 1), key=lambda j: (j / closed_form_success(n, j), j))


def classical_baseline(n: int) -> float:
    """Guess one string, check it with the single oracle call, else take another guess."""
    return min(1.0, 2 / 2**n)


# --------------------------------------------------------------------------
# depths averaged over targets


_DEPTH_CACHE: dict[tuple, tuple[int, int]] = {}


def _stage_depth(plan: SearchPlan, index: int, target: str, backend: Backend) -> tuple[int, int]:
    key = (plan.name, plan.n, index, target, backend.key)
    if key not in _DEPTH_CACHE:
        lay = plan.layout(index)
        circ = build_stage_circuit(plan, index, target, target[: len(lay.determined)])
        tc = lower(circ, backend)
        _DEPTH_CACHE[key] = (tc.depth, tc.cx_count)
    return _DEPTH_CACHE[key]


def default_depth_targets(n: int) -> tuple[str, ...]:
    from .catalog import FIXTURE_TARGETS

    if n in FIXTURE_TARGETS:
        return FIXTURE_TARGETS[n]
    return tuple(format(i, f"0{n}b") for i in range(2**n))


def stage_depths(plan: SearchPlan | str, backend: Backend, n: int | None = None,
                 targets=None) -> tuple[list[float], list[float]]:
    """Mean lowered depth and CNOT count of each stage over ``targets``."""
    if isinstance(plan, str):
        plan = parse_plan(plan, n)
    targets = tuple(targets) if targets is not None else default_depth_targets(plan.n)
    depths, cxs = [], []
    for k in range(len(plan.stages)):
        vals = [_stage_depth(plan, k, t, backend) for t in targets]
        depths.append(float(np.mean([d for d, _ in vals])))
        cxs.append(float(np.mean([c for _, c in vals])))
    return depths, cxs


# --------------------------------------------------------------------------
# expected-depth minimization


@dataclass(frozen=True)
class PlanScore:
    name: str
    p_theo: float
    depths: tuple[float, ...]
    expected_depth: float
    num_oracles: int
    local_size: tuple[int, ...]

    @property
    def sort_key(self):
        return (round(self.expected_depth, 9), self.num_oracles, self.local_size, self.name)


def _sequences(sizes: tuple[int, ...], count: int, max_blocks: int):
    """Diffusion-size sequences of length ``count`` drawn from ``sizes`` with at most ``max_blocks`` runs."""
    seen = set()
    for seq in itertools.product(sizes, repeat=count):
        runs = 1 + sum(1 for a, b in zip(seq, seq[1:]) if a != b)
        if runs <= max_blocks and seq not in seen:
            seen.add(seq)
            yield seq


def _stage_names(active: int, max_oracles: int, measured_options, force_global: bool,
                 max_blocks: int, min_local: int = 2):
    locals_ = [] if force_global else list(range(min_local, active))
    for m in [active] + locals_:
        sizes = (active,) if m == active else (m, active)
        for count in range(1, max_oracles + 1):
            for seq in _sequences(sizes, count, max_blocks):
                if m != active and m not in seq:
                    continue
                for p in measured_options:
                    if seq[-1] < p < active:
                        continue
                    yield m, count, "".join(f"D{s}" for s in seq) + f"M{p}"


def enumerate_plans(n: int, max_oracles: int, max_stages: int = 1, force_global: bool = False,
                    max_blocks: int = 3) -> list[str]:
    """Every full-search plan within the bounds.

    Single-stage plans read all n qubits. Two-stage plans read p qubits
    first (leaving at least two for the second stage) and the rest after.
    Local diffusions act on at least two qubits; at most ``max_blocks``
    alternating runs of local and global iterations per stage.
    """
    if n < 2:
        raise ValueError("plan enumeration needs n >= 2")
    if not 1 <= max_oracles <= 6:
        raise ValueError("max_oracles must be in 1..6")
    if max_stages not in (1, 2):
        raise ValueError("max_stages must be 1 or 2")
    if not 1 <= max_blocks <= 3:
        raise ValueError("max_blocks must be in 1..3")
    names = [s for _, _, s in _stage_names(n, max_oracles, (n,), force_global, max_blocks)]
    if max_stages == 2:
        for p in range(1, n - 1):
            rest = n - p
            for _, c1, first in _stage_names(n, max_oracles - 1, (p,), force_global, max_blocks):
                for _, _, second in _stage_names(rest, max_oracles - c1, (rest,), force_global, max_blocks):
                    names.append(f"{first}|{second}")
    return names


def score_plan(name: str, n: int, backend: Backend, targets=None) -> PlanScore:
    plan = parse_plan(name, n)
    p = plan_success_probability(plan)
    depths, _ = stage_depths(plan, backend, targets=targets)
    local = tuple(min(s.iterations) for s in plan.stages)
    ed = expected_depth(depths, p) if p > 0 else math.inf
    return PlanScore(plan.name, p, tuple(depths), ed, plan.num_oracles, local)


@dataclass
class OptimizationResult:
    best: PlanScore
    ranking: list[PlanScore]


def minimize_expected_depth(n: int, backend: Backend, max_oracles: int, max_stages: int = 1,
                            force_global: bool = False, targets=None,
                            candidates=None) -> OptimizationResult:
    """Exhaustive minimum of theoretical expected depth.

    ``candidates`` replaces the enumeration with an explicit list of plan
    names (for example a catalog). Ties break on fewer oracles, smaller
    local diffusion, then plan name.
    """
    names = list(candidates) if candidates is not None else enumerate_plans(
        n, max_oracles, max_stages, force_global
    )
    if not names:
        raise ValueError("no feasible plan within the bounds")
    scores = [score_plan(name, n, backend, targets) for name in names]
    scores.sort(key=lambda s: s.sort_key)
    return OptimizationResult(scores[0], scores)


# --------------------------------------------------------------------------
# logistic fit


@dataclass
class LogisticFit:
    a: float
    b: float
    c: float
    d: float
    r_squared: float
    residual_norm: float
    history: tuple[float, ...] = ()

    def __call__(self, x):
        return logistic(np.asarray(x, dtype=float), self.a, self.b, self.c, self.d)

    def is_decreasing(self, lo: float, hi: float, num: int = 200) -> bool:
        ys = self(np.linspace(lo, hi, num))
        return bool(np.all(np.diff(ys) <= 1e-15))


def logistic(x, a, b, c, d):
    z = np.clip(-b * (np.asarray(x, dtype=float) - c), -700, 700)
    return a / (1.0 + np.exp(z)) + d


def _linear_ad(x, y, b, c):
    s = logistic(x, 1.0, b, c, 0.0)
    basis = np.column_stack([s, np.ones_like(s)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    res = basis @ coef - y
    return coef, float(res @ res)


def _jacobian(x, a, b, c):
    s = logistic(x, 1.0, b, c, 0.0)
    ds = s * (1 - s)
    return np.column_stack([s, a * ds * (x - c), -a * ds * b, np.ones_like(x)])


def fit_logistic(points, grid: int = 81, max_iter: int = 200) -> LogisticFit:
    """Least-squares fit of y = a / (1 + exp(-b (x - c))) + d.

    A coarse grid over (b, c) with the linear parameters solved exactly
    seeds a damped Gauss-Newton (Levenberg-Marquardt) refinement; steps are
    accepted only when they lower the residual, so the recorded residual
    history is non-increasing.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 5:
        raise ValueError("need at least five (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2:
        raise ValueError("degenerate data: all x values are equal")
    span = float(x.max() - x.min())
    scale = 1.0 / span
    bs = np.concatenate([-np.geomspace(100 * scale, 0.01 * scale, grid // 2),
                         np.geomspace(0.01 * scale, 100 * scale, grid // 2)])
    cs = np.linspace(x.min() - span, x.max() + span, grid)
    best = None
    for b in bs:
        for c in cs:
            coef, sse = _linear_ad(x, y, b, c)
            if best is None or sse < best[0] - 1e-15:
                best = (sse, coef[0], b, c, coef[1])
    sse, a, b, c, d = best
    theta = np.array([a, b, c, d])
    lam = 1e-3
    history = [math.sqrt(sse)]
    for _ in range(max_iter):
        r = logistic(x, *theta) - y
        jac = _jacobian(x, theta[0], theta[1], theta[2])
        g = jac.T @ r
        h = jac.T @ jac
        improved = False
        for _ in range(30):
            step = np.linalg.solve(h + lam * np.diag(np.diag(h) + 1e-12), -g)
            trial = theta + step
            new = logistic(x, *trial) - y
            new_sse = float(new @ new)
            if np.isfinite(new_sse) and new_sse < sse:
                theta, sse = trial, new_sse
                lam = max(lam / 3, 1e-12)
                improved = True
                break
            lam *= 4
        history.append(math.sqrt(sse))
        if not improved or abs(history[-2] - history[-1]) <= 1e-15 * max(1.0, history[-2]):
            break
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        r2 = 1.0 if sse < 1e-24 else 0.0
    else:
        r2 = max(0.0, 1.0 - sse / sst)
    a, b, c, d = (float(v) for v in theta)
    return LogisticFit(a, b, c, d, r2, math.sqrt(sse), tuple(history))


def spearman(x, y) -> float:
    from scipy.stats import spearmanr

    return float(spearmanr(x, y).statistic)


# --------------------------------------------------------------------------
# experiment records


@dataclass
class ExperimentRecord:
    circuit_name: str
    n: int
    backend: str
    p_theo: float
    p_sim: float
    p_sim_std: float
    selectivity: float
    selectivity_std: float
    depth: float
    depth_stage2: float | None
    expected_depth_theo: float
    expected_depth_sim: float
    cx_count: int
    degraded_ratio: float
    trials: int
    shots: int


RECORD_COLUMNS = tuple(f.name for f in fields(ExperimentRecord))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(field_type, text: str):
    if text == "":
        return None
    if field_type in ("int", int):
        return int(text)
    if field_type in ("str", str):
        return text
    return float(text)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        row = asdict(r)
        w.writerow([_fmt(row[c]) for c in RECORD_COLUMNS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[ExperimentRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != RECORD_COLUMNS:
        raise ValueError("unexpected CSV header")
    types = {f.name: f.type for f in fields(ExperimentRecord)}
    out = []
    for row in rows[1:]:
        vals = {}
        for col, text_ in zip(RECORD_COLUMNS, row):
            t = types[col]
            base = t.split("|")[0].strip() if isinstance(t, str) else t
            vals[col] = _parse(base, text_)
        out.append(ExperimentRecord(**vals))
    return out
