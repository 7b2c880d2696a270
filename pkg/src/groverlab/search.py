"""Oracle, diffusion and Grover operators, plus the circuit-naming grammar.

A plan name such as ``"G1D2M2"`` or ``"D2M1|D3M3"`` reads left to right in
execution order:

* ``Gg``  classically fix (guess) the leading ``g`` qubits, first stage only;
* ``Dm``  one Grover iteration: the n-qubit oracle followed by a diffusion
          on ``m`` qubits (global when ``m`` equals the active count);
* ``Mp``  read out ``p`` qubits, ending the stage;
* ``|``   start a new stage, re-prepared with the bits found so far.

Qubit roles: guessed qubits come first, and every stage consumes the
leading qubits that are still undetermined. Local diffusions act on the
first ``m`` active qubits and the measurement reads the first ``p`` active
qubits, so measured qubits sit inside the diffusion support. This is the
assignment that reproduces the published theoretical probabilities; the
other reading (diffuse the trailing qubits, measure the rest) is available
as ``convention="complement"`` for comparison.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .gates import Circuit, Gate
from .statevector import (
    apply_circuit,
    basis_state,
    marginal_probabilities,
)

CONVENTIONS = ("support", "complement")


class PlanError(ValueError):
    """Malformed or infeasible plan; ``position`` indexes into the name."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = f" (at position {position})" if position is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class Stage:
    guessed: int
    iterations: tuple[int, ...]
    measured: int

    def __post_init__(self):
        object.__setattr__(self, "iterations", tuple(self.iterations))

    @property
    def name(self) -> str:
        head = f"G{self.guessed}" if self.guessed else ""
        return head + "".join(f"D{m}" for m in self.iterations) + f"M{self.measured}"


@dataclass(frozen=True)
class StageLayout:
    determined: tuple[int, ...]
    active: tuple[int, ...]
    supports: tuple[tuple[int, ...], ...]
    measured: tuple[int, ...]


@dataclass(frozen=True)
class SearchPlan:
    n: int
    stages: tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def name(self) -> str:
        return "|".join(s.name for s in self.stages)

    def __str__(self) -> str:
        return self.name

    @property
    def guessed(self) -> int:
        return self.stages[0].guessed

    @property
    def num_oracles(self) -> int:
        return sum(len(s.iterations) for s in self.stages)

    def layout(self, index: int, convention: str = "support") -> StageLayout:
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {convention!r}")
        done = self.stages[0].guessed + sum(s.measured for s in self.stages[:index])
        stage = self.stages[index]
        active = tuple(range(done, self.n))
        if convention == "support":
            supports = tuple(active[:m] for m in stage.iterations)
        else:
            supports = tuple(active[len(active) - m:] for m in stage.iterations)
        return StageLayout(tuple(range(done)), active, supports, active[: stage.measured])

    def determined_after(self, index: int) -> int:
        return self.stages[0].guessed + sum(s.measured for s in self.stages[: index + 1])


_STAGE_RE = re.compile(r"(?:G(\d+))?((?:D\d+)+)M(\d+)")
_ITER_RE = re.compile(r"D(\d+)")


def parse_plan(name: str, n: int | None = None) -> SearchPlan:
    """Parse a plan name; ``n`` defaults to guessed plus measured qubit counts."""
    text = name.strip().replace("∣", "|")
    if not text:
        raise PlanError("empty plan name", 0)
    stages = []
    pos = 0
    for k, chunk in enumerate(text.split("|")):
        m = _STAGE_RE.fullmatch(chunk)
        if m is None:
            raise PlanError(f"malformed stage {chunk!r}", pos + _first_bad(chunk))
        if m.group(1) is not None and k > 0:
            raise PlanError("guessed qubits are only allowed in the first stage", pos)
        guessed = int(m.group(1) or 0)
        iters = tuple(int(d) for d in _ITER_RE.findall(m.group(2)))
        measured = int(m.group(3))
        stages.append((pos, Stage(guessed, iters, measured)))
        pos += len(chunk) + 1
    if n is None:
        n = stages[0][1].guessed + sum(s.measured for _, s in stages)
    plan = SearchPlan(n, tuple(s for _, s in stages))
    _validate(plan, [p for p, _ in stages])
    return plan


def _first_bad(chunk: str) -> int:
    """Best-effort index of the first character that breaks the stage grammar."""
    for cut in range(len(chunk), 0, -1):
        prefix = chunk[:cut]
        if re.fullmatch(r"(?:G\d*)?(?:D\d*)*(?:M\d*)?", prefix):
            if cut == len(chunk) and "D" not in chunk:
                return chunk.find("M") if "M" in chunk else cut  # no iteration before M
            return cut
    return 0


def _validate(plan: SearchPlan, offsets: list[int]) -> None:
    n = plan.n
    if n < 1:
        raise PlanError("plan needs at least one qubit", 0)
    done = plan.stages[0].guessed
    if done >= n:
        raise PlanError(f"guessing {done} of {n} qubits leaves nothing to search", 0)
    for stage, off in zip(plan.stages, offsets):
        active = n - done
        for m in stage.iterations:
            if not 1 <= m <= active:
                raise PlanError(f"diffusion size {m} outside 1..{active} active qubits", off)
        if not 1 <= stage.measured <= active:
            raise PlanError(
                f"measuring {stage.measured} qubits but only {active} are active", off
            )
        last = stage.iterations[-1]
        if last < stage.measured < active:
            raise PlanError(
                f"measured qubits must lie inside the final D{last} support "
                f"unless all {active} active qubits are read",
                off,
            )
        done += stage.measured
    if done > n:
        raise PlanError(f"plan determines {done} qubits but only {n} exist", 0)


def check_target(target: str, n: int) -> str:
    if len(target) != n or set(target) - {"0", "1"}:
        raise ValueError(f"target must be a {n}-bit string, got {target!r}")
    return target


def _phase_flip(qubits: tuple[int, ...]) -> Gate:
    if len(qubits) == 1:
        return Gate("Z", qubits)
    if len(qubits) == 2:
        return Gate("CZ", qubits)
    return Gate("MCZ", qubits)


def oracle_gates(n: int, target: str) -> list[Gate]:
    check_target(target, n)
    flips = [Gate("X", (q,)) for q, b in enumerate(target) if b == "0"]
    return flips + [_phase_flip(tuple(range(n)))] + flips


def oracle_circuit(n: int, target: str) -> Circuit:
    """Phase oracle 1 - 2|t><t| as an X-conjugated multi-controlled Z."""
    return Circuit(n, oracle_gates(n, target))


def diffusion_gates(support) -> list[Gate]:
    support = tuple(support)
    if not support:
        raise ValueError("diffusion support must be nonempty")
    hs = [Gate("H", (q,)) for q in support]
    xs = [Gate("X", (q,)) for q in support]
    return hs + xs + [_phase_flip(support)] + xs + hs


def diffusion_circuit(n: int, support) -> Circuit:
    """Reflection about the uniform state on ``support``, identity elsewhere.

    Realized as H/X-conjugated MCZ, which equals 2|s><s| - 1 up to an
    overall sign.
    """
    support = tuple(support)
    if not support:
        raise ValueError("diffusion support must be nonempty")
    if len(set(support)) != len(support) or any(q < 0 or q >= n for q in support):
        raise ValueError(f"invalid support {support} for {n} qubits")
    return Circuit(n, diffusion_gates(support))


def grover_circuit(n: int, target: str, iterations: int) -> Circuit:
    """Standard Grover: H on all qubits, then ``iterations`` global iterations."""
    gates = [Gate("H", (q,)) for q in range(n)]
    for _ in range(iterations):
        gates += oracle_gates(n, target) + diffusion_gates(range(n))
    return Circuit(n, gates)


def closed_form_success(n: int, j: int) -> float:
    if j < 0:
        raise ValueError("iteration count must be nonnegative")
    theta = math.asin(2 ** (-n / 2))
    return math.sin((2 * j + 1) * theta) ** 2


def build_stage_circuit(
    plan: SearchPlan,
    index: int,
    target: str,
    prior_bits: str = "",
    convention: str = "support",
) -> Circuit:
    """Circuit for one stage: prepare determined qubits, superpose the rest, iterate.

    ``prior_bits`` fixes every qubit determined before this stage (the
    guessed qubits for stage 0). The oracle always spans all n qubits.
    """
    n = plan.n
    check_target(target, n)
    lay = plan.layout(index, convention)
    if len(prior_bits) != len(lay.determined) or set(prior_bits) - {"0", "1"}:
        raise ValueError(
            f"stage {index} needs {len(lay.determined)} prior bits, got {prior_bits!r}"
        )
    gates = [Gate("X", (q,)) for q, b in zip(lay.determined, prior_bits) if b == "1"]
    gates += [Gate("H", (q,)) for q in lay.active]
    oracle = oracle_gates(n, target)
    for support in lay.supports:
        gates += oracle + diffusion_gates(support)
    return Circuit(n, gates)


def stage_state(plan: SearchPlan, index: int, target: str, prior_bits: str = "",
                convention: str = "support"):
    circuit = build_stage_circuit(plan, index, target, prior_bits, convention)
    return apply_circuit(basis_state("0" * plan.n), circuit)


def stage_distribution(plan: SearchPlan, index: int, target: str, prior_bits: str = "",
                       convention: str = "support") -> np.ndarray:
    """Exact outcome distribution over the stage's measured qubits."""
    state = stage_state(plan, index, target, prior_bits, convention)
    measured = plan.layout(index, convention).measured
    return marginal_probabilities(state.probabilities, measured, plan.n)


def stage_success_probabilities(plan: SearchPlan, target: str | None = None,
                                convention: str = "support") -> list[float]:
    """P(stage k reads the right target bits | earlier stages were right)."""
    target = "0" * plan.n if target is None else check_target(target, plan.n)
    probs = []
    for k in range(len(plan.stages)):
        lay = plan.layout(k, convention)
        prior = target[: len(lay.determined)]
        dist = stage_distribution(plan, k, target, prior, convention)
        want = target[lay.measured[0]: lay.measured[-1] + 1]
        probs.append(float(dist[int(want, 2)]))
    return probs


def plan_success_probability(plan: SearchPlan | str, n: int | None = None,
                             target: str | None = None, convention: str = "support") -> float:
    """Exact success probability, including the 1/2**g factor for guessed bits."""
    if isinstance(plan, str):
        plan = parse_plan(plan, n)
    p = math.prod(stage_success_probabilities(plan, target, convention))
    return p / 2**plan.guessed
