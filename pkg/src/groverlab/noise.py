"""Shot-level noisy execution of transpiled circuits.

Noise channels:

* two-qubit depolarizing after every CNOT: with probability ``p`` (per edge)
  one of the 15 non-identity two-qubit Paulis, uniformly;
* symmetric readout bit flips, per physical qubit;
* optional relaxation: for each as-soon-as-possible layer, every used qubit
  undergoes amplitude damping and pure dephasing for the layer's duration.

Single-qubit gates are noiseless. :func:`run_shots` samples quantum
trajectories in fixed-size chunks whose seeds are spawned from the master
seed, so results do not depend on how chunks are scheduled.
:func:`exact_density_success` propagates the density matrix through the same
channels and serves as the variance-free reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .gates import Gate, matrix_of
from .statevector import apply_gate_array, apply_matrix, marginal_probabilities
from .transpile import Backend, TranspiledCircuit, _edge, asap_layers, compact_ops

CHUNK = 4096
MAX_DENSITY_QUBITS = 6

_P1 = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1, -1]).astype(complex),
]
# 15 non-identity two-qubit Paulis, index k -> (a, b) with a, b in 0..3
PAULI_PAIRS = [(a, b) for a in range(4) for b in range(4) if (a, b) != (0, 0)]


class NoiseError(ValueError):
    pass


@dataclass
class NoiseModel:
    cx_depolarizing: dict[tuple[int, int], float] = field(default_factory=dict)
    readout_flip: dict[int, float] = field(default_factory=dict)
    relaxation_enabled: bool = False
    t1_us: dict[int, float] = field(default_factory=dict)
    t2_us: dict[int, float] = field(default_factory=dict)
    gate_durations: dict[str, float] = field(default_factory=dict)
    default_cx: float = 0.0
    default_readout: float = 0.0

    def __post_init__(self):
        self.cx_depolarizing = {_edge(*e): float(p) for e, p in self.cx_depolarizing.items()}
        self.readout_flip = {int(q): float(p) for q, p in self.readout_flip.items()}
        probs = [*self.cx_depolarizing.values(), *self.readout_flip.values(),
                 self.default_cx, self.default_readout]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise NoiseError("noise probabilities must lie in [0, 1]")

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls()

    @classmethod
    def from_backend(cls, backend: Backend, relaxation: bool = False,
                     readout: bool = True, scale: float = 1.0) -> NoiseModel:
        """Calibrated default: CNOT error as depolarizing probability, readout flips on."""
        return cls(
            cx_depolarizing={e: min(1.0, scale * p) for e, p in backend.cx_error.items()},
            readout_flip={q: p if readout else 0.0 for q, p in enumerate(backend.readout_error)},
            relaxation_enabled=relaxation,
            t1_us=dict(enumerate(backend.t1_us)),
            t2_us=dict(enumerate(backend.t2_us)),
            gate_durations=dict(backend.gate_durations),
        )

    @classmethod
    def uniform(cls, cx: float, readout: float = 0.0) -> NoiseModel:
        return cls(default_cx=cx, default_readout=readout)

    def cx_prob(self, a: int, b: int) -> float:
        return self.cx_depolarizing.get(_edge(a, b), self.default_cx)

    def readout_prob(self, q: int) -> float:
        return self.readout_flip.get(q, self.default_readout)

    def scaled(self, factor: float) -> NoiseModel:
        """Multiply CNOT and readout error rates; relaxation is left as is."""
        return replace(
            self,
            cx_depolarizing={e: min(1.0, p * factor) for e, p in self.cx_depolarizing.items()},
            readout_flip={q: min(1.0, p * factor) for q, p in self.readout_flip.items()},
            default_cx=min(1.0, self.default_cx * factor),
            default_readout=min(1.0, self.default_readout * factor),
        )

    @property
    def is_noiseless(self) -> bool:
        return (
            not self.relaxation_enabled
            and self.default_cx == 0
            and self.default_readout == 0
            and not any(self.cx_depolarizing.values())
            and not any(self.readout_flip.values())
        )


_NOISE_KEYS = {"cx_depolarizing", "readout_flip", "relaxation_enabled", "scale"}


def parse_noise(text: str, backend: Backend | None = None) -> NoiseModel:
    """Noise override file: ``key: value`` lines.

    ``cx_depolarizing`` and ``readout_flip`` set uniform values;
    ``cx_depolarizing.<a>-<b>`` and ``readout_flip.<q>`` set single entries;
    ``relaxation_enabled`` is a boolean and ``scale`` multiplies every CNOT
    probability. Unspecified entries fall back to the backend calibration.
    """
    base = NoiseModel.from_backend(backend) if backend is not None else NoiseModel()
    cx = dict(base.cx_depolarizing)
    ro = dict(base.readout_flip)
    relax = base.relaxation_enabled
    scale = 1.0
    uniform_cx = uniform_ro = None
    edge_over: dict[tuple[int, int], float] = {}
    qubit_over: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise NoiseError(f"line {lineno}: expected 'key: value'")
        key, value = (s.strip() for s in line.split(":", 1))
        head, _, sub = key.partition(".")
        try:
            if key == "relaxation_enabled":
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise NoiseError(f"line {lineno}: not a boolean: {value!r}")
                relax = value.lower() in ("true", "1", "yes")
            elif key == "scale":
                scale = float(value)
            elif head == "cx_depolarizing" and sub:
                a, b = (int(x) for x in sub.split("-"))
                edge_over[_edge(a, b)] = float(value)
            elif head == "readout_flip" and sub:
                qubit_over[int(sub)] = float(value)
            elif key == "cx_depolarizing":
                uniform_cx = float(value)
            elif key == "readout_flip":
                uniform_ro = float(value)
            else:
                raise NoiseError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, NoiseError):
                raise
            raise NoiseError(f"line {lineno}: {exc}") from None
    given = [v for v in (uniform_cx, uniform_ro) if v is not None]
    given += [*edge_over.values(), *qubit_over.values()]
    if any(not 0.0 <= v <= 1.0 for v in given):
        raise NoiseError("noise probabilities must lie in [0, 1]")
    if scale < 0 or not math.isfinite(scale):
        raise NoiseError("scale must be finite and non-negative")
    if uniform_cx is not None:
        cx = {e: uniform_cx for e in cx}
    if uniform_ro is not None:
        ro = {q: uniform_ro for q in ro}
    cx.update(edge_over)
    ro.update(qubit_over)
    return replace(
        base,
        cx_depolarizing={e: min(1.0, p * scale) for e, p in cx.items()},
        readout_flip=ro,
        relaxation_enabled=relax,
        default_cx=min(1.0, (uniform_cx if uniform_cx is not None else base.default_cx) * scale),
        default_readout=uniform_ro if uniform_ro is not None else base.default_readout,
    )


def load_noise(path: str | Path, backend: Backend | None = None) -> NoiseModel:
    return parse_noise(Path(path).read_text(), backend)


# --------------------------------------------------------------------------
# histograms


@dataclass
class ShotHistogram:
    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")

    def probability(self, bits: str) -> float:
        return self.counts.get(bits, 0) / self.shots

    def to_text(self) -> str:
        return "".join(f"{k} {self.counts[k]}\n" for k in sorted(self.counts))

    @classmethod
    def from_text(cls, text: str) -> ShotHistogram:
        counts = {}
        for line in text.splitlines():
            if line.strip():
                k, v = line.split()
                counts[k] = int(v)
        return cls(counts, sum(counts.values()))

    def most_common(self) -> str:
        return min(self.counts, key=lambda k: (-self.counts[k], k))


# --------------------------------------------------------------------------
# compiled program


@dataclass
class _Program:
    """Ops relabelled onto the compact physical register, ready to simulate."""

    width: int
    steps: list  # ("u", Gate-like 1q matrix) / ("cx", a, b, p) / ("relax", layer durations)
    measured: list[int]  # compact indices, in readout order
    flips: np.ndarray
    physical: tuple[int, ...]
    cx_probs: np.ndarray


def _relax_params(model: NoiseModel, phys: int, duration_ns: float) -> tuple[float, float]:
    t1 = model.t1_us.get(phys)
    t2 = model.t2_us.get(phys)
    if t1 is None or t2 is None or duration_ns <= 0:
        return 0.0, 0.0
    t = duration_ns * 1e-3  # microseconds
    gamma = 1.0 - math.exp(-t / t1)
    rate_phi = max(0.0, 1.0 / t2 - 0.5 / t1)
    pz = 0.5 * (1.0 - math.exp(-t * rate_phi))
    return gamma, pz


def _gate_duration(model: NoiseModel, g: Gate) -> float:
    return float(model.gate_durations.get(g.kind.lower(), 0.0))


def _compile(tc: TranspiledCircuit, model: NoiseModel, measured_logical) -> _Program:
    ops, index = compact_ops(tc)
    phys = tuple(sorted(index, key=index.get))
    w = len(phys)
    measured = [index[tc.final_layout[q]] for q in measured_logical]
    flips = np.array([model.readout_prob(phys[m]) for m in measured])
    steps = []
    cx_probs = []
    if model.relaxation_enabled:
        for layer in asap_layers(ops):
            for g in layer:
                if g.kind == "CX":
                    a, b = g.qubits
                    p = model.cx_prob(phys[a], phys[b])
                    steps.append(("cx", a, b, p))
                    cx_probs.append(p)
                else:
                    steps.append(("u", g.qubits[0], matrix_of(g)))
            dur = max(_gate_duration(model, g) for g in layer)
            chans = [(q, *_relax_params(model, phys[q], dur)) for q in range(w)]
            chans = [c for c in chans if c[1] > 0 or c[2] > 0]
            if chans:
                steps.append(("relax", chans))
    else:
        pending: dict[int, np.ndarray] = {}

        def flush(q):
            m = pending.pop(q, None)
            if m is not None:
                steps.append(("u", q, m))

        for g in ops:
            if g.num_qubits == 1:
                q = g.qubits[0]
                pending[q] = matrix_of(g) @ pending.get(q, np.eye(2, dtype=complex))
            else:
                a, b = g.qubits
                flush(a)
                flush(b)
                p = model.cx_prob(phys[a], phys[b])
                steps.append(("cx", a, b, p))
                cx_probs.append(p)
        for q in sorted(pending):
            flush(q)
    return _Program(w, steps, measured, flips, phys, np.array(cx_probs, dtype=float))


def _initial(w: int, batch: int) -> np.ndarray:
    psi = np.zeros((batch, 2**w), dtype=complex)
    psi[:, 0] = 1.0
    return psi


def _apply_pauli_pair(psi: np.ndarray, a: int, b: int, k: int, w: int) -> np.ndarray:
    pa, pb = PAULI_PAIRS[k]
    if pa:
        psi = apply_matrix(psi, _P1[pa], (a,), w)
    if pb:
        psi = apply_matrix(psi, _P1[pb], (b,), w)
    return psi


def _inject(psi: np.ndarray, a: int, b: int, which: np.ndarray, w: int) -> np.ndarray:
    """Apply Pauli ``which[i]`` (0..14) to row i."""
    for k in np.unique(which):
        rows = np.flatnonzero(which == k)
        psi[rows] = _apply_pauli_pair(psi[rows], a, b, int(k), w)
    return psi


def _relax_trajectories(psi, chans, w, rng):
    for q, gamma, pz in chans:
        if gamma > 0:
            probs = np.abs(psi) ** 2
            p1 = marginal_probabilities(probs, (q,), w)[:, 1]
            jump = rng.random(psi.shape[0]) < gamma * p1
            lower = np.array([[0, 1], [0, 0]], dtype=complex)
            keep = np.diag([1.0, math.sqrt(1.0 - gamma)]).astype(complex)
            if jump.any():
                psi[jump] = apply_matrix(psi[jump], lower, (q,), w)
            stay = ~jump
            if stay.any():
                psi[stay] = apply_matrix(psi[stay], keep, (q,), w)
            norms = np.linalg.norm(psi, axis=1, keepdims=True)
            psi /= norms
        if pz > 0:
            hit = rng.random(psi.shape[0]) < pz
            if hit.any():
                psi[hit] = apply_matrix(psi[hit], _P1[3], (q,), w)
    return psi


def _sample_rows(psi: np.ndarray, prog: _Program, rng) -> np.ndarray:
    probs = marginal_probabilities(np.abs(psi) ** 2, prog.measured, prog.width)
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(psi.shape[0])[:, None]
    return np.minimum((u > cdf).sum(axis=1), probs.shape[1] - 1)


def _simulate_chunk(prog: _Program, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Measured outcome index (before readout flips) for each of ``shots`` trajectories."""
    w = prog.width
    n_cx = len(prog.cx_probs)
    relax = any(s[0] == "relax" for s in prog.steps)
    if relax:
        psi = _initial(w, shots)
        for step in prog.steps:
            if step[0] == "u":
                psi = apply_matrix(psi, step[2], (step[1],), w)
            elif step[0] == "cx":
                _, a, b, p = step
                psi = apply_gate_array(psi, Gate("CX", (a, b)), w)
                hit = rng.random(shots) < p
                if hit.any():
                    which = rng.integers(0, 15, size=int(hit.sum()))
                    rows = np.flatnonzero(hit)
                    sub = _inject(psi[rows], a, b, which, w)
                    psi[rows] = sub
            else:
                psi = _relax_trajectories(psi, step[1], w, rng)
        return _sample_rows(psi, prog, rng)

    # Error events are drawn up front; trajectories branch off the ideal
    # state at their first error, so error-free prefixes are simulated once.
    hits = rng.random((shots, n_cx)) < prog.cx_probs[None, :] if n_cx else np.zeros((shots, 0), bool)
    paulis = np.where(hits, rng.integers(0, 15, size=hits.shape), -1)
    first = np.where(hits.any(axis=1), hits.argmax(axis=1), n_cx) if n_cx else np.zeros(shots, np.int64)
    ideal = _initial(w, 1)
    branch_rows = np.empty(0, dtype=np.int64)
    active = np.zeros((0, 2**w), dtype=complex)
    c = 0
    for step in prog.steps:
        if step[0] == "u":
            ideal = apply_matrix(ideal, step[2], (step[1],), w)
            if active.shape[0]:
                active = apply_matrix(active, step[2], (step[1],), w)
            continue
        _, a, b, _p = step
        g = Gate("CX", (a, b))
        ideal = apply_gate_array(ideal, g, w)
        if active.shape[0]:
            active = apply_gate_array(active, g, w)
        joining = np.flatnonzero(first == c)
        if joining.size:
            active = np.concatenate([active, np.repeat(ideal, joining.size, axis=0)])
            branch_rows = np.concatenate([branch_rows, joining])
        if branch_rows.size:
            which = paulis[branch_rows, c]
            sel = which >= 0
            if sel.any():
                idx = np.flatnonzero(sel)
                active[idx] = _inject(active[idx], a, b, which[idx], w)
        c += 1
    outcome = np.empty(shots, dtype=np.int64)
    clean = np.flatnonzero(first == n_cx)
    if clean.size:
        probs = marginal_probabilities(np.abs(ideal[0]) ** 2, prog.measured, w)
        probs = probs / probs.sum()
        outcome[clean] = rng.choice(probs.size, size=clean.size, p=probs)
    if branch_rows.size:
        outcome[branch_rows] = _sample_rows(active, prog, rng)
    return outcome


def _readout(outcome: np.ndarray, flips: np.ndarray, rng) -> np.ndarray:
    k = flips.size
    if not np.any(flips):
        return outcome
    draws = rng.random((outcome.size, k)) < flips[None, :]
    mask = np.zeros(outcome.size, dtype=np.int64)
    for i in range(k):
        mask |= draws[:, i].astype(np.int64) << (k - 1 - i)
    return outcome ^ mask


def run_shots(tc: TranspiledCircuit, model: NoiseModel, shots: int, seed: int,
              measured: tuple[int, ...] | None = None) -> ShotHistogram:
    """Sample ``shots`` noisy executions; ``measured`` lists logical qubits to read.

    Defaults to every data qubit. Keys of the histogram are bitstrings in the
    order of ``measured``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if measured is None:
        measured = tuple(range(tc.num_data))
    prog = _compile(tc, model, measured)
    n_chunks = -(-shots // CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    k = len(measured)
    totals = np.zeros(2**k, dtype=np.int64)
    for i, seq in enumerate(seqs):
        size = min(CHUNK, shots - i * CHUNK)
        rng = np.random.default_rng(seq)
        outcome = _readout(_simulate_chunk(prog, size, rng), prog.flips, rng)
        totals += np.bincount(outcome, minlength=2**k)
    counts = {format(i, f"0{k}b"): int(c) for i, c in enumerate(totals) if c}
    return ShotHistogram(counts, shots)


# --------------------------------------------------------------------------
# exact density-matrix reference


def _left(rho: np.ndarray, fn) -> np.ndarray:
    """U rho, where ``fn`` applies U to each row vector."""
    return fn(rho.T).T


def _conj_apply(rho: np.ndarray, fn) -> np.ndarray:
    """U rho U^dagger."""
    a = _left(rho, fn)
    return np.conj(_left(np.conj(a).T, fn)).T


def exact_distribution(tc: TranspiledCircuit, model: NoiseModel,
                       measured: tuple[int, ...] | None = None) -> np.ndarray:
    """Exact readout distribution over ``measured`` under ``model``."""
    if measured is None:
        measured = tuple(range(tc.num_data))
    prog = _compile(tc, model, measured)
    w = prog.width
    if w > MAX_DENSITY_QUBITS:
        raise NoiseError(f"density propagation limited to {MAX_DENSITY_QUBITS} qubits, got {w}")
    dim = 2**w
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for step in prog.steps:
        if step[0] == "u":
            q, m = step[1], step[2]
            rho = _conj_apply(rho, lambda x, m=m, q=q: apply_matrix(x, m, (q,), w))
        elif step[0] == "cx":
            _, a, b, p = step
            g = Gate("CX", (a, b))
            rho = _conj_apply(rho, lambda x, g=g: apply_gate_array(x, g, w))
            if p > 0:
                mixed = np.zeros_like(rho)
                for k in range(15):
                    mixed += _conj_apply(rho, lambda x, k=k: _apply_pauli_pair(x, a, b, k, w))
                rho = (1 - p) * rho + (p / 15) * mixed
        else:
            for q, gamma, pz in step[1]:
                if gamma > 0:
                    k0 = np.diag([1.0, math.sqrt(1 - gamma)]).astype(complex)
                    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
                    rho = _conj_apply(rho, lambda x: apply_matrix(x, k0, (q,), w)) + _conj_apply(
                        rho, lambda x: apply_matrix(x, k1, (q,), w)
                    )
                if pz > 0:
                    z = _conj_apply(rho, lambda x: apply_matrix(x, _P1[3], (q,), w))
                    rho = (1 - pz) * rho + pz * z
    diag = np.real(np.diagonal(rho)).copy()
    marg = marginal_probabilities(diag, prog.measured, w)
    k = len(prog.measured)
    for i, e in enumerate(prog.flips):
        if e:
            t = marg.reshape((2,) * k)
            t = (1 - e) * t + e * np.flip(t, axis=i)
            marg = t.reshape(-1)
    return marg


def exact_density_success(tc: TranspiledCircuit, model: NoiseModel, target_bits: str,
                          measured: tuple[int, ...] | None = None) -> float:
    dist = exact_distribution(tc, model, measured)
    if len(target_bits) != int(math.log2(dist.size)):
        raise ValueError("target bits do not match the measured register")
    return float(dist[int(target_bits, 2)])


def density_trace(tc: TranspiledCircuit, model: NoiseModel) -> float:
    return float(np.sum(exact_distribution(tc, model)))


def degraded_ratio(p_sim: float, p_theo: float) -> float:
    if p_theo <= 0:
        raise ValueError("theoretical probability must be positive")
    return p_sim / p_theo
