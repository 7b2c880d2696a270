"""Lowering to the hardware basis {Rz, X, SX, CX} under a coupling map.

Pipeline, in one deterministic pass:

1. Multi-controlled Z gates are expanded with the constructions in
   :mod:`groverlab.decompositions`; for each gate the role assignment
   (which qubit is a control, the target, the middle of the linear
   Lambda_2(Z)) is chosen to minimize routing distance under the current
   placement. Gates on four or five qubits borrow one clean ancilla.
2. Two-qubit gates between distant physical qubits get SWAPs (three CNOTs
   each) along a shortest path; the logical-to-physical map follows them.
3. Runs of single-qubit gates are fused and re-expressed as
   Rz SX Rz SX Rz (or a shorter form); back-to-back identical CNOTs cancel.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import decompositions as dec
from .gates import BASIS_GATES, Circuit, Gate, matrix_of
from .statevector import apply_gate_array

EULER_TOL = 1e-12
BUILTIN_NAMES = ("vigo", "athens", "guadalupe")


class TranspileError(ValueError):
    pass


class BackendFormatError(ValueError):
    pass


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(eq=False)
class Backend:
    name: str
    num_qubits: int
    edges: tuple[tuple[int, int], ...]
    cx_error: dict[tuple[int, int], float]
    readout_error: tuple[float, ...]
    t1_us: tuple[float, ...]
    t2_us: tuple[float, ...]
    gate_durations: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.edges = tuple(sorted({_edge(a, b) for a, b in self.edges}))
        for a, b in self.edges:
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise BackendFormatError(f"edge {a}-{b} references an invalid qubit")
        self.cx_error = {_edge(*e): float(p) for e, p in self.cx_error.items()}
        if set(self.cx_error) != set(self.edges):
            raise BackendFormatError("cx_error must cover exactly the edge set")
        for name in ("readout_error", "t1_us", "t2_us"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != self.num_qubits:
                raise BackendFormatError(f"{name} needs one value per qubit")
            setattr(self, name, vals)
        probs = list(self.cx_error.values()) + list(self.readout_error)
        if any(not 0 <= p <= 1 for p in probs):
            raise BackendFormatError("error probabilities must lie in [0, 1]")
        for t1, t2 in zip(self.t1_us, self.t2_us):
            if t1 <= 0 or t2 <= 0 or t2 > 2 * t1:
                raise BackendFormatError("need 0 < t2 <= 2*t1")
        _register(self)

    @property
    def key(self) -> tuple:
        """Hashable fingerprint used for caching layouts and paths."""
        return (
            self.name,
            self.num_qubits,
            self.edges,
            tuple(sorted(self.cx_error.items())),
        )

    def neighbors(self, q: int) -> tuple[int, ...]:
        return _adjacency(self.key)[q]

    def adjacent(self, a: int, b: int) -> bool:
        return _edge(a, b) in self.cx_error

    def distance(self, a: int, b: int) -> float:
        return _distances(self.key)[a][b]

    def edge_error(self, a: int, b: int) -> float:
        return self.cx_error[_edge(a, b)]

    def mean_cx_error(self) -> float:
        return float(np.mean(list(self.cx_error.values()))) if self.cx_error else 0.0

    def is_connected(self) -> bool:
        return all(math.isfinite(d) for d in _distances(self.key)[0])

    def to_text(self) -> str:
        lines = [
            f"name: {self.name}",
            f"num_qubits: {self.num_qubits}",
        ]
        for k in sorted(self.gate_durations):
            lines.append(f"duration.{k}: {self.gate_durations[k]!r}")
        for q in range(self.num_qubits):
            lines.append(f"readout_error.{q}: {self.readout_error[q]!r}")
            lines.append(f"t1_us.{q}: {self.t1_us[q]!r}")
            lines.append(f"t2_us.{q}: {self.t2_us[q]!r}")
        for a, b in self.edges:
            lines.append(f"edge: {a} {b} {self.cx_error[(a, b)]!r}")
        return "\n".join(lines) + "\n"


_BACKEND_CACHE: dict[tuple, dict] = {}


def _register(backend: Backend) -> None:
    key = backend.key
    if key in _BACKEND_CACHE:
        return
    adj: dict[int, list[int]] = {q: [] for q in range(backend.num_qubits)}
    for a, b in backend.edges:
        adj[a].append(b)
        adj[b].append(a)
    _BACKEND_CACHE[key] = {
        "adj": {q: tuple(sorted(v)) for q, v in adj.items()},
        "errors": dict(backend.cx_error),
        "n": backend.num_qubits,
    }


def _adjacency(key):
    return _BACKEND_CACHE[key]["adj"]


@lru_cache(maxsize=64)
def _distances(key) -> tuple[tuple[float, ...], ...]:
    adj = _adjacency(key)
    n = _BACKEND_CACHE[key]["n"]
    rows = []
    for s in range(n):
        dist = [math.inf] * n
        dist[s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if dist[v] == math.inf:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        rows.append(tuple(dist))
    return tuple(rows)


@lru_cache(maxsize=4096)
def _shortest_path(key, a: int, b: int) -> tuple[int, ...]:
    """Fewest hops, then least summed CX error, then lexicographic."""
    adj = _adjacency(key)
    errors = _BACKEND_CACHE[key]["errors"]
    heap = [(0, 0.0, (a,))]
    seen = set()
    while heap:
        hops, err, path = heapq.heappop(heap)
        u = path[-1]
        if u == b:
            return path
        if u in seen:
            continue
        seen.add(u)
        for v in adj[u]:
            if v not in seen:
                heapq.heappush(heap, (hops + 1, err + errors[_edge(u, v)], path + (v,)))
    raise TranspileError(f"qubits {a} and {b} are not connected")


_KEYS = {"name", "num_qubits", "cx_error", "readout_error", "t1_us", "t2_us", "edge"}
_PER_QUBIT = {"readout_error", "t1_us", "t2_us"}


def parse_backend(text: str) -> Backend:
    """Read the ``key: value`` backend format; unknown keys are rejected.

    Scalar ``cx_error``/``readout_error``/``t1_us``/``t2_us`` set defaults;
    ``readout_error.<q>`` style keys override one qubit and a third number
    on an ``edge`` line overrides that edge's CX error.
    """
    scalars: dict[str, str] = {}
    per_qubit: dict[str, dict[int, float]] = {k: {} for k in _PER_QUBIT}
    durations: dict[str, float] = {}
    edges: list[tuple[int, int, float | None]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise BackendFormatError(f"line {lineno}: expected 'key: value'")
        key, value = (s.strip() for s in line.split(":", 1))
        base, _, sub = key.partition(".")
        try:
            if key == "edge":
                parts = value.split()
                if len(parts) not in (2, 3):
                    raise BackendFormatError(f"line {lineno}: edge needs 2 qubits and an optional error")
                err = float(parts[2]) if len(parts) == 3 else None
                edges.append((int(parts[0]), int(parts[1]), err))
            elif base == "duration" and sub:
                durations[sub.lower()] = float(value)
            elif base in _PER_QUBIT and sub:
                per_qubit[base][int(sub)] = float(value)
            elif key in _KEYS and not sub:
                scalars[key] = value
            else:
                raise BackendFormatError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, BackendFormatError):
                raise
            raise BackendFormatError(f"line {lineno}: {exc}") from None
    for required in ("name", "num_qubits"):
        if required not in scalars:
            raise BackendFormatError(f"missing {required!r}")
    n = int(scalars["num_qubits"])

    def column(name: str) -> tuple[float, ...]:
        default = scalars.get(name)
        vals = []
        for q in range(n):
            if q in per_qubit[name]:
                vals.append(per_qubit[name][q])
            elif default is not None:
                vals.append(float(default))
            else:
                raise BackendFormatError(f"no {name} for qubit {q}")
        return tuple(vals)

    default_cx = scalars.get("cx_error")
    cx = {}
    for a, b, err in edges:
        if err is None:
            if default_cx is None:
                raise BackendFormatError(f"edge {a}-{b} has no cx_error")
            err = float(default_cx)
        cx[_edge(a, b)] = err
    return Backend(
        name=scalars["name"],
        num_qubits=n,
        edges=tuple((a, b) for a, b, _ in edges),
        cx_error=cx,
        readout_error=column("readout_error"),
        t1_us=column("t1_us"),
        t2_us=column("t2_us"),
        gate_durations=durations,
    )


def load_backend(source: str | Path) -> Backend:
    """Builtin name (``vigo``, ``athens``, ``guadalupe``) or path to a backend file."""
    if isinstance(source, str) and source in BUILTIN_NAMES:
        text = resources.files("groverlab.backends").joinpath(f"{source}.backend").read_text()
    else:
        path = Path(source)
        if not path.exists():
            raise BackendFormatError(f"no builtin backend or file named {source!r}")
        text = path.read_text()
    return parse_backend(text)


def builtin_backends() -> list[Backend]:
    return [load_backend(name) for name in BUILTIN_NAMES]


# --------------------------------------------------------------------------
# transpiled circuits


@dataclass
class TranspiledCircuit:
    ops: tuple[Gate, ...]
    num_physical: int
    layout: dict[int, int]
    final_layout: dict[int, int]
    num_data: int
    ancillas: tuple[int, ...] = ()
    backend: str = ""
    depth: int = 0
    cx_count: int = 0

    @property
    def physical_qubits(self) -> tuple[int, ...]:
        used = {q for g in self.ops for q in g.qubits} | set(self.layout.values())
        return tuple(sorted(used))


def depth(ops) -> int:
    """ASAP layer count: each gate starts after every earlier gate on its qubits."""
    if isinstance(ops, TranspiledCircuit):
        ops = ops.ops
    level: dict[int, int] = {}
    best = 0
    for g in ops:
        lv = 1 + max((level.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            level[q] = lv
        best = max(best, lv)
    return best


def asap_layers(ops) -> list[list[Gate]]:
    level: dict[int, int] = {}
    layers: list[list[Gate]] = []
    for g in ops:
        lv = max((level.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            level[q] = lv + 1
        if lv == len(layers):
            layers.append([])
        layers[lv].append(g)
    return layers


def count_cx(ops) -> int:
    if isinstance(ops, TranspiledCircuit):
        ops = ops.ops
    return sum(1 for g in ops if g.kind == "CX")


# --------------------------------------------------------------------------
# single-qubit re-expression


def _wrap(angle: float) -> float:
    a = math.remainder(angle, 2 * math.pi)
    return 0.0 if abs(a) < EULER_TOL else a


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with u ~ Rz(phi) Ry(theta) Rz(lam) up to global phase."""
    v = u / np.sqrt(np.linalg.det(u))
    theta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    plus = 2 * np.angle(v[1, 1]) if abs(v[1, 1]) > 1e-12 else 0.0
    minus = 2 * np.angle(v[1, 0]) if abs(v[1, 0]) > 1e-12 else 0.0
    phi = (plus + minus) / 2
    lam = (plus - minus) / 2
    return float(theta), float(phi), float(lam)


def euler_zsx(u: np.ndarray, qubit: int) -> list[Gate]:
    """Basis gates (time order) equal to ``u`` up to global phase."""
    theta, phi, lam = zyz_angles(u)
    theta = _wrap(theta)

    def rz(a):
        a = _wrap(a)
        return [Gate("Rz", (qubit,), (a,))] if a else []

    if abs(theta) < EULER_TOL:
        return rz(phi + lam)
    if abs(abs(theta) - math.pi / 2) < 1e-12 and theta > 0:
        return rz(lam - math.pi / 2) + [Gate("SX", (qubit,))] + rz(phi + math.pi / 2)
    if abs(abs(theta) - math.pi) < 1e-12:
        return rz(lam + math.pi) + [Gate("X", (qubit,))] + rz(phi)
    return (
        rz(lam)
        + [Gate("SX", (qubit,))]
        + rz(theta + math.pi)
        + [Gate("SX", (qubit,))]
        + rz(phi + math.pi)
    )


def _fuse(ops: list[Gate]) -> list[Gate]:
    pending: dict[int, np.ndarray] = {}
    out: list[Gate] = []

    def flush(q):
        m = pending.pop(q, None)
        if m is not None:
            out.extend(euler_zsx(m, q))

    for g in ops:
        if g.num_qubits == 1:
            q = g.qubits[0]
            pending[q] = matrix_of(g) @ pending.get(q, np.eye(2, dtype=complex))
        else:
            for q in g.qubits:
                flush(q)
            out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def _cancel_cx(ops: list[Gate]) -> tuple[list[Gate], bool]:
    keep = [True] * len(ops)
    last: dict[int, int] = {}
    changed = False
    for i, g in enumerate(ops):
        if g.kind == "CX":
            a, b = g.qubits
            j = last.get(a)
            if j is not None and last.get(b) == j and ops[j] == g and keep[j]:
                keep[i] = keep[j] = False
                changed = True
                del last[a], last[b]
                continue
        for q in g.qubits:
            last[q] = i
    return [g for g, k in zip(ops, keep) if k], changed


def optimize_ops(ops: list[Gate]) -> list[Gate]:
    ops = _fuse(ops)
    while True:
        ops, changed = _cancel_cx(ops)
        if not changed:
            return ops
        ops = _fuse(ops)


# --------------------------------------------------------------------------
# role selection and routing


def _templates(k: int):
    """Yield (roles, middle_role, edges) for a k-qubit MCZ lowering.

    Roles index the gate's qubits (0..k-1) plus ``k`` for the ancilla.
    ``edges`` are the pairs that must be adjacent for a SWAP-free lowering.
    """
    anc = k
    if k == 2:
        yield (0, 1), None, ((0, 1),)
        return
    if k == 3:
        for mid in range(3):
            a, b = [q for q in range(3) if q != mid]
            yield (a, mid, b), None, ((a, mid), (mid, b))
        yield (0, 1, 2), "full", ((0, 1), (1, 2), (0, 2))
        return
    for perm in itertools.permutations(range(k)):
        *controls, last_ctrl, target = perm
        if list(controls) != sorted(controls):
            continue
        for middle in (anc, last_ctrl, target):
            ends = [q for q in (anc, last_ctrl, target) if q != middle]
            edges = tuple((anc, c) for c in controls) + ((ends[0], middle), (middle, ends[1]))
            yield perm, middle, edges


@lru_cache(maxsize=None)
def _template_list(k: int):
    return tuple(_templates(k))


def _role_cost(edges, positions, key) -> tuple[float, float]:
    dist = _distances(key)
    errors = _BACKEND_CACHE[key]["errors"]
    hops = 0.0
    err = 0.0
    for u, v in edges:
        a, b = positions[u], positions[v]
        d = dist[a][b]
        hops += d - 1
        err += errors.get(_edge(a, b), 0.0)
    return hops, err


@lru_cache(maxsize=200_000)
def _best_template(k: int, positions: tuple[int, ...], key) -> tuple:
    """Cheapest role assignment for an MCZ whose qubits (and ancilla) sit at ``positions``."""
    best = None
    for roles, middle, edges in _template_list(k):
        cost = _role_cost(edges, positions, key)
        if k == 3 and middle == "full" and cost[0] > 0:
            continue
        cand = (cost, roles, middle)
        if best is None or cand[0] < best[0]:
            best = cand
    return best


class _Router:
    def __init__(self, backend: Backend, layout: dict[int, int]):
        self.backend = backend
        self.key = backend.key
        self.l2p = dict(layout)
        self.p2l = {p: l for l, p in layout.items()}
        self.ops: list[Gate] = []

    def one(self, gate: Gate) -> None:
        self.ops.append(Gate(gate.kind, (self.l2p[gate.qubits[0]],), gate.params))

    def _swap(self, p: int, q: int) -> None:
        self.ops += [Gate("CX", (p, q)), Gate("CX", (q, p)), Gate("CX", (p, q))]
        lp, lq = self.p2l.get(p), self.p2l.get(q)
        if lp is not None:
            self.l2p[lp] = q
        if lq is not None:
            self.l2p[lq] = p
        self.p2l[p], self.p2l[q] = lq, lp
        if self.p2l[p] is None:
            del self.p2l[p]
        if self.p2l[q] is None:
            del self.p2l[q]

    def cx(self, control: int, target: int) -> None:
        pc, pt = self.l2p[control], self.l2p[target]
        if not self.backend.adjacent(pc, pt):
            path = _shortest_path(self.key, pc, pt)
            for a, b in zip(path[:-2], path[1:-1]):
                self._swap(a, b)
            pc, pt = self.l2p[control], self.l2p[target]
        self.ops.append(Gate("CX", (pc, pt)))

    def emit(self, gate: Gate) -> None:
        if gate.num_qubits == 1:
            self.one(gate)
        elif gate.kind == "CX":
            self.cx(*gate.qubits)
        elif gate.kind == "CZ":
            a, b = gate.qubits
            self.one(Gate("H", (b,)))
            self.cx(a, b)
            self.one(Gate("H", (b,)))
        elif gate.kind == "SWAP":
            a, b = gate.qubits
            self.cx(a, b)
            self.cx(b, a)
            self.cx(a, b)
        else:
            raise TranspileError(f"unexpected gate {gate} during routing")


MAX_PLACEMENT_SWAPS = 4


def _placement_swaps(k: int, positions: tuple[int, ...], key) -> tuple | None:
    """Fewest SWAPs after which some template for this MCZ needs no routing.

    Breadth-first over swaps on edges touching the gate's qubits; among the
    shallowest solutions the one with least summed CX error (swaps plus
    template) wins, then the lexicographically smallest swap sequence.
    Returns None when nothing within the search bound works.
    """
    if _best_template(k, positions, key)[0][0] == 0:
        return ()
    adj = _adjacency(key)
    errors = _BACKEND_CACHE[key]["errors"]
    frontier = {positions: ()}
    seen = {positions}
    for _ in range(MAX_PLACEMENT_SWAPS):
        nxt = {}
        for pos in sorted(frontier):
            seq = frontier[pos]
            for a, b in sorted({_edge(p, v) for p in pos for v in adj[p]}):
                new = tuple(b if p == a else a if p == b else p for p in pos)
                if new not in seen:
                    seen.add(new)
                    nxt[new] = seq + ((a, b),)
        done = []
        for pos, seq in nxt.items():
            (hops, err), _, _ = _best_template(k, pos, key)
            if hops == 0:
                done.append((err + 3 * sum(errors[e] for e in seq), seq))
        if done:
            return min(done)[1]
        frontier = nxt
    return None


def _expand_mcz(qubits: tuple[int, ...], ancilla: int | None, router: _Router) -> list[Gate]:
    k = len(qubits)
    if k == 1:
        return [Gate("Z", qubits)]
    if k == 2:
        return [Gate("CZ", qubits)]
    if k > 5:
        raise TranspileError(f"no lowering for a {k}-qubit controlled phase")
    logical = tuple(qubits) + ((ancilla,) if k >= 4 else ())
    positions = tuple(router.l2p[q] for q in logical)
    swaps = _placement_swaps(k, positions, router.key)
    for a, b in swaps or ():
        router._swap(a, b)
    positions = tuple(router.l2p[q] for q in logical)
    _, roles, middle = _best_template(k, positions, router.key)
    named = [logical[r] for r in roles]
    if k == 3:
        if middle == "full":
            return dec.ccz_full_gates(*named)
        return dec.ccz_linear_gates(*named)
    mid = logical[middle]
    if k == 4:
        c1, c2, c3, t = named
        return dec.cccz_with_ancilla_gates(c1, c2, c3, t, ancilla, middle=mid)
    c1, c2, c3, c4, t = named
    return dec.c4z_with_ancilla_gates(c1, c2, c3, c4, t, ancilla, middle=mid)


def _normalize(circuit: Circuit) -> list[Gate]:
    """Rewrite MCX as H-conjugated MCZ so only MCZ needs expansion."""
    out = []
    for g in circuit.gates:
        if g.kind == "MCX":
            *_, t = g.qubits
            h = Gate("H", (t,))
            if len(g.qubits) == 2:
                out.append(Gate("CX", g.qubits))
            else:
                out += [h, Gate("MCZ", g.qubits), h]
        elif g.kind == "MCZ" and len(g.qubits) <= 2:
            out.append(Gate("Z" if len(g.qubits) == 1 else "CZ", g.qubits))
        else:
            out.append(g)
    return out


def needs_ancilla(circuit: Circuit) -> bool:
    return any(g.kind in ("MCZ", "MCX") and len(g.qubits) >= 4 for g in circuit.gates)


def logical_width(circuit: Circuit) -> int:
    return circuit.num_qubits + (1 if needs_ancilla(circuit) else 0)


# --------------------------------------------------------------------------
# layout selection


def _interaction_profile(circuit: Circuit) -> tuple:
    """Multi-qubit gate structure with multiplicities; targets only change X gates."""
    counts: dict[tuple[str, tuple[int, ...]], int] = {}
    for g in _normalize(circuit):
        if g.num_qubits > 1:
            key = ("MCZ" if g.kind in ("MCZ", "CZ") else g.kind, g.qubits)
            if key[0] == "MCZ":
                key = ("MCZ", tuple(sorted(g.qubits)))
            counts[key] = counts.get(key, 0) + 1
    return tuple(sorted(counts.items()))


def _connected_subsets(backend: Backend, size: int) -> list[tuple[int, ...]]:
    adj = _adjacency(backend.key)
    found: set[frozenset[int]] = set()
    frontier = {frozenset([q]) for q in range(backend.num_qubits)}
    for _ in range(size - 1):
        nxt = set()
        for s in frontier:
            for u in s:
                for v in adj[u]:
                    if v not in s:
                        nxt.add(s | {v})
        frontier = nxt
    found = frontier
    return sorted(tuple(sorted(s)) for s in found)


def _layout_cost(profile, mapping: tuple[int, ...], ancilla: int | None, key) -> tuple[float, float]:
    hops = 0.0
    err = 0.0
    errors = _BACKEND_CACHE[key]["errors"]
    dist = _distances(key)
    for (kind, qubits), mult in profile:
        if kind == "MCZ":
            k = len(qubits)
            logical = qubits + ((ancilla,) if k >= 4 else ())
            positions = tuple(mapping[q] for q in logical)
            (h, e), _, _ = _best_template(k, positions, key)
        else:
            a, b = mapping[qubits[0]], mapping[qubits[1]]
            h = dist[a][b] - 1
            e = errors.get(_edge(a, b), 0.0)
        hops += mult * h
        err += mult * e
    return hops, err


_LAYOUT_CACHE: dict[tuple, dict[int, int]] = {}
LAYOUT_FINALISTS = 8


def _skeleton(circuit: Circuit) -> Circuit:
    """Multi-qubit gates only; target-dependent X and H layers drop out."""
    return Circuit(circuit.num_qubits, [g for g in _normalize(circuit) if g.num_qubits > 1])


def choose_layout(circuit: Circuit, backend: Backend) -> dict[int, int]:
    """Logical (data + ancilla) to physical placement.

    Connected physical subsets of the needed size (the lowest-error ones
    first) are searched over all placements, scored by estimated SWAP hops
    and the CX error on the edges the lowering would use. The best few are
    then lowered for real (multi-qubit skeleton only) and ranked by
    (CNOT count, summed CNOT error, placement), so the choice is
    deterministic and independent of single-qubit gates.
    """
    _register(backend)
    width = logical_width(circuit)
    if width > backend.num_qubits:
        raise TranspileError(
            f"circuit needs {width} qubits (with ancilla), {backend.name} has {backend.num_qubits}"
        )
    if not backend.is_connected():
        raise TranspileError(f"{backend.name} coupling graph is disconnected")
    profile = _interaction_profile(circuit)
    skeleton = _skeleton(circuit)
    cache_key = (backend.key, width, skeleton.gates)
    if cache_key in _LAYOUT_CACHE:
        return dict(_LAYOUT_CACHE[cache_key])
    ancilla = circuit.num_qubits if width > circuit.num_qubits else None
    subsets = _connected_subsets(backend, width)
    if not subsets:
        raise TranspileError(f"no connected {width}-qubit subgraph on {backend.name}")

    def internal_error(s):
        return sum(backend.cx_error.get(_edge(a, b), 0.0) for a, b in itertools.combinations(s, 2))

    subsets.sort(key=lambda s: (internal_error(s), s))
    ranked = []
    for subset in subsets[:24]:
        for perm in itertools.permutations(subset):
            ranked.append((_layout_cost(profile, perm, ancilla, backend.key), perm))
    ranked.sort()
    best = None
    for _, perm in ranked[:LAYOUT_FINALISTS]:
        mapping = {q: p for q, p in enumerate(perm)}
        ops = _route(skeleton, backend, mapping, ancilla)[0]
        err = sum(backend.edge_error(*g.qubits) for g in ops if g.kind == "CX")
        cand = (count_cx(ops), round(err, 12), perm)
        if best is None or cand < best:
            best = cand
    mapping = {q: p for q, p in enumerate(best[2])}
    _LAYOUT_CACHE[cache_key] = dict(mapping)
    return mapping


def _route(circuit: Circuit, backend: Backend, layout: dict[int, int], ancilla):
    router = _Router(backend, layout)
    for g in _normalize(circuit):
        if g.kind == "MCZ":
            for sub in _expand_mcz(g.qubits, ancilla, router):
                router.emit(sub)
        else:
            router.emit(g)
    return optimize_ops(router.ops), router.l2p


def lower(circuit: Circuit, backend: Backend, layout: dict[int, int] | None = None,
          seed: int = 0) -> TranspiledCircuit:
    """Lower ``circuit`` to basis gates on ``backend``.

    The procedure is deterministic; ``seed`` is accepted for interface
    symmetry with the stochastic simulators and does not change the result.
    """
    _register(backend)
    width = logical_width(circuit)
    if width > backend.num_qubits:
        raise TranspileError(
            f"circuit needs {width} qubits (with ancilla), {backend.name} has {backend.num_qubits}"
        )
    if layout is None:
        layout = choose_layout(circuit, backend)
    layout = {int(k): int(v) for k, v in layout.items()}
    if sorted(layout) != list(range(width)):
        raise TranspileError(f"layout must place logical qubits 0..{width - 1}")
    if len(set(layout.values())) != width or any(
        not 0 <= p < backend.num_qubits for p in layout.values()
    ):
        raise TranspileError("layout must be injective onto backend qubits")
    ancilla = circuit.num_qubits if width > circuit.num_qubits else None
    ops, final = _route(circuit, backend, layout, ancilla)
    return TranspiledCircuit(
        ops=tuple(ops),
        num_physical=backend.num_qubits,
        layout=dict(layout),
        final_layout=dict(final),
        num_data=circuit.num_qubits,
        ancillas=(ancilla,) if ancilla is not None else (),
        backend=backend.name,
        depth=depth(ops),
        cx_count=count_cx(ops),
    )


def is_legal(tc: TranspiledCircuit, backend: Backend) -> bool:
    for g in tc.ops:
        if g.kind not in BASIS_GATES:
            return False
        if g.num_qubits == 2 and not backend.adjacent(*g.qubits):
            return False
    return True


def compact_ops(tc: TranspiledCircuit) -> tuple[list[Gate], dict[int, int]]:
    """Ops relabelled onto 0..w-1 over the physical qubits actually used."""
    phys = tc.physical_qubits
    index = {p: i for i, p in enumerate(phys)}
    return [g.remap(index) for g in tc.ops], index


def lowered_isometry(tc: TranspiledCircuit) -> tuple[np.ndarray, float]:
    """Logical data-qubit matrix realized by ``tc`` and the worst leakage.

    Inputs place the data bits at their initial physical positions with every
    other used qubit in |0>; outputs are read at the final positions with the
    rest required back in |0>.
    """
    ops, index = compact_ops(tc)
    w = len(index)
    if w > 14:
        raise TranspileError("too many physical qubits to build the isometry")
    n = tc.num_data
    start = [index[tc.layout[q]] for q in range(n)]
    end = [index[tc.final_layout[q]] for q in range(n)]
    xs = np.arange(2**n)
    in_idx = np.zeros(2**n, dtype=np.int64)
    out_idx = np.zeros(2**n, dtype=np.int64)
    for q in range(n):
        bit = (xs >> (n - 1 - q)) & 1
        in_idx |= bit << (w - 1 - start[q])
        out_idx |= bit << (w - 1 - end[q])
    psi = np.zeros((2**n, 2**w), dtype=complex)
    psi[xs, in_idx] = 1.0
    for g in ops:
        psi = apply_gate_array(psi, g, w)
    block = psi[:, out_idx]  # block[x, y] = <y|U|x>
    psi[:, out_idx] = 0.0
    leak = float(np.max(np.sum(np.abs(psi) ** 2, axis=1)))
    return block.T, leak


def verify_lowering(circuit: Circuit, tc: TranspiledCircuit) -> float:
    """Deviation between ``tc`` and ``circuit`` up to global phase, leakage included."""
    from .statevector import circuit_unitary

    target = circuit_unitary(circuit)
    got, leak = lowered_isometry(tc)
    return max(dec.phase_aligned_deviation(got, target), math.sqrt(leak))
