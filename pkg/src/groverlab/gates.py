"""Gate vocabulary and the circuit container.

Qubit indices are logical positions; qubit 0 is the most significant bit of
a basis index (see :mod:`groverlab.statevector`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# kind -> fixed arity (None means variable, at least 1)
ARITY: dict[str, int | None] = {
    "H": 1,
    "X": 1,
    "Y": 1,
    "Z": 1,
    "S": 1,
    "Sdg": 1,
    "T": 1,
    "Tdg": 1,
    "SX": 1,
    "SXdg": 1,
    "Rz": 1,
    "Ry": 1,
    "CX": 2,
    "CZ": 2,
    "SWAP": 2,
    "MCZ": None,
    "MCX": None,
}

PARAMETRIC = {"Rz", "Ry"}
BASIS_GATES = frozenset({"Rz", "X", "SX", "CX"})

_INVERSE_KIND = {
    "S": "Sdg",
    "Sdg": "S",
    "T": "Tdg",
    "Tdg": "T",
    "SX": "SXdg",
    "SXdg": "SX",
}


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ARITY:
            raise GateError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        arity = ARITY[self.kind]
        if arity is not None and len(qubits) != arity:
            raise GateError(f"{self.kind} takes {arity} qubit(s), got {len(qubits)}")
        if arity is None and len(qubits) < 1:
            raise GateError(f"{self.kind} needs at least one qubit")
        if self.kind == "MCX" and len(qubits) < 2:
            raise GateError("MCX needs at least one control")
        if len(set(qubits)) != len(qubits):
            raise GateError(f"repeated qubit in {self.kind}{qubits}")
        if any(q < 0 for q in qubits):
            raise GateError(f"negative qubit index in {self.kind}{qubits}")
        expected = 1 if self.kind in PARAMETRIC else 0
        if len(self.params) != expected:
            raise GateError(f"{self.kind} takes {expected} parameter(s)")
        if not all(math.isfinite(p) for p in self.params):
            raise GateError("gate angles must be finite")

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def inverse(self) -> Gate:
        if self.kind in PARAMETRIC:
            return Gate(self.kind, self.qubits, (-self.params[0],))
        return Gate(_INVERSE_KIND.get(self.kind, self.kind), self.qubits)

    def remap(self, mapping) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.params)

    def __str__(self) -> str:
        return format_gate(self)


def _rz(lam: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * lam), np.exp(0.5j * lam)])


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "S": np.diag([1, 1j]),
    "Sdg": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(0.25j * math.pi)]),
    "Tdg": np.diag([1, np.exp(-0.25j * math.pi)]),
    "SX": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "SXdg": 0.5 * np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]),
    "CX": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}

# Gates whose matrix is diagonal; kernels exploit this.
DIAGONAL_KINDS = frozenset({"Z", "S", "Sdg", "T", "Tdg", "Rz", "CZ", "MCZ"})


@lru_cache(maxsize=None)
def _multi_controlled(kind: str, k: int) -> np.ndarray:
    dim = 2**k
    m = np.eye(dim, dtype=complex)
    if kind == "MCZ":
        m[-1, -1] = -1
    else:
        m[-2:, -2:] = _FIXED["X"]
    m.setflags(write=False)
    return m


def matrix_of(gate: Gate) -> np.ndarray:
    """Dense unitary of ``gate`` over its own qubits, first qubit most significant.

    For MCX the last qubit is the target.
    """
    if gate.kind == "Rz":
        return _rz(gate.params[0])
    if gate.kind == "Ry":
        return _ry(gate.params[0])
    if gate.kind in ("MCZ", "MCX"):
        return _multi_controlled(gate.kind, gate.num_qubits)
    return _FIXED[gate.kind]


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``num_qubits`` wires.

    Qubits listed in ``ancillas`` are documented to start (and, for the
    decompositions in this package, end) in ``|0>``.
    """

    num_qubits: int
    gates: tuple[Gate, ...] = ()
    ancillas: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "ancillas", frozenset(self.ancillas))
        if self.num_qubits < 1:
            raise GateError("a circuit needs at least one qubit")
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise GateError(f"{g} addresses a qubit outside 0..{self.num_qubits - 1}")
        if any(a < 0 or a >= self.num_qubits for a in self.ancillas):
            raise GateError("ancilla index out of range")

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.num_qubits) if q not in self.ancillas)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def count(self, *kinds: str) -> int:
        return sum(1 for g in self.gates if g.kind in kinds)

    def inverse(self) -> Circuit:
        return Circuit(
            self.num_qubits, tuple(g.inverse() for g in reversed(self.gates)), self.ancillas
        )

    def then(self, other: Circuit | list[Gate] | tuple[Gate, ...]) -> Circuit:
        if isinstance(other, Circuit):
            width = max(self.num_qubits, other.num_qubits)
            return Circuit(width, self.gates + other.gates, self.ancillas | other.ancillas)
        return Circuit(self.num_qubits, self.gates + tuple(other), self.ancillas)

    def to_text(self) -> str:
        lines = [f"qubits {self.num_qubits}"]
        if self.ancillas:
            lines.append("ancillas " + " ".join(str(a) for a in sorted(self.ancillas)))
        lines.extend(format_gate(g) for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        num_qubits = None
        ancillas: set[int] = set()
        gates = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, *rest = line.split()
            try:
                if head == "qubits":
                    num_qubits = int(rest[0])
                elif head == "ancillas":
                    ancillas.update(int(a) for a in rest)
                else:
                    gates.append(parse_gate(line))
            except (ValueError, IndexError) as exc:
                raise GateError(f"line {lineno}: {exc}") from None
        if num_qubits is None:
            num_qubits = 1 + max((max(g.qubits) for g in gates), default=0)
        return cls(num_qubits, tuple(gates), frozenset(ancillas))


def format_gate(gate: Gate) -> str:
    parts = [gate.kind, *(str(q) for q in gate.qubits)]
    parts.extend(repr(p) for p in gate.params)
    return " ".join(parts)


def parse_gate(line: str) -> Gate:
    """Inverse of :func:`format_gate`: ``KIND q0 q1 ... [angle]``."""
    kind, *rest = line.split()
    if kind not in ARITY:
        raise GateError(f"unknown gate kind {kind!r}")
    if kind in PARAMETRIC:
        if not rest:
            raise GateError(f"{kind} needs an angle")
        *qs, angle = rest
        return Gate(kind, tuple(int(q) for q in qs), (float(angle),))
    return Gate(kind, tuple(int(q) for q in rest))
