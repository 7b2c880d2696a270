"""Dense statevector simulation.

Index convention: basis index ``i`` encodes the bitstring ``b0 b1 ... b(n-1)``
with qubit 0 as the most significant bit, so the target string ``t1 t2 ... tn``
reads left to right as qubits 0..n-1 and ``int(t, 2)`` is its index.

The kernels in this module accept amplitude arrays of shape ``(..., 2**n)``;
leading axes are treated as a batch, which is how the trajectory simulator
in :mod:`groverlab.noise` pushes thousands of shots through at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gates import DIAGONAL_KINDS, Circuit, Gate, matrix_of

MAX_QUBITS = 24
NORM_TOL = 1e-10


class StateError(ValueError):
    pass


@lru_cache(maxsize=4096)
def _bit_table(n: int) -> np.ndarray:
    """bits[q, i] = value of qubit q in basis index i."""
    idx = np.arange(2**n)
    shifts = np.arange(n - 1, -1, -1)[:, None]
    table = ((idx[None, :] >> shifts) & 1).astype(np.int8)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=4096)
def _diagonal(gate: Gate, n: int) -> np.ndarray:
    bits = _bit_table(n)
    local = np.zeros(2**n, dtype=np.int64)
    for q in gate.qubits:
        local = (local << 1) | bits[q]
    diag = np.diagonal(matrix_of(gate))[local]
    diag.setflags(write=False)
    return diag


@lru_cache(maxsize=4096)
def _permutation(gate: Gate, n: int) -> np.ndarray:
    """Source index for each output index of a classical permutation gate."""
    idx = np.arange(2**n)
    bits = _bit_table(n)
    k = gate.kind
    if k == "SWAP":
        a, b = gate.qubits
        diff = bits[a] ^ bits[b]
        mask = (1 << (n - 1 - a)) | (1 << (n - 1 - b))
        src = np.where(diff == 1, idx ^ mask, idx)
    else:
        *controls, target = gate.qubits
        fire = np.ones(2**n, dtype=bool)
        for c in controls:
            fire &= bits[c] == 1
        src = np.where(fire, idx ^ (1 << (n - 1 - target)), idx)
    src.setflags(write=False)
    return src


_PERMUTATION_KINDS = frozenset({"X", "CX", "MCX", "SWAP"})


def apply_matrix(psi: np.ndarray, matrix: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a dense ``2**k x 2**k`` matrix to ``qubits`` of a (batched) state."""
    qubits = tuple(qubits)
    k = len(qubits)
    shape = psi.shape
    if k == 1:
        q = qubits[0]
        t = psi.reshape(-1, 2, 2 ** (n - q - 1))
        out = np.einsum("ij,ajb->aib", matrix, t)
        return out.reshape(shape)
    if k > 6:
        raise StateError(f"dense kernel limited to 6 qubits, got {k}")
    t = psi.reshape((-1,) + (2,) * n)
    axes = [q + 1 for q in qubits]
    m = np.asarray(matrix).reshape((2,) * (2 * k))
    out = np.tensordot(t, m, axes=(axes, list(range(k, 2 * k))))
    out = np.moveaxis(out, list(range(out.ndim - k, out.ndim)), axes)
    return np.ascontiguousarray(out).reshape(shape)


def apply_gate_array(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Return ``gate`` applied to amplitudes ``psi`` of shape ``(..., 2**n)``."""
    if max(gate.qubits) >= n:
        raise IndexError(f"{gate} addresses a qubit outside 0..{n - 1}")
    if gate.kind in DIAGONAL_KINDS:
        return psi * _diagonal(gate, n)
    if gate.kind in _PERMUTATION_KINDS:
        return psi[..., _permutation(gate, n)]
    return apply_matrix(psi, matrix_of(gate), gate.qubits, n)


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise StateError(f"qubit count must be in 1..{MAX_QUBITS}, got {self.num_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise StateError("amplitude array does not match qubit count")

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.probabilities))

    def amplitude(self, bits: str) -> complex:
        return complex(self.amplitudes[int(bits, 2)])


def uniform_state(n: int) -> StateVector:
    if not 1 <= n <= MAX_QUBITS:
        raise StateError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")
    return StateVector(n, np.full(2**n, 2 ** (-n / 2), dtype=complex))


def basis_state(bits: str) -> StateVector:
    n = len(bits)
    if n < 1 or set(bits) - {"0", "1"}:
        raise StateError(f"not a bitstring: {bits!r}")
    amps = np.zeros(2**n, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(n, amps)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    return StateVector(state.num_qubits, apply_gate_array(state.amplitudes, gate, state.num_qubits))


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.num_qubits != state.num_qubits:
        raise StateError(
            f"circuit has {circuit.num_qubits} qubits, state has {state.num_qubits}"
        )
    psi = state.amplitudes
    for gate in circuit.gates:
        psi = apply_gate_array(psi, gate, state.num_qubits)
    return StateVector(state.num_qubits, psi)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary; column ``j`` is the image of basis state ``j``."""
    n = circuit.num_qubits
    if n > 12:
        raise StateError("unitary construction limited to 12 qubits")
    cols = np.eye(2**n, dtype=complex)  # row b is basis vector b
    for gate in circuit.gates:
        cols = apply_gate_array(cols, gate, n)
    return cols.T


def _check_subset(qubits, n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if not qubits:
        raise StateError("qubit list must be nonempty")
    if len(set(qubits)) != len(qubits):
        raise StateError(f"repeated qubit in {qubits}")
    if any(q < 0 or q >= n for q in qubits):
        raise IndexError(f"qubit index out of range in {qubits}")
    return qubits


def marginal_probabilities(probs: np.ndarray, qubits, n: int) -> np.ndarray:
    """Marginal over ``qubits`` as an array indexed by the sub-bitstring value.

    Works on batched probability arrays of shape ``(..., 2**n)``.
    """
    t = probs.reshape(probs.shape[:-1] + (2,) * n)
    lead = len(probs.shape) - 1
    keep = [lead + q for q in qubits]
    drop = tuple(a for a in range(lead, lead + n) if a not in keep)
    summed = t.sum(axis=drop) if drop else t
    # remaining axes are in increasing qubit order; reorder to match `qubits`
    order = sorted(qubits)
    perm = list(range(lead)) + [lead + order.index(q) for q in qubits]
    summed = np.transpose(summed, perm)
    return summed.reshape(probs.shape[:-1] + (2 ** len(qubits),))


def marginal_distribution(state: StateVector, qubits) -> dict[str, float]:
    qubits = _check_subset(qubits, state.num_qubits)
    marg = marginal_probabilities(state.probabilities, qubits, state.num_qubits)
    k = len(qubits)
    return {format(i, f"0{k}b"): float(p) for i, p in enumerate(marg)}


@dataclass
class MeasurementOutcome:
    bits: str
    probability: float
    collapsed: StateVector


def collapse(state: StateVector, qubits, bits: str) -> MeasurementOutcome:
    """Project ``qubits`` onto ``bits`` and renormalize."""
    n = state.num_qubits
    qubits = _check_subset(qubits, n)
    table = _bit_table(n)
    keep = np.ones(2**n, dtype=bool)
    for q, b in zip(qubits, bits):
        keep &= table[q] == int(b)
    amps = np.where(keep, state.amplitudes, 0)
    prob = float(np.sum(np.abs(amps) ** 2))
    if prob <= 0:
        raise StateError(f"outcome {bits} has zero probability")
    return MeasurementOutcome(bits, prob, StateVector(n, amps / np.sqrt(prob)))


def measure_subset(state: StateVector, qubits, rng: np.random.Generator) -> MeasurementOutcome:
    qubits = _check_subset(qubits, state.num_qubits)
    marg = marginal_probabilities(state.probabilities, qubits, state.num_qubits)
    marg = marg / marg.sum()
    outcome = int(rng.choice(len(marg), p=marg))
    return collapse(state, qubits, format(outcome, f"0{len(qubits)}b"))
