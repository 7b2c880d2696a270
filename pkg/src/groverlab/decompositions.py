"""Multi-controlled gate constructions used to lower the search circuits.

Throughout, the controlled "Y" of the constructions is the real rotation
``ZX = [[0, 1], [-1, 0]]`` (equal to ``i*Y`` in Pauli terms); the relative
phase identities below only hold exactly for that operator.
"""

from __future__ import annotations

import math

import numpy as np

from .gates import Circuit, Gate, GateError
from .statevector import circuit_unitary

ZX = np.array([[0, 1], [-1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)

QUARTER = math.pi / 4


def _distinct(*qubits: int) -> None:
    if len(set(qubits)) != len(qubits):
        raise GateError(f"qubit indices must be distinct, got {qubits}")


def _width(*qubits: int) -> int:
    return max(qubits) + 1


def controlled(op: np.ndarray, num_controls: int) -> np.ndarray:
    """Lambda_k(op): apply the 2x2 ``op`` to the last qubit iff all controls are 1."""
    dim = 2 ** (num_controls + 1)
    m = np.eye(dim, dtype=complex)
    m[-2:, -2:] = op
    return m


def ccz_linear_gates(q0: int, q1: int, q2: int) -> list[Gate]:
    """Lambda_2(Z) with 8 CNOTs, all between q0-q1 or q1-q2 (q1 in the middle)."""
    _distinct(q0, q1, q2)
    cx = lambda a, b: Gate("CX", (a, b))  # noqa: E731
    t = lambda q: Gate("T", (q,))  # noqa: E731
    tdg = lambda q: Gate("Tdg", (q,))  # noqa: E731
    return [
        tdg(q0), tdg(q1), tdg(q2),
        cx(q0, q1),
        cx(q1, q2),
        cx(q0, q1), tdg(q2),
        cx(q1, q2),
        cx(q0, q1), t(q2),
        t(q1),
        cx(q1, q2),
        cx(q0, q1), t(q2),
        cx(q1, q2),
    ]


def ccz_linear(q0: int, q1: int, q2: int) -> Circuit:
    gates = ccz_linear_gates(q0, q1, q2)
    return Circuit(_width(q0, q1, q2), gates)


def ccz_full_gates(q0: int, q1: int, q2: int) -> list[Gate]:
    """Six-CNOT Lambda_2(Z); needs all three pairs connected."""
    _distinct(q0, q1, q2)
    return [
        Gate("CX", (q1, q2)), Gate("Tdg", (q2,)),
        Gate("CX", (q0, q2)), Gate("T", (q2,)),
        Gate("CX", (q1, q2)), Gate("Tdg", (q2,)),
        Gate("CX", (q0, q2)), Gate("T", (q1,)), Gate("T", (q2,)),
        Gate("CX", (q0, q1)), Gate("T", (q0,)), Gate("Tdg", (q1,)),
        Gate("CX", (q0, q1)),
    ]


def ccz_full(q0: int, q1: int, q2: int) -> Circuit:
    return Circuit(_width(q0, q1, q2), ccz_full_gates(q0, q1, q2))


def ccy_gates(q0: int, q1: int, target: int, include_cz: bool = True) -> list[Gate]:
    """Lambda_2(ZX) from Ry(+-pi/4) rotations, three CNOTs and a CZ.

    With ``include_cz=False`` the trailing CZ(q0, target) is left out, so
    appending CZ(q0, target) to the returned sequence gives Lambda_2(ZX).
    """
    _distinct(q0, q1, target)
    g = lambda s: Gate("Ry", (target,), (s * QUARTER,))  # noqa: E731
    gates = [
        g(+1),
        Gate("CX", (q1, target)),
        g(+1),
        Gate("CX", (q0, target)),
        g(-1),
        Gate("CX", (q1, target)),
        g(-1),
    ]
    if include_cz:
        gates.append(Gate("CZ", (q0, target)))
    return gates


def ccy(q0: int, q1: int, target: int, include_cz: bool = True) -> Circuit:
    return Circuit(_width(q0, q1, target), ccy_gates(q0, q1, target, include_cz))


def cccz_with_ancilla_gates(
    c1: int, c2: int, c3: int, target: int, ancilla: int, middle: int | None = None
) -> list[Gate]:
    """Lambda_3(Z) on (c1, c2, c3, target) using one clean ancilla.

    Lambda_2(ZX) writes c1 AND c2 into the ancilla, a Lambda_2(Z) on
    (ancilla, c3, target) applies the phase, and the inverse uncomputes the
    ancilla. The two CZ(c1, ancilla) gates commute with the middle Lambda_2(Z)
    and cancel, so neither is emitted. ``middle`` picks which of
    (ancilla, c3, target) sits in the middle of the linear Lambda_2(Z);
    default c3.
    """
    _distinct(c1, c2, c3, target, ancilla)
    middle = c3 if middle is None else middle
    ends = [q for q in (ancilla, c3, target) if q != middle]
    if len(ends) != 2:
        raise GateError("middle must be one of ancilla, c3, target")
    compute = ccy_gates(c1, c2, ancilla, include_cz=False)
    uncompute = [g.inverse() for g in reversed(compute)]
    return compute + ccz_linear_gates(ends[0], middle, ends[1]) + uncompute


def cccz_with_ancilla(
    c1: int, c2: int, c3: int, target: int, ancilla: int, middle: int | None = None
) -> Circuit:
    gates = cccz_with_ancilla_gates(c1, c2, c3, target, ancilla, middle)
    return Circuit(_width(c1, c2, c3, target, ancilla), gates, frozenset({ancilla}))


def c3y_relative_phase_gates(c1: int, c2: int, c3: int, target: int) -> list[Gate]:
    """Lambda_3(ZX) up to a diagonal relative phase; 6 CNOTs, all into ``target``.

    The emitted sequence U satisfies ``P @ U = Lambda_3(ZX)`` where P applies
    -i to |1100> and +i to |1101> (see :func:`c3y_phase_correction`).
    """
    _distinct(c1, c2, c3, target)
    h = Gate("H", (target,))
    t = Gate("T", (target,))
    tdg = Gate("Tdg", (target,))
    cx = lambda c: Gate("CX", (c, target))  # noqa: E731
    return [
        h, t, cx(c3), tdg, h,
        cx(c1), t, cx(c2), tdg, cx(c1), t, cx(c2), tdg,
        h, t, cx(c3), tdg, h,
    ]


def c3y_relative_phase(c1: int, c2: int, c3: int, target: int) -> Circuit:
    return Circuit(_width(c1, c2, c3, target), c3y_relative_phase_gates(c1, c2, c3, target))


def c3y_phase_correction() -> np.ndarray:
    """Diagonal correction over (c1, c2, c3, target) completing c3y_relative_phase."""
    d = np.ones(16, dtype=complex)
    d[0b1100] = -1j
    d[0b1101] = 1j
    return np.diag(d)


def c4z_with_ancilla_gates(
    c1: int, c2: int, c3: int, c4: int, target: int, ancilla: int, middle: int | None = None
) -> list[Gate]:
    """Lambda_4(Z) on (c1..c4, target) with one clean ancilla.

    Relative-phase Lambda_3(ZX) computes the AND of c1..c3 into the ancilla;
    its diagonal phase error commutes with the middle Lambda_2(Z) and is
    undone by the inverse sequence.
    """
    _distinct(c1, c2, c3, c4, target, ancilla)
    middle = c4 if middle is None else middle
    ends = [q for q in (ancilla, c4, target) if q != middle]
    if len(ends) != 2:
        raise GateError("middle must be one of ancilla, c4, target")
    compute = c3y_relative_phase_gates(c1, c2, c3, ancilla)
    uncompute = [g.inverse() for g in reversed(compute)]
    return compute + ccz_linear_gates(ends[0], middle, ends[1]) + uncompute


def c4z_with_ancilla(
    c1: int, c2: int, c3: int, c4: int, target: int, ancilla: int, middle: int | None = None
) -> Circuit:
    gates = c4z_with_ancilla_gates(c1, c2, c3, c4, target, ancilla, middle)
    return Circuit(_width(c1, c2, c3, c4, target, ancilla), gates, frozenset({ancilla}))


def _ancilla_list(ancilla) -> tuple[int, ...]:
    if ancilla is None:
        return ()
    if isinstance(ancilla, (int, np.integer)):
        return (int(ancilla),)
    return tuple(sorted(int(a) for a in ancilla))


def _zero_block(u: np.ndarray, n: int, ancillas: tuple[int, ...]) -> tuple[np.ndarray, float]:
    idx = np.arange(2**n)
    clean = np.ones(2**n, dtype=bool)
    for a in ancillas:
        clean &= ((idx >> (n - 1 - a)) & 1) == 0
    rows = np.flatnonzero(clean)
    block = u[np.ix_(rows, rows)]
    dirty = np.flatnonzero(~clean)
    leakage = float(np.abs(u[np.ix_(dirty, rows)]).max()) if dirty.size else 0.0
    return block, leakage


def phase_aligned_deviation(u: np.ndarray, reference: np.ndarray) -> float:
    """max |u - e^{i phi} reference| with phi fixed at the largest reference entry."""
    if u.shape != reference.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {reference.shape}")
    pivot = np.unravel_index(np.argmax(np.abs(reference)), reference.shape)
    if abs(u[pivot]) < 1e-15:
        return float(np.abs(u - reference).max() + 1.0)
    phase = u[pivot] / abs(u[pivot]) * abs(reference[pivot]) / reference[pivot]
    return float(np.abs(u - phase * reference).max())


def verify_equivalence(circuit: Circuit, reference: np.ndarray, ancilla=None) -> float:
    """Max elementwise deviation from ``reference`` up to a global phase.

    With ``ancilla`` given (an index or iterable of indices), only the block
    with every ancilla in |0> at input and output is compared; the reference
    then lives on the remaining qubits in increasing index order. Leakage
    out of the ancilla-|0> subspace is reported by :func:`ancilla_leakage`.
    """
    if circuit.num_qubits > 7:
        raise ValueError("verification limited to 7 qubits")
    u = circuit_unitary(circuit)
    ancillas = _ancilla_list(ancilla)
    if ancillas:
        u, _ = _zero_block(u, circuit.num_qubits, ancillas)
    reference = np.asarray(reference, dtype=complex)
    if reference.shape != u.shape:
        raise ValueError(f"dimension mismatch: circuit block {u.shape}, reference {reference.shape}")
    return phase_aligned_deviation(u, reference)


def ancilla_leakage(circuit: Circuit, ancilla) -> float:
    """Largest amplitude leaving the ancilla-|0> subspace over all clean inputs."""
    u = circuit_unitary(circuit)
    _, leak = _zero_block(u, circuit.num_qubits, _ancilla_list(ancilla))
    return leak


def embed(op: np.ndarray, qubits, n: int) -> np.ndarray:
    """Lift a matrix on ``qubits`` (first listed = most significant) to n qubits."""
    from .statevector import apply_matrix

    cols = apply_matrix(np.eye(2**n, dtype=complex), np.asarray(op, dtype=complex), qubits, n)
    return cols.T
