import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from groverlab.decompositions import phase_aligned_deviation
from groverlab.gates import BASIS_GATES, Circuit, Gate, matrix_of
from groverlab.search import build_stage_circuit, parse_plan
from groverlab.statevector import circuit_unitary
from groverlab.transpile import (
    BackendFormatError,
    TranspileError,
    asap_layers,
    builtin_backends,
    count_cx,
    depth,
    euler_zsx,
    is_legal,
    load_backend,
    lower,
    optimize_ops,
    parse_backend,
    verify_lowering,
)

LINE = """
name: line4
num_qubits: 4
cx_error: 0.01
readout_error: 0.02
t1_us: 100
t2_us: 80
edge: 0 1
edge: 1 2
edge: 2 3 0.03
"""


def test_parse_backend_defaults_and_overrides():
    b = parse_backend(LINE)
    assert b.edges == ((0, 1), (1, 2), (2, 3))
    assert b.edge_error(3, 2) == 0.03 and b.edge_error(0, 1) == 0.01
    assert b.distance(0, 3) == 3
    assert parse_backend(b.to_text()).key == b.key


@pytest.mark.parametrize("text", [
    "name: x\nnum_qubits: 2\nbogus: 1\n",
    "name: x\nnum_qubits: 2\nreadout_error: 0\nt1_us: 1\nt2_us: 1\nedge: 0 5 0.1\n",
    "name: x\nnum_qubits: 2\nreadout_error: 0\nt1_us: 1\nt2_us: 3\nedge: 0 1 0.1\n",
    "num_qubits: 2\n",
    "name: x\nnum_qubits: 2\nedge 0 1\n",
])
def test_malformed_backends(text):
    with pytest.raises(BackendFormatError):
        parse_backend(text)


def test_builtins_load_and_are_connected():
    names = [b.name for b in builtin_backends()]
    assert names == ["vigo", "athens", "guadalupe"]
    assert all(b.is_connected() for b in builtin_backends())
    assert load_backend("guadalupe").num_qubits == 16


def test_unknown_backend():
    with pytest.raises(BackendFormatError):
        load_backend("no-such-device")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_euler_form_exact(seed):
    u = unitary_group.rvs(2, random_state=seed)
    ops = euler_zsx(u, 0)
    assert all(g.kind in BASIS_GATES for g in ops)
    assert phase_aligned_deviation(circuit_unitary(Circuit(1, ops)), u) < 1e-10


def test_euler_of_identity_is_empty():
    assert euler_zsx(np.eye(2), 0) == []


def test_depth_is_longest_chain():
    ops = [Gate("X", (0,)), Gate("CX", (0, 1)), Gate("X", (2,)), Gate("CX", (1, 2))]
    assert depth(ops) == 3
    assert [len(l) for l in asap_layers(ops)] == [2, 1, 1]


def test_cx_pairs_cancel():
    ops = [Gate("CX", (0, 1)), Gate("CX", (0, 1)), Gate("X", (0,))]
    out = optimize_ops(ops)
    assert count_cx(out) == 0
    assert phase_aligned_deviation(circuit_unitary(Circuit(2, out)), circuit_unitary(Circuit(2, ops))) < 1e-10


@st.composite
def logical_circuits(draw):
    n = draw(st.integers(2, 4))
    gates = []
    for _ in range(draw(st.integers(1, 8))):
        kind = draw(st.sampled_from(["H", "T", "SX", "CX", "CZ", "SWAP", "MCZ", "MCX", "Ry"]))
        if kind in ("H", "T", "SX", "Ry"):
            params = (draw(st.floats(-3, 3)),) if kind == "Ry" else ()
            gates.append(Gate(kind, (draw(st.integers(0, n - 1)),), params))
        elif kind in ("CX", "CZ", "SWAP"):
            gates.append(Gate(kind, tuple(draw(st.permutations(range(n)))[:2])))
        else:
            k = draw(st.integers(2, n))
            gates.append(Gate(kind, tuple(draw(st.permutations(range(n)))[:k])))
    return Circuit(n, gates)


@settings(max_examples=40, deadline=None)
@given(logical_circuits(), st.sampled_from(["vigo", "athens"]))
def test_random_lowering_is_legal_and_faithful(circ, name):
    b = load_backend(name)
    tc = lower(circ, b)
    assert is_legal(tc, b)
    assert verify_lowering(circ, tc) < 1e-9


def test_line_backend_routes_long_range_cx():
    b = parse_backend(LINE)
    circ = Circuit(4, [Gate("H", (0,)), Gate("CX", (0, 3)), Gate("MCZ", (0, 1, 3))])
    tc = lower(circ, b, layout={0: 0, 1: 1, 2: 2, 3: 3})
    assert is_legal(tc, b)
    assert verify_lowering(circ, tc) < 1e-9


def test_ancilla_needed_for_four_controls(vigo):
    circ = build_stage_circuit(parse_plan("D4M4", 4), 0, "0110")
    tc = lower(circ, vigo)
    assert tc.ancillas == (4,)
    assert verify_lowering(circ, tc) < 1e-9


def test_too_wide_for_backend(vigo):
    circ = build_stage_circuit(parse_plan("D5M5", 5), 0, "00000")
    with pytest.raises(TranspileError):
        lower(circ, vigo)


def test_bad_layout(vigo):
    circ = Circuit(2, [Gate("CX", (0, 1))])
    with pytest.raises(TranspileError):
        lower(circ, vigo, layout={0: 0, 1: 0})


def test_lowering_is_deterministic(vigo):
    circ = build_stage_circuit(parse_plan("D3M3", 3), 0, "101")
    assert lower(circ, vigo).ops == lower(circ, vigo).ops


def test_local_iteration_cheaper_than_global(vigo):
    local = lower(build_stage_circuit(parse_plan("D2M4", 4), 0, "0000"), vigo)
    glob = lower(build_stage_circuit(parse_plan("D4M4", 4), 0, "0000"), vigo)
    assert local.depth < glob.depth and local.cx_count < glob.cx_count
