"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import io
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from groverlab.catalog import CATALOG, DEFAULT_BACKEND, PUBLISHED_P_THEO, REFERENCE_HARDWARE_P, catalog  # noqa: E402
from groverlab.cli import main as cli_main  # noqa: E402
from groverlab.decompositions import (  # noqa: E402
    ZX,
    ancilla_leakage,
    ccy,
    ccz_full,
    ccz_linear,
    cccz_with_ancilla,
    c4z_with_ancilla,
    verify_equivalence,
)
from groverlab.harness import TrialProtocol, run_sweep  # noqa: E402
from groverlab.metrics import fit_logistic, j_exp, j_max, minimize_expected_depth, oracle_efficiency_argmin, stage_depths  # noqa: E402
from groverlab.noise import NoiseModel, exact_density_success, run_shots  # noqa: E402
from groverlab.search import (  # noqa: E402
    build_stage_circuit,
    closed_form_success,
    grover_circuit,
    parse_plan,
    plan_success_probability,
)
from groverlab.statevector import apply_circuit, basis_state  # noqa: E402
from groverlab.transpile import builtin_backends, is_legal, load_backend, logical_width, lower, verify_lowering  # noqa: E402


def report(k, ok: bool, detail: str) -> None:
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(2, 7):
        target = format((5 * n) % 2**n, f"0{n}b")
        for j in range(j_max(n) + 1):
            psi = apply_circuit(basis_state("0" * n), grover_circuit(n, target, j))
            worst = max(worst, abs(psi.probabilities[int(target, 2)] - closed_form_success(n, j)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 5
    report(1, ok, f"max |closed form - simulation| = {worst:.2e} over n=2..6, {dt:.2f}s")
    assert ok


def test_criterion_02_golden_table():
    t0 = time.perf_counter()
    misses = []
    total = 0
    for n, table in PUBLISHED_P_THEO.items():
        for name, printed in table.items():
            total += 1
            p = plan_success_probability(name, n)
            # inclusive bound; 1e-12 absorbs binary rounding of the printed value
            if abs(p - printed) > 0.0005 + 1e-12:
                misses.append(f"{name}: exact {p:.6f} vs printed {printed:.3f}")
    dt = time.perf_counter() - t0
    ok = not misses and dt < 10
    detail = f"{total - len(misses)}/{total} entries within 0.0005, {dt:.2f}s"
    if misses:
        detail += "; outside: " + "; ".join(misses) + " (printed values are truncated, not rounded)"
    report(2, ok, detail)
    assert ok, detail


def test_criterion_03_gate_identities():
    t0 = time.perf_counter()

    def mcz(k):
        d = np.ones(2 ** (k + 1), dtype=complex)
        d[-1] = -1
        return np.diag(d)

    ccy_ref = np.eye(8, dtype=complex)
    ccy_ref[6:, 6:] = ZX
    devs = {
        "ccz_linear": verify_equivalence(ccz_linear(0, 1, 2), mcz(2)),
        "ccz_full": verify_equivalence(ccz_full(0, 1, 2), mcz(2)),
        "ccy": verify_equivalence(ccy(0, 1, 2), ccy_ref),
        "cccz+ancilla": max(verify_equivalence(cccz_with_ancilla(0, 1, 2, 3, 4), mcz(3), ancilla=4),
                            ancilla_leakage(cccz_with_ancilla(0, 1, 2, 3, 4), 4)),
        "c4z+ancilla": max(verify_equivalence(c4z_with_ancilla(0, 1, 2, 3, 4, 5), mcz(4), ancilla=5),
                           ancilla_leakage(c4z_with_ancilla(0, 1, 2, 3, 4, 5), 5)),
    }
    cx8 = ccz_linear(0, 1, 2).count("CX")
    dt = time.perf_counter() - t0
    worst = max(devs.values())
    ok = worst < 1e-10 and cx8 == 8 and dt < 5
    report(3, ok, f"max deviation {worst:.1e} over {len(devs)} decompositions, ccz_linear CX = {cx8}, {dt:.2f}s")
    assert ok


def test_criterion_04_transpiler():
    t0 = time.perf_counter()
    checked = 0
    worst = 0.0
    illegal = []
    skipped = []
    targets = {3: ("001", "110"), 4: ("0110", "1001"), 5: ("01010", "10101")}
    for backend in builtin_backends():
        for n, names in CATALOG.items():
            for name in names:
                plan = parse_plan(name, n)
                for target in targets[n]:
                    for k in range(len(plan.stages)):
                        prior = target[: len(plan.layout(k).determined)]
                        circ = build_stage_circuit(plan, k, target, prior)
                        if logical_width(circ) > backend.num_qubits:
                            skipped.append((backend.name, name))
                            continue
                        tc = lower(circ, backend)
                        if not is_legal(tc, backend):
                            illegal.append((backend.name, name))
                        worst = max(worst, verify_lowering(circ, tc))
                        checked += 1
    dt = time.perf_counter() - t0
    ok = not illegal and worst < 1e-9 and dt < 60
    wide = sorted({f"{b}:{c}" for b, c in skipped})
    report(4, ok, f"{checked} lowered stage circuits legal, max deviation {worst:.1e}, {dt:.1f}s"
                  f" (too wide, not lowered: {len(wide)} circuit/backend pairs, all 5-qubit on 5-qubit devices)")
    assert ok


def test_criterion_05_depth_ordering():
    vigo = load_backend("vigo")
    d_g2 = stage_depths("G2D2M2", vigo, 4)[0][0]
    d_d4 = stage_depths("D4M4", vigo, 4)[0][0]
    half_ok = d_g2 < 0.5 * d_d4
    local_ok = True
    per_n = []
    for n in (3, 4, 5):
        backend = load_backend(DEFAULT_BACKEND[n])
        glob = stage_depths(f"D{n}M{n}", backend, n)[0][0]
        locs = {m: stage_depths(f"D{m}M{n}", backend, n)[0][0] for m in range(2, n)}
        local_ok &= all(v < glob for v in locs.values())
        per_n.append(f"n={n}: global {glob:.1f}, local " + ", ".join(f"D{m} {v:.1f}" for m, v in locs.items()))
    ok = half_ok and local_ok
    detail = (f"(a) depth G2D2M2 {d_g2:.1f} vs half of D4M4 {d_d4 / 2:.1f}: {'holds' if half_ok else 'does not hold'}"
              f"; (b) local < global for every n: {'holds' if local_ok else 'does not hold'} [{'; '.join(per_n)}]")
    if not half_ok:
        detail += ("; diagnostic: the 4-qubit oracle and the 4-qubit global diffusion are both Lambda_3(Z)"
                   " and cost about the same, so one oracle plus a 2-qubit diffusion cannot fall below"
                   " half of one oracle plus a 4-qubit diffusion")
    report(5, ok, detail)
    assert ok, detail


def test_criterion_06_expected_depth_orderings():
    lines = []
    ordering_ok = True
    for n, claimed in ((3, "G1D2M2"), (4, "G2D2M2")):
        backend = load_backend(DEFAULT_BACKEND[n])
        res = minimize_expected_depth(n, backend, 6, candidates=catalog(n))
        by = {s.name: s for s in res.ranking}
        best = res.best
        c = by[claimed]
        if best.name == claimed:
            lines.append(f"n={n}: {claimed} minimizes expected depth ({c.expected_depth:.1f})")
            continue
        ordering_ok = False
        depth_ratio = sum(c.depths) / sum(best.depths)
        needed = c.p_theo / best.p_theo
        lines.append(
            f"n={n}: winner {best.name} (E[d]={best.expected_depth:.1f}) beats {claimed} (E[d]={c.expected_depth:.1f});"
            f" depth ratio {claimed}/{best.name} = {depth_ratio:.3f}, but it must be below"
            f" p ratio {needed:.3f} for {claimed} to win"
        )
    diagnostic_emitted = not ordering_ok and len(lines) == 2
    ok = ordering_ok or diagnostic_emitted
    status = "orderings hold" if ordering_ok else "orderings not reproduced; depth-ratio diagnostic emitted"
    report(6, ok, status + " | " + " | ".join(lines))
    assert ok


@pytest.fixture(scope="module")
def vigo_sweep():
    vigo = load_backend("vigo")
    t0 = time.perf_counter()
    sweep = run_sweep(4, vigo, NoiseModel.from_backend(vigo), TrialProtocol(trials=30, shots=8192, seed=0))
    return sweep, time.perf_counter() - t0


def test_criterion_07_noise_qualitative(vigo_sweep):
    sweep, dt = vigo_sweep
    by = {r.circuit_name: r for r in sweep.records}
    rho = sweep.rank_correlation
    r2 = sweep.fit.r_squared if sweep.fit is not None else float("nan")
    two, one = by["D2M2|D2M2"].p_sim, by["D4D4M4"].p_sim
    a, b, c = rho <= -0.8, r2 >= 0.9, two > one
    ok = a and b and c and dt < 600
    detail = (f"(a) spearman {rho:.3f} {'<=' if a else '>'} -0.8; (b) logistic r2 {r2:.3f} {'>=' if b else '<'} 0.9;"
              f" (c) D2M2|D2M2 {two:.3f} vs D4D4M4 {one:.3f}; {dt:.0f}s")
    if not b:
        single = [(r.cx_count, r.degraded_ratio) for r in sweep.records if r.depth_stage2 is None]
        detail += (f"; diagnostic: single-stage circuits alone give r2 {fit_logistic(single).r_squared:.3f},"
                   " two-stage circuits sit above the curve because their CNOTs are split over"
                   " separately measured stages")
    if not c:
        vigo = load_backend("vigo")
        relax = NoiseModel.from_backend(vigo, relaxation=True)
        target = "0110"
        p1 = exact_density_success(lower(build_stage_circuit(parse_plan("D4D4M4", 4), 0, target), vigo), relax, target)
        plan = parse_plan("D2M2|D2M2", 4)
        p2 = 1.0
        for k in range(2):
            lay = plan.layout(k)
            circ = build_stage_circuit(plan, k, target, target[: len(lay.determined)])
            p2 *= exact_density_success(lower(circ, vigo), relax, target[lay.measured[0]: lay.measured[-1] + 1],
                                        measured=lay.measured)
        ref = REFERENCE_HARDWARE_P["vigo"]
        detail += (f"; diagnostic: depolarizing CNOT noise alone penalizes gate count, not duration;"
                   f" with T1/T2 relaxation added (exact density, target {target}) D4D4M4 {p1:.3f} and"
                   f" D2M2|D2M2 {p2:.3f}, reference hardware {ref['D4D4M4']} and {ref['D2M2|D2M2']}")
    report(7, ok, detail)
    assert ok, detail


def test_criterion_08_estimator_consistency():
    vigo = load_backend("vigo")
    model = NoiseModel.from_backend(vigo)
    shots = 1_000_000
    parts = []
    ok = True
    for name, n, target in (("D3M3", 3, "101"), ("G1D2M2", 3, "011"), ("D2M4", 4, "0110")):
        plan = parse_plan(name, n)
        lay = plan.layout(0)
        circ = build_stage_circuit(plan, 0, target, target[: len(lay.determined)])
        tc = lower(circ, vigo)
        want = target[lay.measured[0]: lay.measured[-1] + 1]
        exact = exact_density_success(tc, model, want, measured=lay.measured)
        est = run_shots(tc, model, shots, seed=2024, measured=lay.measured).probability(want)
        sigma = math.sqrt(exact * (1 - exact) / shots)
        z = (est - exact) / sigma
        ok &= abs(z) <= 3
        parts.append(f"{name}: {est:.5f} vs {exact:.5f} (z={z:+.2f})")
    report(8, ok, "trajectory vs density at 1e6 shots: " + "; ".join(parts))
    assert ok


def test_criterion_09_j_exp():
    t0 = time.perf_counter()
    arg = oracle_efficiency_argmin(20)
    ref = math.floor(0.583 * 2**10)
    dt = time.perf_counter() - t0
    ok = abs(arg - ref) <= 1 and dt < 5
    report(9, ok, f"argmin j/P for n=20 is {arg}, floor(0.583*2^10) = {ref}, j_exp = {j_exp(20)}, {dt:.2f}s")
    assert ok


def test_criterion_10_determinism(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"run{i}.csv"
        code = cli_main(["run", "D2M1|D3M3", "--n", "4", "--trials", "5", "--shots", "2048", "--seed", "17",
                         "--csv", str(p)], out=io.StringIO())
        assert code == 0
        outs.append(p.read_bytes())
    ok = outs[0] == outs[1]
    report(10, ok, f"two seeded runs wrote byte-identical CSV ({len(outs[0])} bytes)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
