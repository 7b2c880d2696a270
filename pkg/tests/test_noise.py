import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groverlab.gates import Circuit, Gate
from groverlab.noise import (
    NoiseError,
    NoiseModel,
    ShotHistogram,
    degraded_ratio,
    density_trace,
    exact_density_success,
    exact_distribution,
    parse_noise,
    run_shots,
)
from groverlab.search import build_stage_circuit, parse_plan
from groverlab.statevector import apply_circuit, basis_state, marginal_probabilities
from groverlab.transpile import lower


def within(p_hat, p, shots, k=4.0):
    return abs(p_hat - p) <= k * math.sqrt(max(p * (1 - p), 1e-12) / shots) + 1e-12


def test_single_cx_depolarizing_analytic(vigo):
    # 3 of the 15 two-qubit Paulis (IZ, ZI, ZZ) leave |00> readable as 00
    tc = lower(Circuit(2, [Gate("CX", (0, 1))]), vigo, layout={0: 0, 1: 1})
    p = 0.3
    model = NoiseModel(cx_depolarizing={(0, 1): p})
    want = 1 - p + 3 * p / 15
    assert exact_density_success(tc, model, "00") == pytest.approx(want, abs=1e-12)
    hist = run_shots(tc, model, 20000, seed=1)
    assert within(hist.probability("00"), want, 20000)


def test_readout_flip_analytic(vigo):
    tc = lower(Circuit(2, [Gate("X", (0,))]), vigo, layout={0: 0, 1: 1})
    model = NoiseModel(readout_flip={0: 0.1, 1: 0.2})
    dist = exact_distribution(tc, model)
    assert dist[0b10] == pytest.approx(0.9 * 0.8)
    assert dist[0b01] == pytest.approx(0.1 * 0.2)


def test_noiseless_sampling_matches_ideal(vigo):
    plan = parse_plan("D3M3", 3)
    circ = build_stage_circuit(plan, 0, "011")
    ideal = apply_circuit(basis_state("000"), circ).probabilities
    tc = lower(circ, vigo)
    hist = run_shots(tc, NoiseModel.noiseless(), 40000, seed=3)
    for k in range(8):
        assert within(hist.probability(format(k, "03b")), ideal[k], 40000)
    assert np.allclose(exact_distribution(tc, NoiseModel.noiseless()), ideal, atol=1e-12)


def test_measured_order_and_subset(vigo):
    circ = Circuit(3, [Gate("X", (0,))])
    tc = lower(circ, vigo)
    hist = run_shots(tc, NoiseModel.noiseless(), 100, seed=0, measured=(2, 0))
    assert hist.counts == {"01": 100}


def test_seeded_runs_are_identical(vigo):
    tc = lower(build_stage_circuit(parse_plan("D2M3", 3), 0, "110"), vigo)
    model = NoiseModel.from_backend(vigo)
    a = run_shots(tc, model, 9000, seed=42)
    b = run_shots(tc, model, 9000, seed=42)
    c = run_shots(tc, model, 9000, seed=43)
    assert a == b and a != c


def test_trajectories_match_density_with_relaxation(vigo):
    tc = lower(build_stage_circuit(parse_plan("D3M3", 3), 0, "101"), vigo)
    model = NoiseModel.from_backend(vigo, relaxation=True)
    exact = exact_density_success(tc, model, "101")
    hist = run_shots(tc, model, 20000, seed=9)
    assert within(hist.probability("101"), exact, 20000)


def test_density_trace_is_one(vigo):
    tc = lower(build_stage_circuit(parse_plan("D3M3", 3), 0, "000"), vigo)
    assert density_trace(tc, NoiseModel.from_backend(vigo, relaxation=True)) == pytest.approx(1.0, abs=1e-10)


def test_noise_lowers_success(vigo):
    tc = lower(build_stage_circuit(parse_plan("D3M3", 3), 0, "111"), vigo)
    clean = exact_density_success(tc, NoiseModel.noiseless(), "111")
    noisy = exact_density_success(tc, NoiseModel.from_backend(vigo), "111")
    assert noisy < clean


def test_scaled_zero_is_noiseless(vigo):
    assert NoiseModel.from_backend(vigo).scaled(0.0).is_noiseless


def test_parse_noise_overrides(vigo):
    m = parse_noise("cx_depolarizing: 0.02\ncx_depolarizing.1-0: 0.05\nreadout_flip.3: 0\nscale: 2\n", vigo)
    assert m.cx_prob(0, 1) == pytest.approx(0.1)
    assert m.cx_prob(3, 4) == pytest.approx(0.04)
    assert m.readout_prob(3) == 0 and m.readout_prob(0) == pytest.approx(vigo.readout_error[0])


@pytest.mark.parametrize("text", ["nope: 1", "relaxation_enabled: maybe", "cx_depolarizing: 2", "readout_flip"])
def test_bad_noise_files(text, vigo):
    with pytest.raises(NoiseError):
        parse_noise(text, vigo)


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.text("01", min_size=3, max_size=3), st.integers(1, 10**6), min_size=1))
def test_histogram_text_round_trip(counts):
    h = ShotHistogram(counts, sum(counts.values()))
    assert ShotHistogram.from_text(h.to_text()) == h


def test_histogram_rejects_bad_total():
    with pytest.raises(ValueError):
        ShotHistogram({"0": 3}, 4)


def test_most_common_ties_break_lexicographically():
    assert ShotHistogram({"10": 5, "01": 5, "11": 1}, 11).most_common() == "01"


def test_degraded_ratio():
    assert degraded_ratio(0.25, 0.5) == 0.5
    with pytest.raises(ValueError):
        degraded_ratio(0.1, 0.0)
