import math

import numpy as np
import pytest

from groverlab.catalog import FIXTURE_TARGETS
from groverlab.harness import TrialProtocol, run_plan, run_sweep, trials_to_csv
from groverlab.metrics import records_to_csv
from groverlab.noise import NoiseModel


def test_protocol_validation():
    with pytest.raises(ValueError):
        TrialProtocol(trials=0)
    with pytest.raises(ValueError):
        TrialProtocol(trials=2, targets=("00",))
    with pytest.raises(ValueError):
        TrialProtocol(fixture="table")
    with pytest.raises(ValueError):
        TrialProtocol(trials=31, fixture="paper").resolve_targets(3)


def test_fixture_and_random_targets():
    assert TrialProtocol(fixture="paper").resolve_targets(4) == FIXTURE_TARGETS[4]
    a = TrialProtocol(seed=7).resolve_targets(5)
    assert a == TrialProtocol(seed=7).resolve_targets(5)
    assert a != TrialProtocol(seed=8).resolve_targets(5)
    assert all(len(t) == 5 for t in a)


@pytest.mark.parametrize("name,n", [("D3M3", 3), ("D2M1|D2M2", 3), ("G1D2M2", 3)])
def test_noiseless_mean_within_three_sigma(name, n, vigo):
    proto = TrialProtocol(trials=6, shots=4000, seed=1)
    rec, results = run_plan(name, n, vigo, NoiseModel.noiseless(), proto)
    sigma = rec.p_sim_std / math.sqrt(rec.trials)
    # trial-to-trial spread is the sampling noise; guard against a zero estimate
    sigma = max(sigma, math.sqrt(rec.p_theo * (1 - rec.p_theo) / (proto.shots * proto.trials)))
    assert abs(rec.p_sim - rec.p_theo) <= 3 * sigma
    assert len(results) == 6 and [r.trial for r in results] == list(range(6))


def test_guessed_qubits_divide_success(vigo):
    rec, _ = run_plan("G1D2M2", 3, vigo, NoiseModel.noiseless(), TrialProtocol(trials=2, shots=500))
    assert rec.p_sim == pytest.approx(0.5, abs=0.06)


def test_run_is_deterministic(vigo):
    proto = TrialProtocol(trials=3, shots=2000, seed=11)
    model = NoiseModel.from_backend(vigo)
    a, ra = run_plan("D2M2|D2M2", 4, vigo, model, proto)
    b, rb = run_plan("D2M2|D2M2", 4, vigo, model, proto)
    assert records_to_csv([a]) == records_to_csv([b])
    assert trials_to_csv("x", ra) == trials_to_csv("x", rb)


def test_two_stage_record_fields(vigo):
    rec, res = run_plan("D2M2|D2M2", 4, vigo, NoiseModel.from_backend(vigo), TrialProtocol(trials=2, shots=1000))
    assert rec.depth_stage2 is not None
    assert all(len(r.stage_probabilities) == 2 for r in res)
    assert all(r.p_sim == pytest.approx(np.prod(r.stage_probabilities)) for r in res)


def test_chained_mode_never_beats_product_noiselessly(vigo):
    proto = dict(trials=4, shots=1500, seed=3)
    model = NoiseModel.noiseless()
    chained, _ = run_plan("D2M1|D2M2", 3, vigo, model, TrialProtocol(chained=True, **proto))
    assert 0 <= chained.p_sim <= 1
    # the first stage's majority is right with high probability at 1500 shots
    product, _ = run_plan("D2M1|D2M2", 3, vigo, model, TrialProtocol(**proto))
    assert chained.p_sim == pytest.approx(product.p_sim, abs=0.05)


def test_explicit_targets(vigo):
    proto = TrialProtocol(trials=2, shots=500, targets=("000", "111"))
    _, res = run_plan("D3M3", 3, vigo, NoiseModel.noiseless(), proto)
    assert [r.target for r in res] == ["000", "111"]
    with pytest.raises(ValueError):
        run_plan("D4M4", 4, vigo, NoiseModel.noiseless(), proto)


def test_zero_noise_sweep_is_flat(vigo):
    sweep = run_sweep(3, vigo, NoiseModel.from_backend(vigo), TrialProtocol(trials=3, shots=3000),
                      scales=(0.0,))
    assert len(sweep.records) == 6
    for r in sweep.records:
        sigma = max(r.p_sim_std, 0.01) / math.sqrt(r.trials)
        assert abs(r.degraded_ratio - 1) <= 4 * sigma / r.p_theo
    assert sweep.fit is not None and abs(sweep.fit(10) - sweep.fit(30)) < 0.05
