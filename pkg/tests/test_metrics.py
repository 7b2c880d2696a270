import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groverlab.catalog import catalog
from groverlab.metrics import (
    ExperimentRecord,
    classical_baseline,
    enumerate_plans,
    expected_depth,
    fit_logistic,
    j_exp,
    j_max,
    logistic,
    minimize_expected_depth,
    oracle_efficiency_argmin,
    records_from_csv,
    records_to_csv,
    selectivity,
    selectivity_from_probs,
    spearman,
    stage_depths,
)
from groverlab.noise import ShotHistogram
from groverlab.search import closed_form_success, parse_plan


def test_selectivity_basic():
    h = ShotHistogram({"101": 60, "000": 20, "111": 30}, 110)
    assert selectivity(h, "101") == pytest.approx(2.0)
    assert selectivity(h, "000") == pytest.approx(20 / 60)
    assert selectivity(ShotHistogram({"11": 5}, 5), "11") == math.inf


def test_selectivity_from_probs():
    assert selectivity_from_probs([0.1, 0.6, 0.3], 1) == pytest.approx(2.0)


def test_expected_depth_sums_stages():
    assert expected_depth([30, 20], 0.5) == 100
    with pytest.raises(ValueError):
        expected_depth(10, 0.0)


def test_iteration_counts():
    assert j_max(4) == 3 and j_exp(4) == 2
    assert j_max(2) == 1
    assert classical_baseline(5) == pytest.approx(0.0625)


def brute_argmin(n):
    best = None
    for j in range(1, 4 * 2 ** (n // 2)):
        v = j / closed_form_success(n, j)
        if best is None or v < best[0]:
            best = (v, j)
    return best[1]


@pytest.mark.parametrize("n", [6, 10, 14, 20])
def test_argmin_matches_wide_scan(n):
    assert oracle_efficiency_argmin(n) == brute_argmin(n)
    assert abs(oracle_efficiency_argmin(n) - j_exp(n)) <= 1


def test_enumeration_covers_catalog_shapes():
    names = set(enumerate_plans(4, 2, max_stages=2))
    for name in ("D4M4", "D3M4", "D2M4", "D4D4M4", "D3D4M4", "D2D4M4", "D2M2|D2M2", "D4M1|D3M3"):
        assert name in names
    assert all(parse_plan(s, 4).num_oracles <= 2 for s in names)
    assert len(names) == len(enumerate_plans(4, 2, max_stages=2))


def test_force_global_single_candidate(vigo):
    res = minimize_expected_depth(4, vigo, 1, force_global=True)
    assert [s.name for s in res.ranking] == ["D4M4"]


def test_optimizer_ranking_is_sorted(vigo):
    res = minimize_expected_depth(3, vigo, 2, candidates=catalog(3))
    eds = [s.expected_depth for s in res.ranking]
    assert eds == sorted(eds) and res.best is res.ranking[0]


@pytest.mark.parametrize("args", [(4, 0), (4, 7), (1, 1)])
def test_enumeration_bounds(args):
    with pytest.raises(ValueError):
        enumerate_plans(*args)


def test_stage_depths_two_stage(vigo):
    depths, cxs = stage_depths("D2M2|D2M2", vigo, 4)
    assert len(depths) == 2 and all(d > 0 for d in depths)


def test_logistic_recovers_parameters():
    x = np.linspace(0, 60, 25)
    true = (0.8, -0.3, 30.0, 0.05)
    fit = fit_logistic(zip(x, logistic(x, *true)))
    assert fit.r_squared > 1 - 1e-9
    assert np.allclose(fit(x), logistic(x, *true), atol=1e-6)
    assert all(b <= a + 1e-15 for a, b in zip(fit.history, fit.history[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(-0.5, -0.05), st.floats(10, 50), st.floats(-0.2, 0.2))
def test_logistic_fit_is_close(a, b, c, d):
    x = np.linspace(0, 60, 30)
    y = logistic(x, a, b, c, d)
    fit = fit_logistic(zip(x, y))
    assert fit.residual_norm < 1e-3 * (1 + abs(a))


def test_flat_data_fit():
    fit = fit_logistic([(x, 1.0) for x in range(10)])
    assert fit.residual_norm < 1e-9
    assert np.allclose(fit(np.arange(10)), 1.0, atol=1e-9)


def test_logistic_needs_points():
    with pytest.raises(ValueError):
        fit_logistic([(1, 1), (2, 2)])


def test_spearman_monotone():
    assert spearman([1, 2, 3, 4], [9, 7, 5, 1]) == pytest.approx(-1.0)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def records(draw):
    return ExperimentRecord(
        circuit_name=draw(st.sampled_from(["D3M3", "D2M2|D2M2", "G1D2M2"])),
        n=draw(st.integers(2, 6)),
        backend=draw(st.sampled_from(["vigo", "athens"])),
        p_theo=draw(finite), p_sim=draw(finite), p_sim_std=draw(finite),
        selectivity=draw(st.floats(allow_nan=False)), selectivity_std=draw(finite),
        depth=draw(finite), depth_stage2=draw(st.none() | finite),
        expected_depth_theo=draw(finite), expected_depth_sim=draw(st.floats(allow_nan=False)),
        cx_count=draw(st.integers(0, 10**6)), degraded_ratio=draw(finite),
        trials=draw(st.integers(1, 100)), shots=draw(st.integers(1, 10**6)),
    )


@settings(max_examples=60, deadline=None)
@given(st.lists(records(), max_size=5))
def test_csv_round_trip(recs):
    text = records_to_csv(recs)
    assert records_from_csv(text) == recs
    assert records_to_csv(records_from_csv(text)) == text


def test_csv_bad_header():
    with pytest.raises(ValueError):
        records_from_csv("a,b\n1,2\n")
