"""Grover search with partial diffusion: simulation, lowering, noise and experiment harness."""

__version__ = "0.1.0"

from .gates import BASIS_GATES, Circuit, Gate, matrix_of
from .search import PlanError, SearchPlan, closed_form_success, parse_plan, plan_success_probability
from .transpile import Backend, TranspiledCircuit, load_backend, lower
from .noise import NoiseModel, ShotHistogram, run_shots
from .metrics import ExperimentRecord, expected_depth, minimize_expected_depth, selectivity
from .harness import TrialProtocol, run_plan, run_sweep

__all__ = [
    "BASIS_GATES", "Backend", "Circuit", "ExperimentRecord", "Gate", "NoiseModel", "PlanError",
    "SearchPlan", "ShotHistogram", "TranspiledCircuit", "TrialProtocol", "closed_form_success",
    "expected_depth", "load_backend", "lower", "matrix_of", "minimize_expected_depth",
    "parse_plan", "plan_success_probability", "run_plan", "run_shots", "run_sweep", "selectivity",
]
