"""Optimal receiver operation of an RF energy harvesting node with two priority queues."""

from .config import ExperimentConfig, load_config, parse_config
from .evaluation import (Metrics, evaluate_policy, relative_value_iteration, static_policy,
                         stationary_distribution)
from .model import (Action, ModelParams, State, StateSpace, TrafficClass, TransitionModel,
                    build_model, build_state_space, loss_cost, reward, transition)
from .simulator import SimConfig, SimTrace, simulate
from .solver import SolveReport, build_lp, extract_policy, solve, solve_lp

__all__ = [
    "Action", "ExperimentConfig", "Metrics", "ModelParams", "SimConfig", "SimTrace", "SolveReport", "State",
    "StateSpace", "TrafficClass", "TransitionModel", "build_lp", "build_model",
    "build_state_space", "evaluate_policy", "extract_policy", "load_config", "loss_cost", "parse_config",
    "relative_value_iteration", "reward", "simulate", "solve", "solve_lp", "static_policy",
    "stationary_distribution", "transition",
]
