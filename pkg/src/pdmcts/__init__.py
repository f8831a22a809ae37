"""Primal-dual Monte Carlo tree search for finite-horizon MDPs."""

from .duals import (ZERO_PENALTY, DualPenalty, RolloutValueEstimate, sample_dual_bound,
                    sampled_bound_on, smooth_dual_estimate, solve_inner, value_function_penalty)
from .engine import EngineConfig, PrimalDualMCTS, recommend, run
from .errors import (ConfigurationError, ContractViolation, NotReadyError, PDMCTSError,
                     ResourceBudgetError)
from .harness import (ExperimentReport, ExperimentSpec, depth_histogram, expansions_per_node,
                      run_experiment)
from .mdp import FiniteOutcomes, ProblemDefinition, Trajectory, cumulative_reward, sample_trajectory
from .oracle import ValueTable, evaluate_policy, exact_dual_expectation, solve_exact
from .policies import CandidateSamplerConfig, SelectionConfig
from .problems import build_instance, generate_random_mdp, resolve_problem
from .tree import SearchTree, WideningConfig, tree_from_text, tree_to_text, widening_due

__version__ = "0.1.0"

__all__ = [
    "CandidateSamplerConfig", "ConfigurationError", "ContractViolation", "DualPenalty",
    "EngineConfig", "ExperimentReport", "ExperimentSpec", "FiniteOutcomes", "NotReadyError",
    "PDMCTSError", "PrimalDualMCTS", "ProblemDefinition", "ResourceBudgetError",
    "RolloutValueEstimate", "SearchTree", "SelectionConfig", "Trajectory", "ValueTable",
    "WideningConfig", "ZERO_PENALTY", "build_instance", "cumulative_reward", "depth_histogram", "evaluate_policy",
    "exact_dual_expectation", "expansions_per_node", "generate_random_mdp", "recommend",
    "resolve_problem", "run", "run_experiment",
    "sample_dual_bound", "sample_trajectory", "sampled_bound_on", "smooth_dual_estimate",
    "solve_exact", "solve_inner", "tree_from_text", "tree_to_text", "value_function_penalty",
    "widening_due",
]
