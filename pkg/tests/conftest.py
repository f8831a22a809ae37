import itertools
import math

import pytest

from pdmcts.mdp import FiniteOutcomes, ProblemDefinition
from pdmcts.problems import build_example1_graph


def tiny_problem(horizon=2, probs=(0.5, 0.5), actions=(0, 1), rewards=None, bound=None):
    """Counter MDP: state is an int, ``f(s, a, w) = s + a + w``; reward table optional."""
    rewards = rewards or (lambda t, s, a, w: (a - 0.5) * (w + 1) * 0.5)
    outcomes = FiniteOutcomes([(w, p) for w, p in enumerate(probs)])
    return ProblemDefinition(
        horizon=horizon, initial_state=0, actions=lambda t, s: actions,
        transition=lambda s, a, w: s + a + w, contribution=rewards, outcomes=outcomes,
        contribution_bound=bound if bound is not None else 10.0, name="tiny")


def deterministic_problem(horizon=3):
    """Single outcome; reward prefers action 1 early and 0 late."""
    return tiny_problem(horizon, probs=(1.0,),
                        rewards=lambda t, s, a, w: (1.0 if a == 1 else 0.3) if t == 0 else
                        (0.2 * s if a == 0 else 0.1))


def brute_force_value(problem, t=0, s=None):
    """Expectimax by plain recursion over every outcome; independent of the oracle code."""
    s = problem.initial_state if s is None else s
    if t == problem.horizon:
        return 0.0
    return max(brute_force_q(problem, t, s, a) for a in problem.actions(t, s))


def brute_force_q(problem, t, s, a):
    return math.fsum(p * (problem.contribution(t, s, a, w)
                          + brute_force_value(problem, t + 1, problem.transition(s, a, w)))
                     for w, p in problem.outcomes.enumerate(t + 1))


def brute_force_dual(problem, t, s, a):
    """E over trajectories of the best action sequence in hindsight (zero penalty)."""
    stages = [problem.outcomes.enumerate(tau) for tau in range(t + 1, problem.horizon + 1)]
    total = 0.0
    for combo in itertools.product(*stages):
        p = math.prod(q for _, q in combo)
        ws = [w for w, _ in combo]
        total += p * _hindsight(problem, t, s, ws, first=a)
    return total


def _hindsight(problem, t, s, ws, first=None):
    if t == problem.horizon:
        return 0.0
    acts = [first] if first is not None else problem.actions(t, s)
    return max(problem.contribution(t, s, a, ws[0])
               + _hindsight(problem, t + 1, problem.transition(s, a, ws[0]), ws[1:])
               for a in acts)


@pytest.fixture(scope="session")
def example1_graph():
    return build_example1_graph()


@pytest.fixture(scope="session")
def example1_two_point(example1_graph):
    return example1_graph.to_problem("two_point")


@pytest.fixture(scope="session")
def example1_normal(example1_graph):
    return example1_graph.to_problem("normal")


# acceptance results are collected here and echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
