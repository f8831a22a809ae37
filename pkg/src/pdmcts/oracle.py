"""Exact backward-induction solvers for enumerable problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import ConfigurationError, ContractViolation, ResourceBudgetError
from .mdp import Action, Policy, ProblemDefinition, State, enumerate_trajectories

STATE_BUDGET = 2_000_000
TRAJECTORY_BUDGET = 1_000_000
ARGMAX_TOL = 1e-9


@dataclass
class ValueTable:
    """Tabulated ``V_t(s)``, ``Q_t(s, a)`` and argmax sets over reachable states."""

    horizon: int
    V: dict = field(default_factory=dict)
    Q: dict = field(default_factory=dict)
    argmax: dict = field(default_factory=dict)

    def v(self, t: int, s: State) -> float:
        if t >= self.horizon:
            return 0.0
        return self.V[(t, s)]

    def q(self, t: int, s: State, a: Action) -> float:
        if t >= self.horizon:
            return 0.0
        return self.Q[(t, s, a)]

    def optimal_actions(self, t: int, s: State) -> tuple:
        return self.argmax[(t, s)]

    def policy(self) -> "TablePolicy":
        return TablePolicy(self)


@dataclass(frozen=True)
class TablePolicy:
    """Greedy policy reading the first argmax action from a value table."""

    table: ValueTable

    def decide(self, t: int, state: State) -> Action:
        return self.table.argmax[(t, state)][0]


def reachable_states(problem: ProblemDefinition, roots: Optional[Iterable[State]] = None,
                     budget: int = STATE_BUDGET) -> list[list[State]]:
    """States reachable at each stage ``0..T`` from ``roots`` at stage 0, in discovery order."""
    if not problem.enumerable:
        raise ConfigurationError(f"{problem.name}: exact solution needs an enumerable outcome model")
    layer = list(dict.fromkeys(roots if roots is not None else [problem.initial_state]))
    layers = [layer]
    count = len(layer)
    for t in range(problem.horizon):
        outcomes = problem.outcomes.enumerate(t + 1)
        nxt: dict = {}
        for s in layer:
            for a in problem.feasible(t, s):
                for w, p in outcomes:
                    if p > 0:
                        nxt[problem.transition(s, a, w)] = None
        layer = list(nxt)
        count += len(layer)
        if count > budget:
            raise ResourceBudgetError(f"{problem.name}: more than {budget} reachable states", budget)
        layers.append(layer)
    return layers


def _backward(problem: ProblemDefinition, layers, choose) -> ValueTable:
    T = problem.horizon
    table = ValueTable(T)
    for s in layers[T]:
        table.V[(T, s)] = 0.0
    for t in range(T - 1, -1, -1):
        outcomes = problem.outcomes.enumerate(t + 1)
        for s in layers[t]:
            acts = problem.feasible(t, s)
            qs = []
            for a in acts:
                q = math.fsum(p * (problem.contribution(t, s, a, w)
                                   + table.V[(t + 1, problem.transition(s, a, w))])
                              for w, p in outcomes if p > 0)
                table.Q[(t, s, a)] = q
                qs.append(q)
            chosen = choose(t, s, acts, qs)
            table.argmax[(t, s)] = chosen
            table.V[(t, s)] = table.Q[(t, s, chosen[0])]
    return table


def solve_exact(problem: ProblemDefinition, roots: Optional[Iterable[State]] = None,
                budget: int = STATE_BUDGET) -> ValueTable:
    """Optimal values ``V*``, ``Q*`` by backward induction with exact expectations.

    ``roots`` lists stage-0 states to solve from (default: the initial state).
    """
    layers = reachable_states(problem, roots, budget)

    def best(t, s, acts, qs):
        top = max(qs)
        return tuple(a for a, q in zip(acts, qs) if q >= top - ARGMAX_TOL)

    return _backward(problem, layers, best)


def evaluate_policy(problem: ProblemDefinition, policy: Policy,
                    roots: Optional[Iterable[State]] = None,
                    budget: int = STATE_BUDGET) -> ValueTable:
    """Exact ``V^pi`` and ``Q^pi``; ``argmax`` holds the policy's own action."""
    layers = reachable_states(problem, roots, budget)

    def follow(t, s, acts, qs):
        a = policy.decide(t, s)
        if a not in acts:
            raise ContractViolation(f"policy chose infeasible action {a!r} at stage {t}, state {s!r}")
        return (a,)

    return _backward(problem, layers, follow)


def exact_dual_expectation(problem: ProblemDefinition, t: int, s: State, a: Action,
                           penalty=None, budget: int = TRAJECTORY_BUDGET) -> float:
    """Exact expectation of the sampled state-action dual bound at ``(t, s, a)``.

    Enumerates every trajectory ``(w_{t+1}, ..., w_T)`` and solves the inner problem on
    each one. Refuses (ResourceBudgetError) rather than sampling when there are too many.
    """
    from .duals import ZERO_PENALTY, sampled_bound_on

    penalty = penalty or ZERO_PENALTY
    return math.fsum(p * sampled_bound_on(problem, t, s, a, traj, penalty)
                     for traj, p in enumerate_trajectories(problem, t, budget))
