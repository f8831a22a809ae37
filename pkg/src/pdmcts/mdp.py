"""Finite-horizon MDP abstraction shared by the oracle, the dual machinery and the search engine.

Stages run ``t = 0..T``; decisions are taken at ``t < T`` and stage ``T`` is terminal
with value zero. The exogenous outcome revealed after the decision at stage ``t`` is
indexed ``t + 1``, so a trajectory starting at stage ``t`` holds ``(w_{t+1}, ..., w_T)``.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterator, Optional, Protocol, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, ResourceBudgetError

State = Hashable
Action = Hashable
Outcome = Any

PROB_TOL = 1e-12


class OutcomeModel(Protocol):
    """Per-stage distribution of the exogenous outcome ``W_t`` for ``t = 1..T``."""

    enumerable: bool

    def sample(self, t: int, rng: np.random.Generator) -> Outcome: ...

    def enumerate(self, t: int) -> list[tuple[Outcome, float]]: ...


class FiniteOutcomes:
    """Finite, explicitly tabulated outcome distribution.

    ``table`` maps a stage ``t`` to ``[(w, p), ...]``; ``default`` is used for stages
    missing from the table, so a stage-independent law needs only ``default``.
    """

    enumerable = True

    def __init__(self, default: Sequence[tuple[Outcome, float]] | None = None,
                 table: dict[int, Sequence[tuple[Outcome, float]]] | None = None):
        self._table = {t: list(rows) for t, rows in (table or {}).items()}
        self._default = list(default) if default is not None else None
        self._cum: dict[int, list[float]] = {}
        for rows in list(self._table.values()) + ([self._default] if self._default else []):
            _check_distribution(rows)

    def enumerate(self, t: int) -> list[tuple[Outcome, float]]:
        rows = self._table.get(t, self._default)
        if rows is None:
            raise ContractViolation(f"no outcome distribution for stage {t}")
        return rows

    def sample(self, t: int, rng: np.random.Generator) -> Outcome:
        rows = self.enumerate(t)
        cum = self._cum.get(t)
        if cum is None:
            cum = list(itertools.accumulate(p for _, p in rows))
            self._cum[t] = cum
        i = bisect.bisect_right(cum, rng.random() * cum[-1])
        return rows[min(i, len(rows) - 1)][0]


def _check_distribution(rows: Sequence[tuple[Outcome, float]]) -> None:
    if not rows:
        raise ConfigurationError("empty outcome distribution")
    if any(p < 0 for _, p in rows):
        raise ConfigurationError("negative outcome probability")
    total = math.fsum(p for _, p in rows)
    if abs(total - 1.0) > PROB_TOL:
        raise ConfigurationError(f"outcome probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class Trajectory:
    """A sampled exogenous sequence ``(w_{t+1}, ..., w_T)`` starting after stage ``t``."""

    start_stage: int
    outcomes: tuple

    def __len__(self) -> int:
        return len(self.outcomes)

    def tail(self) -> "Trajectory":
        return Trajectory(self.start_stage + 1, self.outcomes[1:])


class Policy(Protocol):
    def decide(self, t: int, state: State) -> Action: ...


@dataclass(frozen=True)
class FunctionPolicy:
    """Adapts a plain ``fn(t, state) -> action`` into a policy."""

    fn: Callable[[int, State], Action]

    def decide(self, t: int, state: State) -> Action:
        return self.fn(t, state)


@dataclass(frozen=True, eq=False)
class ProblemDefinition:
    """An immutable finite-horizon MDP.

    ``actions(t, s)`` returns the ordered feasible action list; its order is the
    tie-breaking order used everywhere. ``transition(s, a, w)`` is the function ``f``
    and ``contribution(t, s, a, w)`` the bounded reward, with ``|c| <= contribution_bound``.

    Optional hooks:

    * ``successors(t, s, a)`` returns ``{s': P(s' | s, a)}`` for problems whose outcome
      model is not enumerable but whose transition law is known in closed form.
    * ``inner_solver(problem, t, s, traj)`` solves the penalty-free deterministic
      problem on a fixed trajectory, returning ``(value, actions)``.
    """

    horizon: int
    initial_state: State
    actions: Callable[[int, State], Sequence[Action]]
    transition: Callable[[State, Action, Outcome], State]
    contribution: Callable[[int, State, Action, Outcome], float]
    outcomes: OutcomeModel
    contribution_bound: float
    successors: Optional[Callable[[int, State, Action], dict]] = None
    inner_solver: Optional[Callable[..., tuple[float, tuple]]] = None
    name: str = "problem"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigurationError("horizon must be nonnegative")
        if self.contribution_bound < 0:
            raise ConfigurationError("contribution_bound must be nonnegative")

    @property
    def enumerable(self) -> bool:
        return bool(getattr(self.outcomes, "enumerable", False))

    def feasible(self, t: int, s: State) -> Sequence[Action]:
        acts = self.actions(t, s)
        if not acts:
            raise ContractViolation(f"empty feasible action set at stage {t}, state {s!r}")
        return acts

    def successor_distribution(self, t: int, s: State, a: Action) -> Optional[dict]:
        """``{s': P(f(s, a, W_{t+1}) = s')}``, or ``None`` when it cannot be computed."""
        if self.successors is not None:
            return self.successors(t, s, a)
        if not self.enumerable:
            return None
        law: dict = {}
        for w, p in self.outcomes.enumerate(t + 1):
            if p > 0:
                s2 = self.transition(s, a, w)
                law[s2] = law.get(s2, 0.0) + p
        return law


def sample_trajectory(problem: ProblemDefinition, t: int, rng: np.random.Generator) -> Trajectory:
    """Draw ``(W_{t+1}, ..., W_T)`` independently stage by stage."""
    return Trajectory(t, tuple(problem.outcomes.sample(tau, rng)
                               for tau in range(t + 1, problem.horizon + 1)))


def enumerate_trajectories(problem: ProblemDefinition, t: int,
                           budget: int = 1_000_000) -> Iterator[tuple[Trajectory, float]]:
    """Yield every trajectory from stage ``t`` with its probability.

    Raises ResourceBudgetError before yielding anything if the count exceeds ``budget``.
    """
    if not problem.enumerable:
        raise ConfigurationError(f"{problem.name}: outcome model is not enumerable")
    stages = [problem.outcomes.enumerate(tau) for tau in range(t + 1, problem.horizon + 1)]
    count = math.prod(len(rows) for rows in stages)
    if count > budget:
        raise ResourceBudgetError(f"{count} trajectories from stage {t}", budget)
    for combo in itertools.product(*stages):
        p = math.prod(pw for _, pw in combo)
        if p > 0:
            yield Trajectory(t, tuple(w for w, _ in combo)), p


def _check_length(problem: ProblemDefinition, t: int, n: int, what: str) -> None:
    if not 0 <= t <= problem.horizon:
        raise ContractViolation(f"stage {t} outside 0..{problem.horizon}")
    if n != problem.horizon - t:
        raise ContractViolation(f"{what} has length {n}, expected {problem.horizon - t}")


def cumulative_reward(problem: ProblemDefinition, t: int, s: State,
                      actions: Sequence[Action], traj: Trajectory) -> float:
    """Sum of contributions from stage ``t`` applying ``actions`` along ``traj``."""
    _check_length(problem, t, len(actions), "action sequence")
    _check_length(problem, t, len(traj), "trajectory")
    total = 0.0
    for k, (a, w) in enumerate(zip(actions, traj.outcomes)):
        tau = t + k
        if a not in problem.feasible(tau, s):
            raise ContractViolation(f"step {k} (stage {tau}): action {a!r} infeasible in {s!r}")
        total += problem.contribution(tau, s, a, w)
        s = problem.transition(s, a, w)
    return total


def policy_actions(problem: ProblemDefinition, t: int, s: State, policy: Policy,
                   traj: Trajectory) -> tuple[float, tuple]:
    """Follow ``policy`` along ``traj``; return (cumulative reward, actions taken)."""
    _check_length(problem, t, len(traj), "trajectory")
    total = 0.0
    taken = []
    for k, w in enumerate(traj.outcomes):
        tau = t + k
        a = policy.decide(tau, s)
        if a not in problem.feasible(tau, s):
            raise ContractViolation(f"policy chose infeasible action {a!r} at stage {tau}, state {s!r}")
        taken.append(a)
        total += problem.contribution(tau, s, a, w)
        s = problem.transition(s, a, w)
    return total, tuple(taken)


def rollout_reward(problem: ProblemDefinition, t: int, s: State, policy: Policy,
                   traj: Trajectory) -> float:
    """Cumulative reward of ``policy`` from ``(t, s)`` along ``traj``."""
    return policy_actions(problem, t, s, policy, traj)[0]
