"""Information-relaxation dual bounds.

A penalty generated by functions ``nu_t`` charges, at every stage of a fixed path,
``nu_{tau+1}(s_{tau+1}) - E[nu_{tau+1}(f(s_tau, a_tau, W))]``. With ``nu = 0`` this
is the plain perfect-information bound; with ``nu = V*`` the bound is tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, ResourceBudgetError
from .mdp import Action, ProblemDefinition, State, Trajectory, sample_trajectory

INNER_STATE_BUDGET = 200_000


@dataclass(eq=False)
class DualPenalty:
    """Penalty generator.

    ``kind`` is ``"zero"`` or ``"value_function"``; the latter needs ``nu(t, s)``.
    ``expectation_mode`` is ``"exact"`` (enumerates outcomes, keeps dual feasibility)
    or ``"monte_carlo"`` (``samples`` common outcome draws per stage, seeded by ``seed``).
    """

    kind: str = "zero"
    nu: Optional[Callable[[int, State], float]] = None
    expectation_mode: str = "exact"
    samples: int = 32
    seed: int = 0
    _expect_cache: dict = field(default_factory=dict, repr=False)
    _draws: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "value_function"):
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "value_function" and self.nu is None:
            raise ConfigurationError("value_function penalty needs nu")
        if self.expectation_mode not in ("exact", "monte_carlo"):
            raise ConfigurationError(f"unknown expectation mode {self.expectation_mode!r}")
        if self.samples < 1:
            raise ConfigurationError("samples must be >= 1")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def check(self, problem: ProblemDefinition) -> None:
        if not self.is_zero and self.expectation_mode == "exact" and not problem.enumerable:
            raise ConfigurationError(
                f"{problem.name}: exact penalty expectations need an enumerable outcome model")

    def expected_nu(self, problem: ProblemDefinition, t: int, s: State, a: Action) -> float:
        """``E[nu_{t+1}(f(s, a, W_{t+1}))]``."""
        key = (t, s, a)
        hit = self._expect_cache.get(key)
        if hit is not None:
            return hit
        if self.expectation_mode == "exact":
            self.check(problem)
            val = math.fsum(p * self.nu(t + 1, problem.transition(s, a, w))
                            for w, p in problem.outcomes.enumerate(t + 1) if p > 0)
        else:
            draws = self._draws.get(t + 1)
            if draws is None:
                rng = np.random.default_rng([self.seed, t + 1])
                draws = [problem.outcomes.sample(t + 1, rng) for _ in range(self.samples)]
                self._draws[t + 1] = draws
            val = math.fsum(self.nu(t + 1, problem.transition(s, a, w)) for w in draws) / len(draws)
        self._expect_cache[key] = val
        return val

    def step(self, problem: ProblemDefinition, t: int, s: State, a: Action, s_next: State) -> float:
        """Penalty charged for the stage-``t`` transition ``s -> s_next`` under ``a``."""
        if self.is_zero:
            return 0.0
        return self.nu(t + 1, s_next) - self.expected_nu(problem, t, s, a)


ZERO_PENALTY = DualPenalty()


def value_function_penalty(nu: Callable[[int, State], float], **kw) -> DualPenalty:
    return DualPenalty(kind="value_function", nu=nu, **kw)


class RolloutValueEstimate:
    """``nu_t(s)`` estimated by averaging ``m`` rollouts of a policy, cached per ``(t, s)``.

    Rollout randomness is keyed on a per-query counter so estimates are reproducible
    for a fixed query order.
    """

    def __init__(self, problem: ProblemDefinition, policy, m: int = 32, seed: int = 0):
        self.problem, self.policy, self.m, self.seed = problem, policy, m, seed
        self._cache: dict = {}

    def __call__(self, t: int, s: State) -> float:
        from .mdp import rollout_reward

        if t >= self.problem.horizon:
            return 0.0
        key = (t, s)
        if key not in self._cache:
            rng = np.random.default_rng([self.seed, len(self._cache)])
            vals = [rollout_reward(self.problem, t, s, self.policy, sample_trajectory(self.problem, t, rng))
                    for _ in range(self.m)]
            self._cache[key] = math.fsum(vals) / self.m
        return self._cache[key]


def penalty_term(penalty: DualPenalty, problem: ProblemDefinition, t: int, s: State,
                 actions: Sequence[Action], traj: Trajectory) -> float:
    """Total penalty ``z_t(s, actions, traj)`` along the realized path."""
    if len(actions) != problem.horizon - t or len(traj) != problem.horizon - t:
        raise ContractViolation("actions and trajectory must have length T - t")
    if penalty.is_zero:
        return 0.0
    penalty.check(problem)
    total = 0.0
    for k, (a, w) in enumerate(zip(actions, traj.outcomes)):
        s2 = problem.transition(s, a, w)
        total += penalty.step(problem, t + k, s, a, s2)
        s = s2
    return total


def _inner_tables(problem: ProblemDefinition, t: int, roots, traj: Trajectory,
                  penalty: DualPenalty, budget: int):
    """Backward induction on the deterministic problem induced by ``traj``.

    Returns per-stage ``values`` dicts and ``choice`` dicts (state -> (action, next)).
    """
    T = problem.horizon
    outcomes = traj.outcomes
    # forward: edges[k][s] = [(a, reward - penalty, s_next), ...]
    layer = dict.fromkeys(roots)
    edges = []
    count = len(layer)
    zero = penalty.is_zero
    contribution, transition, feasible = problem.contribution, problem.transition, problem.feasible
    for k in range(T - t):
        tau = t + k
        w = outcomes[k]
        out = {}
        nxt = {}
        for s in layer:
            row = []
            for a in feasible(tau, s):
                s2 = transition(s, a, w)
                r = contribution(tau, s, a, w)
                if not zero:
                    r -= penalty.step(problem, tau, s, a, s2)
                row.append((a, r, s2))
                nxt[s2] = None
            out[s] = row
        edges.append(out)
        layer = nxt
        count += len(layer)
        if count > budget:
            raise ResourceBudgetError("inner problem reachable-state budget exceeded", budget)
    values = [None] * (T - t + 1)
    choice = [None] * (T - t)
    values[T - t] = dict.fromkeys(layer, 0.0)
    for k in range(T - t - 1, -1, -1):
        vnext = values[k + 1]
        vk = {}
        ck = {}
        for s, row in edges[k].items():
            best = -math.inf
            pick = None
            for a, r, s2 in row:
                v = r + vnext[s2]
                if v > best:
                    best, pick = v, (a, s2)
            vk[s] = best
            ck[s] = pick
        values[k] = vk
        choice[k] = ck
    return values, choice


def solve_inner(problem: ProblemDefinition, t: int, s: State, traj: Trajectory,
                penalty: DualPenalty = ZERO_PENALTY,
                budget: int = INNER_STATE_BUDGET) -> tuple[float, tuple]:
    """Maximize ``h_t(s, a, traj) - z_t(s, a, traj)`` over action sequences.

    Returns ``(value, actions)``; ties resolve to the earliest action in feasible order.
    """
    if len(traj) != problem.horizon - t:
        raise ContractViolation(f"trajectory length {len(traj)} != T - t = {problem.horizon - t}")
    if t == problem.horizon:
        return 0.0, ()
    if penalty.is_zero and problem.inner_solver is not None:
        return problem.inner_solver(problem, t, s, traj)
    penalty.check(problem)
    values, choice = _inner_tables(problem, t, [s], traj, penalty, budget)
    acts = []
    x = s
    for k in range(len(choice)):
        a, x = choice[k][x]
        acts.append(a)
    return values[0][s], tuple(acts)


def sampled_bounds_on(problem: ProblemDefinition, t: int, s: State, actions: Sequence[Action],
                      traj: Trajectory, penalty: DualPenalty = ZERO_PENALTY,
                      budget: int = INNER_STATE_BUDGET) -> list[float]:
    """One dual lookahead per action on a shared trajectory ``(w_{t+1}, ..., w_T)``.

    Each value is ``c_t(s, a, w_{t+1})`` plus the inner-problem optimum from the
    successor; the first transition itself is not penalized.
    """
    if len(traj) != problem.horizon - t:
        raise ContractViolation("trajectory must have length T - t")
    w = traj.outcomes[0]
    succ = [problem.transition(s, a, w) for a in actions]
    rewards = [problem.contribution(t, s, a, w) for a in actions]
    tail = traj.tail()
    if t + 1 == problem.horizon:
        return rewards
    if penalty.is_zero and problem.inner_solver is not None:
        return [r + problem.inner_solver(problem, t + 1, s2, tail)[0] for r, s2 in zip(rewards, succ)]
    penalty.check(problem)
    values, _ = _inner_tables(problem, t + 1, succ, tail, penalty, budget)
    return [r + values[0][s2] for r, s2 in zip(rewards, succ)]


def sampled_bound_on(problem: ProblemDefinition, t: int, s: State, a: Action,
                     traj: Trajectory, penalty: DualPenalty = ZERO_PENALTY) -> float:
    return sampled_bounds_on(problem, t, s, [a], traj, penalty)[0]


@dataclass(frozen=True)
class SampledBound:
    value: float
    trajectory_seed: int
    action: Action
    stage: int


def sample_dual_bound(problem: ProblemDefinition, t: int, s: State, action: Action,
                      rng: np.random.Generator,
                      penalty: DualPenalty = ZERO_PENALTY) -> SampledBound:
    """Draw one trajectory and return the sampled dual bound for ``(t, s, action)``."""
    if action not in problem.feasible(t, s):
        raise ContractViolation(f"action {action!r} infeasible at stage {t}")
    seed = int(rng.integers(2**63))
    traj = sample_trajectory(problem, t, np.random.default_rng(seed))
    return SampledBound(sampled_bound_on(problem, t, s, action, traj, penalty), seed, action, t)


def smooth_dual_estimate(prev_u: float, sample: float, lookaheads_after: int) -> float:
    """Stochastic-approximation step with stepsize ``1 / lookaheads_after``."""
    if lookaheads_after < 1:
        raise ContractViolation("lookahead count must be >= 1")
    alpha = 1.0 / lookaheads_after
    return (1.0 - alpha) * prev_u + alpha * sample
