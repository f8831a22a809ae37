"""Selection, candidate-sampling and default rollout policies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .duals import ZERO_PENALTY, DualPenalty, sampled_bounds_on
from .errors import ConfigurationError, ContractViolation
from .mdp import ProblemDefinition, sample_trajectory
from .tree import SearchTree, StateNode


@dataclass(frozen=True)
class SelectionConfig:
    kind: str = "ucb1"
    epsilon: float = 0.1
    exploration_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ucb1", "epsilon_greedy"):
            raise ConfigurationError(f"unknown selection kind {self.kind!r}")
        if self.kind == "epsilon_greedy" and not 0 < self.epsilon <= 1:
            raise ConfigurationError("epsilon must lie in (0, 1]")
        if not self.exploration_scale > 0:
            raise ConfigurationError("exploration_scale must be positive")


@dataclass(frozen=True)
class CandidateSamplerConfig:
    """``k`` unexpanded actions per expansion; ``None`` means all when ``|A| <= 16``, else 8."""

    k: Optional[int] = None

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ConfigurationError("k must be >= 1")

    def size_for(self, n_actions: int) -> int:
        if self.k is not None:
            return self.k
        return n_actions if n_actions <= 16 else 8


def ucb1_scores(tree: SearchTree, node: StateNode, scale: float = 1.0) -> list[float]:
    kids = [tree.y_nodes[c] for c in node.children]
    total = sum(k.visits for k in kids)
    log_total = math.log(total) if total > 0 else 0.0
    return [math.inf if k.visits == 0 else k.q_value + scale * math.sqrt(2.0 * log_total / k.visits)
            for k in kids]


def _first_argmax(values) -> int:
    best, idx = -math.inf, 0
    for i, v in enumerate(values):
        if v > best:
            best, idx = v, i
    return idx


def select_action(tree: SearchTree, x: int, config: SelectionConfig,
                  rng: np.random.Generator) -> int:
    """Pick an expanded child of state node ``x``; ties go to the lowest-ordered action."""
    node = tree.x_nodes[x]
    if not node.children:
        raise ContractViolation(f"state node {x} has no expanded children")
    if len(node.children) == 1:
        return node.children[0]
    if config.kind == "ucb1":
        return node.children[_first_argmax(ucb1_scores(tree, node, config.exploration_scale))]
    if rng.random() < config.epsilon:
        return node.children[int(rng.integers(len(node.children)))]
    return node.children[_first_argmax(tree.y_nodes[c].q_value for c in node.children)]


def successor_weights(tree: SearchTree, y: int) -> tuple[list[int], list[float]]:
    """Expanded successors of ``y`` and their selection probabilities.

    With a known transition law the weights are ``P(s | y)`` renormalized over the
    expanded set. Without one they fall back to visit frequencies (plus one).
    """
    node = tree.y_nodes[y]
    ids = list(node.successors.values())
    if node.law is not None:
        raw = [node.law[s] for s in node.successors]
    else:
        raw = [tree.x_nodes[i].visits + 1.0 for i in ids]
    total = math.fsum(raw)
    return ids, [r / total for r in raw]


def select_successor(tree: SearchTree, y: int, rng: np.random.Generator) -> int:
    node = tree.y_nodes[y]
    if not node.successors:
        raise ContractViolation(f"state-action node {y} has no expanded successors")
    ids, probs = successor_weights(tree, y)
    if len(ids) == 1:
        return ids[0]
    u = rng.random()
    acc = 0.0
    for i, p in zip(ids, probs):
        acc += p
        if u < acc:
            return i
    return ids[-1]


def unexpanded_actions(node: StateNode) -> list:
    return [a for a in node.actions if a not in node.child_of]


def sample_candidates(node: StateNode, config: CandidateSamplerConfig,
                      rng: np.random.Generator) -> list:
    """``min(k, #unexpanded)`` distinct unexpanded actions, uniformly, in feasible order."""
    pool = unexpanded_actions(node)
    if not pool:
        raise ContractViolation(f"state node {node.id} has no unexpanded actions")
    k = config.size_for(len(node.actions))
    if k >= len(pool):
        return pool
    picks = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
    return [pool[i] for i in picks]


class RollingHorizonPolicy:
    """At ``(t, s)``: sample trajectories, solve the deterministic problem for each first
    action, take the action with the best (averaged) value. Ties go to the earliest action."""

    def __init__(self, problem: ProblemDefinition, lookahead_samples: int,
                 rng: np.random.Generator, penalty: DualPenalty = ZERO_PENALTY):
        if lookahead_samples < 1:
            raise ConfigurationError("lookahead_samples must be >= 1")
        self.problem, self.samples, self.rng, self.penalty = problem, lookahead_samples, rng, penalty

    def decide(self, t: int, state):
        acts = self.problem.feasible(t, state)
        if len(acts) == 1:
            return acts[0]
        totals = [0.0] * len(acts)
        for _ in range(self.samples):
            traj = sample_trajectory(self.problem, t, self.rng)
            for i, v in enumerate(sampled_bounds_on(self.problem, t, state, acts, traj, self.penalty)):
                totals[i] += v
        return acts[_first_argmax(totals)]


class UniformRandomPolicy:
    def __init__(self, problem: ProblemDefinition, rng: np.random.Generator):
        self.problem, self.rng = problem, rng

    def decide(self, t: int, state):
        acts = self.problem.feasible(t, state)
        return acts[int(self.rng.integers(len(acts)))]


def default_rollout_policy(problem: ProblemDefinition, lookahead_samples: int,
                           rng: np.random.Generator) -> RollingHorizonPolicy:
    return RollingHorizonPolicy(problem, lookahead_samples, rng)


def uniform_random_policy(problem: ProblemDefinition, rng: np.random.Generator) -> UniformRandomPolicy:
    return UniformRandomPolicy(problem, rng)
