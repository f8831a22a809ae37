"""Primal-Dual MCTS and the vanilla MCTS baseline.

Each iteration descends the tree with the selection policy until it reaches a state
node due for widening, a state-action node due for widening, or a leaf; expands
accordingly; rolls out the default policy from the resulting leaf; and backs values
up the visited path.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .duals import ZERO_PENALTY, DualPenalty, sampled_bounds_on, smooth_dual_estimate
from .errors import ConfigurationError, ContractViolation, NotReadyError
from .mdp import ProblemDefinition, rollout_reward, sample_trajectory
from .policies import (CandidateSamplerConfig, RollingHorizonPolicy, SelectionConfig,
                       UniformRandomPolicy, sample_candidates, select_action, select_successor)
from .tree import (SearchTree, WideningConfig, add_state_action_child, add_state_child,
                   mixture_weight, widening_due)

SELECT, EXPAND, SIMULATE = 1, 2, 3
REJECTION_TRIES = 1000

EXPANDED_ACTION = "expanded_action"
EXPANSION_SKIPPED = "expansion_skipped"
EXPANDED_SUCCESSOR = "expanded_successor"
ROLLOUT_ONLY = "rollout_only"


@dataclass
class EngineConfig:
    variant: str = "primal_dual"
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    candidates: CandidateSamplerConfig = field(default_factory=CandidateSamplerConfig)
    penalty: DualPenalty = field(default_factory=lambda: ZERO_PENALTY)
    widening: WideningConfig = field(default_factory=WideningConfig)
    c_lambda: float = 100.0
    iterations: int = 1000
    seed: int = 0
    rollout: str = "rolling_horizon"
    lookahead_samples: int = 1
    keep_traces: bool = True

    def __post_init__(self):
        if self.variant not in ("primal_dual", "vanilla"):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.rollout not in ("rolling_horizon", "uniform"):
            raise ConfigurationError(f"unknown rollout policy {self.rollout!r}")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if not self.c_lambda > 0:
            raise ConfigurationError("c_lambda must be positive")
        if self.lookahead_samples < 1:
            raise ConfigurationError("lookahead_samples must be >= 1")


@dataclass
class ExpansionRecord:
    """One Case-1 decision at a state node."""

    node: int
    action: object
    best_u: Optional[float]
    value_before: float
    forced: bool
    expanded: bool


@dataclass
class IterationTrace:
    iteration: int
    path: list = field(default_factory=list)  # ("x", id) / ("y", id) from the root down
    events: list = field(default_factory=list)
    rollout_value: float = 0.0
    dual_samples: list = field(default_factory=list)  # (node, action, u_hat, u_bar, lookaheads)
    expansions: list = field(default_factory=list)  # ExpansionRecord


class PrimalDualMCTS:
    """Search state for one run: the tree, traces and cached transition laws."""

    def __init__(self, problem: ProblemDefinition, config: EngineConfig):
        config.penalty.check(problem)
        self.problem = problem
        self.config = config
        self.tree = SearchTree(problem.initial_state, config.widening, config.c_lambda)
        self.traces: list[IterationTrace] = []
        self.retired_u: dict = {}  # y id -> dual estimate at the moment it was expanded
        self._conditional: dict = {}  # y id -> {state: (outcomes, cumulative probs)}
        self._law_done: set = set()
        self._representative: dict = {}  # x id -> an outcome that produced it
        self._prepare(0)

    # -- helpers -------------------------------------------------------------

    def _rng(self, n: int, phase: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, n, phase])

    def _prepare(self, x: int) -> None:
        node = self.tree.x_nodes[x]
        if node.actions is None:
            node.actions = () if node.stage >= self.problem.horizon else \
                tuple(self.problem.feasible(node.stage, node.state))

    def _law(self, y: int) -> Optional[dict]:
        ynode = self.tree.y_nodes[y]
        if y not in self._law_done:
            px = self.tree.x_nodes[ynode.parent]
            law = self.problem.successor_distribution(px.stage, px.state, ynode.action)
            if law is not None:
                ynode.law = {s: p for s, p in law.items() if p > 0}
            self._law_done.add(y)
        return ynode.law

    def _outcome_given(self, y: int, s_next, rng: np.random.Generator):
        """Draw ``w`` from the outcome law conditioned on ``f(s, a, w) = s_next``."""
        ynode = self.tree.y_nodes[y]
        px = self.tree.x_nodes[ynode.parent]
        t, s, a = px.stage, px.state, ynode.action
        problem = self.problem
        if problem.enumerable:
            table = self._conditional.get(y)
            if table is None:
                groups: dict = {}
                for w, p in problem.outcomes.enumerate(t + 1):
                    if p > 0:
                        groups.setdefault(problem.transition(s, a, w), []).append((w, p))
                table = {k: ([w for w, _ in v], list(itertools.accumulate(p for _, p in v)))
                         for k, v in groups.items()}
                self._conditional[y] = table
            ws, cum = table[s_next]
            i = bisect.bisect_right(cum, rng.random() * cum[-1])
            return ws[min(i, len(ws) - 1)]
        for _ in range(REJECTION_TRIES):
            w = problem.outcomes.sample(t + 1, rng)
            if problem.transition(s, a, w) == s_next:
                return w
        rep = self._representative.get(ynode.successors.get(s_next))
        if rep is None:
            raise ContractViolation(f"could not sample an outcome leading to {s_next!r}")
        return rep

    def _step_reward(self, y: int, w) -> float:
        ynode = self.tree.y_nodes[y]
        px = self.tree.x_nodes[ynode.parent]
        return self.problem.contribution(px.stage, px.state, ynode.action, w)

    def _new_successor(self, y: int, rng: np.random.Generator):
        """Sample an unexpanded successor of ``y``; returns ``(x id, outcome, is_new)``."""
        ynode = self.tree.y_nodes[y]
        px = self.tree.x_nodes[ynode.parent]
        law = self._law(y)
        if law is not None:
            fresh = [(s, p) for s, p in law.items() if s not in ynode.successors]
            if not fresh:
                raise ContractViolation(f"state-action node {y} has no unexpanded successor")
            total = math.fsum(p for _, p in fresh)
            u, acc = rng.random() * total, 0.0
            pick = fresh[-1][0]
            for s, p in fresh:
                acc += p
                if u < acc:
                    pick = s
                    break
            w = self._outcome_given(y, pick, rng)
        else:
            w = self.problem.outcomes.sample(px.stage + 1, rng)
            pick = self.problem.transition(px.state, ynode.action, w)
            if pick in ynode.successors:
                return ynode.successors[pick], w, False
        x = add_state_child(self.tree, y, pick)
        self._representative[x] = w
        self._prepare(x)
        return x, w, True

    def _y_expandable(self, y: int) -> bool:
        law = self._law(y)
        if law is None:
            return True
        return len(self.tree.y_nodes[y].successors) < len(law)

    # -- phases --------------------------------------------------------------

    def expand_state_node(self, x: int, rng: np.random.Generator,
                          trace: Optional[IterationTrace] = None) -> Optional[int]:
        """Case 1 at state node ``x``. Returns the new state-action node id, or None on skip."""
        node = self.tree.x_nodes[x]
        cands = sample_candidates(node, self.config.candidates, rng)
        if self.config.variant == "vanilla":
            action = cands[int(rng.integers(len(cands)))]
            if trace is not None:
                trace.expansions.append(ExpansionRecord(x, action, None, node.value, False, True))
            return add_state_action_child(self.tree, x, action)

        traj = sample_trajectory(self.problem, node.stage, rng)
        samples = sampled_bounds_on(self.problem, node.stage, node.state, cands, traj,
                                    self.config.penalty)
        best_a, best_u = None, -math.inf
        for a, u_hat in zip(cands, samples):
            stats = node.unexpanded.setdefault(a, [0.0, 0])
            stats[1] += 1
            stats[0] = smooth_dual_estimate(stats[0], u_hat, stats[1])
            if trace is not None:
                trace.dual_samples.append((x, a, u_hat, stats[0], stats[1]))
            if stats[0] > best_u:
                best_a, best_u = a, stats[0]
        forced = not node.children
        expand = forced or best_u > node.value
        if trace is not None:
            trace.expansions.append(ExpansionRecord(x, best_a, best_u, node.value, forced, expand))
        if not expand:
            return None
        y = add_state_action_child(self.tree, x, best_a)
        self.retired_u[y] = best_u
        return y

    def expand_state_action_node(self, y: int, rng: np.random.Generator):
        """Case 2: add one unexpanded successor of ``y``. Returns ``(x id, outcome, is_new)``."""
        return self._new_successor(y, rng)

    def simulate(self, x: int, rng: np.random.Generator) -> float:
        """Roll out the default policy from leaf ``x`` and smooth the leaf value."""
        node = self.tree.x_nodes[x]
        if node.stage >= self.problem.horizon:
            v_hat = 0.0
        else:
            if self.config.rollout == "uniform":
                policy = UniformRandomPolicy(self.problem, rng)
            else:
                policy = RollingHorizonPolicy(self.problem, self.config.lookahead_samples, rng)
            traj = sample_trajectory(self.problem, node.stage, rng)
            v_hat = rollout_reward(self.problem, node.stage, node.state, policy, traj)
        if not node.children:
            node.sims += 1
            node.value += (v_hat - node.value) / node.sims
            node.value_mean = node.value
        return v_hat

    def backpropagate(self, xs: list[int], ys: list[int], rewards: list[float], n: int) -> None:
        """Update ``Q`` on path state-action nodes and mean/mixture values on state nodes.

        ``xs = [x_0, ..., x_leaf]``, ``ys[t]`` links ``xs[t]`` to ``xs[t+1]`` and
        ``rewards[t]`` is the contribution sampled on that step. Visits must already
        include this iteration.
        """
        lam = mixture_weight(self.tree, n)
        X, Y = self.tree.x_nodes, self.tree.y_nodes
        for t in range(len(ys) - 1, -1, -1):
            y, x = Y[ys[t]], X[xs[t]]
            y.q_value += (rewards[t] + X[xs[t + 1]].value - y.q_value) / y.visits
            x.value_mean += (y.q_value - x.value_mean) / x.visits
            best = max(Y[c].q_value for c in x.children)
            x.value = (1.0 - lam) * x.value_mean + lam * best

    # -- driver ----------------------------------------------------------------

    def run_iteration(self) -> IterationTrace:
        tree = self.tree
        n = tree.iteration + 1
        rng_sel, rng_exp, rng_sim = self._rng(n, SELECT), self._rng(n, EXPAND), self._rng(n, SIMULATE)
        trace = IterationTrace(n)
        w_cfg = tree.widening
        X, Y = tree.x_nodes, tree.y_nodes
        xs, ys, rewards = [0], [], []
        x = 0
        while True:
            node = X[x]
            if not node.actions:  # terminal stage
                break
            y = None
            if len(node.children) < len(node.actions) and \
                    (not node.children or widening_due(node.visits, w_cfg.c_x, w_cfg.alpha_x)):
                y = self.expand_state_node(x, rng_exp, trace)
                if y is not None:
                    trace.events.append(EXPANDED_ACTION)
                    x2, w, _ = self._new_successor(y, rng_exp)
                    ys.append(y)
                    xs.append(x2)
                    rewards.append(self._step_reward(y, w))
                    x = x2
                    break
                trace.events.append(EXPANSION_SKIPPED)
            if not node.children:
                break
            y = select_action(tree, x, self.config.selection, rng_sel)
            ynode = Y[y]
            if self._y_expandable(y) and widening_due(ynode.visits, w_cfg.c_y, w_cfg.alpha_y):
                x2, w, is_new = self.expand_state_action_node(y, rng_exp)
                ys.append(y)
                xs.append(x2)
                rewards.append(self._step_reward(y, w))
                x = x2
                if is_new:
                    trace.events.append(EXPANDED_SUCCESSOR)
                    break
                continue
            if self._law(y) is None:
                x2, w = self._select_unknown_law(y, rng_sel)
            else:
                x2 = select_successor(tree, y, rng_sel)
                w = self._outcome_given(y, X[x2].state, rng_sel)
            ys.append(y)
            xs.append(x2)
            rewards.append(self._step_reward(y, w))
            x = x2
        if not trace.events or trace.events[-1] == EXPANSION_SKIPPED:
            trace.events.append(ROLLOUT_ONLY)
        for i in xs:
            X[i].visits += 1
        for i in ys:
            Y[i].visits += 1
        trace.rollout_value = self.simulate(xs[-1], rng_sim)
        self.backpropagate(xs, ys, rewards, n)
        tree.iteration = n
        trace.path = [p for pair in itertools.zip_longest(
            (("x", i) for i in xs), (("y", i) for i in ys)) for p in pair if p is not None]
        if self.config.keep_traces:
            self.traces.append(trace)
        return trace

    def _select_unknown_law(self, y: int, rng: np.random.Generator):
        """Successor selection when ``P(s | y)`` is unavailable: sample outcomes until one
        lands on an expanded successor, falling back to visit-weighted choice."""
        ynode = self.tree.y_nodes[y]
        px = self.tree.x_nodes[ynode.parent]
        for _ in range(REJECTION_TRIES):
            w = self.problem.outcomes.sample(px.stage + 1, rng)
            s2 = self.problem.transition(px.state, ynode.action, w)
            if s2 in ynode.successors:
                return ynode.successors[s2], w
        x2 = select_successor(self.tree, y, rng)
        return x2, self._representative[x2]

    def run(self, iterations: Optional[int] = None) -> "PrimalDualMCTS":
        for _ in range(self.config.iterations if iterations is None else iterations):
            self.run_iteration()
        return self


def run(problem: ProblemDefinition, config: EngineConfig) -> tuple[SearchTree, list[IterationTrace]]:
    search = PrimalDualMCTS(problem, config).run()
    return search.tree, search.traces


def recommend(tree: SearchTree):
    """Root action with the highest ``Q``; ties go to the lowest-ordered action."""
    kids = tree.root_children()
    if not kids:
        raise NotReadyError("root has no expanded actions")
    best = kids[0]
    for k in kids[1:]:
        if k.q_value > best.q_value:
            best = k
    return best.action
