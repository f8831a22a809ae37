"""Shortest path with random edge costs.

Edge costs are drawn independently per edge and per stage; the walker picks an outgoing
edge before seeing the costs. The engine maximizes, so contributions are negated costs.
Once at the sink the only action is a zero-cost self loop.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigurationError
from ..mdp import ProblemDefinition, Trajectory

Edge = tuple[int, int]


@dataclass(frozen=True)
class RandomCostGraph:
    """Directed acyclic graph with ``N(mu, sigma^2)`` edge costs."""

    vertices: tuple[int, ...]
    means: dict  # (i, j) -> mu
    sigmas: dict  # (i, j) -> sigma
    source: int
    sink: int

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.means))

    @cached_property
    def edge_index(self) -> dict:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def out_edges(self) -> dict:
        out = {v: [] for v in self.vertices}
        for i, j in self.edges:
            out[i].append((i, j))
        return {v: tuple(es) for v, es in out.items()}

    def longest_path_length(self, start: int | None = None) -> int:
        memo: dict = {}

        def depth(v, stack=()):
            if v in stack:
                raise ConfigurationError("graph has a cycle")
            if v not in memo:
                memo[v] = max((1 + depth(j, stack + (v,)) for _, j in self.out_edges[v]), default=0)
            return memo[v]

        return depth(self.source if start is None else start)

    def paths(self, start: int) -> list[tuple[Edge, ...]]:
        """All edge paths from ``start`` to the sink."""
        if start == self.sink:
            return [()]
        return [(e,) + rest for e in self.out_edges[start] for rest in self.paths(e[1])]

    def validate(self) -> None:
        for v in self.vertices:
            if v != self.sink and not self.out_edges[v]:
                raise ConfigurationError(f"vertex {v} cannot reach the sink")
        self.longest_path_length()

    def to_problem(self, cost_model: str = "normal") -> ProblemDefinition:
        """Expose as a maximization MDP.

        ``cost_model="normal"`` samples Gaussian costs (not enumerable). ``"two_point"``
        draws each cost as ``mu +/- sigma`` with probability 1/2, which matches the first
        two moments and makes the outcome law enumerable for exact solution.
        """
        self.validate()
        if cost_model == "normal":
            outcomes = NormalEdgeCosts(self)
        elif cost_model == "two_point":
            outcomes = TwoPointEdgeCosts(self)
        else:
            raise ConfigurationError(f"unknown cost model {cost_model!r}")
        horizon = self.longest_path_length()
        stay = (self.sink, self.sink)
        out_edges, index, sink = self.out_edges, self.edge_index, self.sink
        stay_actions = (stay,)

        def actions(t, v):
            return stay_actions if v == sink else out_edges[v]

        def contribution(t, v, a, w):
            return 0.0 if a == stay else -w[index[a]]

        bound = max(abs(m) + 8.0 * self.sigmas[e] for e, m in self.means.items())
        return ProblemDefinition(
            horizon=horizon,
            initial_state=self.source,
            actions=actions,
            transition=lambda v, a, w: a[1],
            contribution=contribution,
            outcomes=outcomes,
            contribution_bound=bound,
            successors=lambda t, v, a: {a[1]: 1.0},
            inner_solver=self._inner_solver,
            name=f"shortest_path[{cost_model}]",
            metadata={"graph": self},
        )

    def _inner_solver(self, problem: ProblemDefinition, t: int, v: int, traj: Trajectory):
        """Time-expanded DAG shortest path on the fixed cost sample (maximizes negated cost)."""
        steps = problem.horizon - t
        index, sink = self.edge_index, self.sink
        value = {u: 0.0 for u in self.vertices}
        choice = []
        for k in range(steps - 1, -1, -1):
            w = traj.outcomes[k]
            nv, ck = {}, {}
            for u in self.vertices:
                if u == sink:
                    nv[u], ck[u] = value[u], (sink, sink)
                    continue
                best, pick = -math.inf, None
                for e in self.out_edges[u]:
                    val = -w[index[e]] + value[e[1]]
                    if val > best:
                        best, pick = val, e
                nv[u], ck[u] = best, pick
            value = nv
            choice.append(ck)
        choice.reverse()
        acts, u = [], v
        for ck in choice:
            a = ck[u]
            acts.append(a)
            u = a[1]
        return value[v], tuple(acts)


class NormalEdgeCosts:
    enumerable = False

    def __init__(self, graph: RandomCostGraph):
        self.mu = np.array([graph.means[e] for e in graph.edges])
        self.sigma = np.array([graph.sigmas[e] for e in graph.edges])

    def sample(self, t, rng):
        return tuple(rng.normal(self.mu, self.sigma).tolist())

    def enumerate(self, t):
        raise ConfigurationError("Gaussian edge costs are not enumerable")


class TwoPointEdgeCosts:
    enumerable = True

    def __init__(self, graph: RandomCostGraph):
        self.levels = [(graph.means[e] - graph.sigmas[e], graph.means[e] + graph.sigmas[e])
                       for e in graph.edges]
        p = 0.5 ** len(self.levels)
        self._rows = [(w, p) for w in itertools.product(*self.levels)]

    def sample(self, t, rng):
        bits = rng.integers(2, size=len(self.levels))
        return tuple(lv[b] for lv, b in zip(self.levels, bits.tolist()))

    def enumerate(self, t):
        return self._rows


class FixedEdgeCosts:
    """The same cost sample at every stage (deterministic, enumerable)."""

    enumerable = True

    def __init__(self, graph: RandomCostGraph, costs: dict):
        self.w = tuple(float(costs[e]) for e in graph.edges)

    def sample(self, t, rng):
        return self.w

    def enumerate(self, t):
        return [(self.w, 1.0)]


EXAMPLE1_MEANS = {
    (1, 2): 1.5, (1, 3): 2.0, (1, 4): 2.5, (1, 5): 4.0,
    (2, 4): 1.5, (3, 5): 1.5, (4, 6): 1.0, (5, 6): 1.5,
}

# A fixed cost realization. Reused at every stage, it gives lookahead costs
# (3.58, 5.34, 3.81, 5.28) for the four root edges.
EXAMPLE1_SAMPLED_COSTS = {
    (1, 2): 1.20, (2, 4): 1.40, (4, 6): 0.98, (1, 4): 2.83,
    (1, 3): 2.10, (3, 5): 1.64, (5, 6): 1.60, (1, 5): 3.68,
}


def build_example1_graph(sigma: float = 0.25) -> RandomCostGraph:
    """Six-vertex graph from vertex 1 to vertex 6; best path 1-4-6 with mean cost 3.5."""
    return RandomCostGraph(
        vertices=(1, 2, 3, 4, 5, 6),
        means=dict(EXAMPLE1_MEANS),
        sigmas={e: sigma for e in EXAMPLE1_MEANS},
        source=1,
        sink=6,
    )


def fixed_sample_problem(graph: RandomCostGraph, costs: dict) -> ProblemDefinition:
    """``graph`` as an MDP whose costs equal ``costs`` at every stage."""
    base = graph.to_problem("two_point")
    from dataclasses import replace

    return replace(base, outcomes=FixedEdgeCosts(graph, costs), name="shortest_path[fixed]")
