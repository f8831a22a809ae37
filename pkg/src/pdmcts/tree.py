"""Partial decision tree with state nodes and state-action nodes.

Nodes live in two flat, append-only lists and link to each other by integer id.
Every node corresponds to a unique path from the root, so identical MDP states
reached along different paths are distinct nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

from .errors import ConfigurationError, ContractViolation


class StateNode:
    __slots__ = ("id", "parent", "stage", "state", "value_mean", "value", "visits", "sims",
                 "children", "child_of", "unexpanded", "actions")

    def __init__(self, id: int, parent: Optional[int], stage: int, state: Any):
        self.id = id
        self.parent = parent
        self.stage = stage
        self.state = state
        self.value_mean = 0.0  # running average of child Q (seeded by rollouts while a leaf)
        self.value = 0.0  # mixture of value_mean and best child Q
        self.visits = 0
        self.sims = 0
        self.children: list[int] = []  # expanded state-action node ids, in feasible-action order
        self.child_of: dict = {}  # action -> state-action node id
        self.unexpanded: dict = {}  # action -> [dual estimate u, lookaheads l]
        self.actions: Optional[tuple] = None  # feasible actions, filled lazily

    @property
    def expanded_actions(self) -> list[int]:
        return self.children

    @property
    def unexpanded_action_stats(self) -> dict:
        return {a: tuple(v) for a, v in self.unexpanded.items()}


class StateActionNode:
    __slots__ = ("id", "parent", "stage", "action", "q_value", "visits", "successors", "law")

    def __init__(self, id: int, parent: int, stage: int, action: Any):
        self.id = id
        self.parent = parent
        self.stage = stage
        self.action = action
        self.q_value = 0.0
        self.visits = 0
        self.successors: dict = {}  # state -> state node id
        self.law: Optional[dict] = None  # state -> P(state | node), when known

    @property
    def expanded_successors(self) -> dict:
        return self.successors


@dataclass(frozen=True)
class WideningConfig:
    c_x: float = 1.0
    alpha_x: float = 0.5
    c_y: float = 1.0
    alpha_y: float = 0.5

    def __post_init__(self):
        for c, a in ((self.c_x, self.alpha_x), (self.c_y, self.alpha_y)):
            _check_widening(c, a)


def _check_widening(c: float, alpha: float) -> None:
    if not c > 0:
        raise ConfigurationError(f"widening constant must be positive, got {c}")
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"widening exponent must be in (0, 1], got {alpha}")


def widening_due(visits: int, c: float, alpha: float) -> bool:
    """True when ``ceil(c * v**alpha)`` steps up at ``v = visits`` (always at ``v = 0``)."""
    _check_widening(c, alpha)
    if visits < 0:
        raise ContractViolation("visits must be nonnegative")
    if visits == 0:
        return True
    return math.ceil(c * visits ** alpha) > math.ceil(c * (visits - 1) ** alpha)


class SearchTree:
    def __init__(self, root_state: Any, widening: WideningConfig = WideningConfig(),
                 c_lambda: float = 100.0):
        if not c_lambda > 0:
            raise ConfigurationError("mixture constant must be positive")
        self.iteration = 0
        self.from_snapshot = False  # actions and states are text when rebuilt from a snapshot
        self.widening = widening
        self.c_lambda = c_lambda
        self.x_nodes: list[StateNode] = [StateNode(0, None, 0, root_state)]
        self.y_nodes: list[StateActionNode] = []

    root = 0

    @property
    def root_node(self) -> StateNode:
        return self.x_nodes[0]

    def x(self, i: int) -> StateNode:
        return self.x_nodes[i]

    def y(self, i: int) -> StateActionNode:
        return self.y_nodes[i]

    def root_children(self) -> list[StateActionNode]:
        return [self.y_nodes[i] for i in self.root_node.children]


def add_state_action_child(tree: SearchTree, x: int, action) -> int:
    """Expand ``action`` at state node ``x``; its dual statistics are retired."""
    node = tree.x_nodes[x]
    if action in node.child_of:
        raise ContractViolation(f"action {action!r} already expanded at node {x}")
    if node.actions is not None and action not in node.actions:
        raise ContractViolation(f"action {action!r} infeasible at node {x}")
    node.unexpanded.pop(action, None)
    y = StateActionNode(len(tree.y_nodes), x, node.stage, action)
    tree.y_nodes.append(y)
    if node.actions is not None:
        # keep children in feasible-action order so first-max means lowest-order tie winner
        rank = node.actions.index(action)
        pos = sum(1 for c in node.children if node.actions.index(tree.y_nodes[c].action) < rank)
        node.children.insert(pos, y.id)
    else:
        node.children.append(y.id)
    node.child_of[action] = y.id
    return y.id


def add_state_child(tree: SearchTree, y: int, state) -> int:
    """Attach successor ``state`` under state-action node ``y``."""
    ynode = tree.y_nodes[y]
    if state in ynode.successors:
        raise ContractViolation(f"state {state!r} already a successor of node {y}")
    if ynode.law is not None and not ynode.law.get(state, 0.0) > 0:
        raise ContractViolation(f"state {state!r} has zero probability under node {y}")
    x = StateNode(len(tree.x_nodes), y, ynode.stage + 1, state)
    tree.x_nodes.append(x)
    ynode.successors[state] = x.id
    return x.id


def mixture_weight(tree: SearchTree, n: int) -> float:
    """``n / (n + C)``: starts at 0 and increases towards 1."""
    if n < 0:
        raise ContractViolation("iteration index must be nonnegative")
    return n / (n + tree.c_lambda)


# ----------------------------------------------------------------------------
# text snapshots

SNAPSHOT_HEADER = "# pdmcts tree snapshot v1"


def tree_to_text(tree: SearchTree) -> str:
    """Serialize the tree; one tab-separated record per node (format in README)."""
    w = tree.widening
    lines = [SNAPSHOT_HEADER,
             f"iteration\t{tree.iteration}",
             f"widening\t{w.c_x!r}\t{w.alpha_x!r}\t{w.c_y!r}\t{w.alpha_y!r}",
             f"mixture\t{tree.c_lambda!r}"]
    for x in tree.x_nodes:
        parent = "-" if x.parent is None else str(x.parent)
        lines.append(f"X\t{x.id}\t{parent}\t{x.stage}\t{x.visits}\t{x.sims}\t{x.value!r}\t"
                     f"{x.value_mean!r}\t{_text(x.state)}")
        for a, (u, l) in x.unexpanded.items():
            lines.append(f"U\t{x.id}\t{u!r}\t{l}\t{_text(a)}")
    for y in tree.y_nodes:
        lines.append(f"Y\t{y.id}\t{y.parent}\t{y.stage}\t{y.visits}\t{y.q_value!r}\t{_text(y.action)}")
    return "\n".join(lines) + "\n"


def _text(v) -> str:
    return repr(tuple(v) if isinstance(v, tuple) else v).replace("\t", " ").replace("\n", " ")


def tree_from_text(text: str) -> SearchTree:
    """Rebuild a tree from ``tree_to_text`` output; states and actions come back as strings."""
    rows = [ln.split("\t") for ln in text.splitlines() if ln and not ln.startswith("#")]
    head = {r[0]: r[1:] for r in rows if r[0] in ("iteration", "widening", "mixture")}
    widening = WideningConfig(*(float(v) for v in head["widening"]))
    tree = SearchTree(None, widening, float(head["mixture"][0]))
    tree.iteration = int(head["iteration"][0])
    tree.from_snapshot = True
    tree.x_nodes = []
    for r in rows:
        if r[0] == "X":
            _, i, parent, stage, visits, sims, value, mean, state = r
            node = StateNode(int(i), None if parent == "-" else int(parent), int(stage), state)
            node.visits, node.sims = int(visits), int(sims)
            node.value, node.value_mean = float(value), float(mean)
            tree.x_nodes.append(node)
    for r in rows:
        if r[0] == "Y":
            _, i, parent, stage, visits, q, action = r
            y = StateActionNode(int(i), int(parent), int(stage), action)
            y.visits, y.q_value = int(visits), float(q)
            tree.y_nodes.append(y)
            px = tree.x_nodes[y.parent]
            px.children.append(y.id)
            px.child_of[action] = y.id
        elif r[0] == "U":
            _, xi, u, l, action = r
            tree.x_nodes[int(xi)].unexpanded[action] = [float(u), int(l)]
    for x in tree.x_nodes:
        if x.parent is not None:
            tree.y_nodes[x.parent].successors[x.state] = x.id
    return tree
