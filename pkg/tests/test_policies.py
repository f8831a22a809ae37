import itertools
import math
from collections import Counter

import numpy as np
import pytest

from pdmcts.errors import ConfigurationError, ContractViolation
from pdmcts.oracle import solve_exact
from pdmcts.policies import (CandidateSamplerConfig, RollingHorizonPolicy, SelectionConfig,
                             default_rollout_policy, sample_candidates, select_action,
                             select_successor, successor_weights, ucb1_scores,
                             uniform_random_policy)
from pdmcts.tree import SearchTree, add_state_action_child, add_state_child

from conftest import deterministic_problem, tiny_problem

UCB = SelectionConfig("ucb1")


def tree_with_children(stats, actions=None):
    """Root whose expanded children carry ``(q, visits)`` from ``stats``."""
    actions = actions or tuple(range(len(stats)))
    tree = SearchTree("s")
    tree.root_node.actions = actions
    for a, (q, v) in zip(actions, stats):
        y = tree.y(add_state_action_child(tree, 0, a))
        y.q_value, y.visits = q, v
    return tree


def test_single_child_always_selected():
    tree = tree_with_children([(0.0, 3)])
    for cfg in (UCB, SelectionConfig("epsilon_greedy", epsilon=1.0)):
        assert select_action(tree, 0, cfg, np.random.default_rng(0)) == 0


def test_ucb1_hand_example():
    tree = tree_with_children([(1.0, 3), (0.5, 1)])
    scores = ucb1_scores(tree, tree.root_node)
    assert scores[0] == pytest.approx(1.0 + math.sqrt(2 * math.log(4) / 3))
    assert scores[1] == pytest.approx(0.5 + math.sqrt(2 * math.log(4)))
    assert round(scores[0], 3) == 1.961 and round(scores[1], 3) == 2.165
    assert select_action(tree, 0, UCB, np.random.default_rng(0)) == 1


def test_ucb1_prefers_less_visited_on_equal_q():
    tree = tree_with_children([(0.7, 5), (0.7, 1)])
    assert select_action(tree, 0, UCB, np.random.default_rng(0)) == 1


def test_ucb1_unvisited_child_is_infinite():
    tree = tree_with_children([(5.0, 10), (0.0, 0)])
    assert ucb1_scores(tree, tree.root_node)[1] == math.inf
    assert select_action(tree, 0, UCB, np.random.default_rng(0)) == 1


def test_ucb1_ties_go_to_lowest_action():
    tree = tree_with_children([(1.0, 2), (1.0, 2)])
    assert select_action(tree, 0, UCB, np.random.default_rng(0)) == 0


def test_epsilon_greedy_nonmax_frequency():
    tree = tree_with_children([(1.0, 1), (0.0, 1), (0.0, 1)])
    cfg = SelectionConfig("epsilon_greedy", epsilon=0.3)
    rng = np.random.default_rng(5)
    n = 20_000
    counts = Counter(select_action(tree, 0, cfg, rng) for _ in range(n))
    p = 0.3 / 3
    for child in (1, 2):
        assert abs(counts[child] / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_selection_without_children_is_a_violation():
    tree = SearchTree("s")
    tree.root_node.actions = (0,)
    with pytest.raises(ContractViolation):
        select_action(tree, 0, UCB, np.random.default_rng(0))


@pytest.mark.parametrize("kw", [dict(kind="bogus"), dict(kind="epsilon_greedy", epsilon=0.0),
                                dict(exploration_scale=0.0)])
def test_selection_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SelectionConfig(**kw)


def successor_tree(law, expanded):
    tree = SearchTree("s")
    tree.root_node.actions = ("a",)
    y = add_state_action_child(tree, 0, "a")
    tree.y(y).law = dict(law)
    for s in expanded:
        add_state_child(tree, y, s)
    return tree, y


def test_single_successor_selected():
    tree, y = successor_tree({"u": 0.5, "v": 0.5}, ["u"])
    assert select_successor(tree, y, np.random.default_rng(0)) == tree.y(y).successors["u"]
    assert successor_weights(tree, y)[1] == [1.0]


def test_successor_weights_are_exact_law():
    tree, y = successor_tree({"u": 0.25, "v": 0.75}, ["u", "v"])
    assert successor_weights(tree, y)[1] == [0.25, 0.75]
    tree, y = successor_tree({"u": 0.2, "v": 0.3, "w": 0.5}, ["u", "w"])
    assert successor_weights(tree, y)[1] == pytest.approx([0.2 / 0.7, 0.5 / 0.7])


def test_successor_sampling_frequencies():
    tree, y = successor_tree({"u": 0.25, "v": 0.75}, ["u", "v"])
    rng = np.random.default_rng(11)
    n = 10_000
    first = tree.y(y).successors["u"]
    hits = sum(select_successor(tree, y, rng) == first for _ in range(n))
    assert abs(hits / n - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n)


def candidate_node(actions, expanded=()):
    tree = SearchTree("s")
    tree.root_node.actions = tuple(actions)
    for a in expanded:
        add_state_action_child(tree, 0, a)
    return tree.root_node


def test_candidates_full_set_when_k_large():
    node = candidate_node(range(4), expanded=(1,))
    assert sample_candidates(node, CandidateSamplerConfig(k=10), np.random.default_rng(0)) == [0, 2, 3]


def test_candidates_pair_uniformity():
    node = candidate_node(range(4))
    rng = np.random.default_rng(2)
    n = 10_000
    counts = Counter(tuple(sample_candidates(node, CandidateSamplerConfig(k=2), rng))
                     for _ in range(n))
    assert set(counts) == set(itertools.combinations(range(4), 2))
    p = 1 / 6
    for c in counts.values():
        assert abs(c / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_candidates_never_expanded():
    node = candidate_node(range(6), expanded=(0, 3))
    rng = np.random.default_rng(4)
    for _ in range(200):
        picks = sample_candidates(node, CandidateSamplerConfig(k=2), rng)
        assert not set(picks) & {0, 3} and len(set(picks)) == 2


def test_candidate_default_size():
    cfg = CandidateSamplerConfig()
    assert cfg.size_for(5) == 5 and cfg.size_for(16) == 16 and cfg.size_for(17) == 8
    with pytest.raises(ConfigurationError):
        CandidateSamplerConfig(k=0)


def test_rolling_horizon_one_step_is_greedy():
    p = tiny_problem(horizon=1, probs=(1.0,), rewards=lambda t, s, a, w: [0.2, 0.9][a])
    policy = default_rollout_policy(p, 1, np.random.default_rng(0))
    assert policy.decide(0, 0) == 1


def test_rolling_horizon_optimal_when_deterministic():
    p = deterministic_problem(horizon=3)
    table = solve_exact(p)
    policy = RollingHorizonPolicy(p, 1, np.random.default_rng(0))
    s = 0
    for t in range(p.horizon):
        a = policy.decide(t, s)
        assert a in table.optimal_actions(t, s)
        s = p.transition(s, a, 0)


def test_rolling_horizon_repeatable():
    p = tiny_problem(horizon=3, probs=(0.3, 0.7))
    picks = {RollingHorizonPolicy(p, 2, np.random.default_rng(9)).decide(0, 0) for _ in range(5)}
    assert len(picks) == 1


def test_uniform_random_policy_feasible():
    p = tiny_problem(horizon=2)
    pol = uniform_random_policy(p, np.random.default_rng(0))
    assert {pol.decide(0, 0) for _ in range(50)} == {0, 1}


def test_rolling_horizon_rejects_zero_samples():
    with pytest.raises(ConfigurationError):
        RollingHorizonPolicy(tiny_problem(), 0, np.random.default_rng(0))
