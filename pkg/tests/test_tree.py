import math

import pytest

from pdmcts.errors import ConfigurationError, ContractViolation
from pdmcts.tree import (SearchTree, WideningConfig, add_state_action_child, add_state_child,
                         mixture_weight, tree_from_text, tree_to_text, widening_due)


def make_tree(actions=("a", "b", "c", "d")):
    tree = SearchTree("s0")
    tree.root_node.actions = actions
    return tree


@pytest.mark.parametrize("c,alpha", [(1, 0.5), (2.5, 0.3), (0.1, 1.0)])
def test_widening_always_due_at_zero(c, alpha):
    assert widening_due(0, c, alpha)


def test_widening_hand_values():
    assert widening_due(2, 1, 0.5)
    assert not widening_due(3, 1, 0.5)


def test_widening_schedule_default():
    due = [v for v in range(40) if widening_due(v, 1, 0.5)]
    assert due == [0, 1, 2, 5, 10, 17, 26, 37]


@pytest.mark.parametrize("c,alpha", [(0, 0.5), (-1, 0.5), (1, 0), (1, 1.5)])
def test_widening_rejects_bad_config(c, alpha):
    with pytest.raises(ConfigurationError):
        widening_due(1, c, alpha)
    with pytest.raises(ConfigurationError):
        WideningConfig(c, alpha, 1, 0.5)


def test_expand_moves_action_out_of_unexpanded_stats():
    tree = make_tree()
    root = tree.root_node
    for a in "abcd":
        root.unexpanded[a] = [1.0, 1]
    add_state_action_child(tree, 0, "c")
    assert [tree.y(i).action for i in root.children] == ["c"]
    assert sorted(root.unexpanded) == ["a", "b", "d"]
    assert len(root.children) + len(root.unexpanded) == 4


def test_expand_twice_is_an_error():
    tree = make_tree()
    add_state_action_child(tree, 0, "a")
    with pytest.raises(ContractViolation):
        add_state_action_child(tree, 0, "a")


def test_expand_infeasible_is_an_error():
    tree = make_tree()
    with pytest.raises(ContractViolation):
        add_state_action_child(tree, 0, "z")


def test_children_stay_in_action_order():
    tree = make_tree()
    for a in "dbca":
        add_state_action_child(tree, 0, a)
    assert [tree.y(i).action for i in tree.root_node.children] == list("abcd")


def test_new_state_action_node_starts_empty():
    tree = make_tree()
    y = tree.y(add_state_action_child(tree, 0, "a"))
    assert (y.q_value, y.visits, y.successors) == (0.0, 0, {})


def test_state_child_deterministic_successor():
    tree = make_tree()
    y = add_state_action_child(tree, 0, "a")
    tree.y(y).law = {"s1": 1.0}
    x = add_state_child(tree, y, "s1")
    node = tree.x(x)
    assert node.stage == 1 and node.value == node.value_mean == 0.0 and node.visits == 0
    with pytest.raises(ContractViolation):
        add_state_child(tree, y, "s1")


def test_state_child_two_outcomes():
    tree = make_tree()
    y = add_state_action_child(tree, 0, "a")
    tree.y(y).law = {"u": 0.5, "v": 0.5}
    add_state_child(tree, y, "u")
    add_state_child(tree, y, "v")
    assert len(tree.y(y).successors) == 2


def test_state_child_zero_probability_rejected():
    tree = make_tree()
    y = add_state_action_child(tree, 0, "a")
    tree.y(y).law = {"u": 1.0}
    with pytest.raises(ContractViolation):
        add_state_child(tree, y, "w")


def test_mixture_weight_values():
    tree = make_tree()
    assert mixture_weight(tree, 0) == 0.0
    assert mixture_weight(tree, 100) == 0.5
    ws = [mixture_weight(tree, n) for n in range(200)]
    assert all(b > a for a, b in zip(ws, ws[1:])) and ws[-1] < 1


def test_mixture_constant_must_be_positive():
    with pytest.raises(ConfigurationError):
        SearchTree("s", c_lambda=0)


def test_snapshot_round_trip_structure():
    tree = make_tree()
    y = add_state_action_child(tree, 0, "b")
    x = add_state_child(tree, y, ("cell", 3))
    tree.root_node.unexpanded["c"] = [2.5, 3]
    tree.root_node.visits, tree.root_node.value = 4, -1.25
    tree.y(y).q_value, tree.y(y).visits = 0.1 + 0.2, 4
    tree.x(x).visits = 4
    tree.iteration = 4
    text = tree_to_text(tree)
    back = tree_from_text(text)
    assert back.iteration == 4
    assert len(back.x_nodes) == 2 and len(back.y_nodes) == 1
    assert back.y(0).q_value == 0.1 + 0.2
    assert back.root_node.value == -1.25
    assert back.root_node.unexpanded == {"'c'": [2.5, 3]}
    assert tree_to_text(back).count("\n") == text.count("\n")
    assert math.isclose(back.c_lambda, 100.0)
