"""Small random MDPs in the fully enumerable regime, used for property tests."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..mdp import FiniteOutcomes, ProblemDefinition

MAX_SIZES = (64, 8, 8, 8)


def generate_random_mdp(sizes: tuple[int, int, int, int], seed: int,
                        outcome_rewards: bool = False) -> ProblemDefinition:
    """Random MDP with ``sizes = (|S|, |A|, |W|, T)``.

    Transitions ``f(s, a, w)`` are uniform over states and each stage has its own
    normalized outcome weights. Contributions are i.i.d. uniform(-1, 1) per ``(t, s, a)``;
    with ``outcome_rewards=True`` they are drawn per ``(t, s, a, w)`` instead. The
    value-function penalty is only tight (strong duality) in the first case.
    """
    n_s, n_a, n_w, horizon = sizes
    if not all(1 <= v <= cap for v, cap in zip(sizes, MAX_SIZES)):
        raise ConfigurationError(f"sizes {sizes} outside the enumerable regime {MAX_SIZES}")
    rng = np.random.default_rng(seed)
    trans = rng.integers(n_s, size=(n_s, n_a, n_w))
    if outcome_rewards:
        contrib = rng.uniform(-1.0, 1.0, size=(horizon, n_s, n_a, n_w))
    else:
        contrib = np.repeat(rng.uniform(-1.0, 1.0, size=(horizon, n_s, n_a, 1)), n_w, axis=3)
    table = {}
    for t in range(1, horizon + 1):
        weights = rng.uniform(0.05, 1.0, size=n_w)
        probs = weights / weights.sum()
        table[t] = [(w, float(p)) for w, p in enumerate(probs)]
    actions = tuple(range(n_a))
    trans_l = trans.tolist()
    contrib_l = contrib.tolist()

    return ProblemDefinition(
        horizon=horizon,
        initial_state=0,
        actions=lambda t, s: actions,
        transition=lambda s, a, w: trans_l[s][a][w],
        contribution=lambda t, s, a, w: contrib_l[t][s][a][w],
        outcomes=FiniteOutcomes(table=table),
        contribution_bound=1.0,
        name=f"random{tuple(sizes)}#{seed}{'w' if outcome_rewards else ''}",
        metadata={"states": list(range(n_s))},
    )
