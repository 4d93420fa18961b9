import numpy as np
import pytest

import laglearn as ll
from laglearn.model import Instance, OutcomeModel, PointLag


@pytest.fixture(scope="session")
def fig1():
    return ll.build_fig1(0.05)


@pytest.fixture(scope="session")
def fig1_small_eps():
    return ll.build_fig1(0.01, p_star=0.01)


@pytest.fixture(scope="session")
def construction():
    return ll.build_construction(0.05, 0.01)


@pytest.fixture(scope="session")
def symmetric():
    return ll.build_symmetric_game(0.7)


@pytest.fixture(scope="session")
def fig1_rivals(fig1):
    """Two-hypothesis restriction of the cycling example to its rival states."""
    return Instance(
        states=fig1.states[:2],
        prior=np.array([0.5, 0.5]),
        true_state_index=0,
        payoff=fig1.payoff,
        discount=0.0,
        true_lag=PointLag(0),
        agent_lag=PointLag(0),
    )


def random_regular_instance(rng, n_states=3, n_actions=2, n_outcomes=3,
                            k=0):
    """Random full-support instance with a shared point lag k."""
    states = []
    for _ in range(n_states):
        p = rng.uniform(0.05, 1.0, size=(n_actions, n_outcomes))
        p /= p.sum(axis=1, keepdims=True)
        states.append(OutcomeModel(p))
    prior = rng.uniform(0.1, 1.0, size=n_states)
    prior /= prior.sum()
    return Instance(
        states=tuple(states),
        prior=prior,
        true_state_index=int(rng.integers(n_states)),
        payoff=rng.normal(size=n_outcomes),
        discount=0.5 if k > 0 else 0.0,
        true_lag=PointLag(k),
        agent_lag=PointLag(k),
        pre_history=tuple(int(a) for a in rng.integers(0, n_actions, size=max(1, k))),
    )
