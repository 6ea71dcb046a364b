"""
Shared fixtures: restricted-geometric Lamperti chains and start vectors.
"""

import numpy as np
import pytest

from lamperti.chain import build_transition, stationary_distribution, truncate_target
from lamperti.design import design_branching_finite
from lamperti.laws import make_target


def _geometric_chain(N, p=0.5):
    target = make_target("geometric", {"p": p})
    table = design_branching_finite(truncate_target(target, N))
    chain = build_transition(table)
    return chain.with_pi(stationary_distribution(chain, method="gth"))


@pytest.fixture
def geometric_chain():
    """Factory: geometric_chain(N, p=0.5) -> TransitionMatrix with pi attached."""
    return _geometric_chain


@pytest.fixture
def chain2():
    return _geometric_chain(2)


@pytest.fixture
def chain6():
    return _geometric_chain(6)


@pytest.fixture
def chain8():
    return _geometric_chain(8)


@pytest.fixture
def delta1():
    """Factory: delta1(N) -> point mass at state 1."""
    def make(N):
        v = np.zeros(N)
        v[0] = 1.0
        return v

    return make
