import numpy as np
import pytest

from fractions import Fraction
from typing import Callable, Optional

from matching_sparsifier.graph import erdos_renyi
from matching_sparsifier.rng import RngStream
from matching_sparsifier.state import State
from matching_sparsifier.walks import Profile, ProfileEntry


def desk_state(
    generator: str = "er:n=8,m=10,wmin=1,wmax=5",
    trials: int = 3,
    r: Optional[int] = 8,
    seed: int = 0,
) -> State:
    """
    A configuration small enough to run a whole pipeline in seconds.
    """
    state = State()
    state.sparsifier.epsilon = Fraction(3, 10)
    state.sparsifier.p = Fraction(1, 2)
    state.sparsifier.r_override = r
    state.sparsifier.q_samples = 200
    state.sparsifier.opt_samples = 200
    state.vimatch.k_gamma = 16
    state.vimatch.k_z = 40
    state.experiment.generator = generator
    state.experiment.trials = trials
    state.experiment.eval_samples = 100
    state.experiment.independence_runs = 300
    state.experiment.seed = seed
    return state


@pytest.fixture
def make_state() -> Callable[..., State]:
    return desk_state


def random_profile(
    seed: int, n: int = 6, m: int = 8, alpha: int = 2, keep: float = 0.7
) -> Profile:
    """
    α random subgraphs of a random graph, each with a random (not
    necessarily maximal) matching.
    """
    rng = np.random.default_rng(seed)
    g = erdos_renyi(n, m, RngStream(seed), 1, 6)
    entries = []
    for _ in range(alpha):
        subgraph = [e for e in range(g.m) if rng.random() < keep]
        matching: list[int] = []
        covered: set[int] = set()
        for e in rng.permutation(subgraph):
            e = int(e)
            u, v = g.endpoints(e)
            if rng.random() < 0.5 and u not in covered and v not in covered:
                matching.append(e)
                covered |= {u, v}
        entries.append(ProfileEntry(subgraph, matching))
    return Profile(g, entries)


@pytest.fixture
def make_profile() -> Callable[..., Profile]:
    return random_profile
