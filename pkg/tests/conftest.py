import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from eoranking.core import CandidatePool

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

RUNNING_A = [0.9, 0.9, 0.8, 0.7, 0.1] + [0.05] * 12
RUNNING_B = [0.6, 0.6, 0.6, 0.5, 0.5, 0.4, 0.4, 0.4]
FAIRSTAR_A = [0.7, 0.7, 0.7, 0.7, 0.1, 0.1]
FAIRSTAR_B = [0.5] * 6
GAP_A = [1.0, 0.6, 0.5, 0.5, 0.4] + [0.1] * 10
GAP_B = [1.0] + [0.1] * 30


def running_pool():
    return CandidatePool.from_groups({"A": RUNNING_A, "B": RUNNING_B})


def fairstar_pool():
    return CandidatePool.from_groups({"A": FAIRSTAR_A, "B": FAIRSTAR_B})


def gap_pool():
    return CandidatePool.from_groups({"A": GAP_A, "B": GAP_B})


@pytest.fixture
def running():
    return running_pool()


def random_pool(rng: np.random.Generator, G: int, n_max: int, lo: float = 0.0) -> CandidatePool:
    """Every group gets at least one candidate with prob >= 0.05 so nRel stays well above zero."""
    n = int(rng.integers(G, n_max + 1))
    groups = np.concatenate([np.arange(G), rng.integers(0, G, n - G)])
    probs = rng.uniform(lo, 1.0, n)
    probs[:G] = np.maximum(probs[:G], 0.05)
    perm = rng.permutation(n)
    return CandidatePool([f"c{i}" for i in range(n)], groups[perm], probs[perm], tuple(f"g{g}" for g in range(G)))


@st.composite
def pools(draw, min_groups=2, max_groups=2, max_n=30, ties=False):
    G = draw(st.integers(min_groups, max_groups))
    if ties:
        prob = st.sampled_from([0.05, 0.1, 0.25, 0.5, 0.75, 1.0])
    else:
        prob = st.floats(0.0, 1.0, allow_nan=False)
    per = []
    for g in range(G):
        size = draw(st.integers(1, max(1, max_n // G)))
        ps = draw(st.lists(prob, min_size=size, max_size=size))
        ps[0] = max(ps[0], 0.05)
        per.append(ps)
    return CandidatePool.from_groups({f"g{g}": ps for g, ps in enumerate(per)})


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
