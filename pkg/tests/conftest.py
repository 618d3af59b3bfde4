from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from softedge.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture
def mutag_dir():
    if not (DATA_DIR / "MUTAG" / "MUTAG_A.txt").exists():
        pytest.skip("MUTAG files not present under data/")
    return DATA_DIR


def triangle(weights=None, features=None):
    x = np.ones((3, 1)) if features is None else features
    return Graph.from_edges(x, [(0, 1), (1, 2), (0, 2)], weights=weights)


@st.composite
def graphs(draw, min_nodes=1, max_nodes=7, feature_dim=2, weighted=False):
    """Random small undirected graphs with one-hot node labels."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [e for e, keep in zip(pairs, mask) if keep]
    labels = draw(st.lists(st.integers(0, feature_dim - 1), min_size=n, max_size=n))
    x = np.zeros((n, feature_dim))
    x[np.arange(n), labels] = 1.0
    w = None
    if weighted and edges:
        w = draw(st.lists(st.floats(0.01, 1.0), min_size=len(edges), max_size=len(edges)))
    return Graph.from_edges(x, edges, weights=w)


@st.composite
def graph_and_perm(draw, **kw):
    g = draw(graphs(**kw))
    perm = draw(st.permutations(list(range(g.num_nodes))))
    return g, np.array(perm)


# acceptance criteria report one line each; the lines are repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool | None, detail: str) -> str:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    line = f"{status}  {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
