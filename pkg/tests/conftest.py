import numpy as np
import pytest

from hypermsg.hypergraph import Hypergraph


@pytest.fixture
def small():
    return Hypergraph(5, [[0, 1, 2], [2, 3]])


@pytest.fixture
def eight():
    """8-node fixture with mixed hyperedge sizes, features and three classes."""
    h = Hypergraph(8, [[0, 1, 2], [2, 3, 4, 5], [5, 6], [6, 7, 0], [1, 4, 7]])
    rng = np.random.default_rng(0)
    return h, rng.normal(size=(8, 5)), np.array([0, 1, 2, 0, 1, 2, 0, 1])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
    if not getattr(mod, "CORA_PATH").is_file():
        terminalreporter.write_line(f"[SKIP] criterion 7: Cora co-citation: dataset not found at {mod.CORA_PATH}")
