import pytest

from shorttraj import qdiff, tracer

GRAPH_CASES = {
    "real_segment": (2, 3),
    "real_common_edge": (-2, 3),
    "one_short": (1 + 0.1j, -1 + 0.1j),
    "jordan": (1 + 0.1j, -1 - 0.1j),
    "loop_family": (-1.1 + 0.1j, 1),
}

_graphs: dict = {}

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def case_graph(name: str) -> tracer.CriticalGraph:
    if name not in _graphs:
        A, B = GRAPH_CASES[name]
        _graphs[name] = tracer.build_graph(qdiff.from_jacobi(A, B))
    return _graphs[name]


@pytest.fixture(scope="session")
def graphs():
    return case_graph


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
