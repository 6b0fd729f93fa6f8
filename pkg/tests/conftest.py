from pathlib import Path

import pytest

from subvec.graph import parse_subgraph_set, read_edge_list

DATA = Path(__file__).parent / "data"
TOY_EDGES = DATA / "toy.edgelist"
TOY_SUBGRAPHS = DATA / "toy.subgraphs"


@pytest.fixture(scope="session")
def toy():
    return read_edge_list(TOY_EDGES)


@pytest.fixture(scope="session")
def toy_sets(toy):
    with open(TOY_SUBGRAPHS) as fh:
        return parse_subgraph_set(fh, toy)


def ids(g, labels):
    return [g.id_of(x) for x in labels]


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
