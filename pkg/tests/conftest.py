import logging

import numpy as np
import pytest

from tsmin.embed import compute_embeddings, compute_similarity
from tsmin.graph import build_graph
from tsmin.instance import toy_instance

logging.getLogger("tsmin").setLevel(logging.ERROR)

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def toy():
    return toy_instance()


@pytest.fixture
def toy_graph(toy):
    return build_graph(toy)


@pytest.fixture
def toy_emb(toy_graph):
    return compute_embeddings(toy_graph, 128, seed=0)


@pytest.fixture
def toy_sim(toy_emb):
    return compute_similarity(toy_emb)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0][2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")
