import numpy as np
import pytest

from tsmin.graph import build_graph, covers, export_edge_list, neighbors, to_matrices
from tsmin.instance import TsmInstance, generate_synthetic


def test_toy_shape(toy_graph):
    g = toy_graph
    assert (g.u_size, g.v_size, g.edge_count) == (3, 7, 12)


def test_toy_f4_has_a_single_edge(toy_graph):
    f4 = 3 + 3
    assert toy_graph.v_adj[f4].tolist() == [0]


def test_neighbors_toy(toy_graph):
    # V layout: s1 s2 s3 f1 f2 f3 f4 -> 0..6
    assert neighbors(toy_graph, 0) == [0, 6]
    assert neighbors(toy_graph, 1) == [1, 2, 3, 4, 5]
    assert neighbors(toy_graph, 2) == [0, 2, 3, 4, 5]


def test_neighbors_out_of_range(toy_graph):
    with pytest.raises(IndexError):
        neighbors(toy_graph, 3)


def test_isolated_test_has_no_neighbors():
    g = build_graph(TsmInstance(("a", "b"), np.array([[1], [0]]), np.zeros((2, 0))))
    assert neighbors(g, 1) == []


def test_no_faults():
    g = build_graph(TsmInstance(("a",), np.array([[1]]), np.zeros((1, 0))))
    assert (g.v_size, g.edge_count) == (1, 1)


def test_edge_count_matches_matrix_ones():
    inst = generate_synthetic(10, 20, 5, 0.3, seed=7)
    g = build_graph(inst)
    ones = int(np.count_nonzero(inst.stmt_matrix)) + int(np.count_nonzero(inst.fault_matrix))
    assert g.edge_count == ones == g.u_degrees().sum() == g.v_degrees().sum()
    assert (g.v_degrees() >= 1).all()


@pytest.mark.parametrize("seed", range(5))
def test_reconstruction(seed):
    inst = generate_synthetic(9, 14, 6, 0.3, seed=seed)
    s, f = to_matrices(build_graph(inst))
    assert np.array_equal(s, inst.stmt_matrix) and np.array_equal(f, inst.fault_matrix)


def test_cover_witness(toy_graph):
    assert covers(toy_graph, [0, 1]).all()
    cov = covers(toy_graph, [1, 2])
    assert np.flatnonzero(~cov).tolist() == [6]


def test_edge_list_export(tmp_path, toy_graph):
    p = tmp_path / "edges.txt"
    export_edge_list(toy_graph, p)
    pairs = [tuple(map(int, line.split())) for line in p.read_text().splitlines()]
    assert len(pairs) == 12 and (0, 6) in pairs
