import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsmin.embed import SimilarityMatrix, compute_embeddings, compute_similarity
from tsmin.errors import InfeasibleInstanceError, OracleLimitError
from tsmin.graph import build_graph
from tsmin.instance import TsmInstance, generate_synthetic
from tsmin.model import (
    ObjectiveConfig,
    Selection,
    bicriteria_objective,
    evaluate_objective,
    fault_weights,
    is_feasible,
    solve_greedy,
    solve_oracle,
    trip_objective,
)


def _sim(values):
    v = np.triu(np.asarray(values, dtype=float), 1)
    return SimilarityMatrix(v, "cosine")


def _trip(inst, seed=0):
    return trip_objective(compute_similarity(compute_embeddings(build_graph(inst), 128, seed=seed)))


def brute_force(inst, cfg):
    """Reference optimum by plain enumeration with the same tie-break."""
    best = None
    n = inst.num_tests
    for r in range(n + 1):
        for combo in itertools.combinations(range(n), r):
            sel = Selection(n, combo)
            if not is_feasible(sel, inst, cfg.kind).feasible:
                continue
            key = (evaluate_objective(sel, cfg), len(combo), combo)
            if best is None or key[0] < best[0] - 1e-9 or (abs(key[0] - best[0]) <= 1e-9 and key[1:] < best[1:]):
                best = key
    return best


def test_trip_objective_value():
    cfg = trip_objective(_sim([[0, 0.2], [0, 0]]))
    assert evaluate_objective(Selection(2, (0, 1)), cfg) == 2.2
    assert evaluate_objective(Selection(2, ()), cfg) == 0.0


def test_bicriteria_weights_and_value(toy):
    w = fault_weights(toy)
    assert w.tolist() == [0.25, 0.75, 0.75]
    assert evaluate_objective(Selection(3, (1, 2)), bicriteria_objective(toy)) == 0.5


def test_size_mismatch(toy, toy_sim):
    with pytest.raises(ValueError):
        evaluate_objective(Selection(4, (0,)), trip_objective(toy_sim))


def test_feasibility_toy(toy):
    assert is_feasible(Selection(3, (0, 1)), toy, "trip").feasible
    res = is_feasible(Selection(3, (1, 2)), toy, "trip")
    assert not res.feasible and res.uncovered_faults == (3,) and res.labels() == ["f4"]
    assert is_feasible(Selection(3, (1, 2)), toy, "bicriteria").feasible


def test_oracle_toy(toy, toy_sim):
    trip = solve_oracle(toy, trip_objective(toy_sim))
    assert trip.indices == (0, 1) and trip.proven_optimal
    assert trip.objective == 2 + toy_sim.pair(0, 1)
    bic = solve_oracle(toy, bicriteria_objective(toy))
    assert bic.indices == (1, 2) and bic.objective == 0.5


def test_oracle_singleton():
    inst = TsmInstance(("a",), np.array([[1, 1]]), np.array([[1]]))
    assert solve_oracle(inst, _trip(inst)).indices == (0,)


def test_oracle_limit():
    inst = generate_synthetic(25, 10, 3, 0.3, seed=0)
    with pytest.raises(OracleLimitError):
        solve_oracle(inst, bicriteria_objective(inst))
    assert solve_oracle(inst, bicriteria_objective(inst), method="bnb").feasible


def test_infeasible_instance_rejected():
    inst = TsmInstance(("a",), np.array([[1]]), np.array([[0]]))
    trip = ObjectiveConfig("trip", similarity=_sim([[0]]))
    with pytest.raises(InfeasibleInstanceError):
        solve_oracle(inst, trip)
    with pytest.raises(InfeasibleInstanceError):
        solve_greedy(inst, trip)
    # the bicriteria constraint covers statements only, so an undetected fault is allowed
    assert solve_oracle(inst, bicriteria_objective(inst)).indices == (0,)


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("kind", ["trip", "bicriteria"])
def test_oracles_match_brute_force(seed, kind):
    rng = np.random.default_rng(seed)
    inst = generate_synthetic(int(rng.integers(3, 10)), int(rng.integers(2, 12)), int(rng.integers(1, 5)),
                              float(rng.uniform(0.15, 0.6)), seed)
    cfg = _trip(inst) if kind == "trip" else bicriteria_objective(inst)
    ref = brute_force(inst, cfg)
    ex = solve_oracle(inst, cfg)
    bb = solve_oracle(inst, cfg, method="bnb")
    assert ex.indices == bb.indices == ref[2]
    assert ex.objective == bb.objective == ref[0]


def test_constant_similarity_ties_break_by_cardinality_then_lex():
    stmt = np.array([[1, 0], [0, 1], [1, 0], [0, 1]])
    inst = TsmInstance(("a", "b", "c", "d"), stmt, np.zeros((4, 0)))
    cfg = trip_objective(SimilarityMatrix(np.triu(np.full((4, 4), 0.5), 1), "constant", 0.5))
    assert solve_oracle(inst, cfg).indices == (0, 1)
    assert solve_oracle(inst, cfg, method="bnb").indices == (0, 1)


def test_bnb_node_budget_reports_unproven():
    inst = generate_synthetic(18, 30, 6, 0.2, seed=9)
    sol = solve_oracle(inst, _trip(inst), method="bnb", node_budget=3)
    assert not sol.proven_optimal and sol.feasible


def test_greedy_toy(toy, toy_sim):
    sol = solve_greedy(toy, trip_objective(toy_sim))
    assert {0, 1} <= set(sol.indices) and sol.feasible


def test_greedy_single_cover():
    stmt = np.array([[1, 0, 0], [1, 1, 1], [0, 0, 1]])
    inst = TsmInstance(("a", "b", "c"), stmt, np.array([[0], [1], [1]]))
    assert solve_greedy(inst, _trip(inst)).indices == (1,)


def test_greedy_not_better_than_oracle():
    inst = generate_synthetic(10, 20, 5, 0.3, seed=7)
    cfg = _trip(inst)
    assert solve_greedy(inst, cfg).objective >= solve_oracle(inst, cfg).objective


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1), st.data())
def test_pair_indicator_is_product(n, seed, data):
    sel = Selection(n, data.draw(st.sets(st.integers(0, n - 1))))
    t = sel.mask.astype(int)
    for i in range(n):
        for j in range(i + 1, n):
            assert sel.pair_indicator(i, j) == t[i] * t[j]


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 9), st.integers(0, 10_000), st.data())
def test_trip_adding_a_test_costs_at_least_one(n, seed, data):
    inst = generate_synthetic(n, 6, 2, 0.4, seed)
    cfg = _trip(inst)
    chosen = data.draw(st.sets(st.integers(0, n - 1), max_size=n - 1))
    extra = data.draw(st.sampled_from(sorted(set(range(n)) - chosen)))
    before = evaluate_objective(Selection(n, chosen), cfg)
    after = evaluate_objective(Selection(n, chosen | {extra}), cfg)
    added = sum(cfg.similarity.pair(extra, j) for j in chosen)
    assert after - before == pytest.approx(1 + added, abs=1e-12)
    assert after - before >= 1


@pytest.mark.parametrize("seed", range(6))
def test_all_solvers_return_feasible(seed):
    inst = generate_synthetic(12, 15, 5, 0.25, seed)
    for cfg in (_trip(inst), bicriteria_objective(inst)):
        for sol in (solve_greedy(inst, cfg), solve_oracle(inst, cfg), solve_oracle(inst, cfg, method="bnb")):
            assert is_feasible(sol.selection, inst, cfg.kind).feasible
