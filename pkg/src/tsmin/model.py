"""Objectives, feasibility, and the exact and greedy solvers.

Two objectives are supported:

``trip``
    ``sum(t_i) + sum_{i<j} c_ij * t_i * t_j`` subject to every statement and
    every fault being covered.
``bicriteria``
    ``sum(t_i) - sum(w_o(t_i) * t_i)`` with ``w_o(t) = (#faults detected by t) / |F|``,
    subject to statement coverage only.

Pair indicators ``y_ij`` are never free variables; they are always ``t_i and t_j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import SimilarityMatrix
from .errors import InfeasibleInstanceError, OracleLimitError, SolverError
from .instance import TsmInstance

ORACLE_LIMIT = 22
DEFAULT_NODE_BUDGET = 2_000_000
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Selection:
    """A subset of test indices out of ``size`` tests."""

    size: int
    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.indices}))
        if idx and not (0 <= idx[0] and idx[-1] < self.size):
            raise ValueError(f"selection {idx} out of range for {self.size} tests")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask) -> "Selection":
        mask = np.asarray(mask, dtype=bool)
        return cls(len(mask), tuple(np.flatnonzero(mask)))

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        m[list(self.indices)] = True
        return m

    def pair_indicator(self, i: int, j: int) -> int:
        s = set(self.indices)
        return int(i in s and j in s)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str
    similarity: SimilarityMatrix | None = None
    fault_weights: np.ndarray | None = None

    @property
    def num_tests(self) -> int:
        if self.kind == "trip":
            return self.similarity.size
        return len(self.fault_weights)

    @property
    def constraint_mode(self) -> str:
        return self.kind


def fault_weights(inst: TsmInstance) -> np.ndarray:
    if inst.num_faults == 0:
        return np.zeros(inst.num_tests)
    return inst.fault_matrix.sum(axis=1).astype(float) / inst.num_faults


def trip_objective(sim: SimilarityMatrix) -> ObjectiveConfig:
    return ObjectiveConfig("trip", similarity=sim)


def bicriteria_objective(inst: TsmInstance) -> ObjectiveConfig:
    return ObjectiveConfig("bicriteria", fault_weights=fault_weights(inst))


def evaluate_objective(sel: Selection, cfg: ObjectiveConfig) -> float:
    if sel.size != cfg.num_tests:
        raise ValueError(f"selection over {sel.size} tests, objective over {cfg.num_tests}")
    idx = list(sel.indices)
    if cfg.kind == "trip":
        c = cfg.similarity.values
        pair = 0.0
        for a, i in enumerate(idx):
            for j in idx[a + 1 :]:
                pair += float(c[i, j])
        return float(len(idx)) + pair
    if cfg.kind == "bicriteria":
        return float(len(idx)) - float(sum(float(cfg.fault_weights[i]) for i in idx))
    raise ValueError(f"unknown objective kind {cfg.kind!r}")


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    uncovered_stmts: tuple = ()
    uncovered_faults: tuple = ()

    def labels(self):
        return [f"s{p + 1}" for p in self.uncovered_stmts] + [f"f{k + 1}" for k in self.uncovered_faults]


def is_feasible(sel: Selection, inst: TsmInstance, mode: str = "trip") -> FeasibilityResult:
    mask = sel.mask if sel.size == inst.num_tests else None
    if mask is None:
        raise ValueError("selection size does not match instance")
    s_cov = inst.stmt_matrix[mask].any(axis=0)
    us = tuple(int(p) for p in np.flatnonzero(~s_cov))
    uf = ()
    if mode == "trip":
        f_cov = inst.fault_matrix[mask].any(axis=0)
        uf = tuple(int(k) for k in np.flatnonzero(~f_cov))
    elif mode != "bicriteria":
        raise ValueError(f"unknown constraint mode {mode!r}")
    return FeasibilityResult(not us and not uf, us, uf)


@dataclass
class Solution:
    selection: Selection
    objective: float
    feasible: bool
    feasibility: FeasibilityResult
    objective_kind: str
    solver: str
    proven_optimal: bool = False
    fallback: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def indices(self) -> tuple:
        return self.selection.indices


def _required_columns(inst, mode):
    if mode == "trip":
        return inst.criteria_matrix.astype(bool)
    return inst.stmt_matrix.astype(bool)


def _ensure_coverable(inst, mode):
    zs = np.flatnonzero(~inst.stmt_matrix.any(axis=0))
    if len(zs):
        raise InfeasibleInstanceError("stmt", int(zs[0]))
    if mode == "trip":
        zf = np.flatnonzero(~inst.fault_matrix.any(axis=0))
        if len(zf):
            raise InfeasibleInstanceError("fault", int(zf[0]))


def _cost_terms(cfg: ObjectiveConfig, n: int):
    """Per-test linear cost and upper-triangular pair cost."""
    if cfg.kind == "trip":
        return np.ones(n), np.asarray(cfg.similarity.values, dtype=float)
    return 1.0 - np.asarray(cfg.fault_weights, dtype=float), np.zeros((n, n))


def _key_better(obj, idx, best_obj, best_idx, tol=TIE_TOL):
    """Objective first; near-ties broken by cardinality, then lexicographic index tuple."""
    if best_idx is None:
        return True
    scale = tol * max(1.0, abs(best_obj))
    if obj < best_obj - scale:
        return True
    if obj > best_obj + scale:
        return False
    return (len(idx), idx) < (len(best_idx), best_idx)


def _make_solution(inst, cfg, indices, solver, proven, **meta):
    sel = Selection(inst.num_tests, indices)
    feas = is_feasible(sel, inst, cfg.constraint_mode)
    return Solution(
        selection=sel,
        objective=evaluate_objective(sel, cfg),
        feasible=feas.feasible,
        feasibility=feas,
        objective_kind=cfg.kind,
        solver=solver,
        proven_optimal=proven,
        metadata=meta,
    )


# -- exhaustive enumeration ------------------------------------------------


def _subset_sums(values, nbits):
    """out[mask] = sum of values[b] over set bits b of mask, for all 2**nbits masks."""
    out = np.zeros(1 << nbits)
    for b in range(nbits):
        half = 1 << b
        out[half : 2 * half] = out[:half] + values[b]
    return out


def _subset_unions(words, nbits):
    out = np.zeros((1 << nbits, words.shape[1]), dtype=np.uint64)
    for b in range(nbits):
        half = 1 << b
        out[half : 2 * half] = out[:half] | words[b]
    return out


def _subset_pair_sums(pair, bits):
    """out[mask] = sum_{i<j in mask} pair[bits[i], bits[j]]."""
    nb = len(bits)
    out = np.zeros(1 << nb)
    for b in range(nb):
        half = 1 << b
        cross = _subset_sums(pair[bits[:b], bits[b]], b)
        out[half : 2 * half] = out[:half] + cross
    return out


def _pack(req: np.ndarray) -> np.ndarray:
    n, cols = req.shape
    words = max(1, -(-cols // 64))
    out = np.zeros((n, words), dtype=np.uint64)
    for j in range(cols):
        w, b = divmod(j, 64)
        out[req[:, j], w] |= np.uint64(1) << np.uint64(b)
    return out


def _popcounts(nbits):
    return _subset_sums(np.ones(nbits), nbits).astype(np.int64)


def _solve_exhaustive(inst, cfg):
    n = inst.num_tests
    req = _required_columns(inst, cfg.constraint_mode)
    words = _pack(req)
    full = np.zeros(words.shape[1], dtype=np.uint64)
    for w in words:
        full |= w
    linear, pair = _cost_terms(cfg, n)

    m = min(n, 16)
    lo_bits = list(range(m))
    hi_bits = list(range(m, n))
    cov_lo = _subset_unions(words[:m], m)
    obj_lo = _subset_sums(linear[:m], m) + _subset_pair_sums(pair, lo_bits)
    cnt_lo = _popcounts(m)
    h = len(hi_bits)
    cov_hi = _subset_unions(words[m:], h) if h else np.zeros((1, words.shape[1]), dtype=np.uint64)
    obj_hi = (_subset_sums(linear[m:], h) + _subset_pair_sums(pair, hi_bits)) if h else np.zeros(1)
    cnt_hi = _popcounts(h)

    best_obj, cands = math.inf, []
    for hi in range(1 << h):
        hi_members = [hi_bits[b] for b in range(h) if hi >> b & 1]
        ok = np.all((cov_lo | cov_hi[hi]) == full, axis=1)
        if not ok.any():
            continue
        cross_vec = pair[:m, hi_members].sum(axis=1) if hi_members else np.zeros(m)
        total = obj_lo + obj_hi[hi] + _subset_sums(cross_vec, m)
        total = np.where(ok, total, np.inf)
        cmin = float(total.min())
        if cmin < best_obj:
            best_obj = cmin
        tol = TIE_TOL * max(1.0, abs(best_obj))
        near = np.flatnonzero(total <= best_obj + tol)
        cands.extend((float(total[lo]), hi, int(lo), int(cnt_lo[lo] + cnt_hi[hi])) for lo in near)
        cands = [c for c in cands if c[0] <= best_obj + tol]

    if not cands:
        raise SolverError("no feasible selection exists")
    best_idx = None
    for _, hi, lo, _cnt in cands:
        idx = tuple([b for b in range(m) if lo >> b & 1] + [hi_bits[b] for b in range(h) if hi >> b & 1])
        if best_idx is None or (len(idx), idx) < (len(best_idx), best_idx):
            best_idx = idx
    return best_idx


# -- branch and bound ------------------------------------------------------


def _solve_bnb(inst, cfg, node_budget, incumbent):
    n = inst.num_tests
    req = _required_columns(inst, cfg.constraint_mode)
    cols = req.shape[1]
    test_cols = [frozenset(np.flatnonzero(req[t]).tolist()) for t in range(n)]
    col_tests = [np.flatnonzero(req[:, j]).tolist() for j in range(cols)]
    linear, pair = _cost_terms(cfg, n)
    sym = pair + pair.T

    best_idx = tuple(incumbent) if incumbent is not None else None
    best_obj = evaluate_objective(Selection(n, best_idx), cfg) if best_idx is not None else math.inf
    nodes = 0
    exhausted = False

    def lower_bound(obj, chosen, uncovered, excluded):
        avail = [t for t in range(n) if t not in excluded and t not in chosen and test_cols[t] & uncovered]
        if not avail:
            return math.inf
        maxcov = max(len(test_cols[t] & uncovered) for t in avail)
        need = -(-len(uncovered) // maxcov)
        # columns whose available coverers are pairwise disjoint each need their own test
        used, indep = set(), 0
        for j in sorted(uncovered, key=lambda c: len(col_tests[c])):
            cov = {t for t in col_tests[j] if t in avail}
            if cov and not cov & used:
                used |= cov
                indep += 1
        need = max(need, indep)
        inc = min(linear[t] + sum(sym[t, s] for s in chosen) for t in avail)
        return obj + need * inc

    def visit(chosen, obj, uncovered, excluded):
        nonlocal best_idx, best_obj, nodes, exhausted
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            return
        if not uncovered:
            idx = tuple(sorted(chosen))
            if _key_better(obj, idx, best_obj, best_idx):
                best_idx, best_obj = idx, obj
            return
        lb = lower_bound(obj, chosen, uncovered, excluded)
        if lb > best_obj + TIE_TOL * max(1.0, abs(best_obj)):
            return
        col = min(uncovered, key=lambda c: (sum(1 for t in col_tests[c] if t not in excluded), c))
        options = [t for t in col_tests[col] if t not in excluded]
        options.sort(key=lambda t: (-len(test_cols[t] & uncovered), t))
        newly_excluded = []
        for t in options:
            delta = linear[t] + sum(sym[t, s] for s in chosen)
            visit(chosen | {t}, obj + delta, uncovered - test_cols[t], excluded | set(newly_excluded))
            if exhausted:
                return
            newly_excluded.append(t)

    visit(frozenset(), 0.0, frozenset(range(cols)), frozenset())
    if best_idx is None:
        raise SolverError("no feasible selection exists")
    return best_idx, not exhausted, nodes


def solve_oracle(inst: TsmInstance, cfg: ObjectiveConfig, limit: int = ORACLE_LIMIT,
                 method: str = "exhaustive", node_budget: int = DEFAULT_NODE_BUDGET) -> Solution:
    """Exact minimizer of the configured objective.

    ``method="exhaustive"`` enumerates all subsets and refuses suites larger
    than ``limit``. ``method="bnb"`` runs a depth-first branch and bound that
    stops after ``node_budget`` nodes; ``proven_optimal`` then tells whether
    the search completed.
    """
    _ensure_coverable(inst, cfg.constraint_mode)
    if method == "exhaustive":
        if inst.num_tests > limit:
            raise OracleLimitError(
                f"{inst.num_tests} tests exceed the exhaustive limit of {limit}; use branch and bound"
            )
        idx = _solve_exhaustive(inst, cfg)
        return _make_solution(inst, cfg, idx, "oracle-exhaustive", True)
    if method == "bnb":
        warm = solve_greedy(inst, cfg).indices
        idx, proven, nodes = _solve_bnb(inst, cfg, node_budget, warm)
        return _make_solution(inst, cfg, idx, "oracle-bnb", proven, nodes=nodes)
    raise ValueError(f"unknown oracle method {method!r}")


def solve_greedy(inst: TsmInstance, cfg: ObjectiveConfig, lam: float = 1.0) -> Solution:
    """Pick the test maximizing new coverage minus ``lam`` times its added similarity until covered."""
    _ensure_coverable(inst, cfg.constraint_mode)
    req = _required_columns(inst, cfg.constraint_mode)
    n = inst.num_tests
    _, pair = _cost_terms(cfg, n)
    sym = pair + pair.T
    uncovered = np.ones(req.shape[1], dtype=bool)
    chosen = np.zeros(n, dtype=bool)
    marginal = np.zeros(n)
    while uncovered.any():
        gain = req[:, uncovered].sum(axis=1).astype(float)
        score = gain - lam * marginal
        score[(gain == 0) | chosen] = -np.inf
        t = int(np.argmax(score))
        chosen[t] = True
        uncovered &= ~req[t]
        marginal += sym[t]
    return _make_solution(inst, cfg, tuple(np.flatnonzero(chosen)), "greedy", False)


# -- solution files --------------------------------------------------------


def solution_to_dict(sol: Solution, inst: TsmInstance) -> dict:
    return {
        "format": "tsmin-solution/1",
        "selected_ids": [inst.test_ids[i] for i in sol.indices],
        "selected_indices": list(sol.indices),
        "num_tests": inst.num_tests,
        "objective": sol.objective,
        "objective_kind": sol.objective_kind,
        "feasible": sol.feasible,
        "uncovered": sol.feasibility.labels(),
        "solver": sol.solver,
        "proven_optimal": sol.proven_optimal,
        "fallback": sol.fallback,
        "metadata": sol.metadata,
    }


def save_solution(sol: Solution, inst: TsmInstance, path, extra: dict | None = None) -> None:
    doc = solution_to_dict(sol, inst)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_solution_ids(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "selected_ids" not in doc:
        raise ValueError(f"{path}: not a solution file (no selected_ids)")
    return list(doc["selected_ids"])
