"""TSM instances: binary test-by-statement and test-by-fault matrices.

An instance file is a JSON document::

    {
      "num_tests": 3, "num_stmts": 3, "num_faults": 4,
      "test_ids": ["t1", "t2", "t3"],
      "stmt_edges": [[0, 0], [1, 1], ...],
      "fault_edges": [[0, 3], ...]
    }

Edges are ``[test_index, column_index]`` pairs, 0-based. Unknown keys are rejected.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleInstanceError, InstanceFormatError, InstanceValidationError

logger = logging.getLogger(__name__)

_KEYS = {"num_tests", "num_stmts", "num_faults", "test_ids", "stmt_edges", "fault_edges"}


@dataclass(frozen=True, eq=False)
class TsmInstance:
    test_ids: tuple
    stmt_matrix: np.ndarray
    fault_matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "test_ids", tuple(self.test_ids))
        stmt = np.asarray(self.stmt_matrix)
        fault = np.asarray(self.fault_matrix)
        n = len(self.test_ids)
        if stmt.ndim != 2 or fault.ndim != 2:
            raise InstanceValidationError("coverage matrices must be 2-dimensional")
        if stmt.shape[0] != n or fault.shape[0] != n:
            raise InstanceValidationError(
                f"matrix rows {stmt.shape[0]}/{fault.shape[0]} do not match {n} test ids"
            )
        stmt = stmt.copy()
        fault = fault.copy()
        stmt.flags.writeable = False
        fault.flags.writeable = False
        object.__setattr__(self, "stmt_matrix", stmt)
        object.__setattr__(self, "fault_matrix", fault)

    @property
    def num_tests(self) -> int:
        return len(self.test_ids)

    @property
    def num_stmts(self) -> int:
        return self.stmt_matrix.shape[1]

    @property
    def num_faults(self) -> int:
        return self.fault_matrix.shape[1]

    @property
    def criteria_matrix(self) -> np.ndarray:
        """Statements followed by faults, as one |T| x (|S|+|F|) 0/1 matrix."""
        return np.hstack([self.stmt_matrix, self.fault_matrix]).astype(np.uint8)

    def index_of(self, test_id) -> int:
        try:
            return self.test_ids.index(test_id)
        except ValueError:
            raise InstanceValidationError(f"unknown test id {test_id!r}") from None

    def __eq__(self, other):
        if not isinstance(other, TsmInstance):
            return NotImplemented
        return (
            self.test_ids == other.test_ids
            and np.array_equal(self.stmt_matrix, other.stmt_matrix)
            and np.array_equal(self.fault_matrix, other.fault_matrix)
        )

    __hash__ = None


@dataclass
class ValidationReport:
    ok: bool
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    non_binary: list = field(default_factory=list)
    duplicate_ids: list = field(default_factory=list)
    zero_stmt_columns: list = field(default_factory=list)
    zero_fault_columns: list = field(default_factory=list)
    empty_rows: list = field(default_factory=list)
    duplicate_rows: list = field(default_factory=list)
    stmt_density: float = 0.0
    fault_density: float = 0.0


def _density(m):
    return float(np.count_nonzero(m)) / m.size if m.size else 0.0


def validate(inst: TsmInstance) -> ValidationReport:
    """Check every instance invariant and report; never raises."""
    rep = ValidationReport(ok=True)
    n = inst.num_tests
    if n < 1:
        rep.errors.append("instance has no tests")
    if inst.num_stmts + inst.num_faults < 1:
        rep.errors.append("instance has neither statements nor faults")

    for name, m in (("stmt", inst.stmt_matrix), ("fault", inst.fault_matrix)):
        bad = np.argwhere((m != 0) & (m != 1))
        for i, j in bad:
            rep.non_binary.append((name, int(i), int(j), m[i, j].item()))
    if rep.non_binary:
        rep.errors.append(f"{len(rep.non_binary)} non-binary entries")

    seen = {}
    for i, t in enumerate(inst.test_ids):
        if t in seen:
            rep.duplicate_ids.append(t)
        seen.setdefault(t, i)
    if rep.duplicate_ids:
        rep.errors.append(f"duplicate test ids: {rep.duplicate_ids}")

    rep.zero_stmt_columns = [int(j) for j in np.flatnonzero(~inst.stmt_matrix.any(axis=0))]
    rep.zero_fault_columns = [int(j) for j in np.flatnonzero(~inst.fault_matrix.any(axis=0))]
    for j in rep.zero_stmt_columns:
        rep.errors.append(f"statement s{j + 1} (column {j}) is covered by no test")
    for j in rep.zero_fault_columns:
        rep.errors.append(f"fault f{j + 1} (column {j}) is detected by no test")

    full = np.hstack([inst.stmt_matrix, inst.fault_matrix])
    rep.empty_rows = [int(i) for i in np.flatnonzero(~full.any(axis=1))]
    for i in rep.empty_rows:
        rep.warnings.append(f"test {inst.test_ids[i]!r} covers nothing")

    groups = {}
    for i in range(n):
        groups.setdefault(full[i].tobytes(), []).append(i)
    rep.duplicate_rows = [g for g in groups.values() if len(g) > 1]
    if rep.duplicate_rows:
        rep.warnings.append(f"{len(rep.duplicate_rows)} groups of tests with identical coverage")

    rep.stmt_density = _density(inst.stmt_matrix)
    rep.fault_density = _density(inst.fault_matrix)
    rep.ok = not rep.errors
    return rep


def check_instance(inst: TsmInstance) -> TsmInstance:
    """Raise on the first invariant violation, otherwise return ``inst`` unchanged."""
    rep = validate(inst)
    for w in rep.warnings:
        logger.warning(w)
    if rep.ok:
        return inst
    structural = [e for e in rep.errors if not e.startswith(("statement s", "fault f"))]
    if structural:
        raise InstanceValidationError("; ".join(structural))
    if rep.zero_stmt_columns:
        raise InfeasibleInstanceError("stmt", rep.zero_stmt_columns[0])
    raise InfeasibleInstanceError("fault", rep.zero_fault_columns[0])


def _edges_to_matrix(edges, rows, cols, what):
    m = np.zeros((rows, cols), dtype=np.uint8)
    if not isinstance(edges, list):
        raise InstanceFormatError(f"{what} must be a list of [test, column] pairs")
    for e in edges:
        if (
            not isinstance(e, list)
            or len(e) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in e)
        ):
            raise InstanceFormatError(f"malformed {what} entry {e!r}")
        i, j = e
        if not (0 <= i < rows and 0 <= j < cols):
            raise InstanceValidationError(f"{what} entry {e} outside {rows}x{cols}")
        # a repeated edge shows up as a non-binary entry in validation
        m[i, j] += 1
    return m


def instance_from_dict(doc: dict) -> TsmInstance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    unknown = set(doc) - _KEYS
    if unknown:
        raise InstanceFormatError(f"unknown keys: {sorted(unknown)}")
    missing = _KEYS - set(doc)
    if missing:
        raise InstanceFormatError(f"missing keys: {sorted(missing)}")
    for key in ("num_tests", "num_stmts", "num_faults"):
        v = doc[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise InstanceFormatError(f"{key} must be a non-negative integer")
    ids = doc["test_ids"]
    if not isinstance(ids, list):
        raise InstanceFormatError("test_ids must be a list")
    if len(ids) != doc["num_tests"]:
        raise InstanceValidationError(
            f"num_tests={doc['num_tests']} but {len(ids)} test ids given"
        )
    n, s, f = doc["num_tests"], doc["num_stmts"], doc["num_faults"]
    stmt = _edges_to_matrix(doc["stmt_edges"], n, s, "stmt_edges")
    fault = _edges_to_matrix(doc["fault_edges"], n, f, "fault_edges")
    return TsmInstance(tuple(ids), stmt, fault)


def instance_to_dict(inst: TsmInstance) -> dict:
    return {
        "num_tests": inst.num_tests,
        "num_stmts": inst.num_stmts,
        "num_faults": inst.num_faults,
        "test_ids": list(inst.test_ids),
        "stmt_edges": [[int(i), int(j)] for i, j in np.argwhere(inst.stmt_matrix)],
        "fault_edges": [[int(i), int(j)] for i, j in np.argwhere(inst.fault_matrix)],
    }


def load_instance(path) -> TsmInstance:
    """Parse and validate an instance file.

    Raises InstanceFormatError, InstanceValidationError or InfeasibleInstanceError.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc
    return check_instance(instance_from_dict(doc))


def save_instance(inst: TsmInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)) + "\n", encoding="utf-8")


def generate_synthetic(num_tests, num_stmts, num_faults, density, seed) -> TsmInstance:
    """Random Bernoulli(density) coverage with every column patched to be coverable."""
    for name, v in (("num_tests", num_tests), ("num_stmts", num_stmts), ("num_faults", num_faults)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density!r}")
    rng = np.random.default_rng(seed)
    mats = []
    for cols in (num_stmts, num_faults):
        m = (rng.random((num_tests, cols)) < density).astype(np.uint8)
        for j in np.flatnonzero(~m.any(axis=0)):
            m[rng.integers(num_tests), j] = 1
        mats.append(m)
    ids = tuple(f"t{i + 1}" for i in range(num_tests))
    return TsmInstance(ids, mats[0], mats[1])


def toy_instance() -> TsmInstance:
    """The three-test worked example: 3 statements, 4 faults."""
    stmt = np.array([[1, 0, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)
    fault = np.array([[0, 0, 0, 1], [1, 1, 1, 0], [1, 1, 1, 0]], dtype=np.uint8)
    return TsmInstance(("t1", "t2", "t3"), stmt, fault)
