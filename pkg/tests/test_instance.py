import json

import numpy as np
import pytest

from tsmin.errors import InfeasibleInstanceError, InstanceFormatError, InstanceValidationError
from tsmin.instance import (
    TsmInstance,
    generate_synthetic,
    instance_to_dict,
    load_instance,
    save_instance,
    validate,
)


def _write(tmp_path, doc, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_load_toy_file(toy):
    inst = load_instance("tests/data/toy.json")
    assert inst == toy
    assert inst.stmt_matrix[0].tolist() == [1, 0, 0]
    assert inst.fault_matrix[0].tolist() == [0, 0, 0, 1]
    assert (inst.num_tests, inst.num_stmts, inst.num_faults) == (3, 3, 4)


def test_singleton_instance(tmp_path):
    doc = {"num_tests": 1, "num_stmts": 2, "num_faults": 1, "test_ids": ["only"],
           "stmt_edges": [[0, 0], [0, 1]], "fault_edges": [[0, 0]]}
    inst = load_instance(_write(tmp_path, doc))
    assert inst.num_tests == 1
    assert validate(inst).ok


def test_zero_fault_column_names_f4(tmp_path, toy):
    doc = instance_to_dict(toy)
    doc["fault_edges"] = [e for e in doc["fault_edges"] if e[1] != 3]
    with pytest.raises(InfeasibleInstanceError) as info:
        load_instance(_write(tmp_path, doc))
    assert info.value.label == "f4"
    assert info.value.kind == "fault" and info.value.index == 3
    assert "f4" in str(info.value)


@pytest.mark.parametrize(
    "mutate, exc",
    [
        (lambda d: d.update(extra=1), InstanceFormatError),
        (lambda d: d.pop("fault_edges"), InstanceFormatError),
        (lambda d: d.update(num_tests=4), InstanceValidationError),
        (lambda d: d["stmt_edges"].append([0, 9]), InstanceValidationError),
        (lambda d: d["stmt_edges"].append([0, 0]), InstanceValidationError),
        (lambda d: d.update(test_ids=["a", "a", "b"]), InstanceValidationError),
        (lambda d: d["stmt_edges"].append(["x", 1]), InstanceFormatError),
    ],
)
def test_load_rejects_bad_documents(tmp_path, toy, mutate, exc):
    doc = instance_to_dict(toy)
    mutate(doc)
    with pytest.raises(exc):
        load_instance(_write(tmp_path, doc))


def test_load_rejects_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InstanceFormatError):
        load_instance(p)


def test_validate_toy(toy):
    rep = validate(toy)
    assert rep.ok
    assert rep.zero_stmt_columns == [] and rep.zero_fault_columns == []


def test_validate_empty_row_is_warning_only():
    inst = TsmInstance(("a", "b"), np.array([[1], [0]]), np.array([[1], [0]]))
    rep = validate(inst)
    assert rep.ok
    assert rep.empty_rows == [1]
    assert rep.warnings


def test_validate_non_binary_entry():
    inst = TsmInstance(("a",), np.array([[2]]), np.zeros((1, 0)))
    rep = validate(inst)
    assert not rep.ok
    assert rep.non_binary == [("stmt", 0, 0, 2)]


def test_validate_reports_duplicate_rows(toy):
    inst = TsmInstance(("a", "b"), np.array([[1, 1], [1, 1]]), np.array([[1], [1]]))
    assert validate(inst).duplicate_rows == [[0, 1]]


def test_generate_synthetic_deterministic():
    a = generate_synthetic(10, 20, 5, 0.3, seed=7)
    b = generate_synthetic(10, 20, 5, 0.3, seed=7)
    assert a == b
    assert a.stmt_matrix.shape == (10, 20) and a.fault_matrix.shape == (10, 5)
    assert a.stmt_matrix.any(axis=0).all() and a.fault_matrix.any(axis=0).all()
    assert set(np.unique(a.stmt_matrix)) <= {0, 1}


def test_generate_full_density():
    inst = generate_synthetic(1, 1, 1, 1.0, seed=123)
    assert inst.stmt_matrix.tolist() == [[1]] and inst.fault_matrix.tolist() == [[1]]


def test_generate_validates():
    assert validate(generate_synthetic(3, 3, 4, 0.5, seed=1)).ok


@pytest.mark.parametrize("args", [(0, 1, 1, 0.5), (1, 1, 1, 0.0), (1, 1, 1, 1.5), (2, 0, 1, 0.5)])
def test_generate_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        generate_synthetic(*args, seed=0)


@pytest.mark.parametrize("seed", range(10))
def test_round_trip(tmp_path, seed):
    inst = generate_synthetic(8, 12, 4, 0.25, seed=seed)
    p = tmp_path / "a.json"
    save_instance(inst, p)
    back = load_instance(p)
    assert back == inst
    save_instance(back, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_instance_is_immutable(toy):
    with pytest.raises(ValueError):
        toy.stmt_matrix[0, 0] = 0
