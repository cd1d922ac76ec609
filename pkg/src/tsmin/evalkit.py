"""Solution metrics and the linear runtime model."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embed import SimilarityMatrix
from .instance import TsmInstance
from .model import Selection, evaluate_objective, trip_objective

# feature units: tests per 10^2, statements per 10^3, edges per 10^5
FEATURE_SCALES = (1e2, 1e3, 1e5)


@dataclass
class SolutionMetrics:
    reduced_size: int
    original_size: int
    size_ratio: float
    stmt_coverage_pct: float
    fault_detection_rate_pct: float
    objective: float
    wall_time_s: float = 0.0


def _pct(covered_cols, reference_cols):
    total = int(reference_cols.sum())
    if total == 0:
        return 100.0
    return 100.0 * int((covered_cols & reference_cols).sum()) / total


def compute_metrics(sel: Selection, inst: TsmInstance, sim: SimilarityMatrix | None = None,
                    wall_time_s: float = 0.0) -> SolutionMetrics:
    """Coverage and fault detection relative to what the full suite achieves."""
    mask = sel.mask
    s_ref = inst.stmt_matrix.any(axis=0)
    f_ref = inst.fault_matrix.any(axis=0)
    s_cov = inst.stmt_matrix[mask].any(axis=0)
    f_cov = inst.fault_matrix[mask].any(axis=0)
    if not mask.any():
        stmt_pct = fdr = 0.0
    else:
        stmt_pct, fdr = _pct(s_cov, s_ref), _pct(f_cov, f_ref)
    obj = evaluate_objective(sel, trip_objective(sim)) if sim is not None else float(len(sel))
    return SolutionMetrics(
        reduced_size=len(sel),
        original_size=inst.num_tests,
        size_ratio=len(sel) / inst.num_tests,
        stmt_coverage_pct=stmt_pct,
        fault_detection_rate_pct=fdr,
        objective=obj,
        wall_time_s=wall_time_s,
    )


def write_metrics_csv(rows, path) -> None:
    """One row per trial; ``rows`` are dicts with a ``subject`` and ``trial`` plus metric fields."""
    rows = [r if isinstance(r, dict) else asdict(r) for r in rows]
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_metrics_report(metrics: SolutionMetrics, path, **context) -> None:
    doc = {"metrics": asdict(metrics), **context}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class RuntimeRegression:
    intercept: float
    per_100_tests: float
    per_1000_stmts: float
    per_100000_edges: float
    r_squared: float
    residuals: np.ndarray
    design: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.intercept, self.per_100_tests, self.per_1000_stmts, self.per_100000_edges])

    def predict(self, tests, stmts, edges):
        x = np.array([1.0, tests / FEATURE_SCALES[0], stmts / FEATURE_SCALES[1], edges / FEATURE_SCALES[2]])
        return float(x @ self.coefficients)


def fit_runtime_model(samples) -> RuntimeRegression:
    """OLS of runtime on scaled (tests, statements, edges).

    ``samples`` is an iterable of ``(tests, stmts, edges, runtime_s)``.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError("samples must be (tests, stmts, edges, runtime_s) tuples")
    if len(data) < 5:
        raise ValueError(f"need at least 5 samples, got {len(data)}")
    x = np.column_stack([np.ones(len(data)), data[:, :3] / np.array(FEATURE_SCALES)])
    y = data[:, 3]
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise np.linalg.LinAlgError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RuntimeRegression(*map(float, coef), r_squared=r2, residuals=resid, design=x)
