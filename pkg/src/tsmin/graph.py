"""Bipartite set-cover view of an instance.

U holds the tests. V holds statements followed by faults: statement ``p`` is
V-index ``p`` and fault ``k`` is V-index ``num_stmts + k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .instance import TsmInstance


@dataclass(frozen=True)
class BipartiteGraph:
    u_size: int
    v_size: int
    num_stmts: int
    u_adj: tuple  # per U-node sorted V-index arrays
    v_adj: tuple  # per V-node sorted U-index arrays

    @property
    def edge_count(self) -> int:
        return int(sum(len(a) for a in self.u_adj))

    @property
    def num_faults(self) -> int:
        return self.v_size - self.num_stmts

    def u_degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.u_adj], dtype=np.int64)

    def v_degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.v_adj], dtype=np.int64)

    def biadjacency(self) -> np.ndarray:
        """Dense |U| x |V| 0/1 matrix, float64."""
        w = np.zeros((self.u_size, self.v_size))
        for u, vs in enumerate(self.u_adj):
            w[u, vs] = 1.0
        return w

    def v_label(self, v: int) -> str:
        if v < self.num_stmts:
            return f"s{v + 1}"
        return f"f{v - self.num_stmts + 1}"


def build_graph(inst: TsmInstance) -> BipartiteGraph:
    w = inst.criteria_matrix
    u_adj = tuple(np.flatnonzero(row).astype(np.int64) for row in w)
    v_adj = tuple(np.flatnonzero(col).astype(np.int64) for col in w.T)
    for a in u_adj + v_adj:
        a.flags.writeable = False
    return BipartiteGraph(
        u_size=inst.num_tests,
        v_size=w.shape[1],
        num_stmts=inst.num_stmts,
        u_adj=u_adj,
        v_adj=v_adj,
    )


def neighbors(g: BipartiteGraph, u: int) -> list:
    if not 0 <= u < g.u_size:
        raise IndexError(f"U-index {u} out of range [0, {g.u_size})")
    return [int(v) for v in g.u_adj[u]]


def to_matrices(g: BipartiteGraph):
    """Split the adjacency back into (stmt_matrix, fault_matrix)."""
    w = g.biadjacency().astype(np.uint8)
    return w[:, : g.num_stmts], w[:, g.num_stmts :]


def covers(g: BipartiteGraph, selection) -> np.ndarray:
    """Boolean V-mask of nodes adjacent to at least one selected U-node."""
    out = np.zeros(g.v_size, dtype=bool)
    for u in selection:
        out[g.u_adj[u]] = True
    return out


def export_edge_list(g: BipartiteGraph, path) -> None:
    lines = [f"{u} {v}" for u, vs in enumerate(g.u_adj) for v in vs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
