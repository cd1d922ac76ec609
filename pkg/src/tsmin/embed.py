"""Spectral node embeddings of the bipartite graph and the test-similarity matrix.

The edge-weight matrix defaults to the plain biadjacency matrix. Any callable
mapping a BipartiteGraph to a |U| x |V| array can be passed as ``weight_builder``
to swap in a multi-hop weighting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.utils.extmath import randomized_svd

from .graph import BipartiteGraph

logger = logging.getLogger(__name__)

DEFAULT_K = 128
RANDOMIZED_THRESHOLD = 4_000_000  # |U|*|V| cells above which the randomized path is used


@dataclass(frozen=True)
class EmbeddingSet:
    k: int
    u_vectors: np.ndarray
    v_vectors: np.ndarray
    singular_values: np.ndarray
    requested_k: int

    def reconstruction(self) -> np.ndarray:
        return self.u_vectors @ self.v_vectors.T


def biadjacency_weights(g: BipartiteGraph):
    rows = np.concatenate([np.full(len(vs), u) for u, vs in enumerate(g.u_adj)] or [[]])
    cols = np.concatenate(list(g.u_adj) or [[]])
    data = np.ones(len(rows))
    return sparse.csr_matrix((data, (rows.astype(int), cols.astype(int))), shape=(g.u_size, g.v_size))


def _fix_signs(p, q):
    # largest-magnitude entry of each left singular vector made nonnegative
    idx = np.argmax(np.abs(p), axis=0)
    signs = np.sign(p[idx, np.arange(p.shape[1])])
    signs[signs == 0] = 1.0
    return p * signs, q * signs


def truncated_svd(w, k: int, seed=None, threshold: int = RANDOMIZED_THRESHOLD):
    """Rank-k SVD ``w ~ p @ diag(s) @ q.T`` with a deterministic sign convention."""
    m, n = w.shape
    if m * n <= threshold:
        dense = w.toarray() if sparse.issparse(w) else np.asarray(w, dtype=float)
        p, s, qt = np.linalg.svd(dense, full_matrices=False)
        p, s, q = p[:, :k], s[:k], qt[:k].T
    else:
        p, s, qt = randomized_svd(
            sparse.csr_matrix(w), n_components=k, n_oversamples=10, n_iter=2,
            random_state=np.random.RandomState(np.random.SeedSequence(seed).generate_state(1)[0]),
        )
        q = qt.T
    p, q = _fix_signs(p, q)
    return p, s, q


def compute_embeddings(g: BipartiteGraph, k: int = DEFAULT_K, seed=0, weight_builder=biadjacency_weights) -> EmbeddingSet:
    if k < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {k}")
    if g.edge_count == 0:
        raise ValueError("cannot embed a graph without edges")
    k_eff = min(k, g.u_size, g.v_size)
    if k_eff < k:
        logger.warning("embedding dimension %d clamped to %d (min(|U|, |V|))", k, k_eff)
    w = weight_builder(g)
    p, s, q = truncated_svd(w, k_eff, seed=seed)
    # numerically-zero singular values carry arbitrary null-space directions
    tol = s.max() * max(w.shape) * np.finfo(float).eps
    s = np.where(s > tol, s, 0.0)
    root = np.sqrt(s)
    u_vec, v_vec = p * root, q * root
    for a in (u_vec, v_vec, s):
        a.flags.writeable = False
    return EmbeddingSet(k=k_eff, u_vectors=u_vec, v_vectors=v_vec, singular_values=s, requested_k=k)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise test similarity; only entries with i < j are meaningful."""

    values: np.ndarray  # strictly upper-triangular n x n
    mode: str  # "cosine" or "constant"
    constant: float | None = None

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def pair(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError("similarity is defined for distinct tests only")
        if i > j:
            i, j = j, i
        return float(self.values[i, j])

    def upper_items(self):
        iu, ju = np.triu_indices(self.size, 1)
        return [(int(i), int(j), float(self.values[i, j])) for i, j in zip(iu, ju)]

    @property
    def label(self) -> str:
        return "cosine" if self.mode == "cosine" else f"constant:{self.constant:g}"


def parse_similarity_mode(text: str):
    """``"cosine"`` or ``"constant:<value>"`` -> (mode, value)."""
    if text == "cosine":
        return "cosine", None
    if text.startswith("constant:"):
        value = float(text.split(":", 1)[1])
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"constant similarity must lie in [0, 1], got {value}")
        return "constant", value
    raise ValueError(f"unknown similarity mode {text!r}")


def compute_similarity(emb: EmbeddingSet, mode: str = "cosine", constant: float | None = None) -> SimilarityMatrix:
    n = emb.u_vectors.shape[0]
    if mode.startswith("constant:"):
        mode, constant = parse_similarity_mode(mode)
    if mode == "constant":
        if constant is None or not 0.0 <= constant <= 1.0:
            raise ValueError(f"constant similarity must lie in [0, 1], got {constant}")
        vals = np.triu(np.full((n, n), float(constant)), 1)
    elif mode == "cosine":
        u = emb.u_vectors
        norms = np.linalg.norm(u, axis=1)
        gram = np.abs(u @ u.T)
        denom = np.outer(norms, norms)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(denom > 0, gram / np.where(denom > 0, denom, 1.0), 0.0)
        vals = np.triu(np.clip(vals, 0.0, 1.0), 1)
    else:
        raise ValueError(f"unknown similarity mode {mode!r}")
    vals.flags.writeable = False
    return SimilarityMatrix(values=vals, mode=mode, constant=constant)


def export_embeddings(emb: EmbeddingSet, path, which: str = "u") -> None:
    """Text matrix with a 3-line header: rows, cols, dtype."""
    m = emb.u_vectors if which == "u" else emb.v_vectors
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"rows {m.shape[0]}\ncols {m.shape[1]}\ndtype float64\n")
        np.savetxt(fh, m, fmt="%.17g")


def load_embedding_matrix(path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows, cols = int(lines[0].split()[1]), int(lines[1].split()[1])
    data = np.loadtxt(lines[3:], ndmin=2) if rows else np.zeros((0, cols))
    return data.reshape(rows, cols)


def export_similarity(sim: SimilarityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, c in sim.upper_items():
            fh.write(f"{i} {j} {c!r}\n")
