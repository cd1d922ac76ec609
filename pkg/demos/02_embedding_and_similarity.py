# # Embedding tests and measuring redundancy
#
# The biadjacency matrix W of the coverage graph is factored with a truncated SVD,
# W ~ P S Q^T. Tests get P S^(1/2) and statements/faults get Q S^(1/2). Two tests
# with similar coverage end up with nearly parallel vectors.

import numpy as np

from tsmin.embed import compute_embeddings, compute_similarity
from tsmin.graph import build_graph
from tsmin.instance import toy_instance

inst = toy_instance()
g = build_graph(inst)
emb = compute_embeddings(g, k=128)

# k is clamped to the smaller side of W, so we get three dimensions here.

print(emb.k, emb.singular_values)
print(np.linalg.norm(emb.reconstruction() - g.biadjacency()))

# Cosine similarity, absolute value, so every entry lies in [0, 1].
# t2 and t3 share most of their coverage; t1 shares only s1 with t3.

sim = compute_similarity(emb)
for i, j, c in sim.upper_items():
    print(inst.test_ids[i], inst.test_ids[j], round(c, 4))

# The constant mode switches the learned signal off, which is useful as an ablation.

flat = compute_similarity(emb, "constant:0.5")
print(flat.label, flat.pair(0, 2))
