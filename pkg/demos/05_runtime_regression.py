# # How runtime grows with instance size
#
# We time the full pipeline on a handful of random instances and fit
# runtime ~ b0 + b1 * tests/100 + b2 * statements/1000 + b3 * edges/100000.

import time

from tsmin.agent import TrainConfig, train
from tsmin.embed import compute_embeddings, compute_similarity
from tsmin.evalkit import fit_runtime_model
from tsmin.graph import build_graph
from tsmin.instance import generate_synthetic

samples = []
for seed, (n, s) in enumerate([(10, 30), (20, 60), (30, 120), (40, 200), (50, 300), (60, 150)]):
    inst = generate_synthetic(n, s, 8, 0.2, seed=seed)
    g = build_graph(inst)
    t0 = time.perf_counter()
    emb = compute_embeddings(g, 128)
    train(inst, emb, compute_similarity(emb), TrainConfig(total_timesteps=2_500, seed=seed))
    samples.append((n, s, g.edge_count, time.perf_counter() - t0))
    print(samples[-1])

fit = fit_runtime_model(samples)
print(fit.coefficients.round(3), round(fit.r_squared, 3))
print("predicted seconds for 100 tests:", round(fit.predict(100, 400, 8000), 2))
