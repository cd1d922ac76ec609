# # Learning to select tests
#
# Each episode starts from an empty selection. The observation is the sum of the
# embeddings of everything still unselected or uncovered, and the mask hides tests
# that would cover nothing new. PPO learns a policy over this masked action space,
# and every complete trajectory it finds is a feasible reduced suite.

import numpy as np

from tsmin.agent import TrainConfig, train
from tsmin.embed import compute_embeddings, compute_similarity
from tsmin.graph import build_graph
from tsmin.instance import generate_synthetic
from tsmin.model import solve_greedy, solve_oracle, trip_objective

inst = generate_synthetic(16, 40, 6, 0.25, seed=11)
emb = compute_embeddings(build_graph(inst), 128)
sim = compute_similarity(emb)

res = train(inst, emb, sim, TrainConfig(total_timesteps=10_000, seed=0))
for rec in res.log:
    print(rec["iteration"], rec["timesteps"], round(rec["mean_return"], 3), round(rec["best_objective"], 3))

# Compare against the greedy heuristic and the exact optimum.

cfg = trip_objective(sim)
print("rl    ", res.solution.indices, round(res.solution.objective, 3))
print("greedy", solve_greedy(inst, cfg).indices, round(solve_greedy(inst, cfg).objective, 3))
print("exact ", solve_oracle(inst, cfg).indices, round(solve_oracle(inst, cfg).objective, 3))

# Returns climb as the policy stops picking redundant tests.

r = np.array(res.episode_returns)
print(r[: len(r) // 5].mean(), r[-len(r) // 5 :].mean())
