# # Instances and the coverage graph
#
# A test-suite minimization instance is two binary matrices: which statements each
# test executes and which faults each test detects. Here we build the three-test
# example, look at it as a bipartite graph and write it to disk.

from tsmin.graph import build_graph, covers, neighbors
from tsmin.instance import generate_synthetic, save_instance, toy_instance, validate

inst = toy_instance()
print(inst.test_ids)
print(inst.stmt_matrix)
print(inst.fault_matrix)

# Tests sit on one side of the graph. Statements come first on the other side,
# followed by faults, so fault f4 is node 3 + 3 = 6.

g = build_graph(inst)
print(g.u_size, g.v_size, g.edge_count)
print([g.v_label(v) for v in neighbors(g, 0)])

# Selecting t1 and t2 covers every statement and every fault.

print(covers(g, [0, 1]).all(), covers(g, [1, 2]).all())

# Validation never raises; it reports what is wrong.

rep = validate(inst)
print(rep.ok, rep.stmt_density, rep.fault_density)

# Random instances are Bernoulli matrices with uncovered columns patched.

big = generate_synthetic(40, 120, 10, 0.2, seed=1)
print(validate(big).ok, build_graph(big).edge_count)
save_instance(big, "synthetic_40.json")
