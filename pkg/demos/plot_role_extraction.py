"""
Extracting roles from a sampled digraph
=======================================

Three groups of 100 nodes each.  Group a links to group a+1 (mod 3) with
probability 0.6 and to the other two groups with probability 0.4, so no
group is a community: every node has about as many edges inside its own
group as outside.  The roles are nevertheless visible in the connection
pattern, and the similarity matrix S_1 = A A^T + A^T A recovers them.
"""

import numpy as np

from npsroles import cycle_model, extract_roles, misclassification, sample_adjacency, shuffle_nodes
from npsroles.sbm import block_densities

model = cycle_model(0.6)
graph, truth = sample_adjacency(model, 10, seed=1)

# hide the ordering so the algorithm cannot use it
graph, truth, _ = shuffle_nodes(graph, truth, seed=2)
print(f"{graph.n_nodes} nodes, {graph.n_edges} edges")
print("block densities\n", np.round(block_densities(graph, truth), 3))

# S_1 only (k=1); beta plays no role here
res = extract_roles(graph, 3, k=1, seed=0)
print("leading eigenvalues of S_1:", np.round(res.spectrum.eigenvalues[:6], 1))
print("estimated rank:", res.spectrum.estimated_rank)
print("misclassification error:", misclassification(truth, res.assignment).value)

# ten steps of the recurrence with beta^2 = 1 / (2 ||Gamma_A||)
res10 = extract_roles(graph, 3, "half-gamma", k=10, seed=0)
print(f"k=10, beta={res10.beta:.3g}: error", misclassification(truth, res10.assignment).value)

# asking for the wrong number of roles raises a flag, the partition is still computed
res4 = extract_roles(graph, 4, seed=0)
print("q=4 rank warning:", res4.rank_warning)
