"""Graphs, edge ownership, and the consensus operator.

Edges get a canonical index (sorted by smaller endpoint, then larger) and
each edge is owned by its smaller endpoint; that convention decides which
agent stores and updates the edge multiplier.  The consensus operator maps
stacked duals to per-edge differences of the coupling estimates, and its
largest Gram eigenvalue enters the step-size rule.

Run from the repository root:  python demos/topology_tour.py
"""

import numpy as np

from dualprox import Graph, canonical_edge_order, check_connected, laplacian_spectral_radius
from dualprox import market_graph, max_lipschitz, suggest_step_sizes, build_market

# --- canonical ordering --------------------------------------------------------

scrambled = [(4, 5), (3, 1), (2, 1), (3, 4), (3, 2)]
print("scrambled edges:  ", scrambled)
print("canonical order:  ", canonical_edge_order(5, scrambled))
print()

# --- ownership -----------------------------------------------------------------

graph = market_graph()
print("market graph:", graph)
for i in range(1, 6):
    nbrs = graph.neighbors(i)
    print(f"  agent {i}: neighbors {list(nbrs.all)}, owns edges to {list(nbrs.owned)}, "
          f"receives multipliers from {list(nbrs.incoming)}")
print("connected:", check_connected(graph))
print()

# --- the consensus operator, matrix-free ----------------------------------------

inc = graph.incidence(b_dim=1)
lam = np.hstack([np.full((5, 1), -8.1), np.zeros((5, 1))])  # equal estimates
print("per-edge differences at consensus:", inc.apply_m(lam).ravel())
lam[2, 0] = -7.9  # perturb agent 3's estimate
print("after perturbing agent 3:         ", inc.apply_m(lam).ravel())
print()

# --- spectral radius and the step rule -------------------------------------------

est = laplacian_spectral_radius(graph)
print(f"largest Laplacian eigenvalue: {est.value:.6f} "
      f"(power iteration, {est.iterations} iterations; bound {est.upper_bound})")

instance = build_market()
h = max_lipschitz(instance)
for gamma in (0.5, 1.0, 5.0):
    steps = suggest_step_sizes(h, est.value, gamma)
    print(f"  gamma = {gamma:4.1f} -> c = {steps.c:.6f}")
print()

# --- a bigger network ------------------------------------------------------------

ring = Graph(12, [(i, i + 1) for i in range(1, 12)] + [(1, 12)])
ring_est = laplacian_spectral_radius(ring)
print(f"12-ring spectral radius: {ring_est.value:.6f} (an even ring hits the "
      f"value 4 exactly)")
