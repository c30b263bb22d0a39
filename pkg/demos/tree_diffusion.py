"""Brownian motion on a three-armed star: hitting laws and local times."""
import numpy as np

from isewalk.treebm import (branch_point_hit_probability, crossing_local_time_estimate, discretize,
                            exact_exit_times, exact_hit_probabilities, hit_distribution, local_times,
                            simulate, star_tree)

rng = np.random.default_rng(7)
arms = [1.0, 1.0, 2.0]
for h in (0.25, 0.125, 0.0625):
    net = discretize(star_tree(arms), h=h)
    targets = net.vertex_site[[2, 3]]
    hit, tau = hit_distribution(net, targets, 20_000, rng, start=1)
    exact = exact_hit_probabilities(net, targets)[net.vertex_site[1], 0]
    print(f"h={h:<7} sites={net.n_sites:3d}  P(hit leaf 2 first): simulated {np.mean(hit == targets[0]):.4f}"
          f"  lattice {exact:.4f}  closed form {branch_point_hit_probability(2, 3, 3):.4f}")

net = discretize(star_tree(arms), h=1 / 16)
print("mean exit time from leaf 1 to leaf 3:", exact_exit_times(net, [net.vertex_site[3]])[net.vertex_site[1]])

field = local_times(simulate(net, 20.0, rng))
est = crossing_local_time_estimate(field)
print(f"integral of local time {field.integral():.6f} (t = 20)")
for v, (a, b) in enumerate(zip(est.edge_estimate, est.edge_local_time), start=1):
    print(f"edge {v}: crossings x length {a:8.3f}   midpoint local time {b:8.3f}")
