"""Sample a lattice trace, build its skeleton and compare resistances."""
import numpy as np

from isewalk.graph import ResistanceSolver
from isewalk.models import ModelSpec, sample_graph, sample_marks
from isewalk.skeleton import build_skeleton, reduce_skeleton, sausage_diameters

rng = np.random.default_rng(2024)
g = sample_graph(ModelSpec("brw_trace", 5000, d=14), rng)
cuts = g.cut_decomposition
print(f"trace: {g.n_vertices} vertices, {g.n_edges} edges, {cuts.n_bubbles} bubbles")

for attempt in range(20):
    marks = sample_marks(g, cuts, 4, rng=rng)
    sk, tree = build_skeleton(g, marks, cuts)
    if tree is not None:
        break
print(f"marks {marks.tolist()}: skeleton with {tree.n_vertices} tree vertices "
      f"({int((tree.graph_vertex < 0).sum())} star centres)")

solver = ResistanceSolver(g)
sel = np.flatnonzero(tree.graph_vertex >= 0)
print("  pair         tree R      graph R")
for a, b in rng.choice(sel, (8, 2)):
    r_tree = tree.tree_resistance(a, b)
    r_graph = solver.resistance(int(tree.graph_vertex[a]), int(tree.graph_vertex[b]))
    print(f"{a:4d},{b:4d}  {r_tree:11.6f}  {r_graph:11.6f}")

red = reduce_skeleton(tree, marks)
print("reduced tree (newick):", red.to_newick())
dia = sausage_diameters(g, tree, cuts)
print(f"largest sausage: intrinsic diameter {dia['delta_intrinsic']}, lattice diameter {dia['delta_zd']}")
