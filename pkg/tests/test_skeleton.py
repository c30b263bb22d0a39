import numpy as np
import pytest
from hypothesis import given, strategies as st

from isewalk.graph import ResistanceSolver, RootedGraph
from isewalk.models import ModelSpec, path_graph, random_bubbly_graph, sample_graph, sample_marks
from isewalk.skeleton import (KIND_ARM, build_selected_skeleton, build_skeleton, expand_star_triangle,
                              is_asymptotically_tree_like, project_measure, reduce_skeleton,
                              sausage_diameters, sausage_projection, star_arms)


def graph(n, edges, root=0):
    return RootedGraph(n, np.array(edges), root)


def hub_triangle():
    # triangle 0-1-2 entered from the root 8 through 7, legs 1-3-4 and 2-5-6
    return graph(9, [[0, 1], [1, 2], [2, 0], [1, 3], [3, 4], [2, 5], [5, 6], [0, 7], [7, 8]], root=8)


def tree_like_case(seed):
    rng = np.random.default_rng(seed)
    g = random_bubbly_graph(int(rng.integers(10, 120)), rng)
    cuts = g.cut_decomposition
    for _ in range(30):
        marks = sample_marks(g, cuts, int(rng.integers(1, 6)), rng=rng)
        sk, tree = build_skeleton(g, marks, cuts)
        if tree is not None:
            return g, marks, tree
    marks = sample_marks(g, cuts, 1, rng=rng)
    return g, marks, build_skeleton(g, marks, cuts)[1]


seeds = st.integers(0, 2 ** 32 - 1)


# --- selected skeleton ------------------------------------------------------------

def test_selected_skeleton_on_path():
    g = path_graph(4)
    sk = build_selected_skeleton(g, None, [2])
    assert sk.vertices.tolist() == [0, 1, 2]
    assert sk.root_star == 0
    assert sk.adjacency == {(0, 1), (1, 2)}


def test_selected_skeleton_triangle_at_hub():
    sk = build_selected_skeleton(hub_triangle(), None, [3, 5])
    assert sk.max_clique == 3
    assert is_asymptotically_tree_like(sk)
    assert sk.root_star == 8
    assert {(1, 2), (1, 7), (2, 7), (1, 3), (2, 5), (7, 8)} <= sk.adjacency


def test_selected_skeleton_single_mark_at_root():
    g = path_graph(3)
    sk = build_selected_skeleton(g, None, [0])
    assert sk.vertices.tolist() == [0]


def test_mark_must_be_cut_point():
    with pytest.raises(ValueError):
        build_selected_skeleton(path_graph(3), None, [2])


def test_four_way_bubble_is_not_tree_like():
    k4 = [[a, b] for a in range(4) for b in range(a + 1, 4)]
    g = graph(8, k4 + [[1, 4], [2, 5], [3, 6], [7, 0]], root=7)
    sk = build_selected_skeleton(g, None, [1, 2, 3])
    assert sk.max_clique == 4
    assert not is_asymptotically_tree_like(sk)
    with pytest.raises(ValueError):
        expand_star_triangle(g, sk)


# --- star-triangle expansion ---------------------------------------------------------

def test_star_arms_resistances():
    pairs = {"kind": "resistance", frozenset("xy"): 1.0, frozenset("yz"): 2.0, frozenset("zx"): 3.0}
    arms = star_arms(pairs, "x", "y", "z")
    assert arms == {"x": pytest.approx(0.5), "y": pytest.approx(1 / 3), "z": pytest.approx(1.0)}


def test_star_arms_lengths():
    pairs = {"kind": "length", frozenset("xy"): 2, frozenset("xz"): 3, frozenset("yz"): 3}
    assert star_arms(pairs, "x", "y", "z") == {"x": 1, "y": 1, "z": 2}
    bad = {"kind": "length", frozenset("xy"): 1, frozenset("xz"): 1, frozenset("yz"): 5}
    with pytest.raises(ValueError):
        star_arms(bad, "x", "y", "z")


def test_path_skeleton_is_unchanged():
    g = path_graph(6)
    _, tree = build_skeleton(g, [4])
    assert tree.graph_vertex.tolist() == [0, 1, 2, 3, 4]
    assert np.allclose(tree.length[1:], 1) and np.allclose(tree.resistance[1:], 1)
    assert not np.any(tree.kind == KIND_ARM)


def test_hub_triangle_expansion():
    g = hub_triangle()
    _, tree = build_skeleton(g, [3, 5])
    centre = np.flatnonzero(tree.graph_vertex == -1)
    assert centre.size == 1
    arm = {int(tree.graph_vertex[v]): tree.length[v] if tree.parent[v] == centre[0] else tree.length[centre[0]]
           for v in _tree_neighbours(tree, int(centre[0]))}
    # Gromov products of d(7,1) = d(7,2) = 2, d(1,2) = 1
    assert arm == {7: pytest.approx(1.5), 1: pytest.approx(0.5), 2: pytest.approx(0.5)}
    i1, i2, i7 = tree.index_of[1], tree.index_of[2], tree.index_of[7]
    assert tree.tree_resistance(i1, i2) == pytest.approx(2 / 3)
    assert tree.tree_resistance(i7, i1) == pytest.approx(5 / 3)
    assert tree.position is None


def _tree_neighbours(tree, v):
    kids = np.flatnonzero(tree.parent == v).tolist()
    return kids + ([int(tree.parent[v])] if tree.parent[v] >= 0 else [])


@given(seeds)
def test_resistance_additivity(seed):
    g, _, tree = tree_like_case(seed)
    solver = ResistanceSolver(g)
    sel = np.flatnonzero(tree.graph_vertex >= 0)
    for a in sel:
        for b in sel:
            if a < b:
                want = solver.resistance(int(tree.graph_vertex[a]), int(tree.graph_vertex[b]))
                assert tree.tree_resistance(a, b) == pytest.approx(want, rel=1e-8)


@given(seeds)
def test_distance_preservation_and_arm_consistency(seed):
    g, _, tree = tree_like_case(seed)
    root_g = int(tree.graph_vertex[0])
    dist = g.bfs_distances(root_g)
    sel = np.flatnonzero(tree.graph_vertex >= 0)
    assert np.allclose(tree.depth[sel], dist[tree.graph_vertex[sel]])
    for c in np.flatnonzero(tree.graph_vertex == -1):
        nb = _tree_neighbours(tree, c)
        assert len(nb) == 3
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = nb[i], nb[j]
                dg = g.distance(int(tree.graph_vertex[a]), int(tree.graph_vertex[b]))
                assert tree.tree_distance(a, b) == pytest.approx(dg)


def test_star_centre_at_barycentre():
    # a unit square in Z^2 entered from the root 7, with pendant edges at 1 and 3
    loc = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [2, 0], [2, 1], [0, 2], [-1, 0]])
    g = RootedGraph(8, np.array([[0, 1], [1, 2], [2, 3], [3, 0], [1, 4], [2, 5], [3, 6], [0, 7]]),
                    7, location=loc)
    _, tree = build_skeleton(g, [1, 3])
    c = np.flatnonzero(tree.graph_vertex == -1)
    assert c.size == 1
    nb = _tree_neighbours(tree, int(c[0]))
    assert np.allclose(tree.position[c[0]], tree.position[nb].mean(0))


# --- measure ------------------------------------------------------------------------

def test_measure_on_path():
    g = path_graph(4)
    _, tree = build_skeleton(g, [2])
    assert project_measure(g, tree).tolist() == [2, 2, 1]


def test_measure_single_edge():
    g = path_graph(2)
    _, tree = build_skeleton(g, [0])
    assert project_measure(g, tree).tolist() == [1]


def test_measure_gw_total_mass():
    rng = np.random.default_rng(7)
    g = sample_graph(ModelSpec("gw_tree", 10_000), rng)
    marks = sample_marks(g, None, 5, rng=rng)
    _, tree = build_skeleton(g, marks)
    frac = project_measure(g, tree).sum() / (2 * g.n_edges)
    assert 0.99 < frac <= 1.0


@given(seeds)
def test_projection_lands_on_selected_vertices(seed):
    g, _, tree = tree_like_case(seed)
    proj = sausage_projection(g, tree)
    selected = set(tree.graph_vertex[tree.graph_vertex >= 0].tolist())
    assert set(proj.tolist()) <= selected
    assert project_measure(g, tree).sum() <= 2 * g.n_edges


# --- reduction ---------------------------------------------------------------------

def test_reduce_path_to_single_edge():
    g = path_graph(6)
    _, tree = build_skeleton(g, [4])
    red = reduce_skeleton(tree, [4])
    assert red.n_vertices == 2 and red.length.sum() == pytest.approx(4)


def test_reduce_y_shape():
    g = graph(7, [[0, 1], [1, 2], [2, 3], [1, 4], [4, 5], [3, 6]])
    _, tree = build_skeleton(g, [3, 4])
    red = reduce_skeleton(tree, [3, 4])
    assert red.n_vertices == 4


def test_reduce_gw_vertex_count():
    rng = np.random.default_rng(8)
    for _ in range(10):
        g = sample_graph(ModelSpec("gw_tree", 5000), rng)
        cuts = g.cut_decomposition
        marks = rng.choice(cuts.cut_points, 5, replace=False)
        _, tree = build_skeleton(g, marks, cuts)
        assert 6 <= reduce_skeleton(tree, marks).n_vertices <= 11


# --- sausage diameters ---------------------------------------------------------------

def test_diameters_on_fully_selected_path():
    g = path_graph(10)
    _, tree = build_skeleton(g, [8])
    d = sausage_diameters(g, tree)
    assert d["delta_intrinsic"] <= 1 and d["delta_zd"] <= 1


def test_diameter_of_pendant_bubble():
    cyc = [[4, 5], [5, 6], [6, 7], [7, 8], [8, 4]]
    g = graph(9, [[0, 1], [1, 2], [2, 3], [3, 4]] + cyc)
    _, tree = build_skeleton(g, [3])
    assert sausage_diameters(g, tree)["delta_intrinsic"] == 2


def test_diameters_decrease_on_nested_marks():
    rng = np.random.default_rng(9)
    g = sample_graph(ModelSpec("brw_trace", 3000, d=4), rng)
    cuts = g.cut_decomposition
    marks = rng.choice(cuts.cut_points, 40, replace=False)
    prev = None
    for K in (1, 5, 10, 20, 40):
        sk, tree = build_skeleton(g, marks[:K], cuts)
        if tree is None:
            break
        d = sausage_diameters(g, tree, cuts)
        if prev is not None:
            assert d["delta_intrinsic"] <= prev[0] and d["delta_zd"] <= prev[1]
        prev = (d["delta_intrinsic"], d["delta_zd"])


def test_skeleton_round_trip():
    g, _, tree = tree_like_case(3)
    from isewalk.skeleton import SkeletonTree
    back = SkeletonTree.from_dict(tree.to_dict())
    assert np.array_equal(back.parent, tree.parent)
    assert np.allclose(back.resistance, tree.resistance)
