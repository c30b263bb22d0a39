import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from isewalk.models import (ModelSpec, gen_brw_trace, gen_gw_tree, lukasiewicz_rotate, path_graph,
                            sample_graph, sample_marks, tree_parents)


def test_gw_small_sizes():
    g1 = gen_gw_tree(1, rng=np.random.default_rng(0))
    assert g1.n_vertices == 1 and g1.n_edges == 0
    g2 = gen_gw_tree(2, rng=np.random.default_rng(0))
    assert g2.n_vertices == 2 and g2.edges.tolist() == [[0, 1]]


@given(st.integers(1, 400), st.sampled_from(["geometric", "poisson", "binary"]), st.integers(0, 2 ** 32 - 1))
def test_gw_tree_has_n_vertices(n, law, seed):
    if law == "binary" and n % 2 == 0:
        return
    g = gen_gw_tree(n, law, np.random.default_rng(seed))
    assert g.n_vertices == n and g.n_edges == n - 1 and g.is_tree


@given(st.lists(st.integers(0, 4), min_size=1, max_size=60).filter(lambda xs: sum(xs) >= len(xs) - 1),
       st.integers(0, 2 ** 32 - 1))
def test_lukasiewicz_rotation(xs, seed):
    # pad with leaves until the increments sum to -1
    xi = np.array(xs + [0] * (sum(xs) - len(xs) + 1))
    np.random.default_rng(seed).shuffle(xi)
    s = np.cumsum(lukasiewicz_rotate(xi) - 1)
    assert s[-1] == -1 and np.all(s[:-1] >= 0)


def test_gw_geometric_is_uniform_on_small_trees():
    # geometric GW conditioned on n vertices is uniform over plane trees:
    # for n = 4 the five plane trees are equally likely
    rng = np.random.default_rng(1)
    counts = {}
    for _ in range(5000):
        g = gen_gw_tree(4, "geometric", rng)
        _, parent = tree_parents(g)
        key = tuple(parent.tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 5
    assert stats.chisquare(list(counts.values())).pvalue > 0.01


def test_brw_single_vertex_at_origin():
    g = gen_brw_trace(gen_gw_tree(1, rng=np.random.default_rng(0)), 3, np.random.default_rng(0))
    assert g.n_vertices == 1 and g.location.tolist() == [[0, 0, 0]]


def test_brw_path_in_one_dimension_is_interval():
    rng = np.random.default_rng(2)
    g = gen_brw_trace(path_graph(200), 1, rng)
    xs = np.sort(g.location[:, 0])
    assert np.array_equal(xs, np.arange(xs[0], xs[-1] + 1))


@given(st.integers(2, 300), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_brw_edges_are_unit_lattice_steps(n, d, seed):
    rng = np.random.default_rng(seed)
    g = gen_brw_trace(gen_gw_tree(n, "geometric", rng), d, rng)
    diff = np.abs(g.location[g.edges[:, 0]] - g.location[g.edges[:, 1]]).sum(1)
    assert np.all(diff == 1)
    assert np.unique(g.location, axis=0).shape[0] == g.n_vertices


def _first_order_coincidence(tree, d):
    _, p = tree_parents(tree)
    n = tree.n_vertices
    has_parent = p >= 0
    grand = np.sum(has_parent & (p[np.where(has_parent, p, 0)] >= 0))
    kids = np.bincount(p[has_parent], minlength=n)
    sib = np.sum(kids * (kids - 1) / 2)
    return (grand + sib) / (2 * d) / n


def test_brw_coincidence_matches_distance_two_prediction():
    # lattice points shared by tree vertices come mostly from pairs at tree
    # distance two (back-steps and siblings), each colliding with prob 1/(2d)
    for seed in range(3):
        rng = np.random.default_rng(seed)
        t = gen_gw_tree(10_000, "geometric", rng)
        g = gen_brw_trace(t, 14, rng)
        frac = 1 - g.n_vertices / t.n_vertices
        pred = _first_order_coincidence(t, 14)
        assert 0.9 * pred <= frac <= 1.3 * pred


@pytest.mark.xfail(strict=True, reason="distance-two collisions alone give about 7% at d=14")
def test_brw_coincidence_below_two_percent():
    rng = np.random.default_rng(0)
    t = gen_gw_tree(10_000, "geometric", rng)
    g = gen_brw_trace(t, 14, rng)
    assert 1 - g.n_vertices / t.n_vertices < 0.02


def test_marks_uniform_on_path_cut_points():
    g = path_graph(20)
    cuts = g.cut_decomposition
    marks = sample_marks(g, cuts, 20_000, "uniform_cut_points", np.random.default_rng(3))
    counts = np.bincount(marks, minlength=20)[cuts.cut_points]
    assert set(marks.tolist()) <= set(cuts.cut_points.tolist())
    assert stats.chisquare(counts).pvalue > 0.01


def test_marks_count_zero():
    g = path_graph(5)
    assert sample_marks(g, None, 0, rng=np.random.default_rng(0)).size == 0


def test_projected_marks_size_biased_on_tree():
    rng = np.random.default_rng(4)
    g = gen_gw_tree(60, "geometric", rng)
    _, parent = tree_parents(g)
    is_leaf = np.bincount(parent[parent >= 0], minlength=60) == 0
    # enumeration oracle: internal vertices keep their mass, leaves move to their parent
    target = np.where(is_leaf & (parent >= 0), parent, np.arange(60))
    want = np.bincount(target, minlength=60) / 60
    marks = sample_marks(g, None, 60_000, "uniform_vertices_projected", rng)
    got = np.bincount(marks, minlength=60)
    support = want > 0
    assert np.all(got[~support] == 0)
    assert stats.chisquare(got[support], 60_000 * want[support]).pvalue > 0.01


def test_model_spec_validation_and_sampling():
    with pytest.raises(ValueError):
        ModelSpec("nonsense")
    with pytest.raises(ValueError):
        ModelSpec("gw_tree", n=0)
    rng = np.random.default_rng(5)
    assert sample_graph(ModelSpec("path", 7), rng).n_vertices == 7
    g = sample_graph(ModelSpec("brw_trace", 300, d=4), rng)
    assert g.location.shape[1] == 4
    h = sample_graph(ModelSpec("gw_shortcuts", 300, shortcuts=5), rng)
    assert h.n_edges == 299 + 5


def test_sampling_is_reproducible():
    a = sample_graph(ModelSpec("brw_trace", 500), np.random.default_rng(9))
    b = sample_graph(ModelSpec("brw_trace", 500), np.random.default_rng(9))
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.location, b.location)
