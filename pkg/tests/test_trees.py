import numpy as np
import pytest
from hypothesis import given, strategies as st

from isewalk.continuum import sample_kise
from isewalk.trees import ReducedSpatialTree, reduce_rooted

seeds = st.integers(0, 2 ** 32 - 1)


def y_tree():
    # root -> b (1), b -> x0 (2), b -> x1 (3)
    return ReducedSpatialTree(np.array([-1, 0, 1, 1]), np.array([0.0, 1.0, 2.0, 3.0]),
                              ((), (), (0,), (1,)), resistance=np.array([0.0, 1.0, 2.0, 3.0]),
                              position=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [1.0, -3.0]]))


def test_basic_views():
    t = y_tree()
    assert t.depth.tolist() == [0, 1, 3, 4]
    assert t.distance(2, 3) == 5
    assert t.shape() == (((), ()),)
    assert t.mark_vertex(1) == 3
    assert t.is_leaf(2) and not t.is_leaf(1)


def test_canonical_orders_children_by_embedding():
    c = y_tree().canonical()
    # the child subtree containing the smaller coordinate tuple comes first
    assert c.position[2].tolist() == [1.0, -3.0]
    assert c.marks_at[2] == (1,)


@given(seeds)
def test_canonical_is_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    t = sample_kise(4, 500, 3, rng).tree
    order = [0]
    # random depth-first relabelling
    stack = [0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        kids = list(t.children[v])
        rng.shuffle(kids)
        stack.extend(kids)
    shuffled = t.permuted(np.array(order))
    assert shuffled.canonical().to_json() == t.canonical().to_json()


def test_reduce_drops_degree_two_vertices():
    # path root - 1 - 2 - 3 with a side branch at 2 leading to 4
    parent = np.array([-1, 0, 1, 2, 2])
    length = np.array([0.0, 1.0, 1.0, 1.0, 2.0])
    t = reduce_rooted(parent, length, length.copy(), None, [3, 4])
    assert t.n_vertices == 4
    assert sorted(t.length.tolist()) == [0.0, 1.0, 2.0, 2.0]
    assert t.total_resistance == pytest.approx(5.0)


def test_reduce_single_mark():
    parent = np.array([-1, 0, 1, 2])
    t = reduce_rooted(parent, np.array([0.0, 1, 1, 1]), None, None, [3])
    assert t.n_vertices == 2 and t.total_length == 3


def test_scaled():
    t = y_tree().scaled(2.0, 0.5)
    assert t.total_length == 12 and np.allclose(t.position[2], [0.5, 1.0])
    assert t.total_resistance == 12


def test_newick_round_trip():
    t = y_tree().canonical()
    back = ReducedSpatialTree.from_newick(t.to_newick(), t.coordinate_table())
    assert back.shape() == t.shape()
    assert np.allclose(back.length, t.length)
    assert np.allclose(back.position, t.position)
    assert back.marks_at == t.marks_at


@given(seeds)
def test_dict_round_trip(seed):
    t = sample_kise(3, 400, 2, np.random.default_rng(seed)).tree
    back = ReducedSpatialTree.from_dict(t.to_dict())
    assert back.to_json() == t.to_json()


def test_point_on_edge_interpolates():
    t = y_tree()
    pts = t.point_on_edge(2, np.array([0.0, 0.5, 1.0]))
    assert np.allclose(pts, [[1, 0], [1, 1], [1, 2]])
