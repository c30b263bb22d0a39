import numpy as np
import pytest
from hypothesis import given, strategies as st

from isewalk.graph import RootedGraph
from isewalk.models import ModelSpec, path_graph, random_bubbly_graph, sample_graph, sample_marks
from isewalk.skeleton import build_skeleton
from isewalk.treebm import skeleton_vertex_chain
from isewalk.walks import (WalkTrace, expected_sojourns, exponent_stats, log_checkpoints, srw,
                           time_change_profiles, trace_on_skeleton, walk_curves,
                           walk_trace_on_skeleton)

seeds = st.integers(0, 2 ** 32 - 1)


def tree_like_case(seed, n_max=120):
    rng = np.random.default_rng(seed)
    g = random_bubbly_graph(int(rng.integers(10, n_max)), rng)
    cuts = g.cut_decomposition
    for _ in range(30):
        marks = sample_marks(g, cuts, int(rng.integers(1, 6)), rng=rng)
        tree = build_skeleton(g, marks, cuts)[1]
        if tree is not None:
            return g, tree
    return g, build_skeleton(g, sample_marks(g, cuts, 1, rng=rng), cuts)[1]


def dense_sojourn(g, vstar, x):
    # absorbing chain solve: mean time and exit law from x to vstar \ {x}
    A = g.adjacency.toarray()
    P = A / A.sum(1, keepdims=True)
    absorb = [v for v in vstar if v != x]
    keep = [v for v in range(g.n_vertices) if v not in absorb]
    Q = P[np.ix_(keep, keep)]
    I = np.eye(len(keep))
    i = keep.index(x)
    t = np.linalg.solve(I - Q, np.ones(len(keep)))[i]
    H = np.linalg.solve(I - Q, P[np.ix_(keep, absorb)])[i]
    return t, dict(zip(absorb, H))


# --- walks and traces -----------------------------------------------------------------

def test_zero_steps():
    w = srw(path_graph(3), 0, np.random.default_rng(0))
    assert w.vertices.tolist() == [0]


def test_single_edge_alternates():
    w = srw(path_graph(2), 9, np.random.default_rng(0))
    assert w.vertices.tolist() == [0, 1] * 5


def test_degree_three_vertex_splits_evenly():
    g = RootedGraph(4, np.array([[0, 1], [0, 2], [0, 3]]), 0)
    w = srw(g, 200_000, np.random.default_rng(1))
    from_centre = w.vertices[1::2]
    freq = np.bincount(from_centre, minlength=4)[1:] / from_centre.size
    assert np.allclose(freq, 1 / 3, atol=0.01)


@given(st.integers(0, 300), seeds)
def test_walk_moves_along_edges(steps, seed):
    g = random_bubbly_graph(50, np.random.default_rng(seed))
    w = srw(g, steps, np.random.default_rng(seed))
    A = g.adjacency
    assert w.steps == steps
    assert all(A[a, b] for a, b in zip(w.vertices[:-1], w.vertices[1:]))


def test_trace_example():
    rec = trace_on_skeleton(WalkTrace(np.array([0, 1, 0, 1, 2])), [0, 2])
    assert rec.J.tolist() == [0, 2] and rec.A.tolist() == [0, 4]
    assert rec.S(3).tolist() == 1 and rec.S(5).tolist() == 2


@given(seeds)
def test_fully_selected_tree_has_identity_clock(seed):
    rng = np.random.default_rng(seed)
    g = sample_graph(ModelSpec("gw_tree", 200), rng)
    rec = walk_trace_on_skeleton(g, 500, np.ones(g.n_vertices, bool), rng)
    assert np.array_equal(rec.A, np.arange(501))


@given(seeds)
def test_fused_trace_matches_two_pass(seed):
    g, tree = tree_like_case(seed)
    vstar = tree.graph_vertex[tree.is_vstar]
    a = walk_trace_on_skeleton(g, 3000, vstar, np.random.default_rng(seed))
    b = trace_on_skeleton(srw(g, 3000, np.random.default_rng(seed)), vstar)
    assert np.array_equal(a.J, b.J) and np.array_equal(a.A, b.A)


# --- sojourns and the trace chain ---------------------------------------------------------

@given(seeds)
def test_exact_sojourns_match_dense_solve(seed):
    g, tree = tree_like_case(seed, 60)
    vstar = tree.graph_vertex[tree.is_vstar].tolist()
    if len(vstar) < 2:
        return
    table = expected_sojourns(g, vstar)
    for i, x in enumerate(table.vertices.tolist()):
        t, law = dense_sojourn(g, vstar, x)
        assert table.expected[i] == pytest.approx(t, rel=1e-9)
        got = dict(zip(table.targets[i].tolist(), table.probs[i]))
        for y, p in law.items():
            assert got.get(y, 0.0) == pytest.approx(p, abs=1e-9)


def test_monte_carlo_sojourns_agree_with_exact():
    g, tree = tree_like_case(11)
    vstar = tree.graph_vertex[tree.is_vstar]
    ex = expected_sojourns(g, vstar)
    mc = expected_sojourns(g, vstar, "monte_carlo", 20_000, np.random.default_rng(2))
    assert np.allclose(mc.expected, ex.expected, rtol=0.05)
    with pytest.raises(ValueError):
        expected_sojourns(g, vstar, "bogus")


@given(seeds)
def test_graph_exit_law_equals_tree_chain(seed):
    g, tree = tree_like_case(seed)
    if tree.is_vstar.sum() < 2:
        return
    table = expected_sojourns(g, tree.graph_vertex[tree.is_vstar])
    targets, probs, _ = skeleton_vertex_chain(tree)
    row = {int(v): i for i, v in enumerate(table.vertices)}
    for x in np.flatnonzero(tree.is_vstar):
        tree_law = dict(zip(tree.graph_vertex[targets[x]].tolist(), probs[x]))
        i = row[int(tree.graph_vertex[x])]
        graph_law = dict(zip(table.targets[i].tolist(), table.probs[i]))
        for y in set(tree_law) | set(graph_law):
            assert tree_law.get(y, 0.0) == pytest.approx(graph_law.get(y, 0.0), abs=1e-8)


def test_trace_chain_transitions_match_tree_chain():
    g, tree = tree_like_case(5)
    vstar = tree.graph_vertex[tree.is_vstar]
    rng = np.random.default_rng(3)
    rec = walk_trace_on_skeleton(g, 2_000_000, vstar, rng)
    rec_J = rec.J[:100_001]
    targets, probs, _ = skeleton_vertex_chain(tree)
    total, weighted = 0, 0.0
    for x in np.flatnonzero(tree.is_vstar):
        gx = int(tree.graph_vertex[x])
        nxt = rec_J[1:][rec_J[:-1] == gx]
        if nxt.size == 0:
            continue
        want = dict(zip(tree.graph_vertex[targets[x]].tolist(), probs[x]))
        ys, cnt = np.unique(nxt, return_counts=True)
        emp = dict(zip(ys.tolist(), cnt / nxt.size))
        tv = 0.5 * sum(abs(emp.get(y, 0) - want.get(y, 0)) for y in set(emp) | set(want))
        weighted += tv * nxt.size
        total += nxt.size
    assert total >= 100_000 - 1
    assert weighted / total < 0.02


# --- time-change profiles -------------------------------------------------------------

def test_time_change_gap_on_gw_trees():
    gaps = []
    for seed in range(4):
        rng = np.random.default_rng(seed)
        g = sample_graph(ModelSpec("gw_tree", 10_000), rng)
        cuts = g.cut_decomposition
        marks = sample_marks(g, cuts, 10, rng=rng)
        tree = build_skeleton(g, marks, cuts)[1]
        vstar = tree.graph_vertex[tree.is_vstar]
        rec = walk_trace_on_skeleton(g, 10 * 10 ** 6, vstar, rng)
        prof = time_change_profiles(g, tree, rec, cuts=cuts)
        mid = slice(prof.t.size // 4, 3 * prof.t.size // 4)
        gaps.append(np.median(prof.relative_gap("tilde")[mid]))
        assert prof.to_csv().startswith("t,m,raw,hat,tilde")
    assert np.median(gaps) < 0.10


def test_time_change_rejects_foreign_tree():
    g = path_graph(6)
    tree = build_skeleton(g, [4])[1]
    rec = walk_trace_on_skeleton(g, 100, tree.graph_vertex[tree.is_vstar], np.random.default_rng(0))
    with pytest.raises(ValueError):
        time_change_profiles(path_graph(7), tree, rec)


# --- exponents ---------------------------------------------------------------------------

def test_path_displacement_exponent():
    g = path_graph(100_000)
    cps = log_checkpoints(10, 10_000, 12)
    rng = np.random.default_rng(4)
    curves = [walk_curves(g, cps, 200, rng) for _ in range(10)]
    fit = exponent_stats(curves, window=(100, 10_000), n_boot=200)
    assert abs(fit["euclidean_slope"].slope - 0.5) <= 0.02
    assert abs(fit["intrinsic_slope"].slope - 0.5) <= 0.02
    assert fit["return_slope"] is None


def test_exponent_window_too_short():
    g = path_graph(1000)
    cps = log_checkpoints(10, 100, 6)
    curves = [walk_curves(g, cps, 10, np.random.default_rng(5))]
    with pytest.raises(ValueError):
        exponent_stats(curves, window=(10, 30))


def test_return_curves_only_count_even_times():
    g = path_graph(2000)
    c = walk_curves(g, [5, 10, 20], 500, np.random.default_rng(6), returns=True)
    assert c.has_returns and np.all(c.mean("ret") > 0) and np.all(c.mean("ret") <= 1)


def test_log_checkpoints_are_unique_and_sorted():
    cps = log_checkpoints(1, 50, 40)
    assert np.all(np.diff(cps) > 0) and cps[0] == 1 and cps[-1] == 50
