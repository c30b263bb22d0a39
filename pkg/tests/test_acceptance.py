"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Sizes and tolerances are the contract values; a failure here is a finding,
not something to tune away.
"""
import filecmp
import math
import time

import numpy as np

from isewalk.cli import ExperimentConfig, run
from isewalk.conditions import check_G, check_R
from isewalk.graph import (ResistanceSolver, RootedGraph, StoppingRule, effective_resistance,
                           hitting_time_moments, verify_fourth_moment_bound, verify_variance_bound)
from isewalk.models import (ModelSpec, random_bubbly_graph, random_connected_graph, sample_graph,
                            sample_marks)
from isewalk.parallel import replica_seeds
from isewalk.skeleton import KIND_ARM, build_skeleton
from isewalk.treebm import (branch_point_hit_probability, crossing_local_time_estimate, discretize,
                            hit_distribution, local_times, segment_tree, simulate, star_tree)
from isewalk.walks import (exponent_stats, log_checkpoints, time_change_profiles, walk_curves,
                           walk_trace_on_skeleton)


def _tree_like_skeleton(g, rng, tries=20):
    cuts = g.cut_decomposition
    for _ in range(tries):
        K = int(rng.integers(1, 6))
        marks = sample_marks(g, cuts, K, "uniform_cut_points", rng)
        sk, tree = build_skeleton(g, marks, cuts)
        if tree is not None:
            return tree
    marks = sample_marks(g, cuts, 1, "uniform_cut_points", rng)
    return build_skeleton(g, marks, cuts)[1]


def test_criterion_01_star_triangle_resistance(criterion):
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst, triangles, pairs = 0.0, 0, 0
    for _ in range(1000):
        g = random_bubbly_graph(int(rng.integers(10, 501)), rng)
        tree = _tree_like_skeleton(g, rng)
        triangles += int(np.sum(tree.kind == KIND_ARM) // 3)
        sel = np.flatnonzero(tree.graph_vertex >= 0)
        solver = ResistanceSolver(g)
        for i in range(sel.size):
            for j in range(i + 1, sel.size):
                a, b = int(sel[i]), int(sel[j])
                want = solver.resistance(int(tree.graph_vertex[a]), int(tree.graph_vertex[b]))
                got = tree.tree_resistance(a, b)
                worst = max(worst, abs(got - want) / want)
                pairs += 1
    dt = time.time() - t0
    ok = worst <= 1e-8 and dt < 120
    criterion(1, "star-triangle resistance preservation", ok,
              f"1000 graphs, {pairs} pairs, {triangles} triangles expanded, max rel err {worst:.2e} "
              f"(tol 1e-8), {dt:.0f}s (limit 120s)")
    assert worst <= 1e-8
    assert triangles > 0


def test_criterion_02_commute_identity(criterion):
    t0 = time.time()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 101))
        g = random_connected_graph(n, int(rng.integers(0, n + 1)), rng)
        x, y = (int(v) for v in rng.choice(n, 2, replace=False))
        commute = hitting_time_moments(g, x, y, 1).moment(1) + hitting_time_moments(g, y, x, 1).moment(1)
        ident = 2.0 * g.n_edges * effective_resistance(g, x, y)
        worst = max(worst, abs(commute - ident) / ident)
    dt = time.time() - t0
    criterion(2, "commute-time identity", worst <= 1e-9 and dt < 120,
              f"10000 graphs, max rel err {worst:.2e} (tol 1e-9), {dt:.0f}s (limit 120s)")
    assert worst <= 1e-9


def test_criterion_03_variance_bound(criterion):
    t0 = time.time()
    path2 = RootedGraph(3, np.array([[0, 1], [1, 2]]), 0)
    spot = verify_variance_bound(path2, 0, 2)
    rng = np.random.default_rng(103)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 61))
        g = random_connected_graph(n, int(rng.integers(0, n + 1)), rng)
        x, y = (int(v) for v in rng.choice(n, 2, replace=False))
        violations += not verify_variance_bound(g, x, y)["holds"]
    dt = time.time() - t0
    spot_ok = math.isclose(spot["lhs"], 48.0, rel_tol=1e-12) and math.isclose(spot["rhs"], 256.0)
    ok = violations == 0 and spot_ok and dt < 180
    criterion(3, "second-moment commute bound", ok,
              f"10000 graphs, {violations} violations; path-of-2 lhs {spot['lhs']:.6g} rhs "
              f"{spot['rhs']:.6g} (want 48, 256), {dt:.0f}s (limit 180s)")
    assert violations == 0 and spot_ok


def test_criterion_04_fourth_moment(criterion):
    t0 = time.time()
    rng = np.random.default_rng(104)
    fixed = verify_fourth_moment_bound("rademacher", StoppingRule.parse("fixed:50"), 10 ** 6, rng)
    geo = verify_fourth_moment_bound("rademacher", StoppingRule.parse("geometric:0.5:100"), 10 ** 6, rng)
    ns = np.arange(1, 1001, dtype=float)
    exact_ok = bool(np.all(3 * ns ** 2 - 2 * ns <= 148 * (ns ** 2 + ns)))
    dt = time.time() - t0
    ok = fixed["holds"] and geo["holds"] and exact_ok and dt < 60
    criterion(4, "stopped fourth-moment bound, C=148", ok,
              f"fixed n=50 lhs {fixed['lhs_estimate']:.1f} (exact {fixed['lhs_exact']:.0f}) <= "
              f"{fixed['rhs']:.0f}; geometric lhs {geo['lhs_estimate']:.2f} <= {geo['rhs']:.0f}; "
              f"exact 3n^2-2n check n<=1000 {exact_ok}; {dt:.0f}s (limit 60s)")
    assert fixed["holds"] and geo["holds"] and exact_ok
    assert fixed["lhs_exact"] == 3 * 50 ** 2 - 2 * 50


def test_criterion_05_tree_bm_hitting_and_exit(criterion):
    t0 = time.time()
    rng = np.random.default_rng(105)
    N = 10 ** 5
    lines, ok = [], True

    net = discretize(segment_tree(2.0), h=0.25)
    s0 = int(np.argmin(np.abs(net.site_position[:, 0] - 0.5)))
    ends = net.vertex_site[[0, 1]]
    hit, _ = hit_distribution(net, ends, N, rng, start_site=s0)
    p = np.mean(hit == ends[0])
    sig = math.sqrt(0.75 * 0.25 / N)
    ok &= abs(p - 0.75) <= 3 * sig
    lines.append(f"segment P={p:.4f} vs 0.75 (3sd {3 * sig:.4f})")

    for arms in ((1, 1, 2), (1, 2, 3)):
        tree = star_tree(arms)
        net = discretize(tree, h=0.25)
        targets = net.vertex_site[[2, 3]]
        hit, _ = hit_distribution(net, targets, N, rng, start=1)
        want = branch_point_hit_probability(tree.distance(1, 2), tree.distance(1, 3), tree.distance(2, 3))
        p = np.mean(hit == targets[0])
        sig = math.sqrt(want * (1 - want) / N)
        ok &= abs(p - want) <= 3 * sig
        lines.append(f"star{arms} P={p:.4f} vs {want:.4f} (3sd {3 * sig:.4f})")

    net = discretize(segment_tree(1.0), h=1 / 16)
    _, tau = hit_distribution(net, net.vertex_site[[1]], N, rng, start=0)
    mean_tau = float(np.mean(tau))
    ok &= abs(mean_tau - 1.0) <= 0.02
    lines.append(f"exit time {mean_tau:.4f} vs 1.00 +- 0.02")
    dt = time.time() - t0
    criterion(5, "tree diffusion hitting and occupation", ok and dt < 300,
              "; ".join(lines) + f"; {dt:.0f}s (limit 300s)")
    assert ok


def test_criterion_06_local_time_normalization(criterion):
    t0 = time.time()
    rng = np.random.default_rng(106)
    tree = star_tree((1, 1, 2))
    t_max = 5.0
    worst, medians = 0.0, []
    hs = (1 / 8, 1 / 16, 1 / 32)
    for h in hs:
        net = discretize(tree, metric="resistance", h=h)
        gaps = []
        for _ in range(50):
            path = simulate(net, t_max, rng, start=1)
            field = local_times(path)
            worst = max(worst, abs(field.integral() - path.t) / path.t)
            gaps.append(crossing_local_time_estimate(field, level="piece").sup_gap)
        medians.append(float(np.median(gaps)))
    ratios = [medians[i + 1] / medians[i] for i in range(len(hs) - 1)]
    identity_ok = worst <= 1e-12
    halves = all(r <= 0.55 for r in ratios)
    dt = time.time() - t0
    criterion(6, "local-time normalization and crossing refinement", identity_ok and halves and dt < 300,
              f"integral identity max rel err {worst:.1e} over 150 paths; median sup gaps "
              f"{', '.join(f'{m:.3f}' for m in medians)} at h=1/8,1/16,1/32, halving ratios "
              f"{', '.join(f'{r:.2f}' for r in ratios)} (need <= 0.55), {dt:.0f}s")
    assert identity_ok
    assert all(r < 1 for r in ratios)
    assert halves


def test_criterion_07_resistance_condition_on_trees(criterion):
    rep = check_R(ModelSpec("gw_tree"), [1000, 10000], 50, np.random.default_rng(107))
    ratios = np.concatenate([c["ratios"] for c in rep.cells])
    dev = float(np.max(np.abs(ratios - 1.0)))
    ok = dev <= 1e-9 and rep.constants["rho_hat"] == 1.0
    criterion(7, "condition (R) on trees", ok,
              f"{ratios.size} replicas, max |R/d - 1| = {dev:.1e}, rho_hat {rep.constants['rho_hat']}")
    assert ok


def _exponent_ensemble(family, replicas, seed, returns):
    cps = log_checkpoints(10, 100_000, 16)
    rcps = log_checkpoints(10, 3000, 12)
    curves = []
    for ss in replica_seeds(seed, replicas):
        rng = np.random.default_rng(ss)
        g = sample_graph(ModelSpec(family, 100_000), rng)
        curves.append(walk_curves(g, cps, 50, rng))
        if returns:
            curves.append(walk_curves(g, rcps, 200, rng, returns=True))
    return exponent_stats(curves, window=(100, 100_000), n_boot=1000, rng=np.random.default_rng(seed))


def test_criterion_08_gw_intrinsic_exponent(criterion):
    t0 = time.time()
    f = _exponent_ensemble("gw_tree", 200, 108, False)["intrinsic_slope"]
    dt = time.time() - t0
    ok = abs(f.slope - 1 / 3) <= 0.05
    criterion(8, "GW intrinsic displacement exponent", ok and dt < 1200,
              f"slope {f.slope:.4f} +- {f.se:.4f} (target 1/3 +- 0.05), 200 trees n=1e5, {dt:.0f}s")
    assert ok


def test_criterion_09_brw_euclidean_and_return_exponents(criterion):
    t0 = time.time()
    fits = _exponent_ensemble("brw_trace", 100, 109, True)
    e, r = fits["euclidean_slope"], fits["return_slope"]
    dt = time.time() - t0
    ok = abs(e.slope - 1 / 6) <= 0.04 and abs(r.slope + 2 / 3) <= 0.1
    criterion(9, "BRW d=14 Euclidean and return exponents", ok and dt < 1800,
              f"euclidean {e.slope:.4f} +- {e.se:.4f} (1/6 +- 0.04), return {r.slope:.4f} +- "
              f"{r.se:.4f} (-2/3 +- 0.1), 100 traces n=1e5, {dt:.0f}s")
    assert ok


def test_criterion_10_time_change_linearity(criterion):
    t0 = time.time()
    n = 100_000
    cvs, gaps = [], []
    for ss in replica_seeds(110, 12):
        rng = np.random.default_rng(ss)
        g = sample_graph(ModelSpec("gw_tree", n), rng)
        cuts = g.cut_decomposition
        marks = sample_marks(g, cuts, 10, "uniform_cut_points", rng)
        _, tree = build_skeleton(g, marks, cuts)
        rec = walk_trace_on_skeleton(g, int(10 * n ** 1.5), tree.graph_vertex[tree.is_vstar], rng)
        prof = time_change_profiles(g, tree, rec, cuts=cuts)
        cvs.append(prof.cv)
        gaps.append(float(prof.relative_gap("tilde")[prof.t.size // 2]))
    cv, gap = float(np.median(cvs)), float(np.median(gaps))
    dt = time.time() - t0
    ok = cv < 0.10 and gap < 0.10
    criterion(10, "time-change linearity", ok and dt < 900,
              f"median CV {cv:.3f} (< 0.10), median mid-grid |raw - A~|/raw {gap:.3f} (< 0.10) "
              f"over 12 GW trees n=1e5 K=10, {dt:.0f}s")
    assert ok


def test_criterion_11_skeleton_functionals_match_crt(criterion):
    t0 = time.time()
    rng = np.random.default_rng(111)
    parts, ok = [], True
    for K in (1, 2, 3):
        rep = check_G(ModelSpec("gw_tree"), [100_000], K, 300, rng, crt_samples=2000, crt_steps=20_000)
        pmin = min(rep.pvalues["bonferroni"].values())
        ok &= pmin > 0.01
        parts.append(f"K={K} min Bonferroni p {pmin:.3f}")
    dt = time.time() - t0
    criterion(11, "condition (G) functionals vs continuum tree", ok and dt < 900,
              "; ".join(parts) + f" (need > 0.01), 300 skeletons n=1e5 per K, {dt:.0f}s")
    assert ok


def test_criterion_12_determinism_across_workers(criterion, tmp_path):
    configs = [
        {"subcommand": "skeleton", "model": {"family": "brw_trace", "n": 400}, "params": {"replicas": 6}},
        {"subcommand": "exponents", "model": {"family": "gw_tree", "n": 2000},
         "params": {"replicas": 6, "walks": 4, "checkpoints": [10, 400, 6], "return_walks": 10,
                    "return_checkpoints": [10, 100, 5], "bootstrap": 50}},
        {"subcommand": "tree-bm", "params": {"runs": 6, "t_max": 0.5}},
        {"subcommand": "conditions", "model": {"family": "gw_tree"},
         "params": {"checks": ["R", "S"], "n_grid": [300, 600], "K_grid": [2, 3], "replicas": 6}},
    ]
    same = True
    for k, data in enumerate(configs):
        dirs = []
        for w in (1, 4, 16):
            out = tmp_path / f"c{k}_w{w}"
            cfg = ExperimentConfig.from_dict({**data, "seed": 2 ** 63 + k}, workers=w, out=str(out))
            assert run(cfg) == 0
            dirs.append(out)
        for other in dirs[1:]:
            cmp = filecmp.dircmp(dirs[0], other)
            files = sorted(p.name for p in dirs[0].iterdir())
            match, mismatch, errors = filecmp.cmpfiles(dirs[0], other, files, shallow=False)
            same &= not mismatch and not errors and not cmp.left_only and not cmp.right_only
    criterion(12, "determinism across worker counts", same,
              f"{len(configs)} subcommands byte-identical for workers 1, 4, 16: {same}")
    assert same
