"""Statistical checks of the skeleton conditions and the tree metric D.

Each ``check_*`` function samples graphs from a model over a grid of sizes
(and mark counts), computes the relevant statistic per replica and returns a
:class:`ConditionReport`.  Replicas are seeded independently from the master
generator (see :mod:`isewalk.parallel`), so reports do not depend on the
number of workers.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .continuum import reduce_crt, sample_normalized_excursion
from .graph import effective_resistance
from .models import ModelSpec, sample_graph, sample_marks
from .parallel import replica_seeds, run_replicas
from .skeleton import (SkeletonTree, build_selected_skeleton, expand_star_triangle,
                       is_asymptotically_tree_like, reduce_skeleton, sausage_diameters)
from .trees import ReducedSpatialTree

__all__ = [
    "ConditionReport",
    "tree_distance_D",
    "check_S",
    "check_G",
    "check_V",
    "check_R",
    "check_delta_dense",
    "volume_discrepancy",
    "tree_functionals",
    "crt_functionals",
    "config_hash",
    "SIGNIFICANCE",
]

SIGNIFICANCE = 0.01
D_GRID = 65


def config_hash(config: dict) -> str:
    """Short SHA-256 of a canonical JSON dump."""
    blob = json.dumps(config, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "to_dict"):
        return x.to_dict()
    raise TypeError(f"not serializable: {type(x)}")


@dataclass
class ConditionReport:
    """Outcome of one condition check.

    ``cells`` holds one dict of statistics per grid cell, ``constants`` the
    estimated model constants, ``pvalues`` named test p-values and
    ``verdict`` the overall pass/fail of the trend or goodness-of-fit tests.
    """

    condition: str
    cells: list
    constants: dict
    pvalues: dict
    verdict: bool
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        return {"condition": self.condition, "verdict": bool(self.verdict),
                "constants": self.constants, "pvalues": self.pvalues, "cells": self.cells,
                "notes": self.notes, "config": self.config, "config_hash": self.config_hash,
                "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_jsonable)

    def to_csv(self) -> str:
        keys = sorted({k for c in self.cells for k, v in c.items() if np.isscalar(v) or v is None})
        buf = io.StringIO()
        buf.write(",".join(keys) + "\n")
        for c in self.cells:
            buf.write(",".join(_fmt(c.get(k)) for k in keys) + "\n")
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------------
# metric D


def tree_distance_D(a: ReducedSpatialTree, b: ReducedSpatialTree, grid: int = D_GRID) -> float:
    """``min(d1 + d2, 1)`` for two ordered trees, 1 when shapes differ.

    ``d1`` is the largest edge-length difference between corresponding edges
    and ``d2`` the largest distance between embedded points matched by the
    edge-affine correspondence, evaluated at ``grid`` points per edge.
    """
    if a.shape() != b.shape():
        return 1.0
    if a.n_vertices <= 1:
        d1 = 0.0
    else:
        d1 = float(np.max(np.abs(a.length[1:] - b.length[1:])))
    if (a.position is None) != (b.position is None):
        raise ValueError("either both trees or neither must carry an embedding")
    d2 = 0.0
    if a.position is not None:
        if a.dim != b.dim:
            return 1.0
        d2 = float(np.linalg.norm(a.position[0] - b.position[0]))
        alpha = np.linspace(0.0, 1.0, grid)
        for v in range(1, a.n_vertices):
            pa = a.point_on_edge(v, alpha)
            pb = b.point_on_edge(v, alpha)
            d2 = max(d2, float(np.max(np.linalg.norm(pa - pb, axis=1))))
    return min(d1 + d2, 1.0)


# --------------------------------------------------------------------------
# shared helpers


def _mrca(tree: ReducedSpatialTree, a: int, b: int) -> int:
    anc = set()
    v = a
    while v >= 0:
        anc.add(v)
        v = tree.parent[v]
    v = b
    while v not in anc:
        v = tree.parent[v]
    return int(v)


def tree_functionals(tree: ReducedSpatialTree, K: int) -> dict:
    """Scale-invariant functionals of a reduced tree with marks ``0..K-1``.

    K = 1: ``depth`` (kept for pairing across replicas).
    K = 2: ``branch_depth_fraction`` and ``arm_asymmetry``.
    K = 3: ``internal_fraction`` and ``height_fraction``.
    Every K: ``shape`` (canonical shape string).
    """
    out: dict = {"shape": repr(tree.shape())}
    total = tree.total_length
    mv = [tree.mark_vertex(i) for i in range(K)]
    depth = tree.depth
    if K == 1:
        out["depth"] = float(depth[mv[0]])
        if tree.position is not None:
            out["sq_disp"] = float(np.sum((tree.position[mv[0]] - tree.position[0]) ** 2))
    elif K == 2 and total > 0:
        b = _mrca(tree, mv[0], mv[1])
        a0, a1 = depth[mv[0]] - depth[b], depth[mv[1]] - depth[b]
        out["branch_depth_fraction"] = float(depth[b] / total)
        if a0 + a1 > 0:
            out["arm_asymmetry"] = float(abs(a0 - a1) / (a0 + a1))
    elif K >= 3 and total > 0:
        internal = sum(tree.length[v] for v in range(1, tree.n_vertices) if not tree.is_leaf(v))
        out["internal_fraction"] = float(internal / total)
        out["height_fraction"] = float(max(depth[m] for m in mv) / total)
    out["total_length"] = float(total)
    return out


def _pair_logratio(values):
    v = np.asarray(values, float)
    v = v[: 2 * (v.size // 2)].reshape(-1, 2)
    ok = (v[:, 0] > 0) & (v[:, 1] > 0)
    return np.log(v[ok, 0] / v[ok, 1])


def _crt_task(task, rng):
    K, n_steps = task
    exc = sample_normalized_excursion(n_steps, rng)
    return tree_functionals(reduce_crt(exc, rng.random(K)), K)


def crt_functionals(K: int, samples: int, rng: np.random.Generator, n_steps: int = 20_000,
                    workers: int = 1) -> list[dict]:
    """Functionals of ``samples`` reduced continuum trees with K uniform marks."""
    seeds = replica_seeds(rng, samples)
    return run_replicas(_crt_task, [(K, n_steps)] * samples, seeds, workers)


def _model(model) -> ModelSpec:
    if isinstance(model, dict):
        return ModelSpec(**model)
    return model


def _skeleton_task(task, rng):
    """One replica: graph, marks, skeleton, optional reduced tree and diameters."""
    model, n, K, want = task
    g = sample_graph(model, rng, n)
    cuts = g.cut_decomposition
    marks = sample_marks(g, cuts, K, model.mark_law, rng)
    sk = build_selected_skeleton(g, cuts, marks)
    out = {"tree_like": bool(is_asymptotically_tree_like(sk)), "n_vertices": g.n_vertices,
           "n_edges": g.n_edges}
    if not out["tree_like"]:
        return out
    tree = expand_star_triangle(g, sk, cuts)
    if "diam" in want:
        dia = sausage_diameters(g, tree, cuts)
        out["delta_intrinsic"] = dia["delta_intrinsic"]
        out["delta_zd"] = dia["delta_zd"]
    if "reduced" in want:
        red = reduce_skeleton(tree, marks)
        scale = g.n_vertices ** -0.5
        red = red.scaled(scale, g.n_vertices ** -0.25)
        out["functionals"] = tree_functionals(red, K)
        out["dim"] = red.dim
        if red.position is not None:
            mv = [red.mark_vertex(i) for i in range(K)]
            out["sq_disp"] = [float(np.sum((red.position[v] - red.position[0]) ** 2)) for v in mv]
            out["mark_depth"] = [float(red.depth[v]) for v in mv]
    if "volume" in want:
        nu, sup = volume_discrepancy(tree, g.n_vertices)
        out["nu_hat"] = nu
        out["nu_enumeration"] = 2.0 * g.n_edges / g.n_vertices
        out["sup_discrepancy"] = sup
        out["sup_relative"] = sup / nu if nu > 0 else float("nan")
    return out


def volume_discrepancy(tree: SkeletonTree, n: int) -> tuple[float, float]:
    """``(nu, sup_x |nu lambda(desc x) - mu(desc x)|)`` for a skeleton tree.

    ``lambda`` is resistance-Lebesgue probability below ``x`` and ``mu`` the
    tree measure of ``x`` and its descendants divided by ``n``.
    """
    lam = tree.subtree_resistance / tree.resistance.sum()
    mu = tree.subtree_measure / n
    nu = float(tree.measure.sum() / n)
    return nu, float(np.max(np.abs(nu * lam - mu)))


def _kendall(x, y) -> float:
    if len(set(x)) < 2 or len(set(y)) < 2:
        return 0.0
    return float(stats.kendalltau(x, y).statistic)


# --------------------------------------------------------------------------
# condition (S)


def check_S(model, n_grid, K_grid, replicas: int, eps: float, rng: np.random.Generator,
            workers: int = 1) -> ConditionReport:
    """Tree-likeness and sausage diameters across an (n, K) grid.

    Per cell: fraction of replicas whose skeleton is not tree-like, and the
    fractions with ``n^{-1/4} Delta_Zd > eps`` and ``n^{-1/2} Delta_int > eps``.
    The verdict asks for a non-increasing trend of the first in n and of the
    diameter medians in K.
    """
    model = _model(model)
    n_grid, K_grid = list(n_grid), list(K_grid)
    if not n_grid or not K_grid:
        raise ValueError("grids must be nonempty")
    tasks = [(model, int(n), int(K), ("diam",)) for n in n_grid for K in K_grid for _ in range(replicas)]
    res = run_replicas(_skeleton_task, tasks, replica_seeds(rng, len(tasks)), workers)
    cells = []
    i = 0
    for n in n_grid:
        for K in K_grid:
            chunk = res[i:i + replicas]
            i += replicas
            tl = [r for r in chunk if r["tree_like"]]
            di = np.array([r["delta_intrinsic"] for r in tl], float) * n ** -0.5
            dz = np.array([r["delta_zd"] for r in tl if r["delta_zd"] is not None], float) * n ** -0.25
            cells.append({
                "n": int(n), "K": int(K), "replicas": replicas,
                "p_not_tree_like": 1.0 - len(tl) / replicas,
                "p_intrinsic_exceeds": float(np.mean(di > eps)) if di.size else None,
                "p_zd_exceeds": float(np.mean(dz > eps)) if dz.size else None,
                "median_intrinsic": float(np.median(di)) if di.size else None,
                "median_zd": float(np.median(dz)) if dz.size else None,
            })
    tau_n = _kendall([c["n"] for c in cells], [c["p_not_tree_like"] for c in cells])
    trend_K = []
    for n in n_grid:
        row = [c for c in cells if c["n"] == n and c["median_intrinsic"] is not None]
        if len(row) >= 2:
            trend_K.append(_kendall([c["K"] for c in row], [c["median_intrinsic"] for c in row]))
    tau_K = float(np.mean(trend_K)) if trend_K else 0.0
    all_tree_like = all(c["p_not_tree_like"] == 0 for c in cells)
    verdict = (all_tree_like or tau_n <= 0) and (len(K_grid) < 2 or tau_K < 0)
    return ConditionReport("S", cells, {}, {"kendall_tau_not_tree_like_vs_n": tau_n,
                                            "kendall_tau_intrinsic_vs_K": tau_K}, verdict,
                           config={"model": model.to_dict(), "n_grid": n_grid, "K_grid": K_grid,
                                   "replicas": replicas, "eps": eps})


# --------------------------------------------------------------------------
# condition (G)


def check_G(model, n_grid, K: int, replicas: int, rng: np.random.Generator, crt_samples: int = 2000,
            crt_steps: int = 20_000, workers: int = 1) -> ConditionReport:
    """Compare scale-invariant functionals of rescaled reduced skeletons with
    those of reduced continuum trees (two-sample KS, chi-square on shapes,
    Bonferroni across all tests and grid cells).

    These are necessary conditions for convergence in D only.
    """
    model = _model(model)
    if K < 1:
        raise ValueError("K must be at least 1")
    n_grid = list(n_grid)
    crt = crt_functionals(K, crt_samples, rng, crt_steps, workers)
    tasks = [(model, int(n), K, ("reduced",)) for n in n_grid for _ in range(replicas)]
    res = run_replicas(_skeleton_task, tasks, replica_seeds(rng, len(tasks)), workers)
    names = {1: [], 2: ["branch_depth_fraction", "arm_asymmetry"],
             3: ["internal_fraction", "height_fraction"]}.get(K, ["internal_fraction", "height_fraction"])
    crt_total = np.mean([c["total_length"] for c in crt])
    cells, raw_p = [], {}
    constants = {}
    for j, n in enumerate(n_grid):
        chunk = res[j * replicas:(j + 1) * replicas]
        good = [r for r in chunk if r["tree_like"]]
        funcs = [r["functionals"] for r in good]
        cell = {"n": int(n), "K": K, "replicas": replicas, "dropped": replicas - len(good)}
        if K == 1:
            a = _pair_logratio([f["depth"] for f in funcs])
            b = _pair_logratio([c["depth"] for c in crt])
            p = stats.ks_2samp(a, b).pvalue if a.size and b.size else float("nan")
            raw_p[f"n={n}:depth_logratio"] = float(p)
        else:
            for name in names:
                a = np.array([f[name] for f in funcs if name in f])
                b = np.array([c[name] for c in crt if name in c])
                p = stats.ks_2samp(a, b).pvalue if a.size and b.size else float("nan")
                raw_p[f"n={n}:{name}"] = float(p)
            shapes = sorted({f["shape"] for f in funcs} | {c["shape"] for c in crt})
            table = np.array([[sum(f["shape"] == s for f in funcs) for s in shapes],
                              [sum(c["shape"] == s for c in crt) for s in shapes]])
            table = table[:, table.sum(0) > 0]
            if table.shape[1] > 1:
                raw_p[f"n={n}:shape"] = float(stats.chi2_contingency(table)[1])
        total = np.mean([f["total_length"] for f in funcs]) if funcs else float("nan")
        cell["sigma_d_hat"] = float(total / crt_total)
        sq = [x for r in good for x in r.get("sq_disp", [])]
        dep = [x for r in good for x in r.get("mark_depth", [])]
        if sq and good[0]["dim"]:
            cell["sigma_phi_hat"] = float(math.sqrt(np.mean(sq) / (good[0]["dim"] * np.mean(dep))))
        cells.append(cell)
        constants = {k: cell[k] for k in ("sigma_d_hat", "sigma_phi_hat") if k in cell}
    m = max(1, len(raw_p))
    adj = {k: min(1.0, v * m) for k, v in raw_p.items()}
    verdict = all(v > SIGNIFICANCE for v in adj.values() if not math.isnan(v))
    return ConditionReport("G", cells, constants, {"raw": raw_p, "bonferroni": adj}, verdict,
                           notes=["marginal functional tests are necessary conditions only"],
                           config={"model": model.to_dict(), "n_grid": n_grid, "K": K,
                                   "replicas": replicas, "crt_samples": crt_samples,
                                   "crt_steps": crt_steps})


# --------------------------------------------------------------------------
# condition (V)


def check_V(model, n_grid, K_grid, replicas: int, rng: np.random.Generator,
            workers: int = 1) -> ConditionReport:
    """Sup over skeleton vertices of ``|nu lambda(desc x) - mu(desc x)|``.

    ``lambda`` is the resistance-Lebesgue probability on the skeleton,
    ``mu`` the projected edge measure divided by n and ``nu`` its total mass.
    """
    model = _model(model)
    n_grid, K_grid = list(n_grid), list(K_grid)
    if not n_grid or not K_grid:
        raise ValueError("grids must be nonempty")
    tasks = [(model, int(n), int(K), ("volume",)) for n in n_grid for K in K_grid for _ in range(replicas)]
    res = run_replicas(_skeleton_task, tasks, replica_seeds(rng, len(tasks)), workers)
    cells = []
    i = 0
    for n in n_grid:
        for K in K_grid:
            chunk = [r for r in res[i:i + replicas] if r["tree_like"]]
            i += replicas
            sup = np.array([r["sup_discrepancy"] for r in chunk])
            nu = np.array([r["nu_hat"] for r in chunk])
            enum = np.array([r["nu_enumeration"] for r in chunk])
            cells.append({"n": int(n), "K": int(K), "replicas": replicas,
                          "median_sup": float(np.median(sup)) if sup.size else None,
                          "q90_sup": float(np.quantile(sup, 0.9)) if sup.size else None,
                          "nu_hat_mean": float(nu.mean()) if nu.size else None,
                          "nu_hat_cv": float(nu.std() / nu.mean()) if nu.size and nu.mean() > 0 else None,
                          "nu_enumeration_mean": float(enum.mean()) if enum.size else None})
    taus_n = []
    for K in K_grid:
        row = [c for c in cells if c["K"] == K and c["median_sup"] is not None]
        if len(row) >= 2:
            taus_n.append(_kendall([c["n"] for c in row], [c["median_sup"] for c in row]))
    taus_K = []
    for n in n_grid:
        row = [c for c in cells if c["n"] == n and c["median_sup"] is not None]
        if len(row) >= 2:
            taus_K.append(_kendall([c["K"] for c in row], [c["median_sup"] for c in row]))
    tau_n = float(np.mean(taus_n)) if taus_n else 0.0
    tau_K = float(np.mean(taus_K)) if taus_K else 0.0
    last = [c for c in cells if c["n"] == max(n_grid)]
    constants = {"nu_hat": float(np.mean([c["nu_hat_mean"] for c in last]))}
    # at fixed K the discrepancy has a nonzero limit; it vanishes only as K grows
    verdict = tau_K < 0 if len(K_grid) >= 2 else tau_n <= 0
    pvals = {"kendall_tau_sup_vs_n": tau_n, "kendall_tau_sup_vs_K": tau_K}
    return ConditionReport("V", cells, constants, pvals, verdict,
                           config={"model": model.to_dict(), "n_grid": n_grid, "K_grid": K_grid,
                                   "replicas": replicas})


# --------------------------------------------------------------------------
# condition (R)


def _resistance_task(task, rng):
    model, n = task
    g = sample_graph(model, rng, n)
    cuts = g.cut_decomposition
    v = int(sample_marks(g, cuts, 1, model.mark_law, rng)[0])
    d = int(g.bfs_distances(g.root)[v])
    if d == 0:
        return None
    r = effective_resistance(g, g.root, v)
    return {"R": float(r), "d": d, "ratio": float(r / d)}


def check_R(model, n_grid, replicas: int, rng: np.random.Generator, workers: int = 1) -> ConditionReport:
    """Ratio ``R_eff(0, V_1) / d_G(0, V_1)`` per replica; ``rho_hat`` is the median."""
    model = _model(model)
    n_grid = list(n_grid)
    tasks = [(model, int(n)) for n in n_grid for _ in range(replicas)]
    res = run_replicas(_resistance_task, tasks, replica_seeds(rng, len(tasks)), workers)
    cells = []
    for j, n in enumerate(n_grid):
        chunk = [r for r in res[j * replicas:(j + 1) * replicas] if r is not None]
        ratio = np.array([r["ratio"] for r in chunk])
        cells.append({"n": int(n), "replicas": replicas, "skipped": replicas - len(chunk),
                      "rho_hat": float(np.median(ratio)) if ratio.size else None,
                      "ratio_min": float(ratio.min()) if ratio.size else None,
                      "ratio_max": float(ratio.max()) if ratio.size else None,
                      "ratio_iqr": float(np.subtract(*np.quantile(ratio, [0.75, 0.25]))) if ratio.size else None,
                      "ratios": ratio.tolist()})
    last = cells[-1]
    verdict = all(c["ratio_max"] is None or c["ratio_max"] <= 1.0 + 1e-9 for c in cells)
    return ConditionReport("R", cells, {"rho_hat": last["rho_hat"]}, {}, verdict,
                           config={"model": model.to_dict(), "n_grid": n_grid, "replicas": replicas})


# --------------------------------------------------------------------------
# delta-dense


def check_delta_dense(tree: SkeletonTree, marks_K, marks_Kprime, delta: float) -> bool:
    """Whether the root and the K'-marks are ``delta``-dense in the K-skeleton.

    ``tree`` is the skeleton spanned by ``marks_Kprime`` (graph vertices) and
    ``delta`` is in the units of ``tree.length``.  Every K'-mark is projected
    to its deepest ancestor-or-self on the subtree spanned by the K-marks
    that is a skeleton vertex.  The marks are dense when (1) every edge of the
    reduced K-tree carries a projected point other than its upper end and
    (2) every pair of neighbouring projected points has preimages within
    ``delta`` of each other.
    """
    marks_K = [int(m) for m in marks_K]
    marks_Kp = [int(m) for m in marks_Kprime]
    if not set(marks_K) <= set(marks_Kp):
        raise ValueError("marks_K must be a subset of marks_Kprime")
    idx = tree.index_of
    try:
        nodes_K = [idx[m] for m in marks_K]
        nodes_Kp = [idx[m] for m in marks_Kp]
    except KeyError as err:
        raise ValueError(f"mark {err.args[0]} is not a skeleton vertex") from None
    parent = tree.parent
    n = tree.n_vertices
    span = np.zeros(n, bool)
    span[0] = True
    for v in nodes_K:
        while v >= 0 and not span[v]:
            span[v] = True
            v = parent[v]
    kids_in_span = np.zeros(n, np.int64)
    for v in np.flatnonzero(span):
        if v > 0:
            kids_in_span[parent[v]] += 1
    is_mark = np.zeros(n, bool)
    is_mark[nodes_K] = True
    reduced = span & ((kids_in_span != 1) | is_mark)
    reduced[0] = True

    def project(v):
        while not (span[v] and tree.graph_vertex[v] >= 0):
            v = parent[v]
        return int(v)

    sources = [0] + nodes_Kp
    proj = [project(v) for v in sources]
    points = set(proj)
    # (1) every reduced edge (upper end excluded) carries a projected point
    for w in np.flatnonzero(reduced):
        if w == 0:
            continue
        v, found = int(w), False
        while True:
            if v in points:
                found = True
                break
            v = int(parent[v])
            if reduced[v]:
                break
        if not found:
            return False
    # (2) neighbouring projected points have close preimages
    pts = sorted(points)
    pre = {p: [s for s, q in zip(sources, proj) if q == p] for p in pts}
    for i, x in enumerate(pts):
        for y in pts[i + 1:]:
            inner = set(tree.path(x, y)[1:-1])
            if inner & points:
                continue
            best = min(tree.tree_distance(a, b) for a in pre[x] for b in pre[y])
            if best > delta:
                return False
    return True
