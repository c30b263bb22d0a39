"""Skeleton trees of rooted graphs spanned by marked cut-points.

Pipeline
--------
1. :func:`build_selected_skeleton` collects the cut-points that every path
   from the root to a mark must cross, and groups them into cliques, one per
   bubble (a bubble's clique is its entry cut-point plus its selected
   members).
2. :func:`expand_star_triangle` turns the clique graph into a tree: pairs
   become edges, each triangle becomes a star around a new centre.  Edges
   carry graph lengths and effective resistances.
3. :func:`project_measure` puts on each selected cut-point the number of
   edge incidences of the vertices hanging from it.
4. :func:`reduce_skeleton` keeps only the root, the marks and the branch
   points between them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .graph import (CutDecomposition, RootedGraph, effective_resistance,
                    find_cut_decomposition, triangle_arm_conductances)
from .trees import ReducedSpatialTree, reduce_rooted

__all__ = [
    "SelectedSkeletonGraph",
    "SkeletonTree",
    "ReducedSpatialTree",
    "build_selected_skeleton",
    "is_asymptotically_tree_like",
    "expand_star_triangle",
    "project_measure",
    "sausage_projection",
    "reduce_skeleton",
    "sausage_diameters",
    "build_skeleton",
    "star_arms",
]

KIND_ROOT, KIND_EDGE, KIND_ARM = 0, 1, 2


@dataclass(frozen=True, eq=False)
class SelectedSkeletonGraph:
    """Selected cut-points and their bubble cliques.

    ``cliques`` holds ``(bubble, top, members)`` where ``top`` is the member
    closest to ``root_star`` and ``members`` is sorted.
    """

    vertices: np.ndarray
    root_star: int
    cliques: tuple
    marks: tuple

    @cached_property
    def adjacency(self) -> frozenset:
        pairs = set()
        for _, _, mem in self.cliques:
            for i, a in enumerate(mem):
                for b in mem[i + 1:]:
                    pairs.add((min(a, b), max(a, b)))
        return frozenset(pairs)

    @property
    def max_clique(self) -> int:
        return max((len(m) for _, _, m in self.cliques), default=1)


def build_selected_skeleton(g: RootedGraph, cuts: CutDecomposition | None, marks) -> SelectedSkeletonGraph:
    """Cut-points on the way from the root to each mark, grouped by bubble."""
    cuts = g.cut_decomposition if cuts is None else cuts
    marks = list(dict.fromkeys(int(m) for m in marks))
    if not marks:
        raise ValueError("at least one mark is required")
    bad = [m for m in marks if not (0 <= m < g.n_vertices) or not cuts.is_cut_point[m]]
    if bad:
        raise ValueError(f"marks {bad} are not cut-points")
    selected: set[int] = set()
    done_bubble: set[int] = set()
    bubble, entry, bridges = cuts.bubble, cuts.bubble_entry, cuts.bridges
    root_star = None
    for i, x in enumerate(marks):
        selected.add(x)
        b = int(bubble[x])
        last = x
        while b != 0 and b not in done_bubble:
            done_bubble.add(b)
            c = int(bridges[entry[b], 0])
            selected.add(c)
            last = c
            b = int(bubble[c])
        if i == 0:
            # first mark: its whole chain is new, so ``last`` sits in the root bubble
            root_star = last
    verts = np.array(sorted(selected), np.int64)
    by_bubble: dict[int, list[int]] = {}
    for v in verts:
        by_bubble.setdefault(int(bubble[v]), []).append(int(v))
    cliques = []
    for b in sorted(by_bubble):
        mem = list(by_bubble[b])
        if b == 0:
            top = root_star
        else:
            top = int(bridges[entry[b], 0])
            mem.append(top)
        if len(mem) >= 2:
            cliques.append((b, top, tuple(sorted(mem))))
    return SelectedSkeletonGraph(verts, int(root_star), tuple(cliques), tuple(marks))


def is_asymptotically_tree_like(sk: SelectedSkeletonGraph) -> bool:
    """True iff no bubble joins more than three selected cut-points."""
    return sk.max_clique <= 3


# --------------------------------------------------------------------------
# skeleton tree


@dataclass(frozen=True, eq=False)
class SkeletonTree:
    """Star-triangle expanded skeleton.

    Vertices are numbered in breadth-first order from ``root`` (index 0) so
    ``parent[v] < v``.  ``graph_vertex`` is -1 at star centres.  Edge data
    (``length``, ``resistance``, ``kind``) describe the edge to the parent.
    """

    graph_vertex: np.ndarray
    parent: np.ndarray
    length: np.ndarray
    resistance: np.ndarray
    kind: np.ndarray
    position: np.ndarray | None
    measure: np.ndarray
    marks: tuple
    n_graph_vertices: int
    n_graph_edges: int

    root = 0

    @property
    def n_vertices(self) -> int:
        return int(self.parent.size)

    @cached_property
    def index_of(self) -> dict:
        return {int(v): i for i, v in enumerate(self.graph_vertex) if v >= 0}

    @property
    def root_star(self) -> int:
        return int(self.graph_vertex[0])

    @cached_property
    def is_vstar(self) -> np.ndarray:
        return self.graph_vertex >= 0

    @cached_property
    def depth(self) -> np.ndarray:
        return _cumulate(self.parent, self.length)

    @cached_property
    def resistance_depth(self) -> np.ndarray:
        return _cumulate(self.parent, self.resistance)

    @cached_property
    def children(self) -> list:
        kids = [[] for _ in range(self.n_vertices)]
        for v in range(1, self.n_vertices):
            kids[self.parent[v]].append(v)
        return kids

    @cached_property
    def _level(self) -> np.ndarray:
        lev = np.zeros(self.n_vertices, np.int64)
        for v in range(1, self.n_vertices):
            lev[v] = lev[self.parent[v]] + 1
        return lev

    def lca(self, a: int, b: int) -> int:
        lev, par = self._level, self.parent
        while lev[a] > lev[b]:
            a = par[a]
        while lev[b] > lev[a]:
            b = par[b]
        while a != b:
            a, b = par[a], par[b]
        return int(a)

    def tree_distance(self, a: int, b: int) -> float:
        c = self.lca(a, b)
        return float(self.depth[a] + self.depth[b] - 2 * self.depth[c])

    def tree_resistance(self, a: int, b: int) -> float:
        c = self.lca(a, b)
        r = self.resistance_depth
        return float(r[a] + r[b] - 2 * r[c])

    def path(self, a: int, b: int) -> list[int]:
        c = self.lca(a, b)
        up, down = [], []
        while a != c:
            up.append(a)
            a = int(self.parent[a])
        while b != c:
            down.append(b)
            b = int(self.parent[b])
        return up + [c] + down[::-1]

    @cached_property
    def subtree_length(self) -> np.ndarray:
        """Total edge length strictly below every vertex."""
        return _subtree_sums(self.parent, self.length)

    @cached_property
    def subtree_resistance(self) -> np.ndarray:
        return _subtree_sums(self.parent, self.resistance)

    @cached_property
    def subtree_measure(self) -> np.ndarray:
        """Measure of every vertex plus its descendants."""
        out = self.measure.astype(float).copy()
        for v in range(self.n_vertices - 1, 0, -1):
            out[self.parent[v]] += out[v]
        return out

    def with_measure(self, measure: np.ndarray) -> "SkeletonTree":
        return SkeletonTree(self.graph_vertex, self.parent, self.length, self.resistance, self.kind,
                            self.position, np.asarray(measure, float), self.marks,
                            self.n_graph_vertices, self.n_graph_edges)

    def edges(self):
        """Iterate ``(parent, child, length, resistance, kind)``."""
        for v in range(1, self.n_vertices):
            yield int(self.parent[v]), v, float(self.length[v]), float(self.resistance[v]), int(self.kind[v])

    def to_dict(self) -> dict:
        names = {KIND_EDGE: "estar", KIND_ARM: "arm"}
        return {
            "root_star": self.root_star,
            "n_graph_vertices": self.n_graph_vertices,
            "n_graph_edges": self.n_graph_edges,
            "marks": list(self.marks),
            "vertices": [
                {"id": i, "graph_vertex": int(self.graph_vertex[i]),
                 "position": None if self.position is None else [float(c) for c in self.position[i]],
                 "measure": float(self.measure[i])}
                for i in range(self.n_vertices)
            ],
            "edges": [
                {"parent": p, "child": c, "len": ln, "res": r, "kind": names[k]}
                for p, c, ln, r, k in self.edges()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SkeletonTree":
        n = len(data["vertices"])
        parent = np.full(n, -1, np.int64)
        length = np.zeros(n)
        res = np.zeros(n)
        kind = np.zeros(n, np.int8)
        for e in data["edges"]:
            c = e["child"]
            parent[c] = e["parent"]
            length[c] = e["len"]
            res[c] = e["res"]
            kind[c] = KIND_EDGE if e["kind"] == "estar" else KIND_ARM
        verts = sorted(data["vertices"], key=lambda v: v["id"])
        gv = np.array([v["graph_vertex"] for v in verts], np.int64)
        pos = None if verts[0]["position"] is None else np.array([v["position"] for v in verts], float)
        meas = np.array([v["measure"] for v in verts], float)
        return cls(gv, parent, length, res, kind, pos, meas, tuple(data["marks"]),
                   int(data["n_graph_vertices"]), int(data["n_graph_edges"]))


def _cumulate(parent, w):
    out = np.zeros(parent.size)
    for v in range(1, parent.size):
        out[v] = out[parent[v]] + w[v]
    return out


def _subtree_sums(parent, w):
    out = np.zeros(parent.size)
    for v in range(parent.size - 1, 0, -1):
        out[parent[v]] += out[v] + w[v]
    return out


def star_arms(pair_values: dict, x, y, z) -> dict:
    """Arm values of the star equivalent to a triangle.

    For resistances this is the delta-wye rule ``R_x = R_xy R_xz / (R_xy + R_yz + R_zx)``;
    for lengths the arms are the Gromov products ``(d_xy + d_xz - d_yz) / 2``.
    ``pair_values`` maps ``frozenset({a, b})`` to the pair value and must hold
    the key ``"kind"`` equal to ``"resistance"`` or ``"length"``.
    """
    v = lambda a, b: pair_values[frozenset((a, b))]
    if pair_values["kind"] == "length":
        arms = {x: (v(x, y) + v(x, z) - v(y, z)) / 2,
                y: (v(x, y) + v(y, z) - v(x, z)) / 2,
                z: (v(x, z) + v(y, z) - v(x, y)) / 2}
        if min(arms.values()) < 0:
            raise ValueError("negative Gromov product: pair lengths are not a metric")
        return arms
    rxy, ryz, rzx = v(x, y), v(y, z), v(z, x)
    s = rxy + ryz + rzx
    return {x: rxy * rzx / s, y: rxy * ryz / s, z: ryz * rzx / s}


def _delta_wye_from_conductances(gxy, gyz, gzx):
    """Star resistances from triangle conductances (handles one zero)."""
    s = gxy * gyz + gyz * gzx + gzx * gxy
    if s <= 0:
        raise ValueError("triangle terminals are not connected")
    return gyz / s, gzx / s, gxy / s


def _local_graph(g: RootedGraph, cuts: CutDecomposition, bubble: int, top: int):
    """Bubble plus its entry cut-point (joined by the entry bridge)."""
    members = cuts.members(bubble)
    verts = members if top in set(members.tolist()) else np.append(members, top)
    if verts.size == 1:
        return None, verts
    return g.subgraph(verts)


def expand_star_triangle(g: RootedGraph, sk: SelectedSkeletonGraph,
                         cuts: CutDecomposition | None = None) -> SkeletonTree:
    """Replace every triangle clique by a star and attach lengths,
    resistances, positions and the projected measure."""
    if not is_asymptotically_tree_like(sk):
        raise ValueError("selected skeleton has a clique with more than three vertices")
    cuts = g.cut_decomposition if cuts is None else cuts
    # edges as (parent_key, child_key, length, resistance, kind); keys are graph
    # vertices for cut-points and ("c", k) for star centres
    tree_edges = []
    centre_pos = {}
    for k, (b, top, mem) in enumerate(sk.cliques):
        others = [m for m in mem if m != top]
        trivial = cuts.members(b).size == 1 and len(mem) == 2
        if trivial:
            tree_edges.append((top, others[0], 1.0, 1.0, KIND_EDGE))
            continue
        sub, ids = _local_graph(g, cuts, b, top)
        loc = {int(v): i for i, v in enumerate(ids)}
        dist = {m: sub.bfs_distances(loc[m]) for m in mem}
        if len(mem) == 2:
            o = others[0]
            d = float(dist[top][loc[o]])
            r = effective_resistance(sub, loc[top], loc[o])
            tree_edges.append((top, o, d, r, KIND_EDGE))
            continue
        x, y, z = top, others[0], others[1]
        lengths = {"kind": "length"}
        for a, c in ((x, y), (y, z), (z, x)):
            lengths[frozenset((a, c))] = float(dist[a][loc[c]])
        arm_len = star_arms(lengths, x, y, z)
        cond = triangle_arm_conductances(sub, loc[x], loc[y], loc[z])
        rx, ry, rz = _delta_wye_from_conductances(cond["xy"], cond["yz"], cond["zx"])
        key = ("c", k)
        tree_edges.append((x, key, arm_len[x], rx, KIND_ARM))
        tree_edges.append((key, y, arm_len[y], ry, KIND_ARM))
        tree_edges.append((key, z, arm_len[z], rz, KIND_ARM))
        if g.location is not None:
            centre_pos[key] = g.location[[x, y, z]].mean(axis=0)
    # breadth-first numbering from root_star
    kids: dict = {}
    for p, c, ln, r, kd in tree_edges:
        kids.setdefault(p, []).append((c, ln, r, kd))
    order = [sk.root_star]
    info = {sk.root_star: (-1, 0.0, 0.0, KIND_ROOT)}
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for c, ln, r, kd in sorted(kids.get(u, []), key=lambda t: (isinstance(t[0], tuple), t[0] if not isinstance(t[0], tuple) else t[0][1])):
            info[c] = (u, ln, r, kd)
            order.append(c)
    idx = {key: i for i, key in enumerate(order)}
    n = len(order)
    gv = np.array([-1 if isinstance(k, tuple) else k for k in order], np.int64)
    parent = np.array([-1 if info[k][0] == -1 else idx[info[k][0]] for k in order], np.int64)
    length = np.array([info[k][1] for k in order], float)
    res = np.array([info[k][2] for k in order], float)
    kind = np.array([info[k][3] for k in order], np.int8)
    pos = None
    if g.location is not None:
        pos = np.array([centre_pos[k] if isinstance(k, tuple) else g.location[k] for k in order], float)
    if n != sk.vertices.size + sum(1 for _, _, m in sk.cliques if len(m) == 3):
        raise AssertionError("skeleton tree is not spanning")
    tree = SkeletonTree(gv, parent, length, res, kind, pos, np.zeros(n), tuple(sk.marks),
                        g.n_vertices, g.n_edges)
    return tree.with_measure(project_measure(g, tree, cuts))


# --------------------------------------------------------------------------
# measure and sausages


def sausage_projection(g: RootedGraph, tree: SkeletonTree, cuts: CutDecomposition | None = None) -> np.ndarray:
    """Graph vertex -> graph vertex of the last selected cut-point separating
    it from the root (the root-star when none does)."""
    cuts = g.cut_decomposition if cuts is None else cuts
    indptr, indices = g.csr
    selected = np.zeros(g.n_vertices, bool)
    selected[tree.graph_vertex[tree.is_vstar]] = True
    return _kernels.last_separator(indptr, indices, g.root, cuts.dfs_parent, cuts.bridge_below,
                                   selected, tree.root_star)


def project_measure(g: RootedGraph, tree: SkeletonTree, cuts: CutDecomposition | None = None) -> np.ndarray:
    """Ordered edge incidences ``(y, z)`` with ``proj(y) = x`` and ``y != x``,
    per tree vertex (zero at star centres)."""
    proj = sausage_projection(g, tree, cuts)
    y = np.arange(g.n_vertices)
    live = proj != y
    counts = np.bincount(proj[live], weights=g.degree[live].astype(float), minlength=g.n_vertices)
    out = np.zeros(tree.n_vertices)
    out[tree.is_vstar] = counts[tree.graph_vertex[tree.is_vstar]]
    return out


def sausage_diameters(g: RootedGraph, tree: SkeletonTree, cuts: CutDecomposition | None = None) -> dict:
    """Largest lattice (l1) and intrinsic diameter over all sausages.

    The sausage of a selected cut-point ``x`` is ``{y : proj(y) = x}``;
    diameters are maxima over pairs.  Intrinsic distances are graph
    distances, which between sausage members only use the sausage and ``x``.
    """
    proj = sausage_projection(g, tree, cuts)
    order = np.argsort(proj, kind="stable")
    keys = proj[order]
    groups, starts = np.unique(keys, return_index=True)
    starts = np.append(starts, keys.size).astype(np.int64)
    anchors = np.where(groups == tree.root_star, -1, groups).astype(np.int64)
    # tree-like test per group: edges inside sausage + anchor vs vertex count
    gid = np.searchsorted(groups, proj)
    e = g.edges
    a, b = e[:, 0], e[:, 1]
    ga, gb = gid[a], gid[b]
    inside = (ga == gb)
    anchor_edge_b = (groups[ga] == b) & ~inside    # b is the anchor of a's group
    anchor_edge_a = (groups[gb] == a) & ~inside
    counts = np.bincount(ga[inside | anchor_edge_b], minlength=groups.size) + \
        np.bincount(gb[anchor_edge_a], minlength=groups.size)
    sizes = np.diff(starts) + (anchors >= 0)
    tree_like = counts == sizes - 1
    indptr, indices = g.csr
    intrinsic = _kernels.group_diameters(indptr, indices, order.astype(np.int64), starts, anchors, tree_like)
    out = {"delta_intrinsic": int(intrinsic.max()) if intrinsic.size else 0,
           "per_vertex_intrinsic": dict(zip(groups.tolist(), intrinsic.tolist()))}
    if g.location is not None:
        zd = _group_l1_diameters(g.location, order, starts)
        out["delta_zd"] = int(zd.max()) if zd.size else 0
        out["per_vertex_zd"] = dict(zip(groups.tolist(), zd.tolist()))
    else:
        out["delta_zd"] = None
    return out


def _group_l1_diameters(loc, order, starts):
    out = np.zeros(starts.size - 1, np.int64)
    for gi in range(starts.size - 1):
        pts = loc[order[starts[gi]:starts[gi + 1]]]
        if len(pts) < 2:
            continue
        out[gi] = _kernels_l1(pts)
    return out


def _kernels_l1(pts: np.ndarray) -> int:
    best = 0
    step = 2048
    for i in range(0, len(pts), step):
        blk = pts[i:i + step]
        for j in range(i, len(pts), step):
            d = np.abs(blk[:, None, :] - pts[None, j:j + step, :]).sum(axis=2)
            best = max(best, int(d.max()))
    return best


# --------------------------------------------------------------------------
# reduced tree


def reduce_skeleton(tree: SkeletonTree | ReducedSpatialTree, marks) -> ReducedSpatialTree:
    """Reduced tree spanned by the root-star and the marks.

    For a :class:`SkeletonTree` the marks are graph vertices; for a
    :class:`ReducedSpatialTree` they are vertex indices.
    """
    if isinstance(tree, ReducedSpatialTree):
        return tree.reduce(marks)
    marks = list(marks)
    nodes = []
    for m in marks:
        try:
            nodes.append(tree.index_of[int(m)])
        except KeyError:
            raise ValueError(f"mark {m} is not a skeleton vertex") from None
    key = tree.graph_vertex.astype(float)
    return reduce_rooted(tree.parent, tree.length, tree.resistance, tree.position, nodes, sort_key=key)


def build_skeleton(g: RootedGraph, marks, cuts: CutDecomposition | None = None):
    """Convenience: selected skeleton, tree-like flag and (if tree-like) the tree."""
    cuts = g.cut_decomposition if cuts is None else cuts
    sk = build_selected_skeleton(g, cuts, marks)
    if not is_asymptotically_tree_like(sk):
        return sk, None
    return sk, expand_star_triangle(g, sk, cuts)
