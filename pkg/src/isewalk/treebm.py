"""Brownian motion on metric trees by fine subdivision.

Every edge of a rooted tree is cut into pieces of metric length at most
``h``; a nearest-neighbour walk jumps along pieces with probability
proportional to their conductance (inverse metric length) and holds at each
site for ``2 m / C`` where ``m`` is the site mass and ``C`` its total
conductance.  That holding time is the exact mean exit time of the diffusion
from the site to its lattice neighbours, which on a uniform lattice of
Lebesgue mass equals ``h**2``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import _kernels
from .skeleton import SkeletonTree
from .trees import ReducedSpatialTree

__all__ = [
    "MetricTreeNet",
    "TreeDiffusionPath",
    "LocalTimeField",
    "CrossingEstimate",
    "discretize",
    "simulate",
    "local_times",
    "crossing_local_time_estimate",
    "hit_distribution",
    "exact_hit_probabilities",
    "exact_exit_times",
    "branch_point_hit_probability",
    "skeleton_vertex_chain",
    "segment_tree",
    "star_tree",
]

_MEASURES = ("lebesgue", "probability", "lebesgue_length", "lebesgue_resistance")


def segment_tree(length: float = 1.0) -> ReducedSpatialTree:
    """Single edge ``[0, length]`` rooted at 0, embedded in R^1."""
    return ReducedSpatialTree(np.array([-1, 0]), np.array([0.0, length]), ((), ()),
                              np.array([0.0, length]), np.array([[0.0], [length]]))


def star_tree(arms) -> ReducedSpatialTree:
    """Star rooted at its centre with the given arm lengths."""
    arms = [float(a) for a in arms]
    n = len(arms) + 1
    return ReducedSpatialTree(np.array([-1] + [0] * len(arms)), np.array([0.0] + arms),
                              tuple(() for _ in range(n)), np.array([0.0] + arms))


@dataclass(frozen=True, eq=False)
class MetricTreeNet:
    """Subdivided tree ready for simulation.

    Sites ``vertex_site[v]`` represent original vertices (edges of zero
    metric length are contracted); the remaining sites are interior points.
    ``site_edge[s]`` is the child vertex of the original edge holding site
    ``s`` (-1 for vertex sites) and ``site_offset[s]`` its fraction along the
    edge measured from the parent.
    """

    parent: np.ndarray
    metric: str
    h: float
    edge_metric: np.ndarray
    edge_length: np.ndarray
    edge_resistance: np.ndarray
    edge_pieces: np.ndarray
    vertex_site: np.ndarray
    site_edge: np.ndarray
    site_offset: np.ndarray
    piece_sites: np.ndarray
    piece_edge: np.ndarray
    piece_metric: np.ndarray
    mass: np.ndarray
    site_position: np.ndarray | None
    indptr: np.ndarray
    indices: np.ndarray
    cum_prob: np.ndarray
    hold: np.ndarray
    conductance: np.ndarray

    @property
    def n_sites(self) -> int:
        return int(self.mass.size)

    @property
    def n_pieces(self) -> int:
        return int(self.piece_metric.size)

    @property
    def n_vertices(self) -> int:
        return int(self.parent.size)

    @cached_property
    def piece_resistance(self) -> np.ndarray:
        k = self.edge_pieces[self.piece_edge]
        return self.edge_resistance[self.piece_edge] / k

    @cached_property
    def site_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def edge_midsite(self) -> np.ndarray:
        """Site nearest to the midpoint of every original edge (-1 at the root)."""
        out = np.full(self.n_vertices, -1, np.int64)
        for v in range(1, self.n_vertices):
            k = int(self.edge_pieces[v])
            if k == 0:
                continue
            j = k // 2
            if j == 0:
                out[v] = self.vertex_site[self.parent[v]]
            else:
                out[v] = self._interior_start[v] + j - 1
        return out

    @cached_property
    def _interior_start(self) -> np.ndarray:
        start = np.full(self.n_vertices, -1, np.int64)
        s = self.site_edge
        for v in range(1, self.n_vertices):
            idx = np.flatnonzero(s == v)
            if idx.size:
                start[v] = idx[0]
        return start

    @cached_property
    def site_parent(self) -> np.ndarray:
        """Neighbouring site on the root side (-1 at the root site)."""
        out = np.full(self.n_sites, -1, np.int64)
        out[self.piece_sites[:, 1]] = self.piece_sites[:, 0]
        return out

    @cached_property
    def parent_piece(self) -> np.ndarray:
        out = np.full(self.n_sites, -1, np.int64)
        out[self.piece_sites[:, 1]] = np.arange(self.n_pieces)
        return out

    @cached_property
    def vertex_site_edge(self) -> np.ndarray:
        """Original edge ending at every vertex site (-1 elsewhere)."""
        out = np.full(self.n_sites, -1, np.int64)
        for v in range(1, self.n_vertices):
            if self.edge_pieces[v] > 0:
                out[self.vertex_site[v]] = v
        return out

    @cached_property
    def vertex_site_parent(self) -> np.ndarray:
        out = np.full(self.n_sites, -1, np.int64)
        for v in range(1, self.n_vertices):
            if self.edge_pieces[v] > 0:
                out[self.vertex_site[v]] = self.vertex_site[self.parent[v]]
        return out

    @cached_property
    def is_vertex_site(self) -> np.ndarray:
        out = np.zeros(self.n_sites, bool)
        out[self.vertex_site] = True
        return out

    def transition_matrix(self) -> sparse.csr_matrix:
        p = np.diff(np.concatenate([[0.0], self.cum_prob]))
        starts = self.indptr[:-1]
        p[starts] = self.cum_prob[starts]
        return sparse.csr_matrix((p, self.indices, self.indptr), shape=(self.n_sites, self.n_sites))

    def fields_csv(self, local_time: np.ndarray | None = None) -> str:
        buf = io.StringIO()
        buf.write("site,edge,offset,mass,local_time\n")
        L = np.zeros(self.n_sites) if local_time is None else local_time
        for s in range(self.n_sites):
            buf.write(f"{s},{self.site_edge[s]},{float(self.site_offset[s])!r},{float(self.mass[s])!r},{float(L[s])!r}\n")
        return buf.getvalue()


def _tree_arrays(tree):
    if isinstance(tree, SkeletonTree):
        return tree.parent, tree.length, tree.resistance, tree.position, None
    if isinstance(tree, ReducedSpatialTree):
        res = tree.resistance if tree.resistance is not None else tree.length
        return tree.parent, tree.length, res, tree.position, tree.edge_paths
    raise TypeError("expected a SkeletonTree or a ReducedSpatialTree")


def discretize(tree, metric: str = "length", h: float | None = None,
               measure="lebesgue") -> MetricTreeNet:
    """Subdivide every edge into ``ceil(L / h)`` equal pieces.

    Parameters
    ----------
    tree : SkeletonTree or ReducedSpatialTree
    metric : {"length", "resistance"}
        Metric that sets piece conductances.
    h : float, optional
        Maximal piece length; by default an eighth of the shortest edge.
    measure : str or array
        ``"lebesgue"`` (Lebesgue measure of the chosen metric),
        ``"probability"`` (the same, normalized), ``"lebesgue_length"`` or
        ``"lebesgue_resistance"`` for a specific metric, or an array of site
        masses.
    """
    parent, length, resistance, position, edge_paths = _tree_arrays(tree)
    parent = np.asarray(parent, np.int64)
    n = parent.size
    if metric not in ("length", "resistance"):
        raise ValueError("metric must be 'length' or 'resistance'")
    ell = np.asarray(length if metric == "length" else resistance, float)
    positive = ell[1:][ell[1:] > 0]
    if positive.size == 0:
        raise ValueError("tree has no edge of positive length")
    shortest = float(positive.min())
    if h is None:
        h = shortest / 8.0
    if not h > 0:
        raise ValueError("h must be positive")
    if h > shortest * (1 + 1e-12):
        raise ValueError(f"h = {h} exceeds the shortest edge {shortest}")

    vertex_site = np.zeros(n, np.int64)
    n_sites = 1
    for v in range(1, n):
        if ell[v] > 0:
            vertex_site[v] = n_sites
            n_sites += 1
        else:
            vertex_site[v] = vertex_site[parent[v]]
    pieces = np.zeros(n, np.int64)
    pieces[1:] = np.where(ell[1:] > 0, np.maximum(1, np.ceil(ell[1:] / h - 1e-9)), 0).astype(np.int64)
    n_inner = int(np.sum(np.maximum(pieces - 1, 0)))
    total = n_sites + n_inner
    site_edge = np.full(total, -1, np.int64)
    site_offset = np.zeros(total)
    a_list, b_list, e_list = [], [], []
    nxt = n_sites
    for v in range(1, n):
        k = int(pieces[v])
        if k == 0:
            continue
        chain = [vertex_site[parent[v]]] + list(range(nxt, nxt + k - 1)) + [vertex_site[v]]
        site_edge[nxt:nxt + k - 1] = v
        site_offset[nxt:nxt + k - 1] = np.arange(1, k) / k
        nxt += k - 1
        a_list.extend(chain[:-1])
        b_list.extend(chain[1:])
        e_list.extend([v] * k)
    piece_sites = np.column_stack([a_list, b_list]).astype(np.int64)
    piece_edge = np.asarray(e_list, np.int64)
    kk = pieces[piece_edge]
    piece_metric = ell[piece_edge] / kk

    if isinstance(measure, str):
        if measure not in _MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        if measure == "lebesgue_length":
            dens = np.asarray(length, float)[piece_edge] / kk
        elif measure == "lebesgue_resistance":
            dens = np.asarray(resistance, float)[piece_edge] / kk
        else:
            dens = piece_metric
        mass = np.zeros(total)
        np.add.at(mass, piece_sites[:, 0], dens / 2)
        np.add.at(mass, piece_sites[:, 1], dens / 2)
        if measure == "probability":
            mass /= mass.sum()
    else:
        mass = np.asarray(measure, float).copy()
        if mass.shape != (total,):
            raise ValueError(f"site measure must have shape ({total},)")
    if np.any(mass <= 0):
        raise ValueError("every site needs positive mass")

    cond = 1.0 / piece_metric
    rows = np.concatenate([piece_sites[:, 0], piece_sites[:, 1]])
    cols = np.concatenate([piece_sites[:, 1], piece_sites[:, 0]])
    w = np.concatenate([cond, cond])
    W = sparse.csr_matrix((w, (rows, cols)), shape=(total, total))
    W.sum_duplicates()
    W.sort_indices()
    C = np.asarray(W.sum(axis=1)).ravel()
    probs = W.data / np.repeat(C, np.diff(W.indptr))
    cum = np.empty_like(probs)
    for s in range(total):
        lo, hi = W.indptr[s], W.indptr[s + 1]
        cum[lo:hi] = np.cumsum(probs[lo:hi])
        cum[hi - 1] = 1.0
    hold = 2.0 * mass / C

    site_pos = None
    if position is not None:
        position = np.asarray(position, float)
        site_pos = np.zeros((total, position.shape[1]))
        site_pos[vertex_site] = position
        for s in np.flatnonzero(site_edge >= 0):
            v = site_edge[s]
            site_pos[s] = _point_along(position, parent, edge_paths, v, site_offset[s])

    return MetricTreeNet(
        parent=parent, metric=metric, h=float(h), edge_metric=ell,
        edge_length=np.asarray(length, float), edge_resistance=np.asarray(resistance, float),
        edge_pieces=pieces, vertex_site=vertex_site, site_edge=site_edge, site_offset=site_offset,
        piece_sites=piece_sites, piece_edge=piece_edge, piece_metric=piece_metric, mass=mass,
        site_position=site_pos, indptr=W.indptr.astype(np.int64), indices=W.indices.astype(np.int64),
        cum_prob=cum, hold=hold, conductance=C,
    )


def _point_along(position, parent, edge_paths, v, alpha):
    if edge_paths is None or edge_paths[v] is None:
        p0, p1 = position[parent[v]], position[v]
        return p0 + alpha * (p1 - p0)
    path = edge_paths[v]
    s = path[:, 0]
    return np.array([np.interp(alpha * s[-1], s, path[:, j]) for j in range(1, path.shape[1])])


@dataclass(frozen=True, eq=False)
class TreeDiffusionPath:
    """Visited sites with entry times; ``times[-1]`` is the final clock."""

    sites: np.ndarray
    times: np.ndarray
    net: MetricTreeNet

    @property
    def t(self) -> float:
        return float(self.times[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def current(self) -> int:
        return int(self.sites[-1])

    def site_at(self, t: float) -> int:
        i = int(np.searchsorted(self.times[:-1], t, side="right")) - 1
        return int(self.sites[max(i, 0)])

    def positions(self) -> np.ndarray | None:
        if self.net.site_position is None:
            return None
        return self.net.site_position[self.sites]

    def vertex_trace(self):
        """Successive distinct original-vertex sites and their entry times."""
        keep = self.net.is_vertex_site[self.sites]
        s, t = self.sites[keep], self.times[:-1][keep]
        if s.size == 0:
            return s, t
        change = np.concatenate([[True], s[1:] != s[:-1]])
        return s[change], t[change]

    def to_csv(self) -> str:
        net = self.net
        d = 0 if net.site_position is None else net.site_position.shape[1]
        buf = io.StringIO()
        buf.write("time,site,edge,offset" + "".join(f",x{j + 1}" for j in range(d)) + "\n")
        for s, t in zip(self.sites, self.times[:-1]):
            row = f"{float(t)!r},{s},{net.site_edge[s]},{float(net.site_offset[s])!r}"
            if d:
                row += "," + ",".join(repr(float(c)) for c in net.site_position[s])
            buf.write(row + "\n")
        return buf.getvalue()


def _start_site(net: MetricTreeNet, start, start_site):
    if start_site is not None:
        if not 0 <= start_site < net.n_sites:
            raise ValueError("start site out of range")
        return int(start_site)
    return int(net.vertex_site[int(start)])


def _absorbing_mask(net: MetricTreeNet, absorbing_sites):
    mask = np.zeros(net.n_sites, np.bool_)
    if absorbing_sites is not None:
        mask[np.asarray(absorbing_sites, np.int64)] = True
    return mask


def simulate(net: MetricTreeNet, t_max: float, rng: np.random.Generator, start: int = 0,
             start_site: int | None = None, absorbing_sites=None,
             max_steps: int = 10 ** 9) -> TreeDiffusionPath:
    """Run the lattice diffusion up to time ``t_max`` (or absorption)."""
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    s0 = _start_site(net, start, start_site)
    _kernels.seed_kernel(int(rng.integers(0, 2 ** 32)))
    sites, times = _kernels.lattice_walk(net.indptr, net.indices, net.cum_prob, net.hold, s0,
                                         float(t_max), _absorbing_mask(net, absorbing_sites),
                                         int(max_steps))
    return TreeDiffusionPath(sites, times, net)


def hit_distribution(net: MetricTreeNet, absorbing_sites, n_runs: int, rng: np.random.Generator,
                     start: int = 0, start_site: int | None = None, max_steps: int = 10 ** 8):
    """Absorbing site and absorption time of ``n_runs`` independent runs."""
    s0 = _start_site(net, start, start_site)
    _kernels.seed_kernel(int(rng.integers(0, 2 ** 32)))
    return _kernels.lattice_hits(net.indptr, net.indices, net.cum_prob, net.hold, s0,
                                 _absorbing_mask(net, absorbing_sites), int(n_runs), int(max_steps))


def _absorbed_system(net, absorbing_sites):
    absorbing = _absorbing_mask(net, absorbing_sites)
    free = np.flatnonzero(~absorbing)
    P = net.transition_matrix()
    Q = P[free][:, free]
    A = (sparse.identity(free.size, format="csc") - Q).tocsc()
    return absorbing, free, P, A


def exact_hit_probabilities(net: MetricTreeNet, absorbing_sites) -> np.ndarray:
    """``H[s, j]``: probability that the walk from site ``s`` is absorbed at
    ``absorbing_sites[j]``."""
    absorbing_sites = np.asarray(absorbing_sites, np.int64)
    absorbing, free, P, A = _absorbed_system(net, absorbing_sites)
    lu = splu(A)
    H = np.zeros((net.n_sites, absorbing_sites.size))
    for j, a in enumerate(absorbing_sites):
        rhs = np.asarray(P[free][:, [a]].todense()).ravel()
        H[free, j] = lu.solve(rhs)
        H[a, j] = 1.0
    return H


def exact_exit_times(net: MetricTreeNet, absorbing_sites) -> np.ndarray:
    """Mean absorption time from every site of the lattice diffusion."""
    absorbing, free, P, A = _absorbed_system(net, absorbing_sites)
    out = np.zeros(net.n_sites)
    out[free] = splu(A).solve(net.hold[free])
    return out


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Local times at lattice sites and crossing counts on original edges.

    ``edge_forward[v]`` counts crossings of the edge ``parent(v) -> v`` away
    from the root, ``edge_backward[v]`` towards it.
    """

    t: float
    occupation: np.ndarray
    local_time: np.ndarray
    edge_forward: np.ndarray
    edge_backward: np.ndarray
    vertex_visits: np.ndarray
    piece_crossings: np.ndarray
    net: MetricTreeNet

    @property
    def edge_crossings(self) -> np.ndarray:
        return self.edge_forward + self.edge_backward

    def integral(self) -> float:
        """Integral of the local time against the site measure."""
        return float(np.sum(self.local_time * self.net.mass))

    def to_csv(self) -> str:
        return self.net.fields_csv(self.local_time)


def local_times(path: TreeDiffusionPath, net: MetricTreeNet | None = None) -> LocalTimeField:
    """Occupation densities and crossing counts of a simulated path."""
    net = path.net if net is None else net
    occ = np.bincount(path.sites, weights=path.durations, minlength=net.n_sites)
    L = occ / net.mass
    fwd = np.zeros(net.n_vertices, np.int64)
    bwd = np.zeros(net.n_vertices, np.int64)
    vs, _ = path.vertex_trace()
    if vs.size > 1:
        a, b = vs[:-1], vs[1:]
        down = net.vertex_site_parent[b] == a
        np.add.at(fwd, net.vertex_site_edge[b[down]], 1)
        np.add.at(bwd, net.vertex_site_edge[a[~down]], 1)
    visits = np.bincount(vs, minlength=net.n_sites)[net.vertex_site]
    piece_cross = np.zeros(net.n_pieces, np.int64)
    if path.sites.size > 1:
        a, b = path.sites[:-1], path.sites[1:]
        idx = np.where(net.site_parent[b] == a, net.parent_piece[b], net.parent_piece[a])
        piece_cross = np.bincount(idx, minlength=net.n_pieces)
    return LocalTimeField(path.t, occ, L, fwd, bwd, visits, piece_cross, net)


@dataclass(frozen=True, eq=False)
class CrossingEstimate:
    """Crossing-count estimates next to the local times they approximate."""

    edge_estimate: np.ndarray
    edge_local_time: np.ndarray
    vertex_ids: np.ndarray
    vertex_estimate: np.ndarray
    vertex_local_time: np.ndarray

    @property
    def edge_gap(self) -> np.ndarray:
        return np.abs(self.edge_estimate - self.edge_local_time)

    @property
    def vertex_gap(self) -> np.ndarray:
        return np.abs(self.vertex_estimate - self.vertex_local_time)

    @property
    def sup_gap(self) -> float:
        gaps = np.concatenate([self.edge_gap, self.vertex_gap])
        return float(gaps.max()) if gaps.size else 0.0


def crossing_local_time_estimate(field: LocalTimeField, level: str = "edge") -> CrossingEstimate:
    """``r(e) * l(e)`` per edge and ``2 R_vert * l_vert`` per interior vertex.

    ``r(e)`` is the metric length of the edge (its resistance on a
    resistance-metric net) and ``R_vert`` the parallel combination of the
    edges at a vertex.  Edge estimates are paired with the local time at the
    edge midpoint.  With ``level="piece"`` the lattice pieces play the role of
    edges and the midpoint value is the mean over the two end sites.
    """
    net = field.net
    L = field.local_time
    if level == "piece":
        est = net.piece_metric * field.piece_crossings
        mid = 0.5 * (L[net.piece_sites[:, 0]] + L[net.piece_sites[:, 1]])
        return CrossingEstimate(est, mid, np.zeros(0, np.int64), np.zeros(0), np.zeros(0))
    if level != "edge":
        raise ValueError("level must be 'edge' or 'piece'")
    edges = np.flatnonzero(net.edge_pieces > 0)
    est = net.edge_metric[edges] * field.edge_crossings[edges]
    mid = L[net.edge_midsite[edges]]
    inv = np.zeros(net.n_vertices)
    deg = np.zeros(net.n_vertices, np.int64)
    for v in edges:
        g = 1.0 / net.edge_metric[v]
        for u in (v, net.parent[v]):
            inv[u] += g
            deg[u] += 1
    inner = np.flatnonzero(deg >= 2)
    r_vert = 1.0 / inv[inner]
    v_est = 2.0 * r_vert * field.vertex_visits[inner]
    v_lt = L[net.vertex_site[inner]]
    return CrossingEstimate(est, mid, inner, v_est, v_lt)


def branch_point_hit_probability(ds1: float, ds2: float, d12: float) -> float:
    """Probability of hitting ``s1`` before ``s2`` when started at ``s``.

    Arguments are the pairwise tree distances.  With ``b`` the branch point of
    the three points, the answer is ``d(b, s2) / d(s1, s2)``.
    """
    return 0.5 * (ds2 + d12 - ds1) / d12


def skeleton_vertex_chain(tree: SkeletonTree, rescale: float = 1.0):
    """Exact hitting structure of the tree diffusion among skeleton vertices.

    For every skeleton vertex ``x`` (a tree vertex with ``graph_vertex >= 0``)
    the diffusion run from ``x`` until it hits another skeleton vertex is
    analysed on the electrical network of tree resistances.  Returns
    ``(targets, probs, sojourn)`` where ``targets[x]``/``probs[x]`` list the
    reachable skeleton vertices (tree indices) with their hitting
    probabilities, and ``sojourn[x]`` is the mean exit time when the speed
    measure is resistance-Lebesgue normalized to total mass one and all
    resistances are multiplied by ``rescale``.
    """
    n = tree.n_vertices
    res = tree.resistance * rescale
    total = float(res[1:].sum())
    nbrs = [[] for _ in range(n)]
    for v in range(1, n):
        p = int(tree.parent[v])
        nbrs[p].append((v, res[v]))
        nbrs[v].append((p, res[v]))
    vstar = tree.is_vstar
    targets, probs = [None] * n, [None] * n
    sojourn = np.full(n, np.nan)
    for x in np.flatnonzero(vstar):
        tgt, cur = [], []
        work = 0.0
        branch = []
        for u, a in nbrs[x]:
            if vstar[u]:
                branch.append(("direct", u, a))
            else:
                others = [(w, b) for w, b in nbrs[u] if w != x]
                branch.append(("star", others, a))
        g_tot = 0.0
        series = []
        for b in branch:
            if b[0] == "direct":
                r = b[2]
            else:
                (w1, b1), (w2, b2) = b[1]
                par = b1 * b2 / (b1 + b2) if b1 + b2 > 0 else 0.0
                r = b[2] + par
            series.append(r)
            g_tot += math.inf if r == 0 else 1.0 / r
        if math.isinf(g_tot):
            raise ArithmeticError("zero-resistance path between skeleton vertices")
        Vx = 1.0 / g_tot
        for b, r in zip(branch, series):
            i = Vx / r
            if b[0] == "direct":
                tgt.append(b[1])
                cur.append(i)
                work += b[2] * Vx
            else:
                (w1, b1), (w2, b2) = b[1]
                if b1 + b2 > 0:
                    f1, f2 = b2 / (b1 + b2), b1 / (b1 + b2)
                else:
                    f1 = f2 = 0.5
                Vc = Vx - i * b[2]
                tgt.extend([w1, w2])
                cur.extend([i * f1, i * f2])
                work += b[2] * (Vx + Vc) + (b1 + b2) * Vc
        cur = np.asarray(cur)
        targets[x] = np.asarray(tgt, np.int64)
        probs[x] = cur / cur.sum()
        sojourn[x] = work / total
    return targets, probs, sojourn
