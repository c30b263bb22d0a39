"""Simple random walk, its trace on skeleton vertices, time changes and
scaling exponents.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from . import _kernels
from .graph import CutDecomposition, RootedGraph
from .skeleton import KIND_EDGE, SkeletonTree, sausage_projection
from .treebm import skeleton_vertex_chain

__all__ = [
    "WalkTrace",
    "TraceRecord",
    "SojournTable",
    "TimeChangeProfile",
    "WalkCurves",
    "ExponentFit",
    "srw",
    "trace_on_skeleton",
    "walk_trace_on_skeleton",
    "expected_sojourns",
    "sausage_edge_counts",
    "time_change_profiles",
    "walk_curves",
    "exponent_stats",
    "log_checkpoints",
]


def _seed_kernel(rng: np.random.Generator) -> None:
    _kernels.seed_kernel(int(rng.integers(0, 2 ** 32)))


@dataclass(frozen=True, eq=False)
class WalkTrace:
    vertices: np.ndarray

    @property
    def start(self) -> int:
        return int(self.vertices[0])

    @property
    def steps(self) -> int:
        return int(self.vertices.size - 1)

    def __len__(self) -> int:
        return int(self.vertices.size)


def srw(g: RootedGraph, steps: int, rng: np.random.Generator, start: int | None = None) -> WalkTrace:
    """Uniform nearest-neighbour walk of ``steps`` steps (from the root by default)."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    start = g.root if start is None else int(start)
    indptr, indices = g.csr
    if steps > 0 and indptr[start + 1] == indptr[start]:
        raise ValueError("cannot walk from an isolated vertex")
    _seed_kernel(rng)
    return WalkTrace(_kernels.random_walk(indptr, indices, start, int(steps)))


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """Successive distinct selected vertices ``J`` and the walk clocks ``A``
    at which they are entered; ``steps`` is the length of the underlying walk."""

    J: np.ndarray
    A: np.ndarray
    steps: int

    def __len__(self) -> int:
        return int(self.J.size)

    def S(self, t):
        """Generalized inverse ``min{m : A(m) >= t}`` (``len`` when none)."""
        return np.searchsorted(self.A, t, side="left")

    def S_interp(self, t):
        """Inverse of the clock with linear interpolation between J-steps."""
        return np.interp(t, self.A, np.arange(self.A.size, dtype=float))

    def visit_counts(self, m: int, size: int) -> np.ndarray:
        """``l_vert``: visits to every vertex among ``J_0 .. J_{m-1}``."""
        return np.bincount(self.J[:m], minlength=size)

    def transition_counts(self) -> dict:
        out: dict = {}
        for a, b in zip(self.J[:-1].tolist(), self.J[1:].tolist()):
            out[(a, b)] = out.get((a, b), 0) + 1
        return out


def _selected_mask(n: int, vstar) -> np.ndarray:
    vstar = np.asarray(vstar)
    if vstar.dtype == bool:
        if vstar.shape != (n,):
            raise ValueError("boolean selection has the wrong length")
        mask = vstar.copy()
    else:
        mask = np.zeros(n, np.bool_)
        mask[vstar.astype(np.int64)] = True
    if not mask.any():
        raise ValueError("selected vertex set is empty")
    return mask


def trace_on_skeleton(trace: WalkTrace, vstar) -> TraceRecord:
    vs = np.asarray(vstar)
    n = vs.size if vs.dtype == bool else max(int(trace.vertices.max()), int(vs.max())) + 1
    mask = _selected_mask(n, vs)
    J, A = _kernels.skeleton_trace(trace.vertices, mask)
    return TraceRecord(J, A, trace.steps)


def walk_trace_on_skeleton(g: RootedGraph, steps: int, vstar, rng: np.random.Generator,
                           start: int | None = None) -> TraceRecord:
    """Walk and trace in one pass, without storing the walk."""
    start = g.root if start is None else int(start)
    mask = _selected_mask(g.n_vertices, vstar)
    indptr, indices = g.csr
    _seed_kernel(rng)
    J, A = _kernels.walk_skeleton_trace(indptr, indices, start, int(steps), mask)
    return TraceRecord(J, A, int(steps))


# --------------------------------------------------------------------------
# exact sojourns between selected vertices


@dataclass(frozen=True, eq=False)
class SojournTable:
    """Per selected vertex ``x``: mean time to reach another selected vertex,
    the escape resistance ``R(x, rest)`` and the law of the vertex hit."""

    vertices: np.ndarray
    expected: np.ndarray
    escape_resistance: np.ndarray
    targets: tuple
    probs: tuple

    def as_dict(self) -> dict:
        return dict(zip(self.vertices.tolist(), self.expected.tolist()))


def expected_sojourns(g: RootedGraph, vstar, method: str = "exact", n_runs: int = 2000,
                      rng: np.random.Generator | None = None) -> SojournTable:
    """Mean number of steps from ``x`` until another selected vertex is hit.

    The exact route works component by component of ``G - V*``: with ``phi``
    the harmonic function equal to 1 at ``x`` and 0 on the other selected
    vertices, ``E_x[tau] = R(x, rest) * sum_w deg(w) phi(w)`` and the hit
    law is the current distribution.  ``method="monte_carlo"`` averages
    ``n_runs`` simulated excursions instead (hit laws are then empirical).
    """
    mask = _selected_mask(g.n_vertices, vstar)
    sel = np.flatnonzero(mask)
    if method == "monte_carlo":
        return _sojourns_mc(g, mask, sel, n_runs, rng or np.random.default_rng())
    if method != "exact":
        raise ValueError("method must be 'exact' or 'monte_carlo'")
    n = g.n_vertices
    deg = g.degree.astype(float)
    e = g.edges
    a, b = e[:, 0], e[:, 1]
    free = ~mask
    fid = np.full(n, -1, np.int64)
    fid[free] = np.arange(int(free.sum()))
    ff = free[a] & free[b]
    A_ff = sparse.csr_matrix((np.ones(2 * int(ff.sum())),
                              (np.concatenate([fid[a[ff]], fid[b[ff]]]),
                               np.concatenate([fid[b[ff]], fid[a[ff]]]))),
                             shape=(fid.max() + 1, fid.max() + 1))
    n_comp, comp = connected_components(A_ff, directed=False) if free.any() else (0, np.zeros(0, np.int64))

    mass = deg[sel].copy()
    current = np.zeros(sel.size)
    flows: list[dict] = [dict() for _ in range(sel.size)]
    pos = np.full(n, -1, np.int64)
    pos[sel] = np.arange(sel.size)

    # selected-selected edges: unit current, no mass
    ss = mask[a] & mask[b]
    for u, v in zip(a[ss].tolist(), b[ss].tolist()):
        for x, y in ((u, v), (v, u)):
            current[pos[x]] += 1.0
            flows[pos[x]][y] = flows[pos[x]].get(y, 0.0) + 1.0

    # boundary edges between a free vertex and a selected vertex
    fs = free[a] ^ free[b]
    fv = np.where(free[a[fs]], a[fs], b[fs])
    sv = np.where(free[a[fs]], b[fs], a[fs])
    if fv.size:
        cc = comp[fid[fv]]
        order = np.argsort(cc, kind="stable")
        cc, fv, sv = cc[order], fv[order], sv[order]
        bounds = np.flatnonzero(np.diff(cc)) + 1
        comp_members = _group_members(comp, n_comp, free)
        for lo, hi in zip(np.concatenate([[0], bounds]), np.concatenate([bounds, [cc.size]])):
            c = int(cc[lo])
            fvs, svs = fv[lo:hi], sv[lo:hi]
            border = np.unique(svs)
            members = comp_members[c]
            if border.size == 1:
                x = int(border[0])
                mass[pos[x]] += deg[members].sum()
                continue
            local = {int(v): i for i, v in enumerate(members)}
            sub = A_ff[fid[members]][:, fid[members]]
            L = (sparse.diags(deg[members]) - sub).tocsc()
            lu = splu(L)
            fl = np.array([local[int(v)] for v in fvs])
            for x in border.tolist():
                rhs = np.zeros(members.size)
                np.add.at(rhs, fl[svs == x], 1.0)
                phi = lu.solve(rhs)
                mass[pos[x]] += float(deg[members] @ phi)
                own = svs == x
                current[pos[x]] += float(np.sum(1.0 - phi[fl[own]]))
                for y in border.tolist():
                    if y == x:
                        continue
                    into = float(np.sum(phi[fl[svs == y]]))
                    flows[pos[x]][y] = flows[pos[x]].get(y, 0.0) + into
    if np.any(current <= 0):
        raise ValueError("some selected vertex cannot reach the others")
    R = 1.0 / current
    targets, probs = [], []
    for i in range(sel.size):
        ys = np.array(sorted(flows[i]), np.int64)
        f = np.array([flows[i][y] for y in ys.tolist()])
        targets.append(ys)
        probs.append(f / f.sum() if f.size else f)
    return SojournTable(sel, R * mass, R, tuple(targets), tuple(probs))


def _group_members(comp, n_comp, free):
    ids = np.flatnonzero(free)
    order = np.argsort(comp, kind="stable")
    bounds = np.searchsorted(comp[order], np.arange(n_comp + 1))
    return [ids[order[bounds[c]:bounds[c + 1]]] for c in range(n_comp)]


def _sojourns_mc(g, mask, sel, n_runs, rng):
    indptr, indices = g.csr
    deg = np.diff(indptr)
    cum = np.concatenate([np.arange(1, d + 1) / d for d in deg]) if deg.size else np.zeros(0)
    hold = np.ones(g.n_vertices)
    expected, targets, probs = [], [], []
    _seed_kernel(rng)
    for x in sel.tolist():
        absorbing = mask.copy()
        absorbing[x] = False
        # force at least one step: start from a uniformly chosen neighbour
        hit_all, tau_all = [], []
        nb = indices[indptr[x]:indptr[x + 1]]
        starts = nb[rng.integers(0, nb.size, n_runs)]
        for s in np.unique(starts):
            k = int(np.sum(starts == s))
            if absorbing[s]:
                hit_all.append(np.full(k, s))
                tau_all.append(np.zeros(k))
                continue
            hit, tau = _kernels.lattice_hits(indptr, indices, cum, hold, int(s), absorbing, k, 10 ** 9)
            hit_all.append(hit)
            tau_all.append(tau)
        hit = np.concatenate(hit_all)
        tau = np.concatenate(tau_all)
        expected.append(1.0 + tau.mean())
        ys, cnt = np.unique(hit, return_counts=True)
        targets.append(ys)
        probs.append(cnt / cnt.sum())
    return SojournTable(sel, np.asarray(expected), np.full(sel.size, np.nan), tuple(targets), tuple(probs))


# --------------------------------------------------------------------------
# time-change profiles


def sausage_edge_counts(g: RootedGraph, tree: SkeletonTree, cuts: CutDecomposition | None = None) -> np.ndarray:
    """Number of graph edges with an endpoint ``y`` projecting to ``x`` and
    ``y != x``, per tree vertex ``x`` (zero at star centres)."""
    proj = sausage_projection(g, tree, cuts)
    a, b = g.edges[:, 0], g.edges[:, 1]
    in_a = proj[a] != a
    in_b = proj[b] != b
    owners = np.concatenate([proj[a[in_a]], proj[b[in_b & ~(in_a & (proj[a] == proj[b]))]]])
    counts = np.bincount(owners, minlength=g.n_vertices)
    out = np.zeros(tree.n_vertices, np.int64)
    out[tree.is_vstar] = counts[tree.graph_vertex[tree.is_vstar]]
    return out


@dataclass(frozen=True, eq=False)
class TimeChangeProfile:
    """Rescaled time-change profiles on a grid of diffusion times.

    ``raw = n^{-3/2} A(m(t))``, ``hat`` and ``tilde`` are the sojourn-averaged
    and commute-time versions, ``m`` the number of skeleton moves by time
    ``t`` and ``nu_hat`` the least-squares slope of ``raw`` through the
    origin after discarding the first ``trim`` fraction of the grid.
    """

    t: np.ndarray
    m: np.ndarray
    raw: np.ndarray
    hat: np.ndarray
    tilde: np.ndarray
    nu_hat: float
    cv: float
    n: int
    trim: float = 0.1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,m,raw,hat,tilde\n")
        for row in zip(self.t, self.m, self.raw, self.hat, self.tilde):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def relative_gap(self, which: str = "tilde") -> np.ndarray:
        other = getattr(self, which)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.raw - other) / self.raw

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "m": self.m.tolist(), "raw": self.raw.tolist(),
                "hat": self.hat.tolist(), "tilde": self.tilde.tolist(),
                "nu_hat": self.nu_hat, "cv": self.cv, "n": self.n, "trim": self.trim}


def _fit_through_origin(t, y, trim):
    k = int(math.floor(trim * t.size))
    tt, yy = t[k:], y[k:]
    good = tt > 0
    tt, yy = tt[good], yy[good]
    if tt.size < 2:
        return float("nan"), float("nan")
    nu = float(np.dot(tt, yy) / np.dot(tt, tt))
    ratio = yy / tt
    cv = float(ratio.std() / ratio.mean()) if ratio.mean() > 0 else float("nan")
    return nu, cv


def time_change_profiles(g: RootedGraph, tree: SkeletonTree, record: TraceRecord, t_grid=None,
                         n: int | None = None, cuts: CutDecomposition | None = None,
                         sojourns: SojournTable | None = None, n_grid: int = 50,
                         trim: float = 0.1) -> TimeChangeProfile:
    """Raw, averaged and commute-time profiles along a traced walk.

    The diffusion clock charges every skeleton move from ``x`` with the mean
    exit time of the tree diffusion (resistances scaled by ``n^{-1/2}``,
    normalized resistance-Lebesgue speed measure) from ``x`` to the other
    skeleton vertices.
    """
    if tree.n_graph_vertices != g.n_vertices:
        raise ValueError("skeleton was not built from this graph")
    n = g.n_vertices if n is None else int(n)
    vstar_graph = tree.graph_vertex[tree.is_vstar]
    if sojourns is None:
        sojourns = expected_sojourns(g, vstar_graph)
    tau = np.zeros(g.n_vertices)
    tau[sojourns.vertices] = sojourns.expected
    _, _, diff_sojourn = skeleton_vertex_chain(tree, rescale=n ** -0.5)
    dclock = np.zeros(g.n_vertices)
    dclock[vstar_graph] = diff_sojourn[tree.is_vstar]

    J, A = record.J, record.A
    if J.size < 2:
        raise ValueError("trace has fewer than two skeleton visits")
    clock = np.concatenate([[0.0], np.cumsum(dclock[J[:-1]])])
    if t_grid is None:
        t_grid = np.linspace(0.0, clock[-1], n_grid + 1)[1:]
    t_grid = np.asarray(t_grid, float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be nondecreasing")
    m_of_t = np.searchsorted(clock, t_grid, side="right") - 1
    m_of_t = np.clip(m_of_t, 0, J.size - 1)

    scale = n ** -1.5
    raw = scale * A[m_of_t].astype(float)
    hat_cum = np.concatenate([[0.0], np.cumsum(tau[J[:-1]])])
    hat = scale * hat_cum[m_of_t]

    # E* crossings: tree edges of kind E* whose endpoints are consecutive in J
    counts = sausage_edge_counts(g, tree, cuts)
    weight = {}
    for v in range(1, tree.n_vertices):
        if tree.kind[v] == KIND_EDGE:
            p = int(tree.parent[v])
            a_, b_ = int(tree.graph_vertex[p]), int(tree.graph_vertex[v])
            w = 2.0 * float(tree.resistance[v]) * float(counts[p])
            weight[(a_, b_)] = (v, w)
            weight[(b_, a_)] = (v, w)
    steps_edge = np.full(J.size - 1, -1, np.int64)
    edge_w = np.zeros(tree.n_vertices)
    for i, (a_, b_) in enumerate(zip(J[:-1].tolist(), J[1:].tolist())):
        hit = weight.get((a_, b_))
        if hit is not None:
            steps_edge[i] = hit[0]
            edge_w[hit[0]] = hit[1]
    tilde = np.zeros(t_grid.size)
    crossings = np.zeros(tree.n_vertices, np.int64)
    done = 0
    for k, m in enumerate(m_of_t):
        seg = steps_edge[done:m]
        seg = seg[seg >= 0]
        if seg.size:
            np.add.at(crossings, seg, 1)
        done = max(done, int(m))
        tilde[k] = scale * float(np.sum(edge_w * np.ceil(crossings / 2.0)))
    nu, cv = _fit_through_origin(t_grid, raw, trim)
    return TimeChangeProfile(t_grid, m_of_t, raw, hat, tilde, nu, cv, n, trim)


# --------------------------------------------------------------------------
# exponents


def log_checkpoints(lo: int, hi: int, count: int) -> np.ndarray:
    """Distinct integers spaced evenly in log scale between ``lo`` and ``hi``."""
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))


@dataclass(frozen=True, eq=False)
class WalkCurves:
    """Sums over ``n_walks`` walks on one graph at every checkpoint."""

    checkpoints: np.ndarray
    sum_dist: np.ndarray
    sum_euc: np.ndarray
    sum_ret: np.ndarray
    n_walks: int
    has_location: bool
    has_returns: bool

    def mean(self, which: str) -> np.ndarray:
        return getattr(self, "sum_" + which) / self.n_walks


def walk_curves(g: RootedGraph, checkpoints, n_walks: int, rng: np.random.Generator,
                returns: bool = False, start: int | None = None) -> WalkCurves:
    """Run ``n_walks`` walks from the root and accumulate displacement
    observables; with ``returns`` the walks run to twice the last checkpoint
    so that ``X_{2m} = X_0`` can be recorded."""
    cps = np.asarray(checkpoints, np.int64)
    if cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 1:
        raise ValueError("checkpoints must be increasing positive integers")
    start = g.root if start is None else int(start)
    indptr, indices = g.csr
    dist = g.bfs_distances(start)
    loc = g.location if g.location is not None else np.zeros((g.n_vertices, 0), np.int64)
    steps = int(cps[-1]) * (2 if returns else 1)
    _seed_kernel(rng)
    d, e, r = _kernels.walk_observables(indptr, indices, start, steps, cps, dist.astype(np.int64),
                                        np.asarray(loc, np.float64), int(n_walks))
    return WalkCurves(cps, d, e, r, int(n_walks), g.location is not None, returns)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    se: float
    ci_low: float
    ci_high: float
    intercept: float
    n_points: int
    boot: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"slope": self.slope, "se": self.se, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "intercept": self.intercept, "n_points": self.n_points}


def _loglog_slope(x, y):
    X = np.log(x)
    Y = np.log(y)
    A = np.column_stack([X, np.ones_like(X)])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    return float(coef[0]), float(coef[1])


def exponent_stats(curves: Sequence[WalkCurves], window=None, return_window=None,
                   n_boot: int = 1000, rng: np.random.Generator | None = None) -> dict:
    """Log-log slopes of the ensemble-mean curves with graph-level bootstrap.

    Parameters
    ----------
    curves : sequence of WalkCurves
        One entry per independently sampled graph; displacement and return
        curves may come from separate runs (they are matched by flags).
    window, return_window : (lo, hi), optional
        Checkpoint ranges used for the displacement and return fits.

    Returns
    -------
    dict with keys ``intrinsic_slope``, ``euclidean_slope`` and
    ``return_slope`` mapped to :class:`ExponentFit` (or None when the curves
    needed are missing).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    curves = list(curves)
    if not curves:
        raise ValueError("empty ensemble")
    out = {}
    disp = [c for c in curves if not c.has_returns]
    if not disp:
        disp = curves
    ret = [c for c in curves if c.has_returns]
    specs = [("intrinsic_slope", disp, "dist", window),
             ("euclidean_slope", [c for c in disp if c.has_location], "euc", window),
             ("return_slope", ret, "ret", return_window)]
    for name, group, which, win in specs:
        if not group:
            out[name] = None
            continue
        cps = group[0].checkpoints
        if any(not np.array_equal(c.checkpoints, cps) for c in group):
            raise ValueError("all curves in an ensemble need the same checkpoints")
        lo, hi = (cps[0], cps[-1]) if win is None else win
        sel = (cps >= lo) & (cps <= hi)
        sums = np.array([c.mean(which) * c.n_walks for c in group])
        walks = np.array([c.n_walks for c in group], float)
        mean = sums.sum(0) / walks.sum()
        use = sel & (mean > 0)
        if use.sum() < 3 or cps[use][-1] < 4 * cps[use][0]:
            raise ValueError(f"insufficient range for {name}: need three positive points "
                             "spanning a factor of at least four")
        x = cps[use].astype(float)
        slope, icpt = _loglog_slope(x, mean[use])
        boots = []
        for _ in range(n_boot):
            pick = rng.integers(0, len(group), len(group))
            m = sums[pick].sum(0)[use] / walks[pick].sum()
            if np.all(m > 0):
                boots.append(_loglog_slope(x, m)[0])
        boots = np.asarray(boots)
        se = float(boots.std(ddof=1)) if boots.size > 1 else float("nan")
        lo_ci, hi_ci = (np.percentile(boots, [2.5, 97.5]) if boots.size > 1 else (np.nan, np.nan))
        out[name] = ExponentFit(slope, se, float(lo_ci), float(hi_ci), icpt, int(use.sum()), boots)
    return out
