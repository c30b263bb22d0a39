"""Rooted unit-conductance graphs and their exact electrical quantities.

The graph type is a frozen container around an edge array; adjacency in CSR
form, degrees and the bridge structure are computed lazily and cached.
Electrical quantities (effective resistance, escape probabilities, hitting
time moments) are obtained from sparse direct solves.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels

__all__ = [
    "RootedGraph",
    "CutDecomposition",
    "HittingMoments",
    "ResistanceSolver",
    "find_cut_decomposition",
    "effective_resistance",
    "triangle_arm_conductances",
    "hitting_time_moments",
    "verify_variance_bound",
    "verify_fourth_moment_bound",
    "IncrementLaw",
    "StoppingRule",
    "read_edge_list",
    "write_edge_list",
    "FOURTH_MOMENT_CONSTANT",
]

FOURTH_MOMENT_CONSTANT = 148.0


class GraphStructureError(ValueError):
    """Raised when an edge set does not describe a connected simple graph."""


@dataclass(frozen=True, eq=False)
class RootedGraph:
    """Connected simple graph with unit conductances and a root.

    Parameters
    ----------
    n_vertices : int
        Vertices are ``0 .. n_vertices - 1``.
    edges : array_like, shape (m, 2)
        Undirected edges; stored with ``u < v`` and sorted.
    root : int
        Distinguished vertex.
    location : array_like, shape (n_vertices, d), optional
        Lattice point of every vertex.
    """

    n_vertices: int
    edges: np.ndarray
    root: int = 0
    location: np.ndarray | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if e.size:
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "n_vertices", int(self.n_vertices))
        object.__setattr__(self, "root", int(self.root))
        if self.location is not None:
            loc = np.asarray(self.location, dtype=np.int64)
            if loc.ndim == 1:
                loc = loc[:, None]
            object.__setattr__(self, "location", loc)
        if self.validate:
            self._check()

    def _check(self):
        n, e = self.n_vertices, self.edges
        if n < 1:
            raise GraphStructureError("graph needs at least one vertex")
        if not 0 <= self.root < n:
            raise GraphStructureError(f"root {self.root} is not a vertex")
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise GraphStructureError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise GraphStructureError("self-loops are not allowed")
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise GraphStructureError("parallel edges are not allowed")
        if self.location is not None and self.location.shape[0] != n:
            raise GraphStructureError("location table has the wrong length")
        if np.any(self.bfs_distances(self.root) < 0):
            raise GraphStructureError("graph is not connected")

    # structure -----------------------------------------------------------
    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_vertices
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst.astype(np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def dim(self) -> int:
        return 0 if self.location is None else int(self.location.shape[1])

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.csr[0])

    @property
    def is_tree(self) -> bool:
        return self.n_edges == self.n_vertices - 1

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[v]:indptr[v + 1]]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        indptr, indices = self.csr
        n = self.n_vertices
        return sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(n, n))

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degree.astype(float)) - self.adjacency).tocsr()

    def bfs_distances(self, source: int) -> np.ndarray:
        indptr, indices = self.csr
        return _kernels.bfs_distances(indptr, indices, int(source))

    def distance(self, x: int, y: int) -> int:
        return int(self.bfs_distances(x)[y])

    @cached_property
    def diameter(self) -> int:
        indptr, indices = self.csr
        if self.is_tree:
            d0 = self.bfs_distances(0)
            far = int(np.argmax(d0))
            return int(self.bfs_distances(far).max())
        return int(_kernels.all_pairs_max_distance(indptr, indices))

    @cached_property
    def cut_decomposition(self) -> "CutDecomposition":
        return find_cut_decomposition(self)

    def subgraph(self, vertices: Iterable[int], root: int | None = None,
                 extra_edges: np.ndarray | None = None) -> tuple["RootedGraph", np.ndarray]:
        """Induced subgraph (plus optional extra edges) with relabelled vertices.

        Returns the subgraph and the array mapping new labels to old ones.
        """
        keep = np.unique(np.fromiter(vertices, dtype=np.int64))
        new_id = np.full(self.n_vertices, -1, np.int64)
        new_id[keep] = np.arange(keep.size)
        e = self.edges
        mask = (new_id[e[:, 0]] >= 0) & (new_id[e[:, 1]] >= 0)
        sub_e = new_id[e[mask]]
        if extra_edges is not None and len(extra_edges):
            sub_e = np.vstack([sub_e, new_id[np.asarray(extra_edges, np.int64).reshape(-1, 2)]])
            sub_e = np.unique(np.sort(sub_e, axis=1), axis=0)
        r = keep[0] if root is None else root
        loc = None if self.location is None else self.location[keep]
        return RootedGraph(keep.size, sub_e, int(new_id[r]), loc), keep


# --------------------------------------------------------------------------
# cut decomposition


@dataclass(frozen=True, eq=False)
class CutDecomposition:
    """Bridges of a rooted graph and the components left after removing them.

    ``bridges[i] = (cut_point, far_end)``; the cut-point is the endpoint that
    stays connected to the root.  ``bubble[v]`` labels the bridge-free
    component of ``v``; ``bubble_entry[b]`` is the index of the bridge leading
    into bubble ``b`` from the root side (-1 for the root's bubble).
    """

    bridges: np.ndarray
    bubble: np.ndarray
    bubble_entry: np.ndarray
    dfs_parent: np.ndarray
    bridge_below: np.ndarray
    n_bubbles: int

    @cached_property
    def cut_points(self) -> np.ndarray:
        return np.unique(self.bridges[:, 0]) if self.bridges.size else np.empty(0, np.int64)

    @cached_property
    def is_cut_point(self) -> np.ndarray:
        flag = np.zeros(self.bubble.size, bool)
        flag[self.cut_points] = True
        return flag

    @property
    def cut_bonds(self) -> list[tuple[tuple[int, int], int]]:
        return [((int(min(a, b)), int(max(a, b))), int(a)) for a, b in self.bridges]

    def bubble_members(self, b: int) -> np.ndarray:
        return np.flatnonzero(self.bubble == b)

    @cached_property
    def _members_sorted(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.bubble, kind="stable")
        starts = np.searchsorted(self.bubble[order], np.arange(self.n_bubbles + 1))
        return order, starts

    def members(self, b: int) -> np.ndarray:
        order, starts = self._members_sorted
        return order[starts[b]:starts[b + 1]]


def find_cut_decomposition(g: RootedGraph) -> CutDecomposition:
    """Bridges, cut-points and bubbles of ``g``.

    Uses one iterative low-link depth-first pass from the root; bubbles are
    the connected components of ``g`` with all bridges removed.
    """
    indptr, indices = g.csr
    parent, below, _ = _kernels.dfs_bridges(indptr, indices, g.root)
    child = np.flatnonzero(below)
    bridges = np.column_stack([parent[child], child]).astype(np.int64)
    bridges = bridges[np.lexsort((bridges[:, 1], bridges[:, 0]))] if bridges.size else bridges.reshape(0, 2)
    # components without bridges
    n = g.n_vertices
    is_br = np.zeros(n, bool)
    is_br[child] = True
    e = g.edges
    # an edge (a, b) is a bridge iff one endpoint is the DFS child of the other and flagged
    a, b = e[:, 0], e[:, 1]
    edge_is_bridge = (is_br[b] & (parent[b] == a)) | (is_br[a] & (parent[a] == b))
    keep = e[~edge_is_bridge]
    adj = sp.csr_matrix((np.ones(len(keep)), (keep[:, 0], keep[:, 1])), shape=(n, n))
    n_comp, label = sp.csgraph.connected_components(adj, directed=False)
    # relabel bubbles so the root's bubble is 0 and labels follow BFS order
    dist = g.bfs_distances(g.root)
    first = np.full(n_comp, np.iinfo(np.int64).max)
    np.minimum.at(first, label, dist * n + np.arange(n))
    rank = np.empty(n_comp, np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(n_comp)
    bubble = rank[label].astype(np.int64)
    entry = np.full(n_comp, -1, np.int64)
    if len(bridges):
        entry[bubble[bridges[:, 1]]] = np.arange(len(bridges))
    return CutDecomposition(bridges, bubble, entry, parent, below, int(n_comp))


# --------------------------------------------------------------------------
# resistance


def _grounded_factor(g: RootedGraph, ground: int):
    L = g.laplacian().tocsc()
    keep = np.ones(g.n_vertices, bool)
    keep[ground] = False
    idx = np.flatnonzero(keep)
    Lr = L[idx][:, idx].tocsc()
    return spla.splu(Lr), idx


class ResistanceSolver:
    """Effective resistances on one graph from a single grounded factorization.

    With the Laplacian grounded at ``ground`` and Green matrix ``G``,
    ``R(x, y) = G[x,x] + G[y,y] - 2 G[x,y]``.
    """

    def __init__(self, g: RootedGraph, ground: int | None = None):
        self.g = g
        self.ground = g.root if ground is None else int(ground)
        self._tree = g.is_tree
        if not self._tree and g.n_vertices > 1:
            self._lu, idx = _grounded_factor(g, self.ground)
            self._pos = np.full(g.n_vertices, -1, np.int64)
            self._pos[idx] = np.arange(idx.size)
        self._cols: dict[int, np.ndarray] = {}

    def _green_column(self, x: int) -> np.ndarray:
        col = self._cols.get(x)
        if col is None:
            n = self.g.n_vertices
            col = np.zeros(n)
            if x != self.ground:
                rhs = np.zeros(n - 1)
                rhs[self._pos[x]] = 1.0
                sol = self._lu.solve(rhs)
                col[self._pos >= 0] = sol[self._pos[self._pos >= 0]]
            self._cols[x] = col
        return col

    def resistance(self, x: int, y: int) -> float:
        if x == y:
            return 0.0
        if self._tree:
            return float(self.g.distance(x, y))
        cx, cy = self._green_column(x), self._green_column(y)
        return float(cx[x] + cy[y] - 2.0 * cx[y])

    def __call__(self, x: int, y: int) -> float:
        return self.resistance(x, y)


def effective_resistance(g: RootedGraph, x: int, y: int) -> float:
    """Effective resistance between ``x`` and ``y`` with unit conductances.

    Trees short-circuit to the graph distance.  ``R(x, x) = 0``.

    Raises
    ------
    ArithmeticError
        If the grounded solve does not reproduce the unit current injection.
    """
    x, y = int(x), int(y)
    if x == y:
        return 0.0
    if g.is_tree:
        return float(g.distance(x, y))
    L = g.laplacian().tocsc()
    n = g.n_vertices
    keep = np.ones(n, bool)
    keep[y] = False
    idx = np.flatnonzero(keep)
    Lr = L[idx][:, idx].tocsc()
    rhs = np.zeros(n - 1)
    xi = int(np.searchsorted(idx, x))
    rhs[xi] = 1.0
    v = spla.spsolve(Lr, rhs)
    resid = np.linalg.norm(Lr @ v - rhs)
    if not np.all(np.isfinite(v)) or resid > 1e-10 * max(1.0, np.abs(v).max()):
        raise ArithmeticError(f"effective resistance solve failed (residual {resid:.3g})")
    return float(v[xi])


def triangle_arm_conductances(g: RootedGraph, x: int, y: int, z: int) -> dict:
    """Pairwise triangle conductances among three terminals.

    The conductance of the pair (s, t) is ``deg(s) * P_s[T_t < T_u and T_t < T_s^+]``
    where ``u`` is the third terminal.  For every source the escape
    probabilities are harmonic functions on the non-terminal vertices, solved
    from one factorization of the absorbed chain.

    Returns
    -------
    dict
        ``{"xy", "yz", "zx"}`` conductances plus ``"matrix"`` with entry
        ``[s, t]`` computed from source ``s`` (symmetric up to round-off).
    """
    terms = [int(x), int(y), int(z)]
    if len(set(terms)) < 3:
        raise ValueError("triangle terminals must be distinct")
    n = g.n_vertices
    W = g.adjacency.tocsr()
    free = np.ones(n, bool)
    free[terms] = False
    U = np.flatnonzero(free)
    deg = g.degree.astype(float)
    if U.size:
        A = (sp.diags(deg[U]) - W[U][:, U]).tocsc()
        lu = spla.splu(A)
    M = np.zeros((3, 3))
    for j, t in enumerate(terms):
        # h_t: probability of reaching t before the other two terminals
        if U.size:
            b = np.asarray(W[U][:, [t]].todense()).ravel()
            h = lu.solve(b)
        for i, s in enumerate(terms):
            if i == j:
                continue
            flow = W[s, t]
            if U.size:
                row = W[[s]][:, U].toarray().ravel()
                flow += row @ h
            M[i, j] = flow
    out = {"xy": 0.5 * (M[0, 1] + M[1, 0]), "yz": 0.5 * (M[1, 2] + M[2, 1]),
           "zx": 0.5 * (M[2, 0] + M[0, 2]), "matrix": M}
    return out


# --------------------------------------------------------------------------
# hitting times


class HittingMoments(NamedTuple):
    source: int
    target: int
    moments: tuple[float, ...]

    def moment(self, k: int) -> float:
        return self.moments[k - 1]


def _absorbed_chain(g: RootedGraph, target: int):
    n = g.n_vertices
    keep = np.ones(n, bool)
    keep[target] = False
    idx = np.flatnonzero(keep)
    P = sp.diags(1.0 / g.degree) @ g.adjacency
    Q = P.tocsr()[idx][:, idx].tocsc()
    return Q, idx


def _hitting_moment_table(g: RootedGraph, target: int, max_order: int):
    Q, idx = _absorbed_chain(g, target)
    lu = spla.splu((sp.identity(Q.shape[0], format="csc") - Q).tocsc())
    Qr = Q.tocsr()
    moms = []
    for k in range(1, max_order + 1):
        rhs = np.ones(Q.shape[0])
        for j in range(1, k):
            rhs += math.comb(k, j) * (Qr @ moms[j - 1])
        m = lu.solve(rhs)
        if not np.all(np.isfinite(m)):
            raise ArithmeticError("singular absorbed chain")
        moms.append(m)
    return moms, idx


def hitting_time_moments(g: RootedGraph, x: int, y: int, max_order: int = 4) -> HittingMoments:
    """``E_x[T_y^k]`` for ``k = 1..max_order`` from the absorbed-chain recursion.

    With ``T = 1 + T'`` after the first step, the order-k vector solves
    ``(I - Q) m_k = 1 + sum_{j<k} C(k, j) Q m_j``.
    """
    x, y = int(x), int(y)
    if x == y:
        raise ValueError("source and target must differ")
    if g.n_vertices < 2:
        raise ValueError("graph has a single vertex")
    moms, idx = _hitting_moment_table(g, y, max_order)
    pos = int(np.searchsorted(idx, x))
    return HittingMoments(x, y, tuple(float(m[pos]) for m in moms))


def verify_variance_bound(g: RootedGraph, x: int, y: int) -> dict:
    """Second moment of the commute time against ``16 |E|^2 diam R(x, y)``."""
    mx = hitting_time_moments(g, x, y, 2)
    my = hitting_time_moments(g, y, x, 2)
    lhs = mx.moments[1] + my.moments[1]
    rhs = 16.0 * g.n_edges ** 2 * g.diameter * effective_resistance(g, x, y)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs)}


# --------------------------------------------------------------------------
# fourth moment of a stopped sum


@dataclass(frozen=True)
class IncrementLaw:
    """Mean-zero increment law with known second and fourth moments."""

    name: str
    m2: float
    m4: float

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        counts = np.asarray(counts, np.int64)
        if self.name == "zero":
            return np.zeros(counts.size)
        if self.name == "rademacher":
            return 2.0 * rng.binomial(counts, 0.5) - counts
        if self.name == "gaussian":
            return rng.standard_normal(counts.size) * np.sqrt(counts)
        if self.name == "uniform":
            out = np.zeros(counts.size)
            cap = int(counts.max()) if counts.size else 0
            for k in range(cap):
                live = counts > k
                out[live] += rng.uniform(-math.sqrt(3), math.sqrt(3), int(live.sum()))
            return out
        raise ValueError(f"no sampler for {self.name}")


_LAWS = {
    "zero": IncrementLaw("zero", 0.0, 0.0),
    "rademacher": IncrementLaw("rademacher", 1.0, 1.0),
    "gaussian": IncrementLaw("gaussian", 1.0, 3.0),
    "uniform": IncrementLaw("uniform", 1.0, 9.0 / 5.0),
}
_HEAVY = ("cauchy", "pareto", "student_t", "levy", "stable")


def _parse_law(spec) -> IncrementLaw:
    if isinstance(spec, IncrementLaw):
        return spec
    name = str(spec).lower()
    if name.split(":")[0] in _HEAVY:
        raise ValueError(f"heavy-tailed increment law {spec!r} has no finite fourth moment")
    try:
        return _LAWS[name]
    except KeyError:
        raise ValueError(f"unknown increment law {spec!r}") from None


@dataclass(frozen=True)
class StoppingRule:
    """``fixed:n`` or ``geometric:p[:cap]`` (support 1, 2, ..., truncated at cap)."""

    kind: str
    n: int = 0
    p: float = 0.5
    cap: int | None = None

    @classmethod
    def parse(cls, spec) -> "StoppingRule":
        if isinstance(spec, StoppingRule):
            return spec
        parts = str(spec).split(":")
        if parts[0] == "fixed":
            return cls("fixed", n=int(parts[1]))
        if parts[0] == "geometric":
            p = float(parts[1]) if len(parts) > 1 else 0.5
            cap = int(parts[2]) if len(parts) > 2 else None
            if not 0 < p <= 1:
                raise ValueError("geometric parameter must lie in (0, 1]")
            return cls("geometric", p=p, cap=cap)
        raise ValueError(f"unknown stopping rule {spec!r}")

    def moments(self) -> tuple[float, float]:
        """Exact ``E[tau]`` and ``E[tau^2]``."""
        if self.kind == "fixed":
            return float(self.n), float(self.n) ** 2
        p, q = self.p, 1.0 - self.p
        if self.cap is None:
            return 1.0 / p, (2.0 - p) / p ** 2
        k = np.arange(1, self.cap + 1, dtype=float)
        w = p * q ** (k - 1)
        w[-1] = q ** (self.cap - 1)
        return float(w @ k), float(w @ k ** 2)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(size, self.n, np.int64)
        tau = rng.geometric(self.p, size)
        if self.cap is not None:
            np.minimum(tau, self.cap, out=tau)
        return tau


def verify_fourth_moment_bound(sample_law, stopping_rule, trials: int,
                               rng: np.random.Generator, C: float = FOURTH_MOMENT_CONSTANT,
                               chunk: int = 200_000) -> dict:
    """Monte Carlo check of ``E[S_tau^4] <= C (m2^2 E[tau^2] + m4 E[tau])``.

    For a fixed stopping time the exact value ``n m4 + 3 n (n-1) m2^2`` is
    reported alongside the estimate.
    """
    law = _parse_law(sample_law)
    rule = StoppingRule.parse(stopping_rule)
    e_tau, e_tau2 = rule.moments()
    rhs = C * (law.m2 ** 2 * e_tau2 + law.m4 * e_tau)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        tau = rule.sample(k, rng)
        s4 = law.sample_sums(tau, rng) ** 4
        total += s4.sum()
        total_sq += (s4 ** 2).sum()
        done += k
    mean = total / trials if trials else 0.0
    var = max(total_sq / trials - mean ** 2, 0.0) if trials else 0.0
    out = {"lhs_estimate": mean, "lhs_stderr": math.sqrt(var / max(trials, 1)),
           "rhs": rhs, "C_used": C, "holds": bool(mean <= rhs),
           "E_tau": e_tau, "E_tau2": e_tau2, "trials": int(trials)}
    if rule.kind == "fixed":
        n = rule.n
        out["lhs_exact"] = n * law.m4 + 3.0 * n * (n - 1) * law.m2 ** 2
    return out


# --------------------------------------------------------------------------
# edge-list format


def write_edge_list(g: RootedGraph, dest) -> None:
    """Write ``d <dim> root <idx>``, then ``u v`` lines, then ``loc`` lines."""
    buf = io.StringIO()
    buf.write(f"d {g.dim} root {g.root}\n")
    for u, v in g.edges:
        buf.write(f"{u} {v}\n")
    if g.location is not None:
        for i, row in enumerate(g.location):
            buf.write("loc " + str(i) + " " + " ".join(str(int(c)) for c in row) + "\n")
    if g.edges.size == 0 and g.location is None:
        buf.write(f"n {g.n_vertices}\n")
    text = buf.getvalue()
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(os.fspath(dest), "w") as fh:
            fh.write(text)


def read_edge_list(src) -> RootedGraph:
    if hasattr(src, "read"):
        text = src.read()
    else:
        with open(os.fspath(src)) as fh:
            text = fh.read()
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][0] != "d" or len(lines[0]) != 4 or lines[0][2] != "root":
        raise ValueError("edge list must start with 'd <dim> root <idx>'")
    dim, root = int(lines[0][1]), int(lines[0][3])
    edges, locs, n_hint = [], {}, 0
    for ln in lines[1:]:
        if ln[0] == "loc":
            if len(ln) != 2 + dim:
                raise ValueError("loc line has the wrong dimension")
            locs[int(ln[1])] = [int(c) for c in ln[2:]]
        elif ln[0] == "n":
            n_hint = int(ln[1])
        else:
            if len(ln) != 2:
                raise ValueError(f"bad edge line {' '.join(ln)!r}")
            edges.append((int(ln[0]), int(ln[1])))
    e = np.array(edges, np.int64).reshape(-1, 2)
    n = max(n_hint, root + 1, int(e.max()) + 1 if e.size else 1, max(locs) + 1 if locs else 0)
    loc = None
    if dim > 0 and locs:
        if len(locs) != n:
            raise ValueError("loc lines must cover every vertex")
        loc = np.array([locs[i] for i in range(n)], np.int64)
    return RootedGraph(n, e, root, loc)
