"""Random graph models: conditioned critical Galton-Watson trees, their
branching-random-walk traces in Z^d, and mark sampling on cut-points.

A few small generators used as test corpora (random connected graphs,
bubble-decorated trees) live here as well.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numba import njit

from . import _kernels
from .graph import CutDecomposition, RootedGraph, find_cut_decomposition

__all__ = [
    "OffspringLaw",
    "OFFSPRING_LAWS",
    "ModelSpec",
    "gen_gw_tree",
    "gen_brw_trace",
    "sample_marks",
    "sample_graph",
    "path_graph",
    "random_connected_graph",
    "random_bubbly_graph",
    "add_shortcuts",
    "lukasiewicz_rotate",
]


@dataclass(frozen=True)
class OffspringLaw:
    """Critical offspring distribution given by a finite or named pmf.

    ``pmf`` lists P(k) for k = 0, 1, ...; for the named infinite-support laws
    it is a truncation used only for validation and rejection sampling.
    """

    name: str
    pmf: tuple[float, ...]
    period: int = 1

    @property
    def mean(self) -> float:
        p = np.asarray(self.pmf)
        return float(p @ np.arange(p.size))

    @property
    def variance(self) -> float:
        p = np.asarray(self.pmf)
        k = np.arange(p.size)
        return float(p @ k ** 2 - (p @ k) ** 2)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.name == "geometric":
            return rng.geometric(0.5, size) - 1
        if self.name == "poisson":
            return rng.poisson(1.0, size)
        p = np.asarray(self.pmf)
        return rng.choice(p.size, size=size, p=p / p.sum())

    def conditioned_offspring(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. offspring numbers conditioned on summing to n - 1."""
        total = n - 1
        if self.name == "geometric":
            # uniform weak composition of n-1 into n parts (stars and bars)
            if n == 1:
                return np.zeros(1, np.int64)
            bars = np.sort(rng.choice(2 * n - 2, n - 1, replace=False))
            edges = np.concatenate([[-1], bars, [2 * n - 2]])
            return (np.diff(edges) - 1).astype(np.int64)
        if self.name == "poisson":
            return rng.multinomial(total, np.full(n, 1.0 / n)).astype(np.int64)
        if self.name == "binary":
            if total % 2:
                raise ValueError("binary offspring law only produces trees of odd size")
            xi = np.zeros(n, np.int64)
            xi[rng.choice(n, total // 2, replace=False)] = 2
            return xi
        for _ in range(100_000):
            xi = self.sample(n, rng)
            if xi.sum() == total:
                return xi.astype(np.int64)
        raise RuntimeError("rejection sampler for the offspring sum did not terminate")


def _geometric_pmf(kmax=200):
    return tuple(0.5 ** (k + 1) for k in range(kmax))


def _poisson_pmf(kmax=60):
    out, p = [], np.exp(-1.0)
    for k in range(kmax):
        out.append(p)
        p /= k + 1
    return tuple(out)


OFFSPRING_LAWS = {
    "geometric": OffspringLaw("geometric", _geometric_pmf()),
    "poisson": OffspringLaw("poisson", _poisson_pmf()),
    "binary": OffspringLaw("binary", (0.5, 0.0, 0.5), period=2),
}


def _resolve_law(offspring) -> OffspringLaw:
    if isinstance(offspring, OffspringLaw):
        law = offspring
    else:
        try:
            law = OFFSPRING_LAWS[str(offspring)]
        except KeyError:
            raise ValueError(f"unsupported offspring law {offspring!r}") from None
    if abs(law.mean - 1.0) > 1e-9:
        raise ValueError(f"offspring law {law.name} is not critical (mean {law.mean})")
    return law


def lukasiewicz_rotate(xi: np.ndarray) -> np.ndarray:
    """Cyclic shift making ``xi`` the depth-first offspring sequence of a tree.

    The increments ``xi - 1`` sum to -1; starting right after the first
    index where their partial sums attain the minimum gives the unique
    rotation whose partial sums stay >= 0 until the final step.
    """
    s = np.cumsum(xi - 1)
    k = int(np.argmin(s)) + 1
    return np.roll(xi, -k)


@njit(cache=True)
def _parents_from_offspring(xi):
    n = xi.size
    parent = np.full(n, -1, np.int64)
    stack = np.empty(n, np.int64)
    slots = np.empty(n, np.int64)
    top = -1
    if xi[0] > 0:
        top = 0
        stack[0] = 0
        slots[0] = xi[0]
    for v in range(1, n):
        p = stack[top]
        parent[v] = p
        slots[top] -= 1
        if slots[top] == 0:
            top -= 1
        if xi[v] > 0:
            top += 1
            stack[top] = v
            slots[top] = xi[v]
    return parent


def gen_gw_tree(n: int, offspring="geometric", rng: np.random.Generator | None = None) -> RootedGraph:
    """Galton-Watson tree conditioned on exactly ``n`` vertices.

    Vertices are numbered in depth-first order with the root at 0.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    law = _resolve_law(offspring)
    xi = lukasiewicz_rotate(law.conditioned_offspring(n, rng))
    parent = _parents_from_offspring(xi)
    child = np.arange(1, n)
    return RootedGraph(n, np.column_stack([parent[1:], child]), 0, validate=False)


def tree_parents(tree: RootedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Breadth-first order from the root and the parent of every vertex."""
    order, pred = sp.csgraph.breadth_first_order(tree.adjacency, tree.root, directed=False)
    return order.astype(np.int64), pred.astype(np.int64)


def gen_brw_trace(tree: RootedGraph, d: int, rng: np.random.Generator) -> RootedGraph:
    """Trace in Z^d of a nearest-neighbour branching random walk indexed by ``tree``.

    Every tree edge carries an independent uniform unit step; the trace keeps
    the visited lattice points and the traversed lattice edges (each once).
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    n = tree.n_vertices
    order, parent = tree_parents(tree)
    steps = np.zeros((n, d), np.int64)
    axis = rng.integers(0, d, n)
    sign = rng.integers(0, 2, n) * 2 - 1
    steps[np.arange(n), axis] = sign
    steps[tree.root] = 0
    loc = _accumulate(order, parent, steps)
    pts, inv = _unique_rows(loc)
    if n > 1:
        kids = order[1:]
        e = np.sort(np.column_stack([inv[parent[kids]], inv[kids]]), axis=1)
        e = np.unique(e, axis=0)
    else:
        e = np.empty((0, 2), np.int64)
    return RootedGraph(pts.shape[0], e, int(inv[tree.root]), pts, validate=False)


def _unique_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted distinct rows and the inverse map."""
    order = np.lexsort(a.T[::-1])
    srt = a[order]
    new = np.ones(len(a), bool)
    new[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    label = np.cumsum(new) - 1
    inv = np.empty(len(a), np.int64)
    inv[order] = label
    return srt[new], inv


@njit(cache=True)
def _accumulate(order, parent, steps):
    loc = np.zeros_like(steps)
    for i in range(1, order.size):
        v = order[i]
        loc[v] = loc[parent[v]] + steps[v]
    return loc


def path_graph(n: int, root: int = 0) -> RootedGraph:
    e = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return RootedGraph(n, e, root, np.arange(n)[:, None])


# --------------------------------------------------------------------------
# marks


MARK_LAWS = ("uniform_cut_points", "uniform_vertices_projected")


def cut_point_projection(g: RootedGraph, cuts: CutDecomposition) -> np.ndarray:
    """Map every vertex to itself if it is a cut-point, else to the last
    cut-point separating it from the root.

    Vertices of the root's bubble that are separated by nothing map to the
    cut-point of that bubble nearest to the root.
    """
    if cuts.cut_points.size == 0:
        raise ValueError("graph has no cut-points")
    indptr, indices = g.csr
    dist = g.bfs_distances(g.root)
    in_root = cuts.cut_points[cuts.bubble[cuts.cut_points] == 0]
    if in_root.size == 0:
        raise ValueError("root bubble has no cut-point")
    fallback = int(in_root[np.lexsort((in_root, dist[in_root]))[0]])
    proj = _kernels.last_separator(indptr, indices, g.root, cuts.dfs_parent,
                                   cuts.bridge_below, cuts.is_cut_point, fallback)
    return np.where(cuts.is_cut_point, np.arange(g.n_vertices), proj)


def sample_marks(g: RootedGraph, cuts: CutDecomposition | None, count: int,
                 law: str = "uniform_cut_points", rng: np.random.Generator | None = None) -> np.ndarray:
    """I.i.d. marks on cut-points."""
    rng = np.random.default_rng() if rng is None else rng
    cuts = find_cut_decomposition(g) if cuts is None else cuts
    if cuts.cut_points.size == 0:
        raise ValueError("graph has no cut-points")
    if count == 0:
        return np.empty(0, np.int64)
    if law == "uniform_cut_points":
        return rng.choice(cuts.cut_points, size=count).astype(np.int64)
    if law == "uniform_vertices_projected":
        proj = cut_point_projection(g, cuts)
        return proj[rng.integers(0, g.n_vertices, count)]
    raise ValueError(f"unknown mark law {law!r}")


# --------------------------------------------------------------------------
# model specification


@dataclass(frozen=True)
class ModelSpec:
    """Random graph model.

    ``family`` is ``gw_tree`` or ``brw_trace``; ``path`` (deterministic) and
    ``gw_shortcuts`` (a GW tree with ``shortcuts`` random extra edges) serve
    as controls.
    """

    family: str = "gw_tree"
    n: int = 1000
    offspring: str = "geometric"
    d: int = 14
    mark_law: str = "uniform_cut_points"
    shortcuts: int = 0

    def __post_init__(self):
        if self.family not in ("gw_tree", "brw_trace", "path", "gw_shortcuts"):
            raise ValueError(f"unknown model family {self.family!r}")
        if self.n < 1:
            raise ValueError("model size must be positive")
        if self.mark_law not in MARK_LAWS:
            raise ValueError(f"unknown mark law {self.mark_law!r}")
        if self.family in ("gw_tree", "brw_trace", "gw_shortcuts"):
            _resolve_law(self.offspring)
        if self.family == "brw_trace" and self.d < 1:
            raise ValueError("brw_trace needs d >= 1")

    def with_n(self, n: int) -> "ModelSpec":
        return ModelSpec(**{**asdict(self), "n": int(n)})

    def to_dict(self) -> dict:
        return asdict(self)


def sample_graph(model: ModelSpec | Callable, rng: np.random.Generator, n: int | None = None) -> RootedGraph:
    """Draw one graph from a ModelSpec or from a callable ``(n, rng) -> RootedGraph``."""
    if callable(model) and not isinstance(model, ModelSpec):
        return model(n, rng)
    spec = model if n is None else model.with_n(n)
    if spec.family == "path":
        return path_graph(spec.n)
    tree = gen_gw_tree(spec.n, spec.offspring, rng)
    if spec.family == "gw_tree":
        return tree
    if spec.family == "gw_shortcuts":
        return add_shortcuts(tree, spec.shortcuts, rng)
    return gen_brw_trace(tree, spec.d, rng)


# --------------------------------------------------------------------------
# small test corpora


def add_shortcuts(g: RootedGraph, count: int, rng: np.random.Generator) -> RootedGraph:
    """Add up to ``count`` random new edges (no loops, no duplicates)."""
    n = g.n_vertices
    if n < 3 or count <= 0:
        return g
    existing = set(map(tuple, g.edges.tolist()))
    extra = []
    tries = 0
    while len(extra) < count and tries < 50 * count:
        tries += 1
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        if (a, b) not in existing:
            existing.add((a, b))
            extra.append((a, b))
    e = np.vstack([g.edges, np.array(extra, np.int64).reshape(-1, 2)])
    return RootedGraph(n, e, g.root, g.location)


def random_connected_graph(n: int, extra_edges: int, rng: np.random.Generator) -> RootedGraph:
    """Uniform random recursive tree on ``n`` vertices plus random extra edges."""
    if n == 1:
        return RootedGraph(1, np.empty((0, 2)), 0)
    parent = np.array([rng.integers(0, v) for v in range(1, n)])
    tree = RootedGraph(n, np.column_stack([parent, np.arange(1, n)]), 0)
    max_extra = n * (n - 1) // 2 - (n - 1)
    return add_shortcuts(tree, min(extra_edges, max_extra), rng)


def random_bubbly_graph(n_max: int, rng: np.random.Generator, p_bubble: float = 0.35,
                        cycle_range: tuple[int, int] = (3, 7), chord_prob: float = 0.3) -> RootedGraph:
    """Tree of pendant paths and small 2-edge-connected blobs.

    Blobs are cycles (length drawn from ``cycle_range``) with optional chords,
    hung from a random existing vertex either through a bridge or directly.
    """
    edges: list[tuple[int, int]] = []
    n = 1
    while True:
        a = int(rng.integers(0, n))
        if rng.random() < p_bubble:
            k = int(rng.integers(cycle_range[0], cycle_range[1] + 1))
            through_bridge = rng.random() < 0.7
            need = k if through_bridge else k - 1
            if n + need > n_max:
                break
            if through_bridge:
                ring = list(range(n, n + k))
                edges.append((a, n))
            else:
                ring = [a] + list(range(n, n + k - 1))
            n += need
            for i in range(k):
                edges.append((ring[i], ring[(i + 1) % k]))
            for i in range(k):
                for j in range(i + 2, k):
                    if (i, j) != (0, k - 1) and rng.random() < chord_prob / k:
                        edges.append((ring[i], ring[j]))
        else:
            length = int(rng.integers(1, 4))
            if n + length > n_max:
                break
            prev = a
            for _ in range(length):
                edges.append((prev, n))
                prev = n
                n += 1
    e = np.unique(np.sort(np.array(edges, np.int64).reshape(-1, 2), axis=1), axis=0)
    return RootedGraph(n, e, 0)
