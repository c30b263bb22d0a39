"""Continuum side: excursions, the trees they code, and Gaussian embeddings.

A nonnegative path ``g`` on [0, 1] codes a real tree through
``d_g(s, t) = g(s) + g(t) - 2 min_{[s, t]} g``.  Reduced trees spanned by a
few marked times are assembled from that metric, and a Brownian embedding
along the edges turns them into samples of the K-point reduced ISE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trees import ReducedSpatialTree

__all__ = [
    "Excursion",
    "KISESample",
    "sample_normalized_excursion",
    "sample_dyck_rejection",
    "tree_distance",
    "reduce_crt",
    "embed_gaussian",
    "sample_kise",
    "excursion_max_cdf",
    "MERGE_TOL",
]

MERGE_TOL = 1e-12
DEFAULT_GRID = 64


@dataclass(frozen=True, eq=False)
class Excursion:
    """Heights on the uniform grid ``k / n`` of [0, 1], linear in between."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("an excursion needs at least two grid values")
        if s[0] != 0 or s[-1] != 0 or np.any(s < 0):
            raise ValueError("excursion must start and end at 0 and stay nonnegative")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.size - 1

    def __call__(self, t):
        t = np.asarray(t, float)
        return np.interp(t, np.linspace(0.0, 1.0, self.n + 1), self.samples)

    def min_between(self, s: float, t: float) -> float:
        if s > t:
            s, t = t, s
        _check_time(s)
        _check_time(t)
        n = self.n
        lo, hi = int(math.floor(s * n)) + 1, int(math.ceil(t * n)) - 1
        inner = self.samples[lo:hi + 1].min() if hi >= lo else np.inf
        return float(min(self(s), self(t), inner))

    def argmin_between(self, s: float, t: float) -> float:
        """A time in [s, t] where the minimum over [s, t] is attained."""
        if s > t:
            s, t = t, s
        n = self.n
        lo, hi = int(math.floor(s * n)) + 1, int(math.ceil(t * n)) - 1
        cands = [(float(self(s)), s), (float(self(t)), t)]
        if hi >= lo:
            k = lo + int(np.argmin(self.samples[lo:hi + 1]))
            cands.append((float(self.samples[k]), k / n))
        return min(cands)[1]

    @property
    def height(self) -> float:
        return float(self.samples.max())

    def to_dict(self) -> dict:
        return {"samples": self.samples.tolist()}


def _check_time(t):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time {t} outside [0, 1]")


def sample_normalized_excursion(n_steps: int, rng: np.random.Generator) -> Excursion:
    """Uniform Dyck path of ``n_steps`` steps scaled by ``1/sqrt(n_steps)``.

    A uniform arrangement of ``n/2`` up-steps and ``n/2 + 1`` down-steps is
    rotated to start right after the first time its partial sums reach their
    minimum (cycle lemma); dropping the final down-step leaves a uniformly
    distributed nonnegative bridge.
    """
    if n_steps < 2 or n_steps % 2:
        raise ValueError("n_steps must be even and at least 2")
    half = n_steps // 2
    steps = -np.ones(n_steps + 1, np.int64)
    steps[rng.choice(n_steps + 1, half, replace=False)] = 1
    k = int(np.argmin(np.cumsum(steps))) + 1
    steps = np.roll(steps, -k)[:-1]
    path = np.concatenate([[0], np.cumsum(steps)])
    return Excursion(path / math.sqrt(n_steps))


def sample_dyck_rejection(n_steps: int, size: int, rng: np.random.Generator,
                          batch: int = 20_000) -> np.ndarray:
    """Maxima of uniform Dyck paths obtained by rejecting bridges that go
    negative; an independent route to the same law, used for validation."""
    half = n_steps // 2
    out = []
    while len(out) < size:
        keys = rng.random((batch, n_steps))
        ups = np.argsort(keys, axis=1) < half
        walk = np.cumsum(np.where(ups, 1, -1), axis=1)
        ok = walk.min(axis=1) >= 0
        out.extend(walk[ok].max(axis=1).tolist())
    return np.asarray(out[:size]) / math.sqrt(n_steps)


def excursion_max_cdf(x, terms: int = 60) -> np.ndarray:
    """Distribution function of the maximum of the normalized Brownian excursion."""
    x = np.atleast_1d(np.asarray(x, float))
    k = np.arange(1, terms + 1)[:, None]
    val = 1.0 + 2.0 * np.sum((1.0 - 4.0 * k ** 2 * x ** 2) * np.exp(-2.0 * k ** 2 * x ** 2), axis=0)
    return np.where(x > 0, np.clip(val, 0.0, 1.0), 0.0)


def tree_distance(exc: Excursion, s: float, t: float) -> float:
    """``g(s) + g(t) - 2 min over [s, t] of g``."""
    _check_time(s)
    _check_time(t)
    return float(exc(s) + exc(t) - 2.0 * exc.min_between(s, t))


def reduce_crt(exc: Excursion, marks, tol: float = MERGE_TOL) -> ReducedSpatialTree:
    """Reduced tree spanned by the root and the points coded by ``marks``.

    Branch points between contour-consecutive marks sit at the minimum of the
    excursion between them; every other branch point of the spanned subtree
    is one of these.  Points closer than ``tol`` are merged.  The parent of a
    vertex is its deepest ancestor, where ``u`` is an ancestor of ``v`` when
    ``depth(u) + d(u, v) = depth(v)``.
    """
    marks = np.asarray(marks, float).ravel()
    if marks.size < 1:
        raise ValueError("at least one mark is required")
    for t in marks:
        _check_time(t)
    order = np.argsort(marks, kind="stable")
    times = [0.0]
    ids: list[tuple] = [()]
    for i in order:
        times.append(float(marks[i]))
        ids.append((int(i),))
    for a, b in zip(order[:-1], order[1:]):
        times.append(exc.argmin_between(marks[a], marks[b]))
        ids.append(())
    # merge coincident tree points
    reps: list[int] = []
    owner = []
    for j, t in enumerate(times):
        hit = None
        for r in reps:
            if tree_distance(exc, times[r], t) <= tol:
                hit = r
                break
        if hit is None:
            reps.append(j)
            owner.append(len(reps) - 1)
        else:
            owner.append(reps.index(hit))
    m = len(reps)
    node_time = np.array([times[r] for r in reps])
    node_marks = [[] for _ in range(m)]
    for j, o in enumerate(owner):
        node_marks[o].extend(ids[j])
    depth = np.array([float(exc(t)) for t in node_time])
    depth[0] = 0.0
    D = np.array([[tree_distance(exc, a, b) for b in node_time] for a in node_time])
    # ancestors sorted by depth
    by_depth = np.argsort(depth, kind="stable")
    if by_depth[0] != 0:
        by_depth = np.concatenate([[0], by_depth[by_depth != 0]])
    pos = np.empty(m, np.int64)
    pos[by_depth] = np.arange(m)
    parent = np.full(m, -1, np.int64)
    length = np.zeros(m)
    scale = max(1.0, float(depth.max()))
    for v in by_depth[1:]:
        best = 0
        for u in by_depth:
            if u == v or pos[u] >= pos[v]:
                continue
            if abs(depth[u] + D[u, v] - depth[v]) <= 1e-9 * scale and depth[u] >= depth[best]:
                best = u
        parent[v] = best
        length[v] = depth[v] - depth[best]
    new_parent = np.where(parent[by_depth] >= 0, pos[np.maximum(parent[by_depth], 0)], -1)
    new_parent[0] = -1
    tree = ReducedSpatialTree(
        parent=new_parent.astype(np.int64),
        length=length[by_depth],
        marks_at=tuple(tuple(sorted(node_marks[v])) for v in by_depth),
        resistance=length[by_depth].copy(),
        sort_key=node_time[by_depth],
    )
    return tree.canonical()


@dataclass(frozen=True, eq=False)
class KISESample:
    """Reduced tree with a Brownian embedding in R^d."""

    tree: ReducedSpatialTree
    d: int

    @property
    def in_regime(self) -> bool:
        """Dimensions below 8 are allowed but outside the regime where the
        embedding of the continuum tree is known to be injective."""
        return self.d >= 8


def embed_gaussian(tree: ReducedSpatialTree, d: int, rng: np.random.Generator,
                   grid: int = DEFAULT_GRID) -> KISESample:
    """Independent standard Brownian coordinates along every edge, root at 0.

    Each edge of length ``L`` is sampled at ``max(1, ceil(L * grid))`` equal
    steps; children start from the parent's endpoint value.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    n = tree.n_vertices
    pos = np.zeros((n, d))
    paths = [None] * n
    for v in range(1, n):
        L = float(tree.length[v])
        k = max(1, int(math.ceil(L * grid)))
        s = np.linspace(0.0, L, k + 1)
        inc = rng.standard_normal((k, d)) * math.sqrt(L / k) if L > 0 else np.zeros((k, d))
        pts = pos[tree.parent[v]] + np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
        pos[v] = pts[-1]
        paths[v] = np.column_stack([s, pts])
    emb = ReducedSpatialTree(tree.parent, tree.length, tree.marks_at, tree.resistance,
                             pos, tuple(paths), tree.sort_key)
    return KISESample(emb.canonical(), d)


def sample_kise(K: int, n_steps: int, d: int, rng: np.random.Generator,
                grid: int = DEFAULT_GRID) -> KISESample:
    """Excursion, K uniform marks, reduced tree, Gaussian embedding."""
    if K < 1:
        raise ValueError("K must be at least 1")
    exc = sample_normalized_excursion(n_steps, rng)
    marks = rng.random(K)
    return embed_gaussian(reduce_crt(exc, marks), d, rng, grid)
