"""Small rooted trees with edge lengths, optional resistances and an optional
piecewise-linear embedding.

This is the common currency for reduced skeletons and reduced continuum
trees: vertices are the root, marked points and the branch points they
induce.  Vertices are stored in depth-first preorder with index 0 the root,
so ``parent[v] < v``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["ReducedSpatialTree", "reduce_rooted"]


@dataclass(frozen=True, eq=False)
class ReducedSpatialTree:
    """Rooted ordered tree with lengths and an optional embedding.

    Attributes
    ----------
    parent : ndarray of int
        Parent index, -1 for the root (index 0).
    length : ndarray of float
        Length of the edge to the parent (0 for the root).
    resistance : ndarray of float or None
        Resistance of the edge to the parent.
    marks_at : tuple of tuple of int
        Mark indices sitting at every vertex.
    position : ndarray (M, d) or None
        Embedded vertex positions.
    edge_paths : tuple or None
        For each vertex, an array of rows ``(s, x_1..x_d)`` tracing the edge
        from the parent (s = 0) to the vertex (s = length); None at the root.
    sort_key : ndarray or None
        Fallback ordering key (for instance a contour time) used when there is
        no embedding.
    """

    parent: np.ndarray
    length: np.ndarray
    marks_at: tuple
    resistance: np.ndarray | None = None
    position: np.ndarray | None = None
    edge_paths: tuple | None = None
    sort_key: np.ndarray | None = field(default=None, repr=False)

    # basic views ----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return int(self.parent.size)

    @property
    def dim(self) -> int:
        return 0 if self.position is None else int(self.position.shape[1])

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids = [[] for _ in range(self.n_vertices)]
        for v in range(1, self.n_vertices):
            kids[self.parent[v]].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_vertices)
        for v in range(1, self.n_vertices):
            d[v] = d[self.parent[v]] + self.length[v]
        return d

    @property
    def total_length(self) -> float:
        return float(self.length.sum())

    @property
    def total_resistance(self) -> float:
        return float(np.sum(self.resistance)) if self.resistance is not None else float("nan")

    def is_leaf(self, v: int) -> bool:
        return len(self.children[v]) == 0

    def labels(self) -> list[str]:
        out = []
        for v in range(self.n_vertices):
            tags = ["x" + str(i) for i in self.marks_at[v]]
            if v == 0:
                tags.insert(0, "root")
            out.append("+".join(tags) if tags else "b")
        return out

    def shape(self):
        """Nested tuple of ordered child shapes."""
        def rec(v):
            return tuple(rec(c) for c in self.children[v])
        return rec(0)

    def mark_vertex(self, i: int) -> int:
        for v, ms in enumerate(self.marks_at):
            if i in ms:
                return v
        raise KeyError(i)

    def distance(self, a: int, b: int) -> float:
        anc = set()
        v = a
        while v >= 0:
            anc.add(v)
            v = self.parent[v]
        v = b
        while v not in anc:
            v = self.parent[v]
        return float(self.depth[a] + self.depth[b] - 2 * self.depth[v])

    def point_on_edge(self, v: int, alpha: np.ndarray) -> np.ndarray:
        """Embedded position at fraction ``alpha`` along the edge parent(v) -> v."""
        alpha = np.atleast_1d(np.asarray(alpha, float))
        if self.edge_paths is None or self.edge_paths[v] is None:
            p0 = self.position[self.parent[v]]
            p1 = self.position[v]
            return p0 + alpha[:, None] * (p1 - p0)
        path = self.edge_paths[v]
        s = path[:, 0]
        L = s[-1]
        target = alpha * L
        if L == 0:
            return np.repeat(path[:1, 1:], alpha.size, axis=0)
        return np.column_stack([np.interp(target, s, path[:, j]) for j in range(1, path.shape[1])])

    # transformations ------------------------------------------------------
    def _leaf_keys(self):
        n = self.n_vertices
        if self.position is not None:
            own = [tuple(self.position[v]) for v in range(n)]
        elif self.sort_key is not None:
            own = [(float(self.sort_key[v]),) for v in range(n)]
        else:
            own = [(float(v),) for v in range(n)]
        best = [None] * n
        for v in range(n - 1, -1, -1):
            ks = [best[c] for c in self.children[v]]
            best[v] = min(ks) if ks else own[v]
        return best

    def canonical(self) -> "ReducedSpatialTree":
        """Reorder children by their lexicographically smallest leaf key."""
        keys = self._leaf_keys()
        order = []

        def visit(v):
            order.append(v)
            for c in sorted(self.children[v], key=lambda c: (keys[c], c)):
                visit(c)

        visit(0)
        return self.permuted(np.asarray(order))

    def permuted(self, order: np.ndarray) -> "ReducedSpatialTree":
        new = np.empty_like(order)
        new[order] = np.arange(order.size)
        parent = np.where(self.parent[order] >= 0, new[np.maximum(self.parent[order], 0)], -1)
        parent[0] = -1
        return ReducedSpatialTree(
            parent=parent.astype(np.int64),
            length=self.length[order].copy(),
            marks_at=tuple(self.marks_at[v] for v in order),
            resistance=None if self.resistance is None else self.resistance[order].copy(),
            position=None if self.position is None else self.position[order].copy(),
            edge_paths=None if self.edge_paths is None else tuple(self.edge_paths[v] for v in order),
            sort_key=None if self.sort_key is None else self.sort_key[order].copy(),
        )

    def reduce(self, mark_vertices) -> "ReducedSpatialTree":
        """Subtree spanned by the root and the given vertices."""
        marks = [int(v) for v in mark_vertices]
        return reduce_rooted(
            self.parent, self.length, self.resistance, self.position, marks,
            sort_key=self.sort_key, edge_paths=self.edge_paths,
            mark_ids=[self.marks_at[v] for v in marks],
        )

    def scaled(self, length_factor: float, space_factor: float = 1.0,
               resistance_factor: float | None = None) -> "ReducedSpatialTree":
        rf = length_factor if resistance_factor is None else resistance_factor
        paths = None
        if self.edge_paths is not None:
            paths = tuple(None if p is None else np.column_stack([p[:, 0] * length_factor, p[:, 1:] * space_factor])
                          for p in self.edge_paths)
        return ReducedSpatialTree(
            self.parent, self.length * length_factor, self.marks_at,
            None if self.resistance is None else self.resistance * rf,
            None if self.position is None else self.position * space_factor,
            paths, self.sort_key)

    # serialization --------------------------------------------------------
    def to_newick(self) -> str:
        """Newick-like string: ``name:length[&res=r]`` with names ``v<i>``
        optionally followed by ``@x<i>.x<j>`` for marks."""
        def name(v):
            s = f"v{v}"
            if self.marks_at[v]:
                s += "@" + ".".join(f"x{i}" for i in self.marks_at[v])
            return s

        def rec(v):
            kids = self.children[v]
            body = "(" + ",".join(rec(c) for c in kids) + ")" if kids else ""
            s = body + name(v)
            if v > 0:
                s += ":" + repr(float(self.length[v]))
                if self.resistance is not None:
                    s += "[&res=" + repr(float(self.resistance[v])) + "]"
            return s

        return rec(0) + ";"

    def coordinate_table(self) -> str:
        """CSV table ``vertex,label,x1..xd`` of embedded positions."""
        d = self.dim
        head = "vertex,label" + "".join(f",x{j + 1}" for j in range(d))
        rows = [head]
        for v, lab in enumerate(self.labels()):
            coords = "" if d == 0 else "," + ",".join(repr(float(c)) for c in self.position[v])
            rows.append(f"v{v},{lab}{coords}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_newick(cls, text: str, coordinates: str | None = None) -> "ReducedSpatialTree":
        tokens = re.findall(r"\(|\)|,|;|[^(),;]+", text.strip())
        pos = 0
        records = {}

        def parse():
            nonlocal pos
            kids = []
            if tokens[pos] == "(":
                pos += 1
                while True:
                    kids.append(parse())
                    if tokens[pos] == ",":
                        pos += 1
                        continue
                    if tokens[pos] == ")":
                        pos += 1
                        break
                    raise ValueError("malformed newick string")
            label = tokens[pos]
            pos += 1
            m = re.fullmatch(r"v(\d+)(?:@([x\d.]+))?(?::([^\[]+)(?:\[&res=([^\]]+)\])?)?", label)
            if m is None:
                raise ValueError(f"bad node label {label!r}")
            v = int(m.group(1))
            marks = tuple(int(t[1:]) for t in m.group(2).split(".")) if m.group(2) else ()
            length = float(m.group(3)) if m.group(3) else 0.0
            res = float(m.group(4)) if m.group(4) else None
            records[v] = (kids, marks, length, res)
            return v

        root = parse()
        n = len(records)
        parent = np.full(n, -1, np.int64)
        for v, (kids, _, _, _) in records.items():
            for c in kids:
                parent[c] = v
        if root != 0 or sorted(records) != list(range(n)):
            raise ValueError("vertex names must be v0..v{n-1} with v0 the root")
        length = np.array([records[v][2] for v in range(n)])
        has_res = any(records[v][3] is not None for v in range(1, n))
        res = np.array([records[v][3] or 0.0 for v in range(n)]) if has_res else None
        position = None
        if coordinates:
            lines = [ln.split(",") for ln in coordinates.strip().splitlines()[1:]]
            if lines and len(lines[0]) > 2:
                position = np.array([[float(c) for c in ln[2:]] for ln in lines])
        return cls(parent, length, tuple(records[v][1] for v in range(n)), res, position)

    def to_dict(self) -> dict:
        return {
            "parent": self.parent.tolist(),
            "length": self.length.tolist(),
            "resistance": None if self.resistance is None else self.resistance.tolist(),
            "marks_at": [list(m) for m in self.marks_at],
            "position": None if self.position is None else self.position.tolist(),
            "edge_paths": None if self.edge_paths is None else
            [None if p is None else p.tolist() for p in self.edge_paths],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReducedSpatialTree":
        arr = lambda x: None if x is None else np.asarray(x, float)
        return cls(np.asarray(data["parent"], np.int64), np.asarray(data["length"], float),
                   tuple(tuple(m) for m in data["marks_at"]), arr(data.get("resistance")),
                   arr(data.get("position")),
                   None if data.get("edge_paths") is None else
                   tuple(None if p is None else np.asarray(p, float) for p in data["edge_paths"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def reduce_rooted(parent: np.ndarray, length: np.ndarray, resistance: np.ndarray | None,
                  position: np.ndarray | None, marks, sort_key=None, edge_paths=None,
                  mark_ids=None) -> ReducedSpatialTree:
    """Reduce a rooted tree (``parent[v] < v``, root 0) to the root, the marked
    vertices and the branch points they induce.

    Lengths and resistances of the new edges are path sums; when an embedding
    is present each new edge keeps the polyline through the skipped vertices.
    """
    n = parent.size
    marks = [int(m) for m in marks]
    if mark_ids is None:
        mark_ids = [(i,) for i in range(len(marks))]
    is_mark = np.zeros(n, bool)
    ids_at: dict[int, list[int]] = {}
    for m, ids in zip(marks, mark_ids):
        is_mark[m] = True
        ids_at.setdefault(m, []).extend(ids)
    active = is_mark.copy()
    n_active_kids = np.zeros(n, np.int64)
    for v in range(n - 1, 0, -1):
        if active[v]:
            active[parent[v]] = True
            n_active_kids[parent[v]] += 1
    keep = is_mark | (n_active_kids >= 2)
    keep[0] = True
    depth = np.zeros(n)
    rdepth = np.zeros(n)
    for v in range(1, n):
        depth[v] = depth[parent[v]] + length[v]
        if resistance is not None:
            rdepth[v] = rdepth[parent[v]] + resistance[v]
    kept = np.flatnonzero(keep & (active | (np.arange(n) == 0)))
    new_id = np.full(n, -1, np.int64)
    new_id[kept] = np.arange(kept.size)
    # nearest kept ancestor-or-self
    nearest = np.zeros(n, np.int64)
    for v in range(1, n):
        nearest[v] = v if new_id[v] >= 0 else nearest[parent[v]]
    rparent = np.full(kept.size, -1, np.int64)
    rlen = np.zeros(kept.size)
    rres = np.zeros(kept.size) if resistance is not None else None
    paths = [None] * kept.size if position is not None else None
    for i, v in enumerate(kept):
        if v == 0:
            continue
        a = nearest[parent[v]]
        rparent[i] = new_id[a]
        rlen[i] = depth[v] - depth[a]
        if resistance is not None:
            rres[i] = rdepth[v] - rdepth[a]
        if position is not None:
            chain = [v]
            u = v
            while u != a:
                u = parent[u]
                chain.append(u)
            chain = chain[::-1]
            if edge_paths is not None:
                pieces = []
                for c in chain[1:]:
                    seg = edge_paths[c]
                    off = depth[parent[c]] - depth[a]
                    seg = np.column_stack([seg[:, 0] + off, seg[:, 1:]])
                    pieces.append(seg if not pieces else seg[1:])
                paths[i] = np.vstack(pieces)
            else:
                s = depth[chain] - depth[a]
                paths[i] = np.column_stack([s, position[chain]])
    marks_at = tuple(tuple(sorted(ids_at.get(int(v), []))) for v in kept)
    tree = ReducedSpatialTree(
        parent=rparent, length=rlen, marks_at=marks_at, resistance=rres,
        position=None if position is None else np.asarray(position, float)[kept],
        edge_paths=None if paths is None else tuple(paths),
        sort_key=None if sort_key is None else np.asarray(sort_key)[kept],
    )
    # restore preorder numbering before canonical ordering
    return tree.canonical()
