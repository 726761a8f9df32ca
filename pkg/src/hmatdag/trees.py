"""Cluster trees and block trees.

A cluster tree is a recursive disjoint partition of an index set, built
here by cardinality-balanced bisection along the widest bounding-box
axis.  Index sets of clusters are kept contiguous: the builder permutes
the points and returns the permutation alongside the tree, so that all
later block-intersection tests reduce to interval overlap checks.

A block tree partitions the product of two index sets, guided by an
admissibility predicate; its leaves are the storage blocks of an
H-matrix (dense when inadmissible, low-rank when admissible).

Trees are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IndexSet:
    """Half-open contiguous index range [first, last)."""

    first: int
    last: int

    def __post_init__(self):
        if self.first > self.last:
            raise ValueError(f"invalid index set [{self.first}, {self.last})")

    @property
    def size(self) -> int:
        return self.last - self.first

    def overlaps(self, other: "IndexSet") -> bool:
        return self.first < other.last and other.first < self.last

    def contains(self, other: "IndexSet") -> bool:
        return self.first <= other.first and other.last <= self.last


class BBox:
    """Axis-aligned bounding box with Euclidean diameter/distance."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def dist(self, other: "BBox") -> float:
        gap = np.maximum(0.0, np.maximum(other.lo - self.hi, self.lo - other.hi))
        return float(np.linalg.norm(gap))

    def __repr__(self):
        return f"BBox({self.lo.tolist()}, {self.hi.tolist()})"


class Geometry:
    """Point cloud carrier: one coordinate vector per global index."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("empty geometry")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]


class Cluster:
    """Node of a cluster tree over a contiguous index range."""

    __slots__ = ("indices", "children", "bbox", "uid")

    def __init__(self, indices: IndexSet, children=(), bbox=None, uid=-1):
        self.indices = indices
        self.children = list(children)
        self.bbox = bbox
        self.uid = uid

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def size(self) -> int:
        return self.indices.size

    def __repr__(self):
        kind = "leaf" if self.is_leaf else f"{len(self.children)} sons"
        return f"Cluster([{self.indices.first},{self.indices.last}), {kind})"


def build_cluster_tree(geom: Geometry, n_min: int):
    """Build a binary cluster tree over ``geom``.

    Splits are cardinality-balanced along the widest bounding-box axis;
    for odd sizes the left child receives the extra index.  Returns
    ``(root, perm)`` where ``perm[new] = original`` maps tree positions
    back to input point indices.
    """
    if n_min < 1:
        raise ValueError("n_min must be >= 1")
    pts = geom.points
    order = np.arange(len(geom), dtype=np.intp)
    counter = [0]

    def rec(a: int, b: int) -> Cluster:
        uid = counter[0]
        counter[0] += 1
        sub = pts[order[a:b]]
        bbox = BBox(sub.min(axis=0), sub.max(axis=0))
        node = Cluster(IndexSet(a, b), bbox=bbox, uid=uid)
        size = b - a
        if size > n_min:
            axis = int(np.argmax(bbox.hi - bbox.lo))
            key = np.argsort(sub[:, axis], kind="stable")
            order[a:b] = order[a:b][key]
            mid = a + (size + 1) // 2
            node.children = [rec(a, mid), rec(mid, b)]
        return node

    root = rec(0, len(geom))
    return root, order


def standard_admissible(t: Cluster, s: Cluster, eta: float) -> bool:
    """min(diam(t), diam(s)) <= eta * dist(t, s) on bounding boxes."""
    if t.bbox is None or s.bbox is None:
        raise ValueError("standard admissibility requires bounding boxes")
    d = t.bbox.dist(s.bbox)
    return min(t.bbox.diameter(), s.bbox.diameter()) <= eta * d and d > 0.0


def nd_admissible(t: Cluster, s: Cluster, coupling) -> bool:
    """True iff no graph edge (and no shared index) couples t with s."""
    return not coupling.couples(t.indices, s.indices)


class Block:
    """Node of a block tree: a cluster pair with a row-major child grid."""

    __slots__ = ("row", "col", "children", "admissible", "uid", "parent")

    def __init__(self, row: Cluster, col: Cluster, admissible=False, uid=-1):
        self.row = row
        self.col = col
        self.children = []  # row-major: children[i][j]
        self.admissible = admissible
        self.uid = uid
        self.parent = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def nrows(self) -> int:
        return self.row.indices.size

    @property
    def ncols(self) -> int:
        return self.col.indices.size

    def __repr__(self):
        r, c = self.row.indices, self.col.indices
        tag = "adm" if self.admissible else ("leaf" if self.is_leaf else "blocked")
        return f"Block([{r.first},{r.last})x[{c.first},{c.last}), {tag})"


def build_block_tree(row_tree: Cluster, col_tree: Cluster, adm) -> Block:
    """Build the block tree of ``row_tree`` x ``col_tree``.

    ``adm(t, s) -> bool`` marks blocks storable in low-rank form.  A
    block is a leaf iff it is admissible or either cluster is a leaf;
    otherwise its children are the full cross product of the sons.
    """
    counter = [0]

    def rec(t: Cluster, s: Cluster, parent) -> Block:
        a = bool(adm(t, s))
        node = Block(t, s, admissible=a, uid=counter[0])
        counter[0] += 1
        node.parent = parent
        if not (a or t.is_leaf or s.is_leaf):
            node.children = [[rec(ti, sj, node) for sj in s.children] for ti in t.children]
        return node

    return rec(row_tree, col_tree, None)


def iter_clusters(root: Cluster):
    stack = [root]
    while stack:
        c = stack.pop()
        yield c
        stack.extend(reversed(c.children))


def iter_blocks(root: Block):
    stack = [root]
    while stack:
        b = stack.pop()
        yield b
        for row in reversed(b.children):
            stack.extend(reversed(row))


def iter_leaf_blocks(root: Block):
    for b in iter_blocks(root):
        if b.is_leaf:
            yield b


def serialize_cluster_tree(root: Cluster) -> str:
    """One node per line: ``id parent first last leaf adm`` (adm is 0)."""
    lines = []

    def rec(c: Cluster, parent: int):
        lines.append(f"{c.uid} {parent} {c.indices.first} {c.indices.last} "
                     f"{int(c.is_leaf)} 0")
        for ch in c.children:
            rec(ch, c.uid)

    rec(root, -1)
    return "\n".join(lines) + "\n"


def serialize_block_tree(root: Block) -> str:
    """One node per line with both ranges:
    ``id parent rfirst rlast cfirst clast leaf adm``.
    """
    lines = []

    def rec(b: Block, parent: int):
        r, c = b.row.indices, b.col.indices
        lines.append(f"{b.uid} {parent} {r.first} {r.last} {c.first} {c.last} "
                     f"{int(b.is_leaf)} {int(b.admissible)}")
        for row in b.children:
            for ch in row:
                rec(ch, b.uid)

    rec(root, -1)
    return "\n".join(lines) + "\n"
