"""Model problems: geometries, entry kernels, and block structures.

Three structures with qualitatively different block trees:

* ``sphere_problem`` -- quasi-uniform points on the unit sphere with the
  1/r single-layer kernel; the typical dense H-matrix structure.
* ``one_d_problem``  -- midpoints on [0,1] with the log kernel; a very
  coarse block structure with few blocks per level.
* ``nd_problem``     -- nested-dissection cluster tree over the 7-point
  stencil graph of an m x m x m grid.  Structure only, no entries: its
  admissibility is the absence of graph coupling between clusters.

Kernels are callables ``k(i, j) -> float`` over original point indices
and additionally provide a vectorized ``dense(I, J)`` used by assembly.
"""

from __future__ import annotations

import numpy as np

from .trees import Cluster, Geometry, IndexSet


class Kernel:
    """Entry generator with scalar and vectorized evaluation."""

    def __call__(self, i: int, j: int) -> float:
        return float(self.dense(np.asarray([i]), np.asarray([j]))[0, 0])

    def dense(self, I, J) -> np.ndarray:
        raise NotImplementedError


class PointKernel(Kernel):
    """Kernel k(x_i, x_j) evaluated at stored points, with a fixed diagonal."""

    def __init__(self, points, offdiag, diag_value, scale=1.0):
        self.points = points
        self._offdiag = offdiag
        self.diag_value = float(diag_value)
        self.scale = float(scale)

    def dense(self, I, J):
        I = np.asarray(I, dtype=np.intp)
        J = np.asarray(J, dtype=np.intp)
        xi = self.points[I]
        xj = self.points[J]
        d = np.linalg.norm(xi[:, None, :] - xj[None, :, :], axis=-1)
        same = I[:, None] == J[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = self.scale * self._offdiag(d)
        vals = np.where(same, self.diag_value, vals)
        return vals


class ShiftedKernel(Kernel):
    """Wraps a kernel with an added diagonal shift c*n (safe H-LU pivots)."""

    def __init__(self, base: Kernel, c: float, n: int):
        self.base = base
        self.shift = float(c) * n

    def dense(self, I, J):
        I = np.asarray(I, dtype=np.intp)
        J = np.asarray(J, dtype=np.intp)
        vals = self.base.dense(I, J).copy()
        same = I[:, None] == J[None, :]
        return vals + self.shift * same


class PermutedKernel(Kernel):
    """Kernel re-indexed by a cluster-tree permutation (new -> original)."""

    def __init__(self, base: Kernel, perm):
        self.base = base
        self.perm = np.asarray(perm, dtype=np.intp)

    def dense(self, I, J):
        I = np.asarray(I, dtype=np.intp)
        J = np.asarray(J, dtype=np.intp)
        return self.base.dense(self.perm[I], self.perm[J])


def shifted(kernel: Kernel, c: float, n: int) -> Kernel:
    return ShiftedKernel(kernel, c, n)


def permuted(kernel: Kernel, perm) -> Kernel:
    return PermutedKernel(kernel, perm)


def dense_matrix(kernel: Kernel, n: int) -> np.ndarray:
    idx = np.arange(n)
    return kernel.dense(idx, idx)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform points on the unit sphere (Fibonacci spiral)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def sphere_problem(n: int):
    """Unit-sphere 1/r kernel with per-point quadrature weight 4*pi/n.

    The diagonal is the analytic self-term of 1/r over a flat disc whose
    area equals the weight: 2*sqrt(pi*w).
    """
    if n < 4:
        raise ValueError("sphere problem needs n >= 4")
    pts = fibonacci_sphere(n)
    w = 4.0 * np.pi / n
    diag = 2.0 * np.sqrt(np.pi * w)
    kernel = PointKernel(pts, lambda d: 1.0 / d, diag_value=diag, scale=w)
    return Geometry(pts), kernel


def one_d_problem(n: int):
    """Midpoint discretization of the log kernel on [0,1].

    Off-diagonal entries log|x_i - x_j| / n; the diagonal is the analytic
    self-interaction of a piecewise-constant element,
    (log(1/(2n)) - 1) / n.
    """
    if n < 2:
        raise ValueError("1d problem needs n >= 2")
    x = (np.arange(n) + 0.5) / n
    pts = x[:, None]
    diag = (np.log(1.0 / (2.0 * n)) - 1.0) / n
    kernel = PointKernel(pts, np.log, diag_value=diag, scale=1.0 / n)
    return Geometry(pts), kernel


class GridCoupling:
    """Adjacency oracle for the 7-point stencil on an m^3 grid.

    Works on cluster index ranges in tree ordering; ``perm`` maps tree
    positions to original grid indices.  Two clusters couple when they
    share an index or a grid edge connects them.
    """

    def __init__(self, m: int, perm):
        self.m = m
        self.perm = np.asarray(perm, dtype=np.intp)
        self.pos = np.empty(m**3, dtype=np.intp)
        self.pos[self.perm] = np.arange(m**3)

    def couples(self, a: IndexSet, b: IndexSet) -> bool:
        if a.first < b.last and b.first < a.last:
            return True  # shared index
        if a.size > b.size:
            a, b = b, a
        m = self.m
        orig = self.perm[a.first:a.last]
        x, rem = divmod(orig, m * m)
        y, z = divmod(rem, m)
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                           (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            nx, ny, nz = x + dx, y + dy, z + dz
            ok = (nx >= 0) & (nx < m) & (ny >= 0) & (ny < m) & (nz >= 0) & (nz < m)
            if not ok.any():
                continue
            npos = self.pos[(nx[ok] * m + ny[ok]) * m + nz[ok]]
            if np.any((npos >= b.first) & (npos < b.last)):
                return True
        return False


def nd_problem(m: int, n_min: int = 32):
    """Nested-dissection cluster tree over the m x m x m grid graph.

    A subgrid splits into (left, right, separator plane) along its widest
    axis; the three parts are flattened into a binary tree as
    ((left, right), separator).  Degenerate empty parts are dropped.
    Returns ``(root, coupling)`` where the coupling oracle drives
    ``nd_admissible``.
    """
    if m < 2:
        raise ValueError("nd problem needs m >= 2")
    n = m**3
    order = np.arange(n, dtype=np.intp)
    coords = np.empty((n, 3), dtype=np.intp)
    x, rem = divmod(order, m * m)
    coords[:, 0] = x
    coords[:, 1], coords[:, 2] = divmod(rem, m)
    counter = [0]

    def mk(first, last):
        c = Cluster(IndexSet(first, last), uid=counter[0])
        counter[0] += 1
        return c

    def rec(a: int, b: int) -> Cluster:
        node = mk(a, b)
        size = b - a
        if size <= n_min:
            return node
        sub = coords[order[a:b]]
        ext = sub.max(axis=0) - sub.min(axis=0)
        axis = int(np.argmax(ext))
        if ext[axis] == 0:
            return node  # single grid point in every direction
        cut = sub[:, axis].min() + (ext[axis]) // 2
        left_m = sub[:, axis] < cut
        sep_m = sub[:, axis] == cut
        right_m = sub[:, axis] > cut
        parts = [order[a:b][mask] for mask in (left_m, right_m, sep_m)]
        order[a:b] = np.concatenate(parts)
        nl, nr = len(parts[0]), len(parts[1])
        node.children = []
        if nl and nr:
            inner = mk(a, a + nl + nr)
            inner.children = [rec(a, a + nl), rec(a + nl, a + nl + nr)]
            node.children.append(inner)
        elif nl or nr:
            node.children.append(rec(a, a + nl + nr))
        node.children.append(rec(a + nl + nr, b))
        return node

    root = rec(0, n)
    return root, GridCoupling(m, order)
