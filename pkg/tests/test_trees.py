"""Cluster/block tree construction, admissibility, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmatdag.trees import (
    BBox,
    Cluster,
    Geometry,
    IndexSet,
    build_block_tree,
    build_cluster_tree,
    iter_blocks,
    iter_clusters,
    iter_leaf_blocks,
    nd_admissible,
    serialize_block_tree,
    serialize_cluster_tree,
    standard_admissible,
)


def depth(c):
    return 1 if c.is_leaf else 1 + max(depth(ch) for ch in c.children)


def leaves(c):
    if c.is_leaf:
        return [c]
    return [l for ch in c.children for l in leaves(ch)]


class TestClusterTree:
    def test_collinear_forced_bisection(self):
        # 8 equispaced points on a line, n_min=2: complete binary tree
        # with three node levels (8 -> 4 -> 2) and 4 leaves of size 2.
        geom = Geometry(np.linspace(0.0, 1.0, 8)[:, None])
        root, perm = build_cluster_tree(geom, n_min=2)
        assert depth(root) == 3
        ls = leaves(root)
        assert len(ls) == 4
        assert all(l.size == 2 for l in ls)
        assert sorted(perm.tolist()) == list(range(8))

    def test_single_point(self):
        root, perm = build_cluster_tree(Geometry([[0.5]]), n_min=1)
        assert root.is_leaf and root.size == 1
        assert perm.tolist() == [0]

    def test_empty_geometry_error(self):
        with pytest.raises(ValueError):
            Geometry(np.zeros((0, 3)))

    def test_bad_n_min(self):
        with pytest.raises(ValueError):
            build_cluster_tree(Geometry([[0.0], [1.0]]), n_min=0)

    def test_sphere_leaf_sizes_balanced(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(1000, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        root, _ = build_cluster_tree(Geometry(pts), n_min=32)
        for c in iter_clusters(root):
            if c.is_leaf:
                assert c.size <= 32
            else:
                sizes = [ch.size for ch in c.children]
                assert abs(sizes[0] - sizes[1]) <= 1
                # partition property: sons tile the parent exactly
                assert c.children[0].indices.first == c.indices.first
                assert c.children[0].indices.last == c.children[1].indices.first
                assert c.children[1].indices.last == c.indices.last

    @given(st.integers(2, 200), st.integers(1, 16), st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_partition_property_random(self, n, n_min, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(size=(n, 2))
        root, perm = build_cluster_tree(Geometry(pts), n_min=n_min)
        ranges = sorted((l.indices.first, l.indices.last) for l in leaves(root))
        cursor = 0
        for a, b in ranges:
            assert a == cursor
            cursor = b
        assert cursor == n
        assert sorted(perm.tolist()) == list(range(n))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(size=(257, 3))
        r1, p1 = build_cluster_tree(Geometry(pts), n_min=8)
        r2, p2 = build_cluster_tree(Geometry(pts), n_min=8)
        assert serialize_cluster_tree(r1) == serialize_cluster_tree(r2)
        assert np.array_equal(p1, p2)


class TestAdmissibility:
    def mk(self, lo, hi):
        c = Cluster(IndexSet(0, 1), bbox=BBox(np.atleast_1d(lo), np.atleast_1d(hi)))
        return c

    def test_self_not_admissible(self):
        t = self.mk(0.0, 1.0)
        assert not standard_admissible(t, t, eta=2.0)

    def test_separated_boxes(self):
        t, s = self.mk(0.0, 1.0), self.mk(3.0, 4.0)
        assert standard_admissible(t, s, eta=1.0)

    def test_close_boxes(self):
        t, s = self.mk(0.0, 1.0), self.mk(1.5, 2.5)
        assert not standard_admissible(t, s, eta=0.4)

    def test_missing_bbox_error(self):
        t = Cluster(IndexSet(0, 1), bbox=None)
        with pytest.raises(ValueError):
            standard_admissible(t, t, eta=1.0)


class TestBlockTree:
    def one_d(self, n, n_min):
        pts = (np.arange(n) + 0.5)[:, None] / n
        return build_cluster_tree(Geometry(pts), n_min=n_min)

    def test_leaf_by_leaf(self):
        root, _ = self.one_d(2, 2)
        bt = build_block_tree(root, root, lambda t, s: standard_admissible(t, s, 1.0))
        assert bt.is_leaf and not bt.admissible

    def test_adm_false_full_tensor(self):
        root, _ = self.one_d(8, 2)
        bt = build_block_tree(root, root, lambda t, s: False)
        for b in iter_blocks(bt):
            if b.is_leaf:
                assert b.row.is_leaf or b.col.is_leaf
            else:
                assert len(b.children) == 2 and len(b.children[0]) == 2

    def brute_force_leaves(self, t, s, adm):
        # independent recursion straight from the block-tree definition
        if adm(t, s) or t.is_leaf or s.is_leaf:
            return [(t.indices.first, t.indices.last, s.indices.first, s.indices.last)]
        out = []
        for ti in t.children:
            for sj in s.children:
                out.extend(self.brute_force_leaves(ti, sj, adm))
        return out

    def test_1d_structure_vs_oracle(self):
        root, _ = self.one_d(8, 2)
        adm = lambda t, s: standard_admissible(t, s, 1.0)
        bt = build_block_tree(root, root, adm)
        got = sorted(
            (b.row.indices.first, b.row.indices.last, b.col.indices.first, b.col.indices.last)
            for b in iter_leaf_blocks(bt)
        )
        want = sorted(self.brute_force_leaves(root, root, adm))
        assert got == want
        # diagonal blocks stay inadmissible down to cluster leaves
        for b in iter_leaf_blocks(bt):
            if b.row is b.col:
                assert not b.admissible

    def test_leaf_cover(self):
        root, _ = self.one_d(64, 4)
        bt = build_block_tree(root, root, lambda t, s: standard_admissible(t, s, 1.0))
        area = sum(b.nrows * b.ncols for b in iter_leaf_blocks(bt))
        assert area == 64 * 64
        cover = np.zeros((64, 64), dtype=int)
        for b in iter_leaf_blocks(bt):
            r, c = b.row.indices, b.col.indices
            cover[r.first:r.last, c.first:c.last] += 1
        assert np.all(cover == 1)

    def test_parents_and_uids(self):
        root, _ = self.one_d(32, 4)
        bt = build_block_tree(root, root, lambda t, s: standard_admissible(t, s, 1.0))
        uids = [b.uid for b in iter_blocks(bt)]
        assert len(set(uids)) == len(uids)
        assert bt.parent is None
        for b in iter_blocks(bt):
            for row in b.children:
                for ch in row:
                    assert ch.parent is b

    def test_serialization_deterministic(self):
        root, _ = self.one_d(32, 4)
        adm = lambda t, s: standard_admissible(t, s, 1.0)
        s1 = serialize_block_tree(build_block_tree(root, root, adm))
        s2 = serialize_block_tree(build_block_tree(root, root, adm))
        assert s1 == s2


class TestNdAdmissible:
    def test_basic(self):
        from hmatdag.problems import nd_problem

        root, coupling = nd_problem(2, n_min=4)
        assert root.indices.size == 8
        # one separator split: inner part (one grid plane) + separator plane
        assert len(root.children) == 2
        sizes = sorted(ch.indices.size for ch in root.children)
        assert sizes == [4, 4]
        assert not nd_admissible(root, root, coupling)

    def test_separated_subdomains(self):
        from hmatdag.problems import nd_problem

        root, coupling = nd_problem(4, n_min=8)
        inner = root.children[0]
        assert len(inner.children) == 2
        left, right = inner.children
        # separated by the root separator: admissible
        assert nd_admissible(left, right, coupling)
        assert nd_admissible(right, left, coupling)

    def test_adjacent_blocks_coupled_brute_force(self):
        from hmatdag.problems import nd_problem

        m = 4
        root, coupling = nd_problem(m, n_min=8)
        inner = root.children[0]
        left, sep = inner.children[0], root.children[1]
        # oracle: brute-force scan of all 7-point-stencil edges
        def grid_edges():
            for x in range(m):
                for y in range(m):
                    for z in range(m):
                        i = (x * m + y) * m + z
                        if x + 1 < m:
                            yield i, ((x + 1) * m + y) * m + z
                        if y + 1 < m:
                            yield i, (x * m + y + 1) * m + z
                        if z + 1 < m:
                            yield i, (x * m + y) * m + z + 1

        perm = coupling.perm
        pos = np.empty(m**3, dtype=np.intp)
        pos[perm] = np.arange(m**3)

        def in_cluster(c, orig):
            return c.indices.first <= pos[orig] < c.indices.last

        coupled = any(
            (in_cluster(left, a) and in_cluster(sep, b))
            or (in_cluster(sep, a) and in_cluster(left, b))
            for a, b in grid_edges()
        )
        assert coupled
        assert nd_admissible(left, sep, coupling) == (not coupled)
        assert not nd_admissible(left, sep, coupling)
