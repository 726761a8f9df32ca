"""Shared builders for the test suite."""

import numpy as np

from hmatdag.hmatrix import EXACT, assemble, zeros
from hmatdag.problems import (
    dense_matrix,
    one_d_problem,
    permuted,
    shifted,
    sphere_problem,
)
from hmatdag.trees import build_block_tree, build_cluster_tree, standard_admissible


def one_d_case(n, n_min=16, eta=1.0, shift=0.5):
    """Block tree + tree-ordered kernel for the shifted 1D log problem."""
    geom, kernel = one_d_problem(n)
    if shift:
        kernel = shifted(kernel, shift, n)
    root, perm = build_cluster_tree(geom, n_min=n_min)
    block = build_block_tree(root, root, lambda t, s: standard_admissible(t, s, eta))
    return block, permuted(kernel, perm)


def sphere_case(n, n_min=32, eta=2.0, shift=0.5):
    geom, kernel = sphere_problem(n)
    if shift:
        kernel = shifted(kernel, shift, n)
    root, perm = build_cluster_tree(geom, n_min=n_min)
    block = build_block_tree(root, root, lambda t, s: standard_admissible(t, s, eta))
    return block, permuted(kernel, perm)


def factor_workspace(block, kernel, policy=EXACT):
    """Assembled A plus empty L, U over the same tree."""
    A = assemble(block, kernel, policy)
    return A, zeros(block, policy), zeros(block, policy)
