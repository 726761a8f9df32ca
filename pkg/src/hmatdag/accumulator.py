"""Accumulator-based H-arithmetic.

Updates to a block are not applied eagerly; they are collected in a
per-block accumulator holding a direct update matrix (dense or low-rank)
plus a list of pending structured products.  Shifting moves collected
content one level down the hierarchy, splitting pending products like
the multiplication recursion would; applying folds the accumulated
update into a leaf right before it is factored or solved.

Collecting per level batches many rank adds into single truncations,
which is where the accumulator variant wins over eager updates.

Accumulator mutation takes a per-accumulator lock: in the executed task
graphs a parent shift and a direct update to the same child accumulator
may run concurrently (their modeled writes carry different accumulator
identifiers), so the fold itself must be atomic.
"""

from __future__ import annotations

import threading

import numpy as np

from .arith import dense_lu, hm_solve_lower, hm_solve_upper_t
from .hmatrix import (
    BLOCKED,
    DENSE,
    LOWRANK,
    HMatrix,
    TruncationPolicy,
    counters,
    fold_payload_into_leaf,
    payload_dense,
    payload_restrict,
    product_payload,
    truncate,
)


class Accumulator:
    """Per-block update store: direct matrix U_mat plus pending products."""

    __slots__ = ("owner", "U_mat", "pending", "_lock")

    def __init__(self, owner):
        self.owner = owner
        self.U_mat = None  # None (rank 0) | ("dense", D) | ("lowrank", U, V)
        self.pending = []  # (alpha, A: HMatrix, B: HMatrix), all blocked
        self._lock = threading.Lock()

    @property
    def is_empty(self) -> bool:
        return self.U_mat is None and not self.pending

    def clear(self):
        self.U_mat = None
        self.pending = []

    def fold(self, payload, policy: TruncationPolicy):
        """U_mat += payload; promotes to dense permanently on dense input."""
        with self._lock:
            counters.count_update()
            if self.U_mat is None:
                if payload[0] == DENSE:
                    self.U_mat = (DENSE, payload[1].copy())
                else:
                    self.U_mat = (LOWRANK, payload[1], payload[2])
                return
            if self.U_mat[0] == DENSE or payload[0] == DENSE:
                D = payload_dense(self.U_mat) + payload_dense(payload)
                self.U_mat = (DENSE, D)
                return
            U = np.hstack([self.U_mat[1], payload[1]])
            V = np.hstack([self.U_mat[2], payload[2]])
            self.U_mat = (LOWRANK, *truncate(U, V, policy))

    def take(self):
        """Atomically remove and return (U_mat, pending)."""
        with self._lock:
            content = self.U_mat, self.pending
            self.U_mat = None
            self.pending = []
            return content


class AccumulatorMap:
    """Block -> accumulator association for one destination matrix."""

    def __init__(self):
        self._by_uid = {}
        self._lock = threading.Lock()

    def get(self, block):
        return self._by_uid.get(block.uid)

    def get_or_create(self, block) -> Accumulator:
        acc = self._by_uid.get(block.uid)
        if acc is None:
            with self._lock:
                acc = self._by_uid.setdefault(block.uid, Accumulator(block))
        return acc

    def __len__(self):
        return len(self._by_uid)


def add_upd(alpha: float, A: HMatrix, B: HMatrix, C: HMatrix,
            accs: AccumulatorMap, policy: TruncationPolicy):
    """Collect the update alpha * A @ B for destination C.

    A fully structured triple is stored as a pending product; any leaf in
    the triple makes the product evaluable, and it is folded into the
    accumulator directly.
    """
    if alpha == 0.0:
        return
    if A.nrows != C.nrows or B.ncols != C.ncols or A.ncols != B.nrows:
        raise ValueError("non-conformal update")
    acc = accs.get_or_create(C.block)
    if A.kind == BLOCKED and B.kind == BLOCKED and C.kind == BLOCKED:
        with acc._lock:
            acc.pending.append((alpha, A, B))
        return
    acc.fold(product_payload(alpha, A, B, policy), policy)


def shift_upd(C: HMatrix, accs: AccumulatorMap, policy: TruncationPolicy):
    """Move C's accumulated updates down to its children's accumulators."""
    if C.kind != BLOCKED:
        raise ValueError("shift target must be a structured block")
    acc = accs.get(C.block)
    if acc is None:
        return
    u_mat, pending = acc.take()
    for i, row in enumerate(C.children):
        for j, ch in enumerate(row):
            if u_mat is not None:
                r0, c0 = C.child_offsets(ch)
                accs.get_or_create(ch.block).fold(
                    payload_restrict(u_mat, r0, ch.nrows, c0, ch.ncols), policy)
            for alpha, A, B in pending:
                for l in range(2):
                    add_upd(alpha, A.children[i][l], B.children[l][j], ch,
                            accs, policy)


def apply_upd(C: HMatrix, accs: AccumulatorMap, policy: TruncationPolicy):
    """Apply every collected update inside C's subtree to the matrix."""
    if C.kind == BLOCKED:
        shift_upd(C, accs, policy)
        for row in C.children:
            for ch in row:
                apply_upd(ch, accs, policy)
        return
    acc = accs.get(C.block)
    if acc is None:
        return
    u_mat, _ = acc.take()
    if u_mat is not None:
        fold_payload_into_leaf(C, u_mat, policy)


def hlu_accu(A: HMatrix, L: HMatrix, U: HMatrix, accs: AccumulatorMap,
             policy: TruncationPolicy):
    """LU factorization collecting Schur updates in accumulators."""
    if A.kind == BLOCKED:
        shift_upd(A, accs, policy)
        (a00, a01), (a10, a11) = A.children
        (l00, _), (l10, l11) = L.children
        (u00, u01), (_, u11) = U.children
        hlu_accu(a00, l00, u00, accs, policy)
        htrsu_accu(u00, a10, l10, accs, policy)
        htrsl_accu(l00, a01, u01, accs, policy)
        # Schur update reads the off-diagonal factors L10, U01; the
        # diagonal factors of the trailing block do not exist yet here.
        add_upd(-1.0, l10, u01, a11, accs, policy)
        hlu_accu(a11, l11, u11, accs, policy)
        return
    apply_upd(A, accs, policy)
    if A.kind != DENSE:
        raise ValueError("diagonal leaf must be dense for factorization")
    Ld, Ud = dense_lu(A.D)
    L.kind = DENSE
    L.D = Ld
    U.kind = DENSE
    U.D = Ud


def htrsl_accu(L: HMatrix, M: HMatrix, X: HMatrix, accs: AccumulatorMap,
               policy: TruncationPolicy):
    """Lower solve collecting updates in accumulators."""
    if M.kind == BLOCKED:
        shift_upd(M, accs, policy)
        (l00, _), (l10, l11) = L.children
        (m00, m01), (m10, m11) = M.children
        (x00, x01), (x10, x11) = X.children
        htrsl_accu(l00, m00, x00, accs, policy)
        htrsl_accu(l00, m01, x01, accs, policy)
        add_upd(-1.0, l10, x00, m10, accs, policy)
        add_upd(-1.0, l10, x01, m11, accs, policy)
        htrsl_accu(l11, m10, x10, accs, policy)
        htrsl_accu(l11, m11, x11, accs, policy)
        return
    apply_upd(M, accs, policy)
    if M.kind == DENSE:
        X.kind = DENSE
        X.D = hm_solve_lower(L, M.D)
    else:
        X.kind = LOWRANK
        X.set_lowrank(hm_solve_lower(L, M.U), M.V.copy())


def htrsu_accu(U: HMatrix, M: HMatrix, X: HMatrix, accs: AccumulatorMap,
               policy: TruncationPolicy):
    """Right upper solve collecting updates in accumulators."""
    if M.kind == BLOCKED:
        shift_upd(M, accs, policy)
        (u00, u01), (_, u11) = U.children
        (m00, m01), (m10, m11) = M.children
        (x00, x01), (x10, x11) = X.children
        htrsu_accu(u00, m00, x00, accs, policy)
        htrsu_accu(u00, m10, x10, accs, policy)
        add_upd(-1.0, x00, u01, m01, accs, policy)
        add_upd(-1.0, x10, u01, m11, accs, policy)
        htrsu_accu(u11, m01, x01, accs, policy)
        htrsu_accu(u11, m11, x11, accs, policy)
        return
    apply_upd(M, accs, policy)
    if M.kind == DENSE:
        X.kind = DENSE
        X.D = hm_solve_upper_t(U, M.D.T).T
    else:
        X.kind = LOWRANK
        X.set_lowrank(M.U.copy(), hm_solve_upper_t(U, M.V))
